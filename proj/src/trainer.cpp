#include "epcgaze/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "epcgaze/errors.hpp"
#include "epcgaze/text.hpp"

namespace epcgaze {

namespace {

double batch_mae_deg(const std::vector<GazeAngles>& pred, const std::vector<GazeAngles>& gt) {
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) total += angular_error(pred[i], gt[i]);
    return pred.empty() ? 0.0 : rad_to_deg(total / static_cast<double>(pred.size()));
}

Eigen::MatrixXd to_matrix(const std::vector<GazeAngles>& g) {
    Eigen::MatrixXd m(2, static_cast<Eigen::Index>(g.size()));
    for (std::size_t j = 0; j < g.size(); ++j) {
        m(0, static_cast<Eigen::Index>(j)) = g[j].yaw;
        m(1, static_cast<Eigen::Index>(j)) = g[j].pitch;
    }
    return m;
}

void apply_update(GazeNet& net, const ModelParams& grads, OptimizerState& opt, const char* where,
                  std::size_t step) {
    try {
        sgd_step(net.params(), grads, opt);
    } catch (const NonFiniteUpdate& e) {
        throw NonFiniteUpdate(std::string(where) + " step " + std::to_string(step) + ": " + e.what());
    }
}

}  // namespace

std::string to_string(DaTarget t) { return t == DaTarget::GroundTruth ? "groundtruth" : "prediction"; }

DaTarget da_target_from_string(const std::string& s) {
    if (s == "groundtruth" || s == "gt" || s == "eval") return DaTarget::GroundTruth;
    if (s == "prediction" || s == "pred") return DaTarget::Prediction;
    throw ConfigError("unknown da_target '" + s + "' (expected groundtruth or prediction)");
}

std::string to_string(EpcNormalization n) {
    return n == EpcNormalization::BatchSize ? "batch" : "participating";
}

EpcNormalization epc_normalization_from_string(const std::string& s) {
    if (s == "batch") return EpcNormalization::BatchSize;
    if (s == "participating") return EpcNormalization::Participating;
    throw ConfigError("unknown epc_normalization '" + s + "' (expected batch or participating)");
}

std::string to_string(Stage s) {
    switch (s) {
        case Stage::Initialized: return "initialized";
        case Stage::Pretrained: return "pretrained";
        case Stage::Adapted: return "adapted";
    }
    return "initialized";
}

Stage stage_from_string(const std::string& s) {
    if (s == "initialized") return Stage::Initialized;
    if (s == "pretrained") return Stage::Pretrained;
    if (s == "adapted") return Stage::Adapted;
    throw FormatError("unknown stage marker '" + s + "'");
}

void TrainConfig::validate() const {
    if (joint_iterations < 1) throw ConfigError("joint_iterations must be >= 1");
    if (pretrain_batch < 1 || source_batch < 1 || target_batch < 1) {
        throw ConfigError("batch sizes must be >= 1");
    }
    neighbor.validate();
    loss.validate();
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
    if (early_stop_window < 1) throw ConfigError("early_stop_window must be >= 1");
}

OptimizerState TrainConfig::make_optimizer() const {
    OptimizerState s;
    s.learning_rate = learning_rate;
    s.momentum = momentum;
    s.weight_decay = weight_decay;
    return s;
}

void TrainLog::append(const TrainLog& other) {
    steps.insert(steps.end(), other.steps.begin(), other.steps.end());
    epochs.insert(epochs.end(), other.epochs.begin(), other.epochs.end());
    warnings.insert(warnings.end(), other.warnings.begin(), other.warnings.end());
    if (other.early_stopped_at) early_stopped_at = other.early_stopped_at;
}

std::string TrainLog::to_csv() const {
    std::ostringstream os;
    os << "stage,step,epoch,loss_gaze,loss_epc,loss_da,participating,skipped,source_mae_deg\n";
    for (const StepRecord& r : steps) {
        os << to_string(r.stage) << ',' << r.step << ',' << r.epoch << ','
           << text::format_double(r.loss_gaze) << ',' << text::format_double(r.loss_epc) << ','
           << text::format_double(r.loss_da) << ',' << r.participating << ',' << r.skipped << ','
           << text::format_double(r.source_mae_deg) << '\n';
    }
    return os.str();
}

void TrainLog::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << to_csv();
}

bool operator==(const TrainLog& a, const TrainLog& b) {
    auto same_step = [](const StepRecord& x, const StepRecord& y) {
        return x.stage == y.stage && x.step == y.step && x.epoch == y.epoch &&
               x.loss_gaze == y.loss_gaze && x.loss_epc == y.loss_epc && x.loss_da == y.loss_da &&
               x.participating == y.participating && x.skipped == y.skipped &&
               x.source_mae_deg == y.source_mae_deg;
    };
    auto same_epoch = [](const EpochRecord& x, const EpochRecord& y) {
        return x.epoch == y.epoch && x.mean_loss_gaze == y.mean_loss_gaze &&
               x.mean_source_mae_deg == y.mean_source_mae_deg;
    };
    return std::equal(a.steps.begin(), a.steps.end(), b.steps.begin(), b.steps.end(), same_step) &&
           std::equal(a.epochs.begin(), a.epochs.end(), b.epochs.begin(), b.epochs.end(), same_epoch) &&
           a.warnings == b.warnings && a.early_stopped_at == b.early_stopped_at;
}

TrainLog pretrain(GazeNet& net, OptimizerState& opt, const SourceDomain& source,
                  const TrainConfig& cfg) {
    cfg.validate();
    if (source.size() == 0) throw InvalidInput("pretrain: empty source domain");
    const Rng root = Rng(cfg.seed).derive("pretrain");

    TrainLog log;
    std::size_t step = 0;
    for (std::size_t epoch = 1; epoch <= cfg.pretrain_epochs; ++epoch) {
        Rng shuffle = root.derive(static_cast<std::uint64_t>(epoch));
        const std::vector<std::size_t> order =
            shuffle.sample_without_replacement(source.size(), source.size());
        double epoch_loss = 0.0, epoch_mae = 0.0;
        std::size_t epoch_steps = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.pretrain_batch) {
            const std::size_t end = std::min(order.size(), start + cfg.pretrain_batch);
            const SourceBatch batch = gather_source(
                source, std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                 order.begin() + static_cast<std::ptrdiff_t>(end)));
            const ForwardCache cache = net.forward_batch(batch.features);
            const std::vector<GazeAngles> pred = cache.gaze();
            std::vector<GazeAngles> d_pred(pred.size());
            const double loss = mean_gaze_loss(pred, batch.gaze, d_pred);
            const ModelParams grads =
                net.backward(cache, Eigen::MatrixXd(), to_matrix(d_pred));
            ++step;
            apply_update(net, grads, opt, "pretrain", step);

            StepRecord r;
            r.stage = Stage::Pretrained;
            r.step = step;
            r.epoch = epoch;
            r.loss_gaze = loss;
            r.loss_da = loss;
            r.source_mae_deg = batch_mae_deg(pred, batch.gaze);
            log.steps.push_back(r);
            epoch_loss += loss;
            epoch_mae += r.source_mae_deg;
            ++epoch_steps;
        }
        log.epochs.push_back({epoch, epoch_loss / static_cast<double>(epoch_steps),
                              epoch_mae / static_cast<double>(epoch_steps)});
    }
    return log;
}

JointStep compute_joint_step(const GazeNet& net, const SourceBatch& source,
                             const TargetBatch& target, const TrainConfig& cfg,
                             const Rng& neighbor_rng) {
    // Frozen forward: hypothesis labels, source predictions and all embeddings
    // come from the parameters as they stand at the start of the iteration.
    const ForwardCache src = net.forward_batch(source.features);
    const ForwardCache tgt = net.forward_batch(target.features);

    JointStep js;
    js.target_hypotheses = tgt.gaze();
    const std::vector<GazeAngles> src_pred = src.gaze();
    const std::vector<GazeAngles>& anchors =
        cfg.da_target == DaTarget::GroundTruth ? source.gaze : src_pred;

    std::vector<GazeAngles> picked;
    for (std::size_t j = 0; j < js.target_hypotheses.size(); ++j) {
        Rng lane = neighbor_rng.derive(static_cast<std::uint64_t>(j));
        auto nb = select_neighbors(js.target_hypotheses[j], anchors, cfg.neighbor, lane, j);
        if (!nb) continue;
        picked.clear();
        for (std::size_t idx : nb->neighbor_indices) picked.push_back(anchors[idx]);
        const Eigen::MatrixXd S = local_covariance(js.target_hypotheses[j], picked);
        js.terms.push_back({j, std::move(nb->neighbor_indices), solve_weights(S, cfg.neighbor)});
    }

    js.epc = epc_loss_and_grad(tgt.embeddings, src.embeddings, js.terms, cfg.epc_normalization);

    std::vector<GazeAngles> d_pred(src_pred.size());
    js.loss_gaze = mean_gaze_loss(src_pred, source.gaze, d_pred);
    js.loss_da = da_loss(js.epc.result.loss, js.loss_gaze, cfg.loss);
    js.source_mae_deg = batch_mae_deg(src_pred, source.gaze);

    const double le = cfg.loss.lambda_epc;
    js.grads = net.backward(src, le * js.epc.d_source, cfg.loss.lambda_gaze * to_matrix(d_pred));
    if (le != 0.0 && !js.terms.empty()) {
        js.grads.add(net.backward(tgt, le * js.epc.d_target, Eigen::MatrixXd()));
    }
    return js;
}

TrainLog adapt(GazeNet& net, OptimizerState& opt, const SourceDomain& source,
               const TargetDomain& target, const TrainConfig& cfg, Stage current_stage,
               const StepObserver& observer) {
    cfg.validate();
    if (source.size() == 0 || target.size() == 0) throw InvalidInput("adapt: empty domain");

    TrainLog log;
    if (current_stage != Stage::Pretrained) {
        log.warnings.push_back("adapt started from a model whose stage is '" +
                               to_string(current_stage) + "', not 'pretrained'");
    }
    const Rng root = Rng(cfg.seed).derive("adapt");
    const std::size_t window = cfg.early_stop_window;
    double window_loss = 0.0, previous_window_loss = 0.0;
    std::size_t window_participating = 0;
    bool have_previous_window = false;

    for (std::size_t m = 1; m <= cfg.joint_iterations; ++m) {
        const Rng iter = root.derive(static_cast<std::uint64_t>(m));
        Rng batch_rng = iter.derive("batches");
        const auto [sb, tb] =
            sample_batches(source, target, cfg.source_batch, cfg.target_batch, batch_rng);
        const JointStep js = compute_joint_step(net, sb, tb, cfg, iter.derive("neighbors"));
        apply_update(net, js.grads, opt, "adapt", m);

        StepRecord r;
        r.stage = Stage::Adapted;
        r.step = m;
        r.loss_gaze = js.loss_gaze;
        r.loss_epc = js.epc.result.loss;
        r.loss_da = js.loss_da;
        r.participating = js.epc.result.participating;
        r.skipped = js.epc.result.skipped;
        r.source_mae_deg = js.source_mae_deg;
        log.steps.push_back(r);
        if (observer) observer(r, net, opt);

        window_loss += js.loss_da;
        window_participating += r.participating;
        if (m % window == 0) {
            const double mean_loss = window_loss / static_cast<double>(window);
            const double fraction = static_cast<double>(window_participating) /
                                    static_cast<double>(window * cfg.target_batch);
            if (fraction < cfg.degenerate_fraction) {
                log.warnings.push_back("DegenerateRun: only " + text::format_double(fraction * 100.0) +
                                       "% of targets had enough neighbors in iterations " +
                                       std::to_string(m - window + 1) + "-" + std::to_string(m));
            }
            if (cfg.early_stop && have_previous_window &&
                previous_window_loss - mean_loss < cfg.early_stop_min_delta) {
                log.early_stopped_at = m;
                break;
            }
            previous_window_loss = mean_loss;
            have_previous_window = true;
            window_loss = 0.0;
            window_participating = 0;
        }
    }
    return log;
}

}  // namespace epcgaze
