#include "epcgaze/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "epcgaze/errors.hpp"
#include "epcgaze/text.hpp"

namespace epcgaze {

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DimensionMismatch("fit_line: x and y differ in length");
    if (x.size() < 2) throw TooFewSamples("linear fit needs at least 2 samples");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw InvalidInput("linear fit needs non-constant x");
    const double slope = sxy / sxx;
    return {slope, my - slope * mx};
}

EvalReport evaluate_predictions(std::span<const GazeAngles> pred, std::span<const GazeAngles> gt,
                                int subject_id) {
    if (pred.size() != gt.size()) throw DimensionMismatch("prediction/groundtruth counts differ");
    if (gt.size() < 2) throw TooFewSamples("evaluation needs at least 2 samples");
    EvalReport r;
    r.subject_id = subject_id;
    r.sample_count = gt.size();
    double total = 0.0;
    std::vector<double> gy, gp, py, pp;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        total += angular_error(pred[i], gt[i]);
        gy.push_back(gt[i].yaw);
        gp.push_back(gt[i].pitch);
        py.push_back(pred[i].yaw);
        pp.push_back(pred[i].pitch);
    }
    r.mae_degrees = rad_to_deg(total / static_cast<double>(gt.size()));
    r.yaw_fit = fit_line(gy, py);
    r.pitch_fit = fit_line(gp, pp);
    return r;
}

std::vector<GazeAngles> predict(const GazeNet& net, const Eigen::MatrixXd& features) {
    return net.forward_batch(features).gaze();
}

EvalReport evaluate(const GazeNet& net, const Eigen::MatrixXd& features,
                    std::span<const GazeAngles> gt, int subject_id) {
    if (static_cast<std::size_t>(features.cols()) != gt.size()) {
        throw DimensionMismatch("feature columns and groundtruth counts differ");
    }
    if (gt.size() < 2) throw TooFewSamples("evaluation needs at least 2 samples");
    const std::vector<GazeAngles> pred = predict(net, features);
    return evaluate_predictions(pred, gt, subject_id);
}

double improvement_percent(double baseline_mae, double adapted_mae) {
    if (baseline_mae == 0.0) return 0.0;
    return 100.0 * (baseline_mae - adapted_mae) / baseline_mae;
}

std::uint64_t subject_seed(std::uint64_t seed, int subject_id) {
    return Rng(seed).derive("subject").derive(static_cast<std::uint64_t>(subject_id)).seed();
}

SubjectResult run_subject(const std::vector<Sample>& samples, int held_out_id,
                          const ExperimentConfig& cfg) {
    const DomainSplit split = leave_one_subject_out(samples, held_out_id);
    TrainConfig tc = cfg.train;
    tc.seed = subject_seed(cfg.train.seed, held_out_id);

    GazeNet net(cfg.model, Rng(tc.seed).derive("init").seed());
    OptimizerState opt = tc.make_optimizer();
    pretrain(net, opt, split.source, tc);

    SubjectResult res;
    res.subject_id = held_out_id;
    res.baseline = evaluate(net, split.target.features, split.target_gt.gaze, held_out_id);
    const TrainLog log = adapt(net, opt, split.source, split.target, tc, Stage::Pretrained);
    res.adapted = evaluate(net, split.target.features, split.target_gt.gaze, held_out_id);
    res.warnings = log.warnings;
    return res;
}

CrossValidationSummary summarize(std::vector<SubjectResult> results) {
    CrossValidationSummary s;
    s.subjects = std::move(results);
    const double n = static_cast<double>(s.subjects.size());
    if (s.subjects.empty()) return s;
    for (const SubjectResult& r : s.subjects) {
        s.baseline_mean_mae += r.baseline.mae_degrees;
        s.adapted_mean_mae += r.adapted.mae_degrees;
        s.baseline_mean_abs_pitch_intercept += std::abs(r.baseline.pitch_fit.intercept);
        s.adapted_mean_abs_pitch_intercept += std::abs(r.adapted.pitch_fit.intercept);
        s.baseline_mean_abs_yaw_intercept += std::abs(r.baseline.yaw_fit.intercept);
        s.adapted_mean_abs_yaw_intercept += std::abs(r.adapted.yaw_fit.intercept);
        if (r.adapted.mae_degrees < r.baseline.mae_degrees) ++s.subjects_improved;
    }
    s.baseline_mean_mae /= n;
    s.adapted_mean_mae /= n;
    s.baseline_mean_abs_pitch_intercept /= n;
    s.adapted_mean_abs_pitch_intercept /= n;
    s.baseline_mean_abs_yaw_intercept /= n;
    s.adapted_mean_abs_yaw_intercept /= n;
    double vb = 0.0, va = 0.0;
    for (const SubjectResult& r : s.subjects) {
        vb += (r.baseline.mae_degrees - s.baseline_mean_mae) * (r.baseline.mae_degrees - s.baseline_mean_mae);
        va += (r.adapted.mae_degrees - s.adapted_mean_mae) * (r.adapted.mae_degrees - s.adapted_mean_mae);
    }
    // Population standard deviation across held-out subjects.
    s.baseline_std_mae = std::sqrt(vb / n);
    s.adapted_std_mae = std::sqrt(va / n);
    s.improvement_percent = improvement_percent(s.baseline_mean_mae, s.adapted_mean_mae);
    return s;
}

CrossValidationSummary run_loso(const std::vector<Sample>& samples, const ExperimentConfig& cfg) {
    std::set<int> id_set;
    for (const Sample& s : samples) id_set.insert(s.subject_id);
    const std::vector<int> ids(id_set.begin(), id_set.end());
    if (ids.size() < 3) throw InvalidInput("leave-one-subject-out needs at least 3 subjects");

    std::vector<SubjectResult> results(ids.size());
    std::size_t threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, ids.size());

    // Each subject run owns its model and rng streams; results land in a
    // fixed slot so the fold below is order-independent of scheduling.
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < ids.size(); i = next++) {
            try {
                results[i] = run_subject(samples, ids[i], cfg);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
    return summarize(std::move(results));
}

std::string to_string(AblationAxis a) {
    switch (a) {
        case AblationAxis::Mu: return "mu";
        case AblationAxis::K: return "k";
        case AblationAxis::EmbeddingDim: return "fg";
        case AblationAxis::PretrainEpochs: return "pretrain_flags";
        case AblationAxis::DaTarget: return "da_target";
    }
    return "mu";
}

AblationAxis ablation_axis_from_string(const std::string& s) {
    if (s == "mu") return AblationAxis::Mu;
    if (s == "k") return AblationAxis::K;
    if (s == "fg") return AblationAxis::EmbeddingDim;
    if (s == "pretrain_flags" || s == "pretrain-flags") return AblationAxis::PretrainEpochs;
    if (s == "da_target" || s == "da-target") return AblationAxis::DaTarget;
    throw ConfigError("unknown ablation axis '" + s + "'");
}

ExperimentConfig apply_ablation(const ExperimentConfig& base, AblationAxis axis,
                                const std::string& value) {
    ExperimentConfig c = base;
    switch (axis) {
        case AblationAxis::Mu: c.train.neighbor.mu = text::parse_double(value); break;
        case AblationAxis::K: c.train.neighbor.k = static_cast<std::size_t>(text::parse_int(value)); break;
        case AblationAxis::EmbeddingDim:
            c.model.embedding_dim = static_cast<std::size_t>(text::parse_int(value));
            break;
        case AblationAxis::PretrainEpochs:
            c.train.pretrain_epochs = static_cast<std::size_t>(text::parse_int(value));
            break;
        case AblationAxis::DaTarget: c.train.da_target = da_target_from_string(value); break;
    }
    c.model.validate();
    c.train.validate();
    return c;
}

std::vector<AblationRow> ablation_sweep(const std::vector<Sample>& samples,
                                        const ExperimentConfig& base, AblationAxis axis,
                                        const std::vector<std::string>& values) {
    if (values.empty()) throw ConfigError("ablation sweep needs at least one value");
    std::vector<AblationRow> rows;
    for (const std::string& v : values) {
        rows.push_back({v, run_loso(samples, apply_ablation(base, axis, v))});
    }
    return rows;
}

std::string report_json(const EvalReport& r, const std::string& label) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["label"] = label;
    j["subject_id"] = r.subject_id;
    j["sample_count"] = r.sample_count;
    j["mae_degrees"] = r.mae_degrees;
    j["yaw_fit"] = {{"slope", r.yaw_fit.slope}, {"intercept", r.yaw_fit.intercept}};
    j["pitch_fit"] = {{"slope", r.pitch_fit.slope}, {"intercept", r.pitch_fit.intercept}};
    return j.dump(2) + "\n";
}

std::string summary_csv(const CrossValidationSummary& s) {
    std::ostringstream os;
    os << "subject_id,samples,baseline_mae_deg,adapted_mae_deg,baseline_yaw_slope,"
          "baseline_yaw_intercept,baseline_pitch_slope,baseline_pitch_intercept,"
          "adapted_yaw_slope,adapted_yaw_intercept,adapted_pitch_slope,adapted_pitch_intercept\n";
    auto f = [](double v) { return text::format_double(v); };
    for (const SubjectResult& r : s.subjects) {
        os << r.subject_id << ',' << r.baseline.sample_count << ',' << f(r.baseline.mae_degrees) << ','
           << f(r.adapted.mae_degrees) << ',' << f(r.baseline.yaw_fit.slope) << ','
           << f(r.baseline.yaw_fit.intercept) << ',' << f(r.baseline.pitch_fit.slope) << ','
           << f(r.baseline.pitch_fit.intercept) << ',' << f(r.adapted.yaw_fit.slope) << ','
           << f(r.adapted.yaw_fit.intercept) << ',' << f(r.adapted.pitch_fit.slope) << ','
           << f(r.adapted.pitch_fit.intercept) << '\n';
    }
    return os.str();
}

std::string summary_json(const CrossValidationSummary& s) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["subjects"] = s.subjects.size();
    j["baseline_mean_mae_deg"] = s.baseline_mean_mae;
    j["baseline_std_mae_deg"] = s.baseline_std_mae;
    j["adapted_mean_mae_deg"] = s.adapted_mean_mae;
    j["adapted_std_mae_deg"] = s.adapted_std_mae;
    j["improvement_percent"] = s.improvement_percent;
    j["subjects_improved"] = s.subjects_improved;
    j["baseline_mean_abs_pitch_intercept"] = s.baseline_mean_abs_pitch_intercept;
    j["adapted_mean_abs_pitch_intercept"] = s.adapted_mean_abs_pitch_intercept;
    j["baseline_mean_abs_yaw_intercept"] = s.baseline_mean_abs_yaw_intercept;
    j["adapted_mean_abs_yaw_intercept"] = s.adapted_mean_abs_yaw_intercept;
    return j.dump(2) + "\n";
}

std::string ablation_csv(AblationAxis axis, const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << to_string(axis)
       << ",baseline_mean_mae_deg,baseline_std_mae_deg,adapted_mean_mae_deg,adapted_std_mae_deg,"
          "improvement_percent,subjects_improved,baseline_mean_abs_pitch_intercept,"
          "adapted_mean_abs_pitch_intercept\n";
    auto f = [](double v) { return text::format_double(v); };
    for (const AblationRow& r : rows) {
        const CrossValidationSummary& s = r.summary;
        os << r.value << ',' << f(s.baseline_mean_mae) << ',' << f(s.baseline_std_mae) << ','
           << f(s.adapted_mean_mae) << ',' << f(s.adapted_std_mae) << ',' << f(s.improvement_percent)
           << ',' << s.subjects_improved << ',' << f(s.baseline_mean_abs_pitch_intercept) << ','
           << f(s.adapted_mean_abs_pitch_intercept) << '\n';
    }
    return os.str();
}

std::string scatter_csv(std::span<const GazeAngles> gt, std::span<const GazeAngles> pred) {
    if (gt.size() != pred.size()) throw DimensionMismatch("scatter: gt/pred counts differ");
    std::ostringstream os;
    os << "gt_yaw,gt_pitch,pred_yaw,pred_pitch\n";
    for (std::size_t i = 0; i < gt.size(); ++i) {
        os << text::format_double(gt[i].yaw) << ',' << text::format_double(gt[i].pitch) << ','
           << text::format_double(pred[i].yaw) << ',' << text::format_double(pred[i].pitch) << '\n';
    }
    return os.str();
}

}  // namespace epcgaze
