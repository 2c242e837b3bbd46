// epcgaze: generate synthetic gaze data, train, adapt and evaluate.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "epcgaze/checkpoint.hpp"
#include "epcgaze/config.hpp"
#include "epcgaze/errors.hpp"
#include "epcgaze/evaluation.hpp"
#include "epcgaze/synthetic.hpp"
#include "epcgaze/text.hpp"
#include "epcgaze/trainer.hpp"

namespace fs = std::filesystem;
using namespace epcgaze;

namespace {

struct CommonArgs {
    std::string config_path;
    std::map<std::string, std::string> overrides;
};

void add_common_options(CLI::App* sub, CommonArgs& args) {
    sub->add_option("--config", args.config_path, "config file ([section] key = value)");
    for (const ConfigField& f : config_fields()) {
        const std::string key = f.key;
        sub->add_option_function<std::string>(
               "--" + flag_name(key), [&args, key](const std::string& v) { args.overrides[key] = v; },
               f.help)
            ->group("[" + f.section + "]");
    }
}

RunConfig resolve(const CommonArgs& args) {
    RunConfig cfg;
    if (!args.config_path.empty()) apply_config_file(cfg, args.config_path);
    for (const auto& [key, value] : args.overrides) set_field(cfg, key, value);
    cfg.finalize();
    return cfg;
}

fs::path prepare_out(const RunConfig& cfg) {
    const fs::path out = cfg.out.empty() ? fs::path(".") : fs::path(cfg.out);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError("cannot create output directory " + out.string() + ": " + ec.message());
    write_config_snapshot(out / "config.ini", cfg);
    return out;
}

void write_text(const fs::path& path, const std::string& body) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << body;
    if (!out) throw IoError("failed writing " + path.string());
}

std::vector<Sample> load_samples(const RunConfig& cfg) {
    std::vector<Sample> samples =
        cfg.data.empty() ? generate_world(cfg.generator, cfg.seed).samples : read_dataset_csv(cfg.data);
    if (samples.empty()) throw InvalidInput("dataset is empty");
    const auto dim = static_cast<std::size_t>(samples.front().features.size());
    if (dim != cfg.model.input_dim) {
        throw DimensionMismatch("dataset has " + std::to_string(dim) + " features, model input_dim is " +
                                std::to_string(cfg.model.input_dim));
    }
    return samples;
}

TrainConfig subject_train_config(const RunConfig& cfg) {
    TrainConfig tc = cfg.train;
    tc.seed = subject_seed(cfg.seed, cfg.held_out_subject);
    return tc;
}

void print_warnings(const TrainLog& log) {
    for (const std::string& w : log.warnings) std::cerr << "warning: " << w << '\n';
}

Checkpoint load_for_subject(const RunConfig& cfg) {
    if (cfg.checkpoint.empty()) throw ConfigError("--checkpoint is required");
    Checkpoint ck = load_checkpoint(cfg.checkpoint);
    if (ck.held_out_subject != 0 && ck.held_out_subject != cfg.held_out_subject) {
        throw ConfigError("checkpoint was trained with subject " + std::to_string(ck.held_out_subject) +
                          " held out, not " + std::to_string(cfg.held_out_subject));
    }
    if (!(ck.model == cfg.model)) {
        std::cerr << "warning: model settings taken from the checkpoint, not the config\n";
    }
    return ck;
}

int cmd_generate(const RunConfig& cfg) {
    const fs::path out = prepare_out(cfg);
    const World world = generate_world(cfg.generator, cfg.seed);
    write_dataset_csv(out / "dataset.csv", world.samples);
    write_generator_metadata(out / "metadata.json", cfg.generator, cfg.seed);
    std::cout << "wrote " << world.samples.size() << " samples to " << (out / "dataset.csv").string() << '\n';
    return 0;
}

int cmd_pretrain(const RunConfig& cfg) {
    const fs::path out = prepare_out(cfg);
    const DomainSplit split = leave_one_subject_out(load_samples(cfg), cfg.held_out_subject);
    const TrainConfig tc = subject_train_config(cfg);
    GazeNet net(cfg.model, Rng(tc.seed).derive("init").seed());
    OptimizerState opt = tc.make_optimizer();
    const TrainLog log = pretrain(net, opt, split.source, tc);
    log.write_csv(out / "pretrain_log.csv");
    print_warnings(log);

    Checkpoint ck{cfg.model, net.params(), opt, Rng(tc.seed), Stage::Pretrained, cfg.held_out_subject, 0};
    save_checkpoint(out / "pretrained.json", ck);
    const double mae = log.epochs.empty() ? 0.0 : log.epochs.back().mean_source_mae_deg;
    std::cout << "pretrained subject " << cfg.held_out_subject << ": source MAE " << mae << " deg\n";
    return 0;
}

int cmd_adapt(const RunConfig& cfg) {
    const Checkpoint ck = load_for_subject(cfg);
    const fs::path out = prepare_out(cfg);
    const DomainSplit split = leave_one_subject_out(load_samples(cfg), cfg.held_out_subject);
    const TrainConfig tc = subject_train_config(cfg);
    GazeNet net = ck.net();
    OptimizerState opt = tc.make_optimizer();
    opt.velocity = ck.optimizer.velocity;

    StepObserver observer;
    if (cfg.checkpoint_interval > 0) {
        observer = [&](const StepRecord& rec, const GazeNet& n, const OptimizerState& o) {
            if (rec.step % cfg.checkpoint_interval != 0) return;
            Checkpoint mid{n.config(), n.params(), o, Rng(tc.seed), Stage::Adapted, cfg.held_out_subject,
                           rec.step};
            save_checkpoint(out / ("adapt_step_" + std::to_string(rec.step) + ".json"), mid);
        };
    }
    const TrainLog log = adapt(net, opt, split.source, split.target, tc, ck.stage, observer);
    log.write_csv(out / "adapt_log.csv");
    print_warnings(log);

    save_checkpoint(out / "adapted.json",
                    Checkpoint{net.config(), net.params(), opt, Rng(tc.seed), Stage::Adapted,
                               cfg.held_out_subject, log.steps.size()});
    std::cout << "adapted subject " << cfg.held_out_subject << " in " << log.steps.size() << " iterations";
    if (log.early_stopped_at) std::cout << " (early stop)";
    std::cout << '\n';
    return 0;
}

int cmd_evaluate(const RunConfig& cfg) {
    const Checkpoint ck = load_for_subject(cfg);
    const fs::path out = prepare_out(cfg);
    const DomainSplit split = leave_one_subject_out(load_samples(cfg), cfg.held_out_subject);
    const GazeNet net = ck.net();
    const std::vector<GazeAngles> pred = predict(net, split.target.features);
    const EvalReport r = evaluate_predictions(pred, split.target_gt.gaze, cfg.held_out_subject);
    const std::string label = to_string(ck.stage);
    write_text(out / ("report_" + label + ".json"), report_json(r, label));
    write_text(out / ("scatter_" + label + ".csv"), scatter_csv(split.target_gt.gaze, pred));
    std::cout << "subject " << r.subject_id << " (" << label << "): MAE " << r.mae_degrees << " deg, pitch intercept "
              << r.pitch_fit.intercept << " rad\n";
    return 0;
}

int cmd_loso(const RunConfig& cfg) {
    const fs::path out = prepare_out(cfg);
    const CrossValidationSummary s = run_loso(load_samples(cfg), cfg.experiment());
    for (const SubjectResult& r : s.subjects) {
        const std::string stem = "subject_" + std::to_string(r.subject_id);
        write_text(out / (stem + "_baseline.json"), report_json(r.baseline, "baseline"));
        write_text(out / (stem + "_adapted.json"), report_json(r.adapted, "adapted"));
        for (const std::string& w : r.warnings) std::cerr << "warning: subject " << r.subject_id << ": " << w << '\n';
    }
    write_text(out / "summary.csv", summary_csv(s));
    write_text(out / "summary.json", summary_json(s));
    std::cout << "baseline " << s.baseline_mean_mae << " deg, adapted " << s.adapted_mean_mae << " deg, improvement "
              << s.improvement_percent << "%, " << s.subjects_improved << "/" << s.subjects.size()
              << " subjects improved\n";
    return 0;
}

int cmd_ablate(const RunConfig& cfg) {
    const fs::path out = prepare_out(cfg);
    const AblationAxis axis = ablation_axis_from_string(cfg.ablate_axis);
    if (cfg.ablate_values.empty()) throw ConfigError("ablate_values is empty");
    const std::vector<AblationRow> rows =
        ablation_sweep(load_samples(cfg), cfg.experiment(), axis, cfg.ablate_values);
    const std::string table = ablation_csv(axis, rows);
    write_text(out / ("ablation_" + to_string(axis) + ".csv"), table);
    std::cout << table;
    return 0;
}

int cmd_inspect(const RunConfig& cfg) {
    if (cfg.checkpoint.empty()) throw ConfigError("--checkpoint is required");
    const Checkpoint ck = load_checkpoint(cfg.checkpoint);
    RunConfig shown;
    shown.model = ck.model;
    std::cout << "stage: " << to_string(ck.stage) << '\n'
              << "held_out_subject: " << ck.held_out_subject << '\n'
              << "step: " << ck.step << '\n'
              << "rng_seed: " << ck.rng.seed() << '\n';
    for (const ConfigField& f : config_fields()) {
        if (f.section == "model") std::cout << "model." << f.key << ": " << get_field(shown, f.key) << '\n';
    }
    std::cout << "optimizer: lr " << text::format_double(ck.optimizer.learning_rate) << ", momentum "
              << text::format_double(ck.optimizer.momentum) << ", weight_decay "
              << text::format_double(ck.optimizer.weight_decay) << ", velocity "
              << (ck.optimizer.velocity.parameter_count() ? "present" : "none") << '\n';
    std::cout << "parameters: " << ck.params.parameter_count() << '\n';

    auto stats = [](const std::string& name, const Eigen::MatrixXd& m) {
        if (m.size() == 0) return;
        const double mean = m.mean();
        const double sd = std::sqrt((m.array() - mean).square().mean());
        std::printf("  %-10s %4ldx%-4ld mean %+.6e  std %.6e  min %+.6e  max %+.6e\n", name.c_str(),
                    static_cast<long>(m.rows()), static_cast<long>(m.cols()), mean, sd, m.minCoeff(),
                    m.maxCoeff());
    };
    for (std::size_t i = 0; i < ck.params.layers.size(); ++i) {
        const std::string base = (i + 1 == ck.params.layers.size()) ? "embed" : "hidden" + std::to_string(i);
        stats(base + ".W", ck.params.layers[i].weight);
        stats(base + ".b", ck.params.layers[i].bias);
    }
    stats("head.W", ck.params.head.weight);
    stats("head.b", ck.params.head.bias);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Unsupervised gaze domain adaptation with embedding prediction consistency"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "show help for every subcommand");

    struct Command {
        const char* name;
        const char* help;
        int (*run)(const RunConfig&);
    };
    const Command commands[] = {
        {"generate", "write a synthetic multi-subject dataset and its metadata", cmd_generate},
        {"pretrain", "source-only training with one subject held out", cmd_pretrain},
        {"adapt", "joint EPC + gaze adaptation from a pretrained checkpoint", cmd_adapt},
        {"evaluate", "score a checkpoint on the held-out subject", cmd_evaluate},
        {"loso", "leave-one-subject-out baseline vs adapted comparison", cmd_loso},
        {"ablate", "sweep one hyperparameter through loso", cmd_ablate},
        {"inspect-checkpoint", "print a checkpoint's config, stage and parameter statistics", cmd_inspect},
    };
    CommonArgs args;
    std::vector<std::pair<CLI::App*, const Command*>> subs;
    for (const Command& c : commands) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        add_common_options(sub, args);
        subs.emplace_back(sub, &c);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error ConfigError: " << e.what() << '\n';
        return 2;
    }

    try {
        const RunConfig cfg = resolve(args);
        for (const auto& [sub, cmd] : subs) {
            if (sub->parsed()) return cmd->run(cfg);
        }
    } catch (const Error& e) {
        std::cerr << "error " << e.kind() << ": " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error Internal: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
