#include "epcgaze/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "epcgaze/errors.hpp"
#include "epcgaze/text.hpp"

namespace epcgaze {

namespace {

using Getter = std::function<std::string(const RunConfig&)>;
using Setter = std::function<void(RunConfig&, const std::string&)>;

struct FieldImpl {
    ConfigField meta;
    Getter get;
    Setter set;
};

std::size_t parse_size(const std::string& v) {
    const long long n = text::parse_int(v);
    if (n < 0) throw ConfigError("expected a non-negative integer, got '" + v + "'");
    return static_cast<std::size_t>(n);
}

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += ',';
        out += parts[i];
    }
    return out;
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    for (const std::string& p : text::split(v, ',')) {
        const std::string_view t = text::trim(p);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

// Field table helpers: bind a member reached through `access` to a typed codec.
template <class F>
FieldImpl dbl(std::string section, std::string key, std::string help, F access) {
    return {{std::move(section), std::move(key), std::move(help)},
            [access](const RunConfig& c) { return text::format_double(access(c)); },
            [access](RunConfig& c, const std::string& v) { access(c) = text::parse_double(v); }};
}

template <class F>
FieldImpl size(std::string section, std::string key, std::string help, F access) {
    return {{std::move(section), std::move(key), std::move(help)},
            [access](const RunConfig& c) { return std::to_string(access(c)); },
            [access](RunConfig& c, const std::string& v) { access(c) = parse_size(v); }};
}

template <class F>
FieldImpl boolean(std::string section, std::string key, std::string help, F access) {
    return {{std::move(section), std::move(key), std::move(help)},
            [access](const RunConfig& c) { return std::string(access(c) ? "true" : "false"); },
            [access](RunConfig& c, const std::string& v) { access(c) = text::parse_bool(v); }};
}

template <class F>
FieldImpl str(std::string section, std::string key, std::string help, F access) {
    return {{std::move(section), std::move(key), std::move(help)},
            [access](const RunConfig& c) { return access(c); },
            [access](RunConfig& c, const std::string& v) { access(c) = v; }};
}

const std::vector<FieldImpl>& table() {
    static const std::vector<FieldImpl> fields = [] {
        std::vector<FieldImpl> f;
        // [model]
        f.push_back(size("model", "input_dim", "feature dimension (model and generator)",
                         [](auto& c) -> auto& { return c.model.input_dim; }));
        f.push_back({{"model", "hidden_layers", "hidden widths of phi, comma separated"},
                     [](const RunConfig& c) {
                         std::vector<std::string> s;
                         for (std::size_t w : c.model.hidden_layers) s.push_back(std::to_string(w));
                         return join(s);
                     },
                     [](RunConfig& c, const std::string& v) {
                         c.model.hidden_layers.clear();
                         for (const std::string& p : split_list(v)) c.model.hidden_layers.push_back(parse_size(p));
                     }});
        f.push_back(size("model", "embedding_dim", "embedding size F_g",
                         [](auto& c) -> auto& { return c.model.embedding_dim; }));
        f.push_back({{"model", "activation", "relu or tanh"},
                     [](const RunConfig& c) { return to_string(c.model.activation); },
                     [](RunConfig& c, const std::string& v) { c.model.activation = activation_from_string(v); }});
        f.push_back(boolean("model", "head_bias", "give the gaze head a bias",
                            [](auto& c) -> auto& { return c.model.head_bias; }));
        f.push_back(dbl("model", "embedding_init_scale", "init scale of the embedding layer (head gets the inverse)",
                        [](auto& c) -> auto& { return c.model.embedding_init_scale; }));
        // [train]
        f.push_back(size("train", "pretrain_epochs", "source-only epochs N_s",
                         [](auto& c) -> auto& { return c.train.pretrain_epochs; }));
        f.push_back(size("train", "pretrain_batch", "source-only batch size",
                         [](auto& c) -> auto& { return c.train.pretrain_batch; }));
        f.push_back(size("train", "joint_iterations", "joint-stage iterations M_t",
                         [](auto& c) -> auto& { return c.train.joint_iterations; }));
        f.push_back(size("train", "source_batch", "joint-stage source batch B_s",
                         [](auto& c) -> auto& { return c.train.source_batch; }));
        f.push_back(size("train", "target_batch", "joint-stage target batch B_t",
                         [](auto& c) -> auto& { return c.train.target_batch; }));
        f.push_back({{"train", "da_target", "groundtruth or prediction"},
                     [](const RunConfig& c) { return to_string(c.train.da_target); },
                     [](RunConfig& c, const std::string& v) { c.train.da_target = da_target_from_string(v); }});
        f.push_back({{"train", "epc_normalization", "batch or participating"},
                     [](const RunConfig& c) { return to_string(c.train.epc_normalization); },
                     [](RunConfig& c, const std::string& v) {
                         c.train.epc_normalization = epc_normalization_from_string(v);
                     }});
        f.push_back(dbl("train", "learning_rate", "SGD learning rate",
                        [](auto& c) -> auto& { return c.train.learning_rate; }));
        f.push_back(dbl("train", "momentum", "SGD momentum",
                        [](auto& c) -> auto& { return c.train.momentum; }));
        f.push_back(dbl("train", "weight_decay", "L2 weight decay",
                        [](auto& c) -> auto& { return c.train.weight_decay; }));
        f.push_back(boolean("train", "early_stop", "stop the joint stage on a plateau",
                            [](auto& c) -> auto& { return c.train.early_stop; }));
        f.push_back(size("train", "early_stop_window", "moving-average window (iterations)",
                         [](auto& c) -> auto& { return c.train.early_stop_window; }));
        f.push_back(dbl("train", "early_stop_min_delta", "minimum window-to-window improvement",
                        [](auto& c) -> auto& { return c.train.early_stop_min_delta; }));
        f.push_back(dbl("train", "degenerate_fraction", "warn below this participating fraction",
                        [](auto& c) -> auto& { return c.train.degenerate_fraction; }));
        // [neighbor]
        f.push_back(dbl("neighbor", "mu", "neighborhood half-width (radians)",
                        [](auto& c) -> auto& { return c.train.neighbor.mu; }));
        f.push_back(size("neighbor", "k", "neighbors per target",
                         [](auto& c) -> auto& { return c.train.neighbor.k; }));
        f.push_back({{"neighbor", "lambda_reg", "absolute LLR regularizer, or auto"},
                     [](const RunConfig& c) {
                         return c.train.neighbor.lambda_reg ? text::format_double(*c.train.neighbor.lambda_reg)
                                                            : std::string("auto");
                     },
                     [](RunConfig& c, const std::string& v) {
                         if (v == "auto") {
                             c.train.neighbor.lambda_reg.reset();
                         } else {
                             c.train.neighbor.lambda_reg = text::parse_double(v);
                         }
                     }});
        f.push_back(dbl("neighbor", "lambda_relative", "regularizer relative to trace(S)/k",
                        [](auto& c) -> auto& { return c.train.neighbor.lambda_relative; }));
        // [loss]
        f.push_back(dbl("loss", "lambda_epc", "weight of the EPC loss",
                        [](auto& c) -> auto& { return c.train.loss.lambda_epc; }));
        f.push_back(dbl("loss", "lambda_gaze", "weight of the gaze loss",
                        [](auto& c) -> auto& { return c.train.loss.lambda_gaze; }));
        // [generator]
        f.push_back(size("generator", "n_subjects", "number of subjects",
                         [](auto& c) -> auto& { return c.generator.n_subjects; }));
        f.push_back(size("generator", "samples_per_subject", "samples per subject",
                         [](auto& c) -> auto& { return c.generator.samples_per_subject; }));
        f.push_back(size("generator", "true_map_hidden", "hidden width of the true feature map",
                         [](auto& c) -> auto& { return c.generator.true_map_hidden; }));
        f.push_back(dbl("generator", "yaw_min", "lower yaw bound (radians)",
                        [](auto& c) -> auto& { return c.generator.yaw_min; }));
        f.push_back(dbl("generator", "yaw_max", "upper yaw bound (radians)",
                        [](auto& c) -> auto& { return c.generator.yaw_max; }));
        f.push_back(dbl("generator", "pitch_min", "lower pitch bound (radians)",
                        [](auto& c) -> auto& { return c.generator.pitch_min; }));
        f.push_back(dbl("generator", "pitch_max", "upper pitch bound (radians)",
                        [](auto& c) -> auto& { return c.generator.pitch_max; }));
        f.push_back(dbl("generator", "bias_shift_max", "bound on each gaze bias component",
                        [](auto& c) -> auto& { return c.generator.bias_shift_max; }));
        f.push_back(dbl("generator", "bias_shift_sigma", "std of each gaze bias component",
                        [](auto& c) -> auto& { return c.generator.bias_shift_sigma; }));
        f.push_back(boolean("generator", "bias_shift_uniform", "draw gaze bias uniformly in the bound",
                            [](auto& c) -> auto& { return c.generator.bias_shift_uniform; }));
        f.push_back(dbl("generator", "offset_scale", "std of the per-subject feature offset",
                        [](auto& c) -> auto& { return c.generator.offset_scale; }));
        f.push_back(dbl("generator", "gain_spread", "per-subject gain in 1 +- spread",
                        [](auto& c) -> auto& { return c.generator.gain_spread; }));
        f.push_back(dbl("generator", "noise_sigma", "feature noise std",
                        [](auto& c) -> auto& { return c.generator.noise_sigma; }));
        f.push_back(boolean("generator", "identical_subjects", "give every subject the same profile",
                            [](auto& c) -> auto& { return c.generator.identical_subjects; }));
        // [run]
        f.push_back({{"run", "seed", "top-level seed"},
                     [](const RunConfig& c) { return std::to_string(c.seed); },
                     [](RunConfig& c, const std::string& v) {
                         c.seed = text::parse_uint(v);
                     }});
        f.push_back(size("run", "threads", "worker threads for per-subject runs (0 = all cores)",
                         [](auto& c) -> auto& { return c.threads; }));
        f.push_back(str("run", "data", "dataset CSV (empty: generate in memory)",
                        [](auto& c) -> auto& { return c.data; }));
        f.push_back(str("run", "checkpoint", "input checkpoint",
                        [](auto& c) -> auto& { return c.checkpoint; }));
        f.push_back(str("run", "out", "output directory", [](auto& c) -> auto& { return c.out; }));
        f.push_back({{"run", "held_out_subject", "target subject id"},
                     [](const RunConfig& c) { return std::to_string(c.held_out_subject); },
                     [](RunConfig& c, const std::string& v) {
                         c.held_out_subject = static_cast<int>(text::parse_int(v));
                     }});
        f.push_back(size("run", "checkpoint_interval", "joint-stage checkpoint interval (0 = stage ends only)",
                         [](auto& c) -> auto& { return c.checkpoint_interval; }));
        f.push_back(str("run", "ablate_axis", "mu, k, fg, pretrain_flags or da_target",
                        [](auto& c) -> auto& { return c.ablate_axis; }));
        f.push_back({{"run", "ablate_values", "comma-separated axis values"},
                     [](const RunConfig& c) { return join(c.ablate_values); },
                     [](RunConfig& c, const std::string& v) { c.ablate_values = split_list(v); }});
        return f;
    }();
    return fields;
}

const FieldImpl& find(const std::string& key) {
    for (const FieldImpl& f : table()) {
        if (f.meta.key == key) return f;
    }
    throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

void RunConfig::finalize() {
    generator.input_dim = model.input_dim;
    train.seed = seed;
    model.validate();
    train.validate();
    generator.validate();
    ablation_axis_from_string(ablate_axis);
}

ExperimentConfig RunConfig::experiment() const {
    ExperimentConfig e;
    e.model = model;
    e.train = train;
    e.train.seed = seed;
    e.threads = threads;
    return e;
}

const std::vector<ConfigField>& config_fields() {
    static const std::vector<ConfigField> out = [] {
        std::vector<ConfigField> v;
        for (const FieldImpl& f : table()) v.push_back(f.meta);
        return v;
    }();
    return out;
}

std::string flag_name(const std::string& key) {
    std::string s = key;
    std::replace(s.begin(), s.end(), '_', '-');
    return s;
}

void set_field(RunConfig& cfg, const std::string& key, const std::string& value) {
    const FieldImpl& f = find(key);
    try {
        f.set(cfg, std::string(text::trim(value)));
    } catch (const ConfigError& e) {
        throw ConfigError(key + ": " + e.what());
    } catch (const Error& e) {
        throw ConfigError(key + ": " + e.what());
    }
}

std::string get_field(const RunConfig& cfg, const std::string& key) { return find(key).get(cfg); }

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::set<std::string> seen;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = origin + ":" + std::to_string(lineno);
        const std::string_view t = text::trim(line);
        if (t.empty() || t.front() == '#' || t.front() == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw ConfigError(where + ": malformed section header");
            section = std::string(text::trim(t.substr(1, t.size() - 2)));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
        const std::string key(text::trim(t.substr(0, eq)));
        const std::string value(text::trim(t.substr(eq + 1)));
        const FieldImpl* f = nullptr;
        try {
            f = &find(key);
        } catch (const ConfigError&) {
            throw ConfigError(where + ": unknown config key '" + key + "'");
        }
        if (f->meta.section != section) {
            throw ConfigError(where + ": key '" + key + "' belongs in [" + f->meta.section + "]");
        }
        if (!seen.insert(key).second) throw ConfigError(where + ": duplicate key '" + key + "'");
        try {
            set_field(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + ": " + e.what());
        }
    }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    apply_config_text(cfg, buf.str(), path.string());
}

std::string config_to_text(const RunConfig& cfg) {
    std::ostringstream out;
    std::string section;
    for (const FieldImpl& f : table()) {
        if (f.meta.section != section) {
            if (!section.empty()) out << '\n';
            section = f.meta.section;
            out << '[' << section << "]\n";
        }
        out << f.meta.key << " = " << f.get(cfg) << '\n';
    }
    return out.str();
}

void write_config_snapshot(const std::filesystem::path& path, const RunConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write config snapshot " + path.string());
    out << config_to_text(cfg);
    if (!out) throw IoError("failed writing config snapshot " + path.string());
}

}  // namespace epcgaze
