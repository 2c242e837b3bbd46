#include "epcgaze/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "epcgaze/errors.hpp"

namespace epcgaze {

namespace {

using nlohmann::json;

json model_config_json(const ModelConfig& m) {
    return {{"input_dim", m.input_dim},
            {"hidden_layers", m.hidden_layers},
            {"embedding_dim", m.embedding_dim},
            {"activation", to_string(m.activation)},
            {"head_bias", m.head_bias},
            {"embedding_init_scale", m.embedding_init_scale}};
}

ModelConfig model_config_from(const json& j) {
    ModelConfig m;
    m.input_dim = j.at("input_dim").get<std::size_t>();
    m.hidden_layers = j.at("hidden_layers").get<std::vector<std::size_t>>();
    m.embedding_dim = j.at("embedding_dim").get<std::size_t>();
    m.activation = activation_from_string(j.at("activation").get<std::string>());
    m.head_bias = j.at("head_bias").get<bool>();
    m.embedding_init_scale = j.at("embedding_init_scale").get<double>();
    return m;
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ckpt) {
    json opt = {{"learning_rate", ckpt.optimizer.learning_rate},
                {"momentum", ckpt.optimizer.momentum},
                {"weight_decay", ckpt.optimizer.weight_decay},
                {"velocity", nullptr}};
    if (ckpt.optimizer.velocity.parameter_count() > 0) opt["velocity"] = ckpt.optimizer.velocity.flatten();
    const json doc = {{"schema_version", kCheckpointSchemaVersion},
                      {"stage", to_string(ckpt.stage)},
                      {"held_out_subject", ckpt.held_out_subject},
                      {"step", ckpt.step},
                      {"model_config", model_config_json(ckpt.model)},
                      {"parameter_count", ckpt.params.parameter_count()},
                      {"parameters", ckpt.params.flatten()},
                      {"optimizer", opt},
                      {"rng", {{"seed", ckpt.rng.seed()}, {"state", ckpt.rng.state()}}}};
    return doc.dump(1) + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint is not valid JSON: ") + e.what());
    }
    try {
        const int version = doc.at("schema_version").get<int>();
        if (version != kCheckpointSchemaVersion) {
            throw FormatError("unsupported checkpoint schema_version " + std::to_string(version));
        }
        Checkpoint c;
        c.stage = stage_from_string(doc.at("stage").get<std::string>());
        c.held_out_subject = doc.value("held_out_subject", 0);
        c.step = doc.value("step", std::size_t{0});
        c.model = model_config_from(doc.at("model_config"));
        c.model.validate();
        c.params = init_params(c.model, 0);
        c.params.assign(doc.at("parameters").get<std::vector<double>>());

        const json& opt = doc.at("optimizer");
        c.optimizer.learning_rate = opt.at("learning_rate").get<double>();
        c.optimizer.momentum = opt.at("momentum").get<double>();
        c.optimizer.weight_decay = opt.at("weight_decay").get<double>();
        if (!opt.at("velocity").is_null()) {
            c.optimizer.velocity = c.params.zeros_like();
            c.optimizer.velocity.assign(opt.at("velocity").get<std::vector<double>>());
        }
        const json& r = doc.at("rng");
        c.rng = Rng(r.at("seed").get<std::uint64_t>());
        c.rng.set_state(r.at("state").get<std::string>());
        return c;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed checkpoint: ") + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(std::string("malformed checkpoint: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out << checkpoint_to_json(ckpt);
    if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return checkpoint_from_json(buf.str());
}

}  // namespace epcgaze
