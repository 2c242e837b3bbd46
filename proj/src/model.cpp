#include "epcgaze/model.hpp"

#include <algorithm>
#include <cmath>

#include "epcgaze/errors.hpp"
#include "epcgaze/rng.hpp"

namespace epcgaze {

namespace {

std::span<double> as_span(Eigen::MatrixXd& m) {
    return {m.data(), static_cast<std::size_t>(m.size())};
}
std::span<double> as_span(Eigen::VectorXd& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}
std::span<const double> as_span(const Eigen::MatrixXd& m) {
    return {m.data(), static_cast<std::size_t>(m.size())};
}
std::span<const double> as_span(const Eigen::VectorXd& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

Eigen::MatrixXd activate(Activation a, const Eigen::MatrixXd& z) {
    switch (a) {
        case Activation::Relu: return z.cwiseMax(0.0);
        case Activation::Tanh: return z.array().tanh().matrix();
    }
    return z;
}

// Derivative expressed through pre- and post-activation values.
Eigen::MatrixXd activation_grad(Activation a, const Eigen::MatrixXd& pre,
                                const Eigen::MatrixXd& post) {
    switch (a) {
        case Activation::Relu:
            return (pre.array() > 0.0).cast<double>().matrix();
        case Activation::Tanh:
            return (1.0 - post.array().square()).matrix();
    }
    return Eigen::MatrixXd::Ones(pre.rows(), pre.cols());
}

DenseLayer uniform_layer(std::size_t out, std::size_t in, bool with_bias, double scale, Rng& rng) {
    DenseLayer l;
    const double a = scale * std::sqrt(1.0 / static_cast<double>(in));
    l.weight.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    for (Eigen::Index j = 0; j < l.weight.cols(); ++j) {
        for (Eigen::Index i = 0; i < l.weight.rows(); ++i) l.weight(i, j) = rng.uniform(-a, a);
    }
    if (with_bias) l.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out));
    return l;
}

}  // namespace

std::string to_string(Activation a) { return a == Activation::Relu ? "relu" : "tanh"; }

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    throw ConfigError("unknown activation '" + s + "' (expected relu or tanh)");
}

void ModelConfig::validate() const {
    if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
    if (embedding_dim < 1) throw ConfigError("embedding_dim must be >= 1");
    if (hidden_layers.empty()) throw ConfigError("hidden_layers must be non-empty");
    for (std::size_t w : hidden_layers) {
        if (w < 1) throw ConfigError("hidden layer widths must be >= 1");
    }
    if (!(embedding_init_scale > 0.0) || !std::isfinite(embedding_init_scale)) {
        throw ConfigError("embedding_init_scale must be > 0");
    }
}

void ModelParams::for_each_tensor(const std::function<void(std::span<double>)>& fn) {
    for (DenseLayer& l : layers) {
        fn(as_span(l.weight));
        if (l.bias.size() > 0) fn(as_span(l.bias));
    }
    fn(as_span(head.weight));
    if (head.bias.size() > 0) fn(as_span(head.bias));
}

void ModelParams::for_each_tensor(const std::function<void(std::span<const double>)>& fn) const {
    for (const DenseLayer& l : layers) {
        fn(as_span(l.weight));
        if (l.bias.size() > 0) fn(as_span(l.bias));
    }
    fn(as_span(head.weight));
    if (head.bias.size() > 0) fn(as_span(head.bias));
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for_each_tensor([&](std::span<const double> t) { n += t.size(); });
    return n;
}

std::vector<double> ModelParams::flatten() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for_each_tensor([&](std::span<const double> t) { out.insert(out.end(), t.begin(), t.end()); });
    return out;
}

void ModelParams::assign(std::span<const double> flat) {
    if (flat.size() != parameter_count()) {
        throw DimensionMismatch("flat parameter vector has " + std::to_string(flat.size()) +
                                " values, model expects " + std::to_string(parameter_count()));
    }
    std::size_t pos = 0;
    for_each_tensor([&](std::span<double> t) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), t.size(), t.begin());
        pos += t.size();
    });
}

ModelParams ModelParams::zeros_like() const {
    ModelParams z = *this;
    z.for_each_tensor([](std::span<double> t) { std::fill(t.begin(), t.end(), 0.0); });
    return z;
}

void ModelParams::add(const ModelParams& other, double scale) {
    if (other.parameter_count() != parameter_count()) {
        throw DimensionMismatch("cannot add parameter sets of different shapes");
    }
    std::vector<double> mine = flatten();
    const std::vector<double> theirs = other.flatten();
    for (std::size_t i = 0; i < mine.size(); ++i) mine[i] += scale * theirs[i];
    assign(mine);
}

bool ModelParams::all_finite() const {
    bool ok = true;
    for_each_tensor([&](std::span<const double> t) {
        for (double v : t) ok = ok && std::isfinite(v);
    });
    return ok;
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    ModelParams p;
    std::size_t fan_in = cfg.input_dim;
    for (std::size_t width : cfg.hidden_layers) {
        p.layers.push_back(uniform_layer(width, fan_in, true, 1.0, rng));
        fan_in = width;
    }
    p.layers.push_back(
        uniform_layer(cfg.embedding_dim, fan_in, true, cfg.embedding_init_scale, rng));
    p.head = uniform_layer(2, cfg.embedding_dim, cfg.head_bias, 1.0 / cfg.embedding_init_scale, rng);
    return p;
}

std::vector<GazeAngles> ForwardCache::gaze() const {
    std::vector<GazeAngles> out(static_cast<std::size_t>(predictions.cols()));
    for (Eigen::Index j = 0; j < predictions.cols(); ++j) {
        out[static_cast<std::size_t>(j)] = {predictions(0, j), predictions(1, j)};
    }
    return out;
}

GazeNet::GazeNet(ModelConfig cfg, ModelParams params)
    : config_(std::move(cfg)), params_(std::move(params)) {
    config_.validate();
    if (params_.layers.size() != config_.hidden_layers.size() + 1) {
        throw DimensionMismatch("parameter layer count does not match config");
    }
    std::size_t fan_in = config_.input_dim;
    for (std::size_t i = 0; i < params_.layers.size(); ++i) {
        const std::size_t out =
            i < config_.hidden_layers.size() ? config_.hidden_layers[i] : config_.embedding_dim;
        const DenseLayer& l = params_.layers[i];
        if (l.weight.rows() != static_cast<Eigen::Index>(out) ||
            l.weight.cols() != static_cast<Eigen::Index>(fan_in) ||
            l.bias.size() != static_cast<Eigen::Index>(out)) {
            throw DimensionMismatch("layer " + std::to_string(i) + " shape does not match config");
        }
        fan_in = out;
    }
    if (params_.head.weight.rows() != 2 ||
        params_.head.weight.cols() != static_cast<Eigen::Index>(config_.embedding_dim) ||
        params_.head.bias.size() != (config_.head_bias ? 2 : 0)) {
        throw DimensionMismatch("head shape does not match config");
    }
}

GazeNet::GazeNet(const ModelConfig& cfg, std::uint64_t seed) : GazeNet(cfg, init_params(cfg, seed)) {}

GazeNet::Output GazeNet::forward(const Eigen::VectorXd& input) const {
    const ForwardCache c = forward_batch(input);
    return {c.embeddings.col(0), {c.predictions(0, 0), c.predictions(1, 0)}};
}

ForwardCache GazeNet::forward_batch(const Eigen::MatrixXd& inputs) const {
    if (inputs.rows() != static_cast<Eigen::Index>(config_.input_dim)) {
        throw DimensionMismatch("input has " + std::to_string(inputs.rows()) +
                                " features, model expects " + std::to_string(config_.input_dim));
    }
    ForwardCache c;
    c.input = inputs;
    const std::size_t n_layers = params_.layers.size();
    c.pre.reserve(n_layers);
    c.post.reserve(n_layers);
    const Eigen::MatrixXd* x = &c.input;
    for (std::size_t i = 0; i < n_layers; ++i) {
        const DenseLayer& l = params_.layers[i];
        Eigen::MatrixXd z = l.weight * *x;
        z.colwise() += l.bias;
        const bool last = i + 1 == n_layers;
        Eigen::MatrixXd a = last ? z : activate(config_.activation, z);
        c.pre.push_back(std::move(z));
        c.post.push_back(std::move(a));
        x = &c.post.back();
    }
    c.embeddings = c.post.back();
    c.predictions = params_.head.weight * c.embeddings;
    if (params_.head.bias.size() > 0) c.predictions.colwise() += params_.head.bias;
    return c;
}

GazeAngles GazeNet::head(const Eigen::VectorXd& embedding) const {
    if (embedding.size() != static_cast<Eigen::Index>(config_.embedding_dim)) {
        throw DimensionMismatch("embedding dimension does not match head");
    }
    Eigen::Vector2d g = params_.head.weight * embedding;
    if (params_.head.bias.size() > 0) g += params_.head.bias;
    return {g(0), g(1)};
}

ModelParams GazeNet::backward(const ForwardCache& cache, const Eigen::MatrixXd& d_embeddings,
                              const Eigen::MatrixXd& d_predictions) const {
    const Eigen::Index batch = cache.embeddings.cols();
    ModelParams g = params_.zeros_like();

    Eigen::MatrixXd d_emb = Eigen::MatrixXd::Zero(cache.embeddings.rows(), batch);
    if (d_embeddings.size() > 0) {
        if (d_embeddings.rows() != d_emb.rows() || d_embeddings.cols() != batch) {
            throw DimensionMismatch("embedding gradient shape does not match batch");
        }
        d_emb = d_embeddings;
    }
    if (d_predictions.size() > 0) {
        if (d_predictions.rows() != 2 || d_predictions.cols() != batch) {
            throw DimensionMismatch("prediction gradient shape does not match batch");
        }
        g.head.weight = d_predictions * cache.embeddings.transpose();
        if (g.head.bias.size() > 0) g.head.bias = d_predictions.rowwise().sum();
        d_emb += params_.head.weight.transpose() * d_predictions;
    }

    // d_out is dL/d(post-activation) of the current layer.
    Eigen::MatrixXd d_out = std::move(d_emb);
    for (std::size_t i = params_.layers.size(); i-- > 0;) {
        const bool last = i + 1 == params_.layers.size();
        Eigen::MatrixXd d_pre =
            last ? d_out
                 : d_out.cwiseProduct(activation_grad(config_.activation, cache.pre[i], cache.post[i]));
        const Eigen::MatrixXd& layer_in = i == 0 ? cache.input : cache.post[i - 1];
        g.layers[i].weight = d_pre * layer_in.transpose();
        g.layers[i].bias = d_pre.rowwise().sum();
        if (i > 0) d_out = params_.layers[i].weight.transpose() * d_pre;
    }
    return g;
}

void sgd_step(ModelParams& params, const ModelParams& grads, OptimizerState& state) {
    if (grads.parameter_count() != params.parameter_count()) {
        throw DimensionMismatch("gradient shape does not match parameters");
    }
    if (state.velocity.parameter_count() != params.parameter_count()) {
        state.velocity = params.zeros_like();
    }
    std::vector<double> p = params.flatten();
    std::vector<double> v = state.velocity.flatten();
    const std::vector<double> gr = grads.flatten();
    for (std::size_t i = 0; i < p.size(); ++i) {
        v[i] = state.momentum * v[i] + gr[i] + state.weight_decay * p[i];
        p[i] -= state.learning_rate * v[i];
        if (!std::isfinite(p[i]) || !std::isfinite(v[i])) {
            throw NonFiniteUpdate("non-finite value at flat parameter index " + std::to_string(i));
        }
    }
    params.assign(p);
    state.velocity.assign(v);
}

}  // namespace epcgaze
