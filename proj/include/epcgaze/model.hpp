#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "epcgaze/gaze.hpp"

namespace epcgaze {

enum class Activation { Relu, Tanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// Feature extractor phi is an MLP: each hidden layer is affine + activation,
/// the final embedding layer is affine only. The head h is a linear map from
/// the embedding to (yaw, pitch), optionally with a bias.
struct ModelConfig {
    std::size_t input_dim = 16;
    std::vector<std::size_t> hidden_layers{64, 64};
    std::size_t embedding_dim = 16;
    Activation activation = Activation::Relu;
    bool head_bias = true;
    /// Initial scale split between phi and h: the embedding layer's init
    /// range is multiplied by this factor and the head's divided by it, which
    /// leaves initial predictions unchanged. The EPC distance is measured in
    /// embedding units, so this fixes how strongly it weighs against the
    /// gaze loss.
    double embedding_init_scale = 0.2;

    void validate() const;
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct DenseLayer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;    // out, or empty when the layer has no bias
};

/// Parameters of phi (layers in order, embedding layer last) and of h.
/// Gradients and optimizer velocities use the same shape.
struct ModelParams {
    std::vector<DenseLayer> layers;
    DenseLayer head;

    /// Visits every tensor in declared order: for each phi layer weight then
    /// bias, then head weight, then head bias. Empty tensors are skipped.
    /// Weights are visited in column-major storage order.
    void for_each_tensor(const std::function<void(std::span<double>)>& fn);
    void for_each_tensor(const std::function<void(std::span<const double>)>& fn) const;

    std::size_t parameter_count() const;
    std::vector<double> flatten() const;
    void assign(std::span<const double> flat);
    ModelParams zeros_like() const;
    /// this += scale * other (shapes must match).
    void add(const ModelParams& other, double scale = 1.0);
    bool all_finite() const;
};

/// Weights ~ U(-a, a) with a = sqrt(1 / fan_in) (embedding layer and head
/// additionally rescaled by embedding_init_scale); biases zero.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

/// Activations retained from a batch forward pass for backward().
struct ForwardCache {
    Eigen::MatrixXd input;                    // D x B
    std::vector<Eigen::MatrixXd> pre;         // per phi layer, before activation
    std::vector<Eigen::MatrixXd> post;        // per phi layer, after activation
    Eigen::MatrixXd embeddings;               // F_g x B
    Eigen::Matrix2Xd predictions;             // 2 x B (row 0 yaw, row 1 pitch)

    std::vector<GazeAngles> gaze() const;
};

class GazeNet {
public:
    GazeNet() = default;
    GazeNet(ModelConfig cfg, ModelParams params);
    GazeNet(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const noexcept { return config_; }
    const ModelParams& params() const noexcept { return params_; }
    ModelParams& params() noexcept { return params_; }

    struct Output {
        Eigen::VectorXd embedding;
        GazeAngles gaze;
    };
    Output forward(const Eigen::VectorXd& input) const;

    /// Columns of `inputs` are samples.
    ForwardCache forward_batch(const Eigen::MatrixXd& inputs) const;

    /// Head only: h(e).
    GazeAngles head(const Eigen::VectorXd& embedding) const;

    /// Gradients of a scalar batch loss given its gradients w.r.t. the
    /// embeddings (F_g x B, may be empty for none) and the predictions
    /// (2 x B, may be empty). Upstream gradients already carry the loss's
    /// 1/B mean factor, so per-sample contributions are summed here.
    ModelParams backward(const ForwardCache& cache, const Eigen::MatrixXd& d_embeddings,
                         const Eigen::MatrixXd& d_predictions) const;

private:
    ModelConfig config_;
    ModelParams params_;
};

struct OptimizerState {
    double learning_rate = 0.001;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    ModelParams velocity;  // empty until the first step
};

/// Classical SGD with momentum and coupled L2 decay:
///   v <- momentum * v + grad + weight_decay * param
///   param <- param - lr * v
/// Throws NonFiniteUpdate (leaving params untouched) if any result is non-finite.
void sgd_step(ModelParams& params, const ModelParams& grads, OptimizerState& state);

}  // namespace epcgaze
