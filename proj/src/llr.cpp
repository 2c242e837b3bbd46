#include "epcgaze/llr.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "epcgaze/errors.hpp"

namespace epcgaze {

void NeighborConfig::validate() const {
    if (!(mu > 0.0)) throw ConfigError("neighbor mu must be > 0");
    if (k < 2) throw ConfigError("neighbor k must be >= 2");
    if (lambda_reg && !(*lambda_reg > 0.0)) throw ConfigError("lambda_reg must be > 0");
    if (!(lambda_relative > 0.0)) throw ConfigError("lambda_relative must be > 0");
}

bool in_neighborhood(const GazeAngles& target, const GazeAngles& source, double mu) {
    return std::max(std::abs(source.yaw - target.yaw), std::abs(source.pitch - target.pitch)) < mu;
}

std::vector<std::size_t> neighbor_candidates(const GazeAngles& target,
                                             std::span<const GazeAngles> source_labels,
                                             double mu) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < source_labels.size(); ++i) {
        if (in_neighborhood(target, source_labels[i], mu)) out.push_back(i);
    }
    return out;
}

std::optional<Neighborhood> select_neighbors(const GazeAngles& target_pred,
                                             std::span<const GazeAngles> source_labels,
                                             const NeighborConfig& cfg, Rng& rng,
                                             std::size_t target_index) {
    if (source_labels.empty()) throw InvalidInput("select_neighbors: empty source labels");
    const std::vector<std::size_t> candidates =
        neighbor_candidates(target_pred, source_labels, cfg.mu);
    if (candidates.size() < cfg.k) return std::nullopt;

    Neighborhood nb;
    nb.target_index = target_index;
    nb.neighbor_indices.reserve(cfg.k);
    for (std::size_t pick : rng.sample_without_replacement(candidates.size(), cfg.k)) {
        nb.neighbor_indices.push_back(candidates[pick]);
    }
    return nb;
}

Eigen::MatrixXd local_covariance(const GazeAngles& target_pred,
                                 std::span<const GazeAngles> neighbors) {
    const auto k = static_cast<Eigen::Index>(neighbors.size());
    if (k < 2) throw InvalidInput("local_covariance needs at least 2 neighbors");
    Eigen::Matrix2Xd diff(2, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        diff(0, i) = target_pred.yaw - neighbors[i].yaw;
        diff(1, i) = target_pred.pitch - neighbors[i].pitch;
    }
    return diff.transpose() * diff;
}

double effective_lambda(const Eigen::MatrixXd& S, const NeighborConfig& cfg) {
    if (cfg.lambda_reg) return *cfg.lambda_reg;
    const double mean_diag = S.trace() / static_cast<double>(S.rows());
    return cfg.lambda_relative * std::max(mean_diag, 1e-8);
}

LLRWeights solve_weights(const Eigen::MatrixXd& S, const NeighborConfig& cfg) {
    if (S.rows() != S.cols() || S.rows() < 2) {
        throw DimensionMismatch("solve_weights expects a square matrix with k >= 2");
    }
    const double lambda = effective_lambda(S, cfg);
    Eigen::MatrixXd reg = S;
    reg.diagonal().array() += lambda;

    const Eigen::LLT<Eigen::MatrixXd> llt(reg);
    if (llt.info() != Eigen::Success) {
        throw SingularSystem("S + lambda I is not positive definite");
    }
    Eigen::VectorXd x = llt.solve(Eigen::VectorXd::Ones(S.rows()));
    const double denom = x.sum();
    if (!std::isfinite(denom) || denom == 0.0 || !x.allFinite()) {
        throw SingularSystem("degenerate normalization in LLR weight solve");
    }
    return {x / denom};
}

GazeAngles reconstruct(std::span<const GazeAngles> neighbors, const LLRWeights& w) {
    if (static_cast<Eigen::Index>(neighbors.size()) != w.weights.size()) {
        throw DimensionMismatch("neighbor count differs from weight count");
    }
    GazeAngles out{0.0, 0.0};
    for (std::size_t i = 0; i < neighbors.size(); ++i) {
        const double wi = w.weights(static_cast<Eigen::Index>(i));
        out.yaw += wi * neighbors[i].yaw;
        out.pitch += wi * neighbors[i].pitch;
    }
    return out;
}

double reconstruction_error(const GazeAngles& target_pred, std::span<const GazeAngles> neighbors,
                            const LLRWeights& w, const NeighborConfig& cfg) {
    const GazeAngles rec = reconstruct(neighbors, w);
    const double dy = target_pred.yaw - rec.yaw;
    const double dp = target_pred.pitch - rec.pitch;
    const double lambda = effective_lambda(local_covariance(target_pred, neighbors), cfg);
    return dy * dy + dp * dp + lambda * w.weights.squaredNorm();
}

}  // namespace epcgaze
