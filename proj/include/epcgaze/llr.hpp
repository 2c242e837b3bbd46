#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "epcgaze/gaze.hpp"
#include "epcgaze/rng.hpp"

namespace epcgaze {

/// Locally linear representation of a target gaze hypothesis by k source
/// gaze labels.
struct NeighborConfig {
    /// Half-width of the box neighborhood in both yaw and pitch (radians).
    double mu = 0.15;
    std::size_t k = 4;
    /// Absolute L2 regularizer. When unset, lambda is derived from S as
    /// lambda_relative * max(trace(S) / k, 1e-8).
    std::optional<double> lambda_reg;
    double lambda_relative = 1e-3;

    void validate() const;
};

struct Neighborhood {
    std::size_t target_index = 0;
    std::vector<std::size_t> neighbor_indices;
};

struct LLRWeights {
    Eigen::VectorXd weights;
};

/// True when max(|dyaw|, |dpitch|) < mu (strict).
bool in_neighborhood(const GazeAngles& target, const GazeAngles& source, double mu);

/// Indices of every source label inside the box around `target`, ascending.
std::vector<std::size_t> neighbor_candidates(const GazeAngles& target,
                                             std::span<const GazeAngles> source_labels,
                                             double mu);

/// Picks k candidates uniformly without replacement. Returns nullopt when
/// fewer than k candidates exist; the caller skips that target.
std::optional<Neighborhood> select_neighbors(const GazeAngles& target_pred,
                                             std::span<const GazeAngles> source_labels,
                                             const NeighborConfig& cfg, Rng& rng,
                                             std::size_t target_index = 0);

/// S = D^T D where column i of D is (target - neighbor_i).
Eigen::MatrixXd local_covariance(const GazeAngles& target_pred,
                                 std::span<const GazeAngles> neighbors);

double effective_lambda(const Eigen::MatrixXd& S, const NeighborConfig& cfg);

/// Minimizer of W^T (S + lambda I) W subject to sum(W) = 1, via a Cholesky
/// solve of (S + lambda I) x = 1 followed by normalization.
LLRWeights solve_weights(const Eigen::MatrixXd& S, const NeighborConfig& cfg);

/// ||target - sum w_i g_i||^2 + lambda * sum w_i^2, with lambda resolved the
/// same way solve_weights resolves it.
double reconstruction_error(const GazeAngles& target_pred, std::span<const GazeAngles> neighbors,
                            const LLRWeights& w, const NeighborConfig& cfg);

/// sum w_i g_i
GazeAngles reconstruct(std::span<const GazeAngles> neighbors, const LLRWeights& w);

}  // namespace epcgaze
