#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "epcgaze/llr.hpp"

namespace epcgaze {

using Embedding = Eigen::VectorXd;
/// Batch of embeddings, one column per sample.
using EmbeddingBatch = Eigen::MatrixXd;

struct LossWeights {
    double lambda_epc = 1.0;
    double lambda_gaze = 1.0;

    void validate() const;
};

/// How the summed per-target L1 distances are normalized.
enum class EpcNormalization {
    BatchSize,      // divide by B_t, skipped targets included
    Participating,  // divide by the number of targets that had k neighbors
};

struct EpcBatchResult {
    double loss = 0.0;
    std::size_t participating = 0;
    std::size_t skipped = 0;
};

/// One participating target: its neighbors in the source batch and the
/// LLR weights (held constant during backpropagation).
struct EpcTerm {
    std::size_t target_index = 0;
    std::vector<std::size_t> neighbor_indices;
    LLRWeights weights;
};

/// sum_i w_i * e_i. Pairs are accumulated in a canonical order so any
/// permutation of (embedding, weight) pairs yields the identical result.
Embedding hypothesis_embedding(std::span<const Embedding> source_embeddings, const LLRWeights& w);

/// Same, with the k embeddings addressed as columns of a source batch.
Embedding hypothesis_embedding(const EmbeddingBatch& source_embeddings,
                               std::span<const std::size_t> neighbor_indices,
                               const LLRWeights& w);

/// (1/B_t) sum_j ||phi_j - hyp_j||_1 over targets with a hypothesis;
/// nullopt entries are skipped targets contributing zero.
EpcBatchResult epc_loss(const EmbeddingBatch& target_embeddings,
                        std::span<const std::optional<Embedding>> hypotheses,
                        EpcNormalization norm = EpcNormalization::BatchSize);

struct EpcGradients {
    EpcBatchResult result;
    EmbeddingBatch d_target;  ///< dL/d(target embeddings)
    EmbeddingBatch d_source;  ///< dL/d(source embeddings)
};

/// Loss and gradients w.r.t. both target and source embeddings, weights
/// held constant. sign(0) is taken as 0.
EpcGradients epc_loss_and_grad(const EmbeddingBatch& target_embeddings,
                               const EmbeddingBatch& source_embeddings,
                               std::span<const EpcTerm> terms,
                               EpcNormalization norm = EpcNormalization::BatchSize);

double da_loss(double epc, double gaze, const LossWeights& lw);

}  // namespace epcgaze
