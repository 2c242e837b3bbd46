#include "epcgaze/epc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "epcgaze/errors.hpp"

namespace epcgaze {

namespace {

double sign_or_zero(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

double divisor(EpcNormalization norm, std::size_t batch, std::size_t participating) {
    return static_cast<double>(norm == EpcNormalization::BatchSize ? batch : participating);
}

}  // namespace

void LossWeights::validate() const {
    if (!(lambda_epc >= 0.0) || !(lambda_gaze >= 0.0)) {
        throw ConfigError("loss weights must be >= 0");
    }
}

Embedding hypothesis_embedding(std::span<const Embedding> source_embeddings, const LLRWeights& w) {
    const std::size_t k = source_embeddings.size();
    if (static_cast<Eigen::Index>(k) != w.weights.size()) {
        throw DimensionMismatch("embedding count differs from weight count");
    }
    if (k == 0) throw DimensionMismatch("hypothesis embedding needs at least one neighbor");
    const Eigen::Index dim = source_embeddings[0].size();
    for (const Embedding& e : source_embeddings) {
        if (e.size() != dim) throw DimensionMismatch("source embeddings differ in dimension");
    }

    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double wa = w.weights(static_cast<Eigen::Index>(a));
        const double wb = w.weights(static_cast<Eigen::Index>(b));
        if (wa != wb) return wa < wb;
        const Embedding& ea = source_embeddings[a];
        const Embedding& eb = source_embeddings[b];
        return std::lexicographical_compare(ea.data(), ea.data() + dim, eb.data(), eb.data() + dim);
    });

    Embedding out = Embedding::Zero(dim);
    for (std::size_t i : order) {
        out += w.weights(static_cast<Eigen::Index>(i)) * source_embeddings[i];
    }
    return out;
}

Embedding hypothesis_embedding(const EmbeddingBatch& source_embeddings,
                               std::span<const std::size_t> neighbor_indices,
                               const LLRWeights& w) {
    if (static_cast<Eigen::Index>(neighbor_indices.size()) != w.weights.size()) {
        throw DimensionMismatch("neighbor count differs from weight count");
    }
    std::vector<Embedding> picked;
    picked.reserve(neighbor_indices.size());
    for (std::size_t idx : neighbor_indices) {
        if (static_cast<Eigen::Index>(idx) >= source_embeddings.cols()) {
            throw DimensionMismatch("neighbor index outside source batch");
        }
        picked.emplace_back(source_embeddings.col(static_cast<Eigen::Index>(idx)));
    }
    return hypothesis_embedding(std::span<const Embedding>(picked), w);
}

EpcBatchResult epc_loss(const EmbeddingBatch& target_embeddings,
                        std::span<const std::optional<Embedding>> hypotheses,
                        EpcNormalization norm) {
    if (static_cast<Eigen::Index>(hypotheses.size()) != target_embeddings.cols()) {
        throw DimensionMismatch("hypothesis list not aligned with target batch");
    }
    EpcBatchResult r;
    double total = 0.0;
    for (std::size_t j = 0; j < hypotheses.size(); ++j) {
        if (!hypotheses[j]) {
            ++r.skipped;
            continue;
        }
        const auto col = target_embeddings.col(static_cast<Eigen::Index>(j));
        if (hypotheses[j]->size() != col.size()) {
            throw DimensionMismatch("hypothesis embedding dimension differs from target");
        }
        total += (col - *hypotheses[j]).cwiseAbs().sum();
        ++r.participating;
    }
    if (r.participating > 0) {
        r.loss = total / divisor(norm, hypotheses.size(), r.participating);
    }
    return r;
}

EpcGradients epc_loss_and_grad(const EmbeddingBatch& target_embeddings,
                               const EmbeddingBatch& source_embeddings,
                               std::span<const EpcTerm> terms, EpcNormalization norm) {
    if (target_embeddings.rows() != source_embeddings.rows()) {
        throw DimensionMismatch("source and target embedding dimensions differ");
    }
    const auto batch = static_cast<std::size_t>(target_embeddings.cols());
    EpcGradients g;
    g.d_target = EmbeddingBatch::Zero(target_embeddings.rows(), target_embeddings.cols());
    g.d_source = EmbeddingBatch::Zero(source_embeddings.rows(), source_embeddings.cols());
    g.result.participating = terms.size();
    g.result.skipped = batch - terms.size();
    if (terms.empty()) return g;

    const double scale = 1.0 / divisor(norm, batch, terms.size());
    double total = 0.0;
    for (const EpcTerm& t : terms) {
        if (t.target_index >= batch) throw DimensionMismatch("target index outside batch");
        const auto tj = static_cast<Eigen::Index>(t.target_index);
        const Embedding hyp = hypothesis_embedding(source_embeddings, t.neighbor_indices, t.weights);
        const Embedding diff = target_embeddings.col(tj) - hyp;
        total += diff.cwiseAbs().sum();

        const Embedding s = diff.unaryExpr(&sign_or_zero) * scale;
        g.d_target.col(tj) += s;
        for (std::size_t i = 0; i < t.neighbor_indices.size(); ++i) {
            g.d_source.col(static_cast<Eigen::Index>(t.neighbor_indices[i])) -=
                t.weights.weights(static_cast<Eigen::Index>(i)) * s;
        }
    }
    g.result.loss = total * scale;
    return g;
}

double da_loss(double epc, double gaze, const LossWeights& lw) {
    return lw.lambda_epc * epc + lw.lambda_gaze * gaze;
}

}  // namespace epcgaze
