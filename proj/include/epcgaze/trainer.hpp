#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "epcgaze/epc.hpp"
#include "epcgaze/llr.hpp"
#include "epcgaze/model.hpp"
#include "epcgaze/synthetic.hpp"

namespace epcgaze {

/// Which source labels anchor the target neighborhoods and LLR weights.
enum class DaTarget {
    GroundTruth,  // source groundtruth labels
    Prediction,   // source predictions from the frozen forward pass
};

std::string to_string(DaTarget t);
DaTarget da_target_from_string(const std::string& s);
std::string to_string(EpcNormalization n);
EpcNormalization epc_normalization_from_string(const std::string& s);

struct TrainConfig {
    std::size_t pretrain_epochs = 5;
    std::size_t pretrain_batch = 64;
    std::size_t joint_iterations = 1000;
    std::size_t source_batch = 64;
    std::size_t target_batch = 64;

    NeighborConfig neighbor;
    LossWeights loss;
    DaTarget da_target = DaTarget::GroundTruth;
    EpcNormalization epc_normalization = EpcNormalization::BatchSize;

    double learning_rate = 0.001;
    double momentum = 0.9;
    double weight_decay = 5e-4;

    /// Stop the joint stage once the mean L_DA of consecutive windows
    /// improves by less than early_stop_min_delta.
    bool early_stop = true;
    std::size_t early_stop_window = 100;
    double early_stop_min_delta = 1e-4;
    /// Warn when fewer than this fraction of targets participate in a window.
    double degenerate_fraction = 0.05;

    std::uint64_t seed = 0;

    void validate() const;
    OptimizerState make_optimizer() const;
};

enum class Stage { Initialized, Pretrained, Adapted };
std::string to_string(Stage s);
Stage stage_from_string(const std::string& s);

struct StepRecord {
    Stage stage = Stage::Pretrained;
    std::size_t step = 0;   // 1-based within the stage
    std::size_t epoch = 0;  // pretraining epoch, 0 in the joint stage
    double loss_gaze = 0.0;
    double loss_epc = 0.0;
    double loss_da = 0.0;
    std::size_t participating = 0;
    std::size_t skipped = 0;
    double source_mae_deg = 0.0;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double mean_loss_gaze = 0.0;
    double mean_source_mae_deg = 0.0;
};

/// Append-only record of a training run: one StepRecord per optimizer step.
struct TrainLog {
    std::vector<StepRecord> steps;
    std::vector<EpochRecord> epochs;
    std::vector<std::string> warnings;
    std::optional<std::size_t> early_stopped_at;

    void append(const TrainLog& other);
    void write_csv(const std::filesystem::path& path) const;
    std::string to_csv() const;
    friend bool operator==(const TrainLog&, const TrainLog&);
};

/// Source-only stage: pretrain_epochs passes over the shuffled source
/// domain with the gaze loss. The target domain is never touched.
TrainLog pretrain(GazeNet& net, OptimizerState& opt, const SourceDomain& source,
                  const TrainConfig& cfg);

/// Per-iteration diagnostics handed to an optional observer (e.g. a
/// checkpoint writer). Called between optimizer steps only.
using StepObserver = std::function<void(const StepRecord&, const GazeNet&, const OptimizerState&)>;

/// Joint stage. Each iteration refreshes the target hypothesis labels with
/// the current (frozen) parameters, builds neighborhoods and LLR weights,
/// then takes one SGD step on lambda_epc * L_EPC + lambda_gaze * L_gaze with
/// the weights held constant. Takes no target labels by construction.
TrainLog adapt(GazeNet& net, OptimizerState& opt, const SourceDomain& source,
               const TargetDomain& target, const TrainConfig& cfg,
               Stage current_stage = Stage::Pretrained, const StepObserver& observer = {});

/// Everything one joint iteration computes before the parameter update.
/// Exposed for tests of the alternation and skip contracts.
struct JointStep {
    std::vector<GazeAngles> target_hypotheses;
    std::vector<EpcTerm> terms;
    EpcGradients epc;
    double loss_gaze = 0.0;
    double loss_da = 0.0;
    double source_mae_deg = 0.0;
    ModelParams grads;
};

JointStep compute_joint_step(const GazeNet& net, const SourceBatch& source,
                             const TargetBatch& target, const TrainConfig& cfg,
                             const Rng& neighbor_rng);

}  // namespace epcgaze
