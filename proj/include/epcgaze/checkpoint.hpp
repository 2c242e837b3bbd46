#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "epcgaze/model.hpp"
#include "epcgaze/rng.hpp"
#include "epcgaze/trainer.hpp"

namespace epcgaze {

inline constexpr int kCheckpointSchemaVersion = 1;

/// On-disk JSON document:
///   schema_version, stage, model_config, parameters (flat, declared order),
///   optimizer {learning_rate, momentum, weight_decay, velocity (flat or null)},
///   rng {seed, state}, held_out_subject, step.
/// Doubles are written in shortest round-trip form.
struct Checkpoint {
    ModelConfig model;
    ModelParams params;
    OptimizerState optimizer;
    Rng rng;
    Stage stage = Stage::Initialized;
    int held_out_subject = 0;
    /// Joint-stage iteration for intermediate checkpoints, 0 at stage ends.
    std::size_t step = 0;

    GazeNet net() const { return GazeNet(model, params); }
};

std::string checkpoint_to_json(const Checkpoint& ckpt);
/// Throws FormatError on a malformed document or a schema version mismatch,
/// DimensionMismatch when the parameter array does not fit the config.
Checkpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws IoError when the file is missing or unreadable.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace epcgaze
