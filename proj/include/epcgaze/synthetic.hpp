#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "epcgaze/gaze.hpp"
#include "epcgaze/rng.hpp"

namespace epcgaze {

/// Synthetic multi-subject gaze world. Each subject sees gaze g through
///   features = gain * Phi(g + bias_shift) + feature_offset + N(0, noise_sigma^2)
/// where Phi is a frozen random two-layer tanh network from gaze to
/// features, shared by every subject.
struct GeneratorConfig {
    std::size_t n_subjects = 10;
    std::size_t samples_per_subject = 1500;
    std::size_t input_dim = 16;
    std::size_t true_map_hidden = 32;

    double yaw_min = -0.5, yaw_max = 0.5;
    double pitch_min = -0.4, pitch_max = 0.2;

    /// Per-subject gaze-space shift. Each component is drawn from
    /// N(0, sigma^2) clipped to [-max, max], or from U(-max, max) when
    /// bias_shift_uniform is set.
    double bias_shift_max = 0.15;
    double bias_shift_sigma = 0.03;
    bool bias_shift_uniform = false;
    /// Per-subject feature offset, each component ~ N(0, scale^2).
    double offset_scale = 0.5;
    /// Per-subject gain ~ U(1 - spread, 1 + spread).
    double gain_spread = 0.1;
    double noise_sigma = 0.02;
    /// When set, every subject shares one profile (no domain shift).
    bool identical_subjects = false;

    void validate() const;
};

struct SubjectProfile {
    int subject_id = 0;
    GazeAngles bias_shift;
    Eigen::VectorXd feature_offset;
    double gain = 1.0;
    double noise_sigma = 0.0;
};

struct Sample {
    int subject_id = 0;
    Eigen::VectorXd features;
    GazeAngles gaze;
};

/// Frozen ground-truth map from gaze to appearance features.
struct TrueFeatureMap {
    Eigen::MatrixXd w1;  // hidden x 2
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;  // input_dim x hidden

    Eigen::VectorXd operator()(const GazeAngles& g) const;
};

struct World {
    GeneratorConfig config;
    std::uint64_t seed = 0;
    TrueFeatureMap true_map;
    std::vector<SubjectProfile> subjects;
    std::vector<Sample> samples;

    std::vector<int> subject_ids() const;
};

TrueFeatureMap make_true_map(const GeneratorConfig& cfg, Rng& rng);
std::vector<SubjectProfile> make_profiles(const GeneratorConfig& cfg, Rng& rng);

/// Pure function of (cfg, seed). Subject ids are 1..n_subjects.
World generate_world(const GeneratorConfig& cfg, std::uint64_t seed);

/// Labeled source samples, one feature column per sample.
struct SourceDomain {
    Eigen::MatrixXd features;
    std::vector<GazeAngles> gaze;
    std::vector<int> subject_ids;

    std::size_t size() const { return gaze.size(); }
};

/// Unlabeled target samples. Deliberately has no gaze field.
struct TargetDomain {
    Eigen::MatrixXd features;
    std::vector<int> subject_ids;

    std::size_t size() const { return subject_ids.size(); }
};

/// Hidden labels of the target domain, readable only by evaluation.
struct TargetGroundTruth {
    std::vector<GazeAngles> gaze;
};

struct DomainSplit {
    int held_out_subject = 0;
    SourceDomain source;
    TargetDomain target;
    TargetGroundTruth target_gt;
};

/// Throws UnknownSubject if no sample belongs to `held_out_id`.
DomainSplit leave_one_subject_out(const std::vector<Sample>& samples, int held_out_id);

struct SourceBatch {
    std::vector<std::size_t> indices;
    Eigen::MatrixXd features;
    std::vector<GazeAngles> gaze;
};

struct TargetBatch {
    std::vector<std::size_t> indices;
    Eigen::MatrixXd features;
};

/// `count` indices from [0, n): distinct while count <= n, otherwise
/// concatenated independent shuffles.
std::vector<std::size_t> draw_batch_indices(std::size_t n, std::size_t count, Rng& rng);

SourceBatch gather_source(const SourceDomain& source, std::vector<std::size_t> indices);
TargetBatch gather_target(const TargetDomain& target, std::vector<std::size_t> indices);

std::pair<SourceBatch, TargetBatch> sample_batches(const SourceDomain& source,
                                                   const TargetDomain& target, std::size_t source_batch,
                                                   std::size_t target_batch, Rng& rng);

// Dataset file: comma-separated, header `subject_id,yaw,pitch,f0,...`, one
// sample per row, shortest round-trip decimal formatting.
void write_dataset_csv(const std::filesystem::path& path, const std::vector<Sample>& samples);
std::vector<Sample> read_dataset_csv(const std::filesystem::path& path);

/// Sidecar metadata (generator config and seed) as JSON text.
std::string generator_metadata_json(const GeneratorConfig& cfg, std::uint64_t seed);
void write_generator_metadata(const std::filesystem::path& path, const GeneratorConfig& cfg,
                              std::uint64_t seed);

}  // namespace epcgaze
