#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "epcgaze/model.hpp"
#include "epcgaze/synthetic.hpp"
#include "epcgaze/trainer.hpp"

namespace epcgaze {

/// Ordinary least squares line pred = slope * gt + intercept.
struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
};

/// Throws TooFewSamples below 2 points, InvalidInput if x is constant.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

struct EvalReport {
    int subject_id = 0;
    std::size_t sample_count = 0;
    double mae_degrees = 0.0;
    LinearFit yaw_fit;
    LinearFit pitch_fit;
};

/// Scores arbitrary predictions against groundtruth.
EvalReport evaluate_predictions(std::span<const GazeAngles> pred, std::span<const GazeAngles> gt,
                                int subject_id = 0);

/// Columns of `features` are samples aligned with `gt`.
EvalReport evaluate(const GazeNet& net, const Eigen::MatrixXd& features,
                    std::span<const GazeAngles> gt, int subject_id = 0);

/// Model configuration and training configuration for one experiment.
struct ExperimentConfig {
    ModelConfig model;
    TrainConfig train;
    /// Worker threads for per-subject runs; 0 picks hardware concurrency.
    std::size_t threads = 0;
};

struct SubjectResult {
    int subject_id = 0;
    EvalReport baseline;
    EvalReport adapted;
    std::vector<std::string> warnings;
};

struct CrossValidationSummary {
    std::vector<SubjectResult> subjects;
    double baseline_mean_mae = 0.0;
    double baseline_std_mae = 0.0;
    double adapted_mean_mae = 0.0;
    double adapted_std_mae = 0.0;
    /// (baseline - adapted) / baseline of the mean MAEs, in percent.
    double improvement_percent = 0.0;
    double baseline_mean_abs_pitch_intercept = 0.0;
    double adapted_mean_abs_pitch_intercept = 0.0;
    double baseline_mean_abs_yaw_intercept = 0.0;
    double adapted_mean_abs_yaw_intercept = 0.0;
    std::size_t subjects_improved = 0;
};

double improvement_percent(double baseline_mae, double adapted_mae);

/// Seed of the per-subject run derived from the experiment seed.
std::uint64_t subject_seed(std::uint64_t seed, int subject_id);

/// One held-out subject: split, pretrain, baseline report, adapt, adapted
/// report. Both reports score the identical held-out sample set.
SubjectResult run_subject(const std::vector<Sample>& samples, int held_out_id,
                          const ExperimentConfig& cfg);

CrossValidationSummary summarize(std::vector<SubjectResult> results);

/// Leave-one-subject-out over every subject present in `samples`.
CrossValidationSummary run_loso(const std::vector<Sample>& samples, const ExperimentConfig& cfg);

enum class AblationAxis { Mu, K, EmbeddingDim, PretrainEpochs, DaTarget };
std::string to_string(AblationAxis a);
AblationAxis ablation_axis_from_string(const std::string& s);

/// Returns a copy of `base` with the axis set to `value`.
ExperimentConfig apply_ablation(const ExperimentConfig& base, AblationAxis axis,
                                const std::string& value);

struct AblationRow {
    std::string value;
    CrossValidationSummary summary;
};

std::vector<AblationRow> ablation_sweep(const std::vector<Sample>& samples,
                                        const ExperimentConfig& base, AblationAxis axis,
                                        const std::vector<std::string>& values);

// Text outputs.
std::string report_json(const EvalReport& r, const std::string& label);
std::string summary_csv(const CrossValidationSummary& s);
std::string summary_json(const CrossValidationSummary& s);
std::string ablation_csv(AblationAxis axis, const std::vector<AblationRow>& rows);
/// gt_yaw,gt_pitch,pred_yaw,pred_pitch per row.
std::string scatter_csv(std::span<const GazeAngles> gt, std::span<const GazeAngles> pred);

std::vector<GazeAngles> predict(const GazeNet& net, const Eigen::MatrixXd& features);

}  // namespace epcgaze
