#include <cmath>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "epcgaze/errors.hpp"
#include "epcgaze/evaluation.hpp"
#include "oracles.hpp"

using namespace epcgaze;

namespace {

ExperimentConfig quick_experiment() {
    ExperimentConfig e;
    e.model.hidden_layers = {16};
    e.model.embedding_dim = 6;
    e.model.input_dim = 8;
    e.train.pretrain_epochs = 2;
    e.train.joint_iterations = 20;
    e.train.source_batch = 32;
    e.train.target_batch = 16;
    e.train.seed = 3;
    return e;
}

std::vector<Sample> quick_world(std::size_t subjects = 4) {
    GeneratorConfig g;
    g.n_subjects = subjects;
    g.samples_per_subject = 80;
    g.input_dim = 8;
    return generate_world(g, 41).samples;
}

}  // namespace

TEST(Evaluation, FitLineRecoversExactLine) {
    Rng r(1);
    for (int rep = 0; rep < 50; ++rep) {
        const double a = r.uniform(-2, 2), b = r.uniform(-1, 1);
        std::vector<double> x(30), y(30);
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] = r.uniform(-0.5, 0.5);
            y[i] = a * x[i] + b;
        }
        const LinearFit f = fit_line(x, y);
        EXPECT_NEAR(f.slope, a, 1e-10);
        EXPECT_NEAR(f.intercept, b, 1e-10);
    }
}

TEST(Evaluation, FitLineRejectsDegenerateInput) {
    EXPECT_THROW(fit_line(std::vector<double>{1.0}, std::vector<double>{2.0}), TooFewSamples);
    EXPECT_THROW(fit_line(std::vector<double>{1.0, 1.0}, std::vector<double>{2.0, 3.0}), InvalidInput);
    EXPECT_THROW(fit_line(std::vector<double>{1.0, 2.0}, std::vector<double>{2.0}), DimensionMismatch);
}

TEST(Evaluation, MaeMatchesOracleAndIsPermutationInvariant) {
    Rng r(2);
    std::vector<GazeAngles> pred(40), gt(40);
    double expect = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        pred[i] = {r.uniform(-0.5, 0.5), r.uniform(-0.4, 0.2)};
        gt[i] = {r.uniform(-0.5, 0.5), r.uniform(-0.4, 0.2)};
        expect += oracle::angle_between(pred[i], gt[i]);
    }
    const EvalReport a = evaluate_predictions(pred, gt, 7);
    EXPECT_NEAR(a.mae_degrees, rad_to_deg(expect / 40.0), 1e-9);
    EXPECT_EQ(a.subject_id, 7);
    EXPECT_EQ(a.sample_count, 40u);

    std::vector<std::size_t> p = r.sample_without_replacement(40, 40);
    std::vector<GazeAngles> pp, pg;
    for (std::size_t i : p) {
        pp.push_back(pred[i]);
        pg.push_back(gt[i]);
    }
    EXPECT_NEAR(evaluate_predictions(pp, pg).mae_degrees, a.mae_degrees, 1e-12);
}

TEST(Evaluation, ConstantOffsetShowsUpAsIntercept) {
    std::vector<GazeAngles> gt, pred;
    for (int i = 0; i < 50; ++i) {
        const GazeAngles g{-0.5 + 0.02 * i, -0.4 + 0.012 * i};
        gt.push_back(g);
        pred.push_back({g.yaw + 0.05, 0.9 * g.pitch - 0.03});
    }
    const EvalReport r = evaluate_predictions(pred, gt);
    EXPECT_NEAR(r.yaw_fit.slope, 1.0, 1e-10);
    EXPECT_NEAR(r.yaw_fit.intercept, 0.05, 1e-10);
    EXPECT_NEAR(r.pitch_fit.slope, 0.9, 1e-10);
    EXPECT_NEAR(r.pitch_fit.intercept, -0.03, 1e-10);
}

TEST(Evaluation, ImprovementPercent) {
    EXPECT_DOUBLE_EQ(improvement_percent(10.0, 8.0), 20.0);
    EXPECT_DOUBLE_EQ(improvement_percent(10.0, 12.0), -20.0);
}

TEST(Evaluation, SummaryAggregates) {
    auto result = [](int id, double b, double a, double bpi, double api) {
        SubjectResult r;
        r.subject_id = id;
        r.baseline.mae_degrees = b;
        r.adapted.mae_degrees = a;
        r.baseline.pitch_fit.intercept = bpi;
        r.adapted.pitch_fit.intercept = api;
        return r;
    };
    const CrossValidationSummary s =
        summarize({result(1, 4.0, 3.0, 0.1, -0.05), result(2, 6.0, 7.0, -0.3, 0.1)});
    EXPECT_DOUBLE_EQ(s.baseline_mean_mae, 5.0);
    EXPECT_DOUBLE_EQ(s.adapted_mean_mae, 5.0);
    EXPECT_DOUBLE_EQ(s.baseline_std_mae, 1.0);
    EXPECT_DOUBLE_EQ(s.adapted_std_mae, 2.0);
    EXPECT_DOUBLE_EQ(s.improvement_percent, 0.0);
    EXPECT_DOUBLE_EQ(s.baseline_mean_abs_pitch_intercept, 0.2);
    EXPECT_DOUBLE_EQ(s.adapted_mean_abs_pitch_intercept, 0.075);
    EXPECT_EQ(s.subjects_improved, 1u);
}

TEST(Evaluation, SubjectSeedsDiffer) {
    EXPECT_NE(subject_seed(1, 1), subject_seed(1, 2));
    EXPECT_NE(subject_seed(1, 1), subject_seed(2, 1));
    EXPECT_EQ(subject_seed(5, 3), subject_seed(5, 3));
}

TEST(Evaluation, BaselineAndAdaptedScoreTheSameSamples) {
    const auto samples = quick_world();
    const SubjectResult r = run_subject(samples, 3, quick_experiment());
    EXPECT_EQ(r.baseline.sample_count, 80u);
    EXPECT_EQ(r.adapted.sample_count, r.baseline.sample_count);
    EXPECT_EQ(r.baseline.subject_id, 3);
    EXPECT_EQ(r.adapted.subject_id, 3);
}

TEST(Evaluation, LosoIsIndependentOfThreadCount) {
    const auto samples = quick_world();
    ExperimentConfig one = quick_experiment(), many = quick_experiment();
    one.threads = 1;
    many.threads = 3;
    const CrossValidationSummary a = run_loso(samples, one), b = run_loso(samples, many);
    EXPECT_EQ(summary_csv(a), summary_csv(b));
    EXPECT_EQ(summary_json(a), summary_json(b));
    ASSERT_EQ(a.subjects.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a.subjects[i].subject_id, static_cast<int>(i) + 1);
}

TEST(Evaluation, LosoNeedsThreeSubjects) {
    auto samples = quick_world(3);
    std::erase_if(samples, [](const Sample& s) { return s.subject_id == 3; });
    EXPECT_THROW(run_loso(samples, quick_experiment()), InvalidInput);
}

TEST(Evaluation, AblationAppliesToTheRightField) {
    const ExperimentConfig base = quick_experiment();
    EXPECT_DOUBLE_EQ(apply_ablation(base, AblationAxis::Mu, "0.05").train.neighbor.mu, 0.05);
    EXPECT_EQ(apply_ablation(base, AblationAxis::K, "6").train.neighbor.k, 6u);
    EXPECT_EQ(apply_ablation(base, AblationAxis::EmbeddingDim, "32").model.embedding_dim, 32u);
    EXPECT_EQ(apply_ablation(base, AblationAxis::PretrainEpochs, "0").train.pretrain_epochs, 0u);
    EXPECT_EQ(apply_ablation(base, AblationAxis::DaTarget, "pred").train.da_target, DaTarget::Prediction);
    EXPECT_THROW(apply_ablation(base, AblationAxis::K, "1"), ConfigError);
    EXPECT_EQ(ablation_axis_from_string("fg"), AblationAxis::EmbeddingDim);
    EXPECT_THROW(ablation_axis_from_string("depth"), ConfigError);
}

TEST(Evaluation, AblationSweepHasOneRowPerValue) {
    ExperimentConfig base = quick_experiment();
    base.train.joint_iterations = 5;
    const auto rows = ablation_sweep(quick_world(), base, AblationAxis::Mu, {"0.05", "0.15", "0.3"});
    ASSERT_EQ(rows.size(), 3u);
    const std::string csv = ablation_csv(AblationAxis::Mu, rows);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
    EXPECT_EQ(csv.rfind("mu,", 0), 0u);
    // The baseline does not depend on mu.
    EXPECT_EQ(rows[0].summary.baseline_mean_mae, rows[2].summary.baseline_mean_mae);
}

TEST(Evaluation, ReportAndScatterFormats) {
    EvalReport r;
    r.subject_id = 4;
    r.mae_degrees = 3.5;
    const auto j = nlohmann::json::parse(report_json(r, "adapted"));
    EXPECT_EQ(j.at("label"), "adapted");
    EXPECT_EQ(j.at("subject_id"), 4);
    EXPECT_DOUBLE_EQ(j.at("mae_degrees").get<double>(), 3.5);
    const std::vector<GazeAngles> g{{0.1, 0.2}}, p{{0.3, 0.4}};
    EXPECT_EQ(scatter_csv(g, p), "gt_yaw,gt_pitch,pred_yaw,pred_pitch\n0.1,0.2,0.3,0.4\n");
}
