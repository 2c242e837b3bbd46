#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "epcgaze/errors.hpp"
#include "epcgaze/model.hpp"
#include "oracles.hpp"

using namespace epcgaze;

namespace {

ModelConfig tiny(Activation act = Activation::Tanh) {
    ModelConfig c;
    c.input_dim = 4;
    c.hidden_layers = {8};
    c.embedding_dim = 4;
    c.activation = act;
    return c;
}

Eigen::MatrixXd random_matrix(Rng& r, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = scale * r.normal();
    }
    return m;
}

}  // namespace

TEST(Model, InitShapesAndCount) {
    const ModelConfig cfg;  // 16 -> 64 -> 64 -> 16, head 2x16 + 2
    const ModelParams p = init_params(cfg, 1);
    ASSERT_EQ(p.layers.size(), 3u);
    EXPECT_EQ(p.layers[0].weight.rows(), 64);
    EXPECT_EQ(p.layers[0].weight.cols(), 16);
    EXPECT_EQ(p.layers[2].weight.rows(), 16);
    EXPECT_EQ(p.head.weight.rows(), 2);
    EXPECT_EQ(p.parameter_count(), (16 * 64 + 64) + (64 * 64 + 64) + (64 * 16 + 16) + (2 * 16 + 2));
}

TEST(Model, InitIsUniformInFanInRange) {
    ModelConfig cfg;
    cfg.hidden_layers = {400};
    cfg.input_dim = 100;
    const ModelParams p = init_params(cfg, 2);
    const Eigen::MatrixXd& w = p.layers[0].weight;
    const double a = std::sqrt(1.0 / 100.0);
    EXPECT_LE(w.cwiseAbs().maxCoeff(), a);
    // U(-a, a): mean 0, variance a^2 / 3; 40000 draws.
    const double n = static_cast<double>(w.size());
    const double mean = w.mean();
    const double var = (w.array() - mean).square().sum() / n;
    EXPECT_NEAR(mean, 0.0, 5.0 * a / std::sqrt(3.0 * n));
    EXPECT_NEAR(var, a * a / 3.0, 0.03 * a * a / 3.0);
    EXPECT_EQ(p.layers[0].bias.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(p.head.bias.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Model, EmbeddingScaleSplitsBetweenPhiAndHead) {
    ModelConfig a = tiny(), b = tiny();
    a.embedding_init_scale = 1.0;
    b.embedding_init_scale = 0.25;
    const ModelParams pa = init_params(a, 3), pb = init_params(b, 3);
    EXPECT_TRUE(pa.layers[0].weight.isApprox(pb.layers[0].weight, 0.0));
    EXPECT_LT((0.25 * pa.layers[1].weight - pb.layers[1].weight).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((4.0 * pa.head.weight - pb.head.weight).cwiseAbs().maxCoeff(), 1e-14);
    // Predictions are unchanged by the split.
    const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(4, -1.0, 1.0);
    const GazeAngles ga = GazeNet(a, pa).forward(x).gaze, gb = GazeNet(b, pb).forward(x).gaze;
    EXPECT_NEAR(ga.yaw, gb.yaw, 1e-14);
    EXPECT_NEAR(ga.pitch, gb.pitch, 1e-14);
}

TEST(Model, InitIsSeedDeterministic) {
    EXPECT_EQ(init_params(tiny(), 5).flatten(), init_params(tiny(), 5).flatten());
    EXPECT_NE(init_params(tiny(), 5).flatten(), init_params(tiny(), 6).flatten());
}

TEST(Model, FlattenOrderAndRoundTrip) {
    const ModelParams p = init_params(tiny(), 7);
    const std::vector<double> flat = p.flatten();
    ASSERT_EQ(flat.size(), p.parameter_count());
    // Column-major within each weight, phi layers first, then the head.
    EXPECT_EQ(flat[0], p.layers[0].weight(0, 0));
    EXPECT_EQ(flat[1], p.layers[0].weight(1, 0));
    EXPECT_EQ(flat[8], p.layers[0].weight(0, 1));
    EXPECT_EQ(flat[32], p.layers[0].bias(0));
    EXPECT_EQ(flat[flat.size() - 1], p.head.bias(1));
    EXPECT_EQ(flat[flat.size() - 3], p.head.weight(1, 3));

    ModelParams q = p.zeros_like();
    q.assign(flat);
    EXPECT_EQ(q.flatten(), flat);
    EXPECT_THROW(q.assign(std::vector<double>(3, 0.0)), DimensionMismatch);
}

TEST(Model, HeadWithoutBias) {
    ModelConfig c = tiny();
    c.head_bias = false;
    const ModelParams p = init_params(c, 8);
    EXPECT_EQ(p.head.bias.size(), 0);
    EXPECT_EQ(p.parameter_count(), init_params(tiny(), 8).parameter_count() - 2);
}

TEST(Model, ForwardMatchesOracleAndBatch) {
    for (Activation act : {Activation::Relu, Activation::Tanh}) {
        const ModelConfig cfg = tiny(act);
        const GazeNet net(cfg, 9);
        Rng r(10);
        const Eigen::MatrixXd X = random_matrix(r, 4, 11);
        const ForwardCache cache = net.forward_batch(X);
        for (Eigen::Index j = 0; j < X.cols(); ++j) {
            const oracle::Forward f = oracle::forward(cfg, net.params(), X.col(j));
            const GazeNet::Output o = net.forward(X.col(j));
            EXPECT_LT((o.embedding - f.embedding).cwiseAbs().maxCoeff(), 1e-14);
            EXPECT_LT((cache.embeddings.col(j) - f.embedding).cwiseAbs().maxCoeff(), 1e-14);
            EXPECT_NEAR(cache.predictions(0, j), f.gaze.yaw, 1e-14);
            EXPECT_NEAR(cache.predictions(1, j), f.gaze.pitch, 1e-14);
            const GazeAngles h = net.head(o.embedding);
            EXPECT_NEAR(h.yaw, o.gaze.yaw, 1e-15);
        }
    }
}

TEST(Model, BackwardMatchesFiniteDifferences) {
    // Scalar probe L = <A, embeddings> + <B, predictions>; its gradient with
    // upstream (A, B) must equal backward()'s result.
    for (Activation act : {Activation::Relu, Activation::Tanh}) {
        const ModelConfig cfg = tiny(act);
        const GazeNet net(cfg, 11);
        Rng r(12);
        const Eigen::MatrixXd X = random_matrix(r, 4, 5);
        const Eigen::MatrixXd A = random_matrix(r, 4, 5), B = random_matrix(r, 2, 5);
        const std::vector<double> grad = net.backward(net.forward_batch(X), A, B).flatten();
        auto f = [&](const std::vector<double>& flat) {
            ModelParams p = net.params();
            p.assign(flat);
            double v = 0.0;
            for (Eigen::Index j = 0; j < X.cols(); ++j) {
                const oracle::Forward o = oracle::forward(cfg, p, X.col(j));
                v += A.col(j).dot(o.embedding) + B(0, j) * o.gaze.yaw + B(1, j) * o.gaze.pitch;
            }
            return v;
        };
        const std::vector<double> flat = net.params().flatten();
        for (std::size_t i = 0; i < flat.size(); ++i) {
            EXPECT_LT(oracle::relative_error(grad[i], oracle::central_difference(f, flat, i, 1e-6)), 1e-6)
                << to_string(act) << " parameter " << i;
        }
    }
}

TEST(Model, BackwardAcceptsEmptyUpstream) {
    const GazeNet net(tiny(), 13);
    Rng r(14);
    const Eigen::MatrixXd X = random_matrix(r, 4, 3);
    const ForwardCache c = net.forward_batch(X);
    const Eigen::MatrixXd B = random_matrix(r, 2, 3);
    const ModelParams only_pred = net.backward(c, Eigen::MatrixXd(), B);
    const ModelParams both = net.backward(c, Eigen::MatrixXd::Zero(4, 3), B);
    EXPECT_EQ(only_pred.flatten(), both.flatten());
    EXPECT_THROW(net.backward(c, Eigen::MatrixXd::Zero(3, 3), B), DimensionMismatch);
}

TEST(Model, ShapeValidation) {
    ModelParams p = init_params(tiny(), 15);
    p.layers[0].weight.resize(3, 3);
    EXPECT_THROW(GazeNet(tiny(), p), DimensionMismatch);
    const GazeNet net(tiny(), 15);
    EXPECT_THROW(net.forward(Eigen::VectorXd::Zero(5)), DimensionMismatch);
    ModelConfig bad = tiny();
    bad.embedding_dim = 0;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = tiny();
    bad.embedding_init_scale = 0.0;
    EXPECT_THROW(bad.validate(), ConfigError);
    EXPECT_THROW(activation_from_string("gelu"), ConfigError);
}

TEST(Model, SgdStepMatchesHandComputation) {
    ModelParams p = init_params(tiny(), 16);
    Rng r(17);
    ModelParams g = p.zeros_like();
    g.for_each_tensor([&](std::span<double> t) {
        for (double& v : t) v = r.normal();
    });
    OptimizerState s{0.01, 0.9, 5e-4, {}};
    const std::vector<double> p0 = p.flatten(), g0 = g.flatten();
    sgd_step(p, g, s);
    std::vector<double> v1(p0.size()), p1(p0.size());
    for (std::size_t i = 0; i < p0.size(); ++i) {
        v1[i] = g0[i] + 5e-4 * p0[i];
        p1[i] = p0[i] - 0.01 * v1[i];
    }
    EXPECT_EQ(s.velocity.flatten(), v1);
    EXPECT_EQ(p.flatten(), p1);
    sgd_step(p, g, s);
    const std::vector<double> v2 = s.velocity.flatten(), pf = p.flatten();
    for (std::size_t i = 0; i < p0.size(); ++i) {
        EXPECT_DOUBLE_EQ(v2[i], 0.9 * v1[i] + g0[i] + 5e-4 * p1[i]);
        EXPECT_DOUBLE_EQ(pf[i], p1[i] - 0.01 * v2[i]);
    }
}

TEST(Model, NonFiniteUpdateLeavesStateUntouched) {
    ModelParams p = init_params(tiny(), 18);
    ModelParams g = p.zeros_like();
    OptimizerState s;
    sgd_step(p, g, s);
    const std::vector<double> before = p.flatten(), vel = s.velocity.flatten();
    g.head.weight(0, 0) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(sgd_step(p, g, s), NonFiniteUpdate);
    EXPECT_EQ(p.flatten(), before);
    EXPECT_EQ(s.velocity.flatten(), vel);
}

TEST(Model, AddAndFiniteness) {
    ModelParams p = init_params(tiny(), 19);
    const std::vector<double> flat = p.flatten();
    ModelParams q = p;
    q.add(p, -1.0);
    for (double v : q.flatten()) EXPECT_EQ(v, 0.0);
    EXPECT_TRUE(p.all_finite());
    p.layers[0].bias(0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_FALSE(p.all_finite());
    EXPECT_THROW(q.add(init_params(ModelConfig{}, 1)), DimensionMismatch);
}
