#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "epcgaze/errors.hpp"
#include "epcgaze/gaze.hpp"
#include "epcgaze/rng.hpp"
#include "oracles.hpp"

using namespace epcgaze;

namespace {

GazeAngles random_gaze(Rng& r, double range = 0.8) {
    return {r.uniform(-range, range), r.uniform(-range, range)};
}

}  // namespace

TEST(Gaze, VectorIsUnitLength) {
    Rng r(1);
    for (int i = 0; i < 1000; ++i) {
        const GazeVector v = angles_to_vector({r.uniform(-1.5, 1.5), r.uniform(-1.5, 1.5)});
        EXPECT_NEAR(v.x * v.x + v.y * v.y + v.z * v.z, 1.0, 1e-14);
    }
}

TEST(Gaze, VectorKnownDirections) {
    const GazeVector fwd = angles_to_vector({0.0, 0.0});
    EXPECT_DOUBLE_EQ(fwd.z, 1.0);
    EXPECT_DOUBLE_EQ(fwd.x, 0.0);
    const GazeVector right = angles_to_vector({std::numbers::pi / 2, 0.0});
    EXPECT_NEAR(right.x, 1.0, 1e-15);
    EXPECT_NEAR(right.z, 0.0, 1e-15);
    const GazeVector up = angles_to_vector({0.0, std::numbers::pi / 2});
    EXPECT_NEAR(up.y, 1.0, 1e-15);
}

TEST(Gaze, NonFiniteAnglesRejected) {
    EXPECT_THROW(angles_to_vector({std::numeric_limits<double>::quiet_NaN(), 0.0}), InvalidInput);
    EXPECT_THROW(angular_error({0.0, std::numeric_limits<double>::infinity()}, {0.0, 0.0}), InvalidInput);
}

TEST(Gaze, AngularErrorMatchesArccosOracle) {
    Rng r(2);
    for (int i = 0; i < 1000; ++i) {
        const GazeAngles a = random_gaze(r), b = random_gaze(r);
        EXPECT_NEAR(angular_error(a, b), oracle::angle_between(a, b), 1e-7);
    }
}

TEST(Gaze, AngularErrorIsAMetric) {
    Rng r(3);
    for (int i = 0; i < 500; ++i) {
        const GazeAngles a = random_gaze(r), b = random_gaze(r), c = random_gaze(r);
        EXPECT_EQ(angular_error(a, a), 0.0);
        EXPECT_DOUBLE_EQ(angular_error(a, b), angular_error(b, a));
        EXPECT_LE(angular_error(a, c), angular_error(a, b) + angular_error(b, c) + 1e-12);
    }
}

TEST(Gaze, PureYawSeparationAtZeroPitch) {
    EXPECT_NEAR(angular_error({0.1, 0.0}, {0.35, 0.0}), 0.25, 1e-15);
    EXPECT_NEAR(rad_to_deg(angular_error({0.0, 0.0}, {deg_to_rad(5.0), 0.0})), 5.0, 1e-12);
}

TEST(Gaze, TinySeparationKeepsPrecision) {
    // arccos of a dot product this close to 1 loses about half the digits.
    EXPECT_NEAR(angular_error({0.2, 0.1}, {0.2 + 1e-9, 0.1}), 1e-9 * std::cos(0.1), 1e-15);
}

TEST(Gaze, LossGradientMatchesFiniteDifferences) {
    Rng r(4);
    const double h = 1e-6;
    for (int i = 0; i < 200; ++i) {
        const GazeAngles p = random_gaze(r), g = random_gaze(r);
        if (angular_error(p, g) < 1e-3) continue;
        const GazeLossGrad lg = gaze_loss(p, g);
        const double dy = (angular_error({p.yaw + h, p.pitch}, g) - angular_error({p.yaw - h, p.pitch}, g)) / (2 * h);
        const double dp = (angular_error({p.yaw, p.pitch + h}, g) - angular_error({p.yaw, p.pitch - h}, g)) / (2 * h);
        EXPECT_LT(oracle::relative_error(lg.d_yaw, dy), 1e-6);
        EXPECT_LT(oracle::relative_error(lg.d_pitch, dp), 1e-6);
        EXPECT_DOUBLE_EQ(lg.loss, angular_error(p, g));
    }
}

TEST(Gaze, LossGradientZeroAtCoincidence) {
    const GazeLossGrad lg = gaze_loss({0.3, -0.2}, {0.3, -0.2});
    EXPECT_EQ(lg.loss, 0.0);
    EXPECT_EQ(lg.d_yaw, 0.0);
    EXPECT_EQ(lg.d_pitch, 0.0);
}

TEST(Gaze, MeanLossScalesGradientByBatch) {
    Rng r(5);
    std::vector<GazeAngles> pred, gt;
    for (int i = 0; i < 7; ++i) {
        pred.push_back(random_gaze(r));
        gt.push_back(random_gaze(r));
    }
    std::vector<GazeAngles> grad(pred.size());
    const double mean = mean_gaze_loss(pred, gt, grad);
    double expect = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const GazeLossGrad lg = gaze_loss(pred[i], gt[i]);
        expect += lg.loss;
        EXPECT_DOUBLE_EQ(grad[i].yaw, lg.d_yaw / 7.0);
        EXPECT_DOUBLE_EQ(grad[i].pitch, lg.d_pitch / 7.0);
    }
    EXPECT_NEAR(mean, expect / 7.0, 1e-15);
    EXPECT_THROW(mean_gaze_loss(pred, std::span<const GazeAngles>(gt).first(3)), DimensionMismatch);
}

TEST(Gaze, DegreeRadianRoundTrip) {
    EXPECT_DOUBLE_EQ(rad_to_deg(std::numbers::pi), 180.0);
    EXPECT_DOUBLE_EQ(deg_to_rad(rad_to_deg(0.123)), 0.123);
}
