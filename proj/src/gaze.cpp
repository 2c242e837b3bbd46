#include "epcgaze/gaze.hpp"

#include <cmath>
#include <numbers>

#include "epcgaze/errors.hpp"

namespace epcgaze {

namespace {

void require_finite(const GazeAngles& g) {
    if (!std::isfinite(g.yaw) || !std::isfinite(g.pitch)) {
        throw InvalidInput("gaze angles must be finite");
    }
}

struct Vec3 {
    double x, y, z;
};

double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

Vec3 as_vec(const GazeVector& v) { return {v.x, v.y, v.z}; }

}  // namespace

GazeVector angles_to_vector(const GazeAngles& g) {
    require_finite(g);
    const double cp = std::cos(g.pitch);
    return {cp * std::sin(g.yaw), std::sin(g.pitch), cp * std::cos(g.yaw)};
}

double angular_error(const GazeAngles& a, const GazeAngles& b) {
    const Vec3 va = as_vec(angles_to_vector(a));
    const Vec3 vb = as_vec(angles_to_vector(b));
    return std::atan2(norm(cross(va, vb)), dot(va, vb));
}

GazeLossGrad gaze_loss(const GazeAngles& pred, const GazeAngles& gt) {
    const Vec3 vp = as_vec(angles_to_vector(pred));
    const Vec3 vg = as_vec(angles_to_vector(gt));
    const double sin_theta = norm(cross(vp, vg));
    const double cos_theta = dot(vp, vg);

    GazeLossGrad out;
    out.loss = std::atan2(sin_theta, cos_theta);
    if (sin_theta < 1e-12) return out;

    // d/dq arccos(c) = -(dc/dq) / sin(theta)
    const double sy = std::sin(pred.yaw), cy = std::cos(pred.yaw);
    const double sp = std::sin(pred.pitch), cp = std::cos(pred.pitch);
    const Vec3 dv_dyaw{cp * cy, 0.0, -cp * sy};
    const Vec3 dv_dpitch{-sp * sy, cp, -sp * cy};
    out.d_yaw = -dot(dv_dyaw, vg) / sin_theta;
    out.d_pitch = -dot(dv_dpitch, vg) / sin_theta;
    return out;
}

double mean_gaze_loss(std::span<const GazeAngles> pred, std::span<const GazeAngles> gt,
                      std::span<GazeAngles> grad_out) {
    if (pred.size() != gt.size()) throw DimensionMismatch("pred/gt batch sizes differ");
    if (!grad_out.empty() && grad_out.size() != pred.size()) {
        throw DimensionMismatch("gradient buffer size differs from batch size");
    }
    if (pred.empty()) return 0.0;
    const double inv_n = 1.0 / static_cast<double>(pred.size());
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const GazeLossGrad lg = gaze_loss(pred[i], gt[i]);
        total += lg.loss;
        if (!grad_out.empty()) grad_out[i] = {lg.d_yaw * inv_n, lg.d_pitch * inv_n};
    }
    return total * inv_n;
}

double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }
double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace epcgaze
