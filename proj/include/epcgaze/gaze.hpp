#pragma once

#include <array>
#include <span>

namespace epcgaze {

/// A point in gaze space, radians.
struct GazeAngles {
    double yaw = 0.0;
    double pitch = 0.0;

    friend bool operator==(const GazeAngles&, const GazeAngles&) = default;
};

/// Unit 3D gaze direction.
struct GazeVector {
    double x = 0.0;
    double y = 0.0;
    double z = 1.0;
};

/// (cos p sin y, sin p, cos p cos y). Throws InvalidInput on non-finite input.
GazeVector angles_to_vector(const GazeAngles& g);

/// Angle between the two gaze directions, in [0, pi].
///
/// Mathematically arccos of the clamped dot product; evaluated through
/// atan2(|a x b|, a . b) so small separations keep full precision.
double angular_error(const GazeAngles& a, const GazeAngles& b);

struct GazeLossGrad {
    double loss = 0.0;
    double d_yaw = 0.0;
    double d_pitch = 0.0;
};

/// Supervised gaze loss for one pair: the angular error. The gradient is
/// taken w.r.t. `pred` and defined as zero where the direction coincides
/// with (or is antipodal to) `gt`.
GazeLossGrad gaze_loss(const GazeAngles& pred, const GazeAngles& gt);

/// Batch mean of gaze_loss; `grad_out` (same length as pred, may be empty to
/// skip) receives d(mean)/d(pred_i).
double mean_gaze_loss(std::span<const GazeAngles> pred, std::span<const GazeAngles> gt,
                      std::span<GazeAngles> grad_out = {});

double rad_to_deg(double rad);
double deg_to_rad(double deg);

}  // namespace epcgaze
