#pragma once

#include <Eigen/Dense>
#include <vector>

namespace rkl {

using TipTrajectory = std::vector<Eigen::Vector2d>;

// sqrt of the mean squared Euclidean error between paired samples.
double rmse(const TipTrajectory& actual, const TipTrajectory& reference);

// Lag of `actual` behind `reference` in seconds: the integer shift τ (within
// ±25% of the length) maximizing the mean per-coordinate Pearson correlation
// of actual[t] against reference[t−τ]. Positive τ means `actual` trails.
// Shifts are scanned 0, +1, −1, +2, −2, ... and replaced only on strictly
// greater correlation, so ties resolve to the smaller |τ| (positive first).
// Throws on constant (degenerate) series.
double time_lag(const TipTrajectory& actual, const TipTrajectory& reference, double dt);

// Discrete Fréchet distance (coupling-minimax) by dynamic programming.
double frechet_distance(const TipTrajectory& a, const TipTrajectory& b);

} // namespace rkl
