#pragma once

#include <complex>
#include <numbers>

namespace catq {

using cplx = std::complex<double>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr cplx kI{0.0, 1.0};

/// Ordinary frequency (Hz) to angular rate (rad/s).
constexpr double hz_to_rad(double hz) { return kTwoPi * hz; }
constexpr double rad_to_hz(double rad) { return rad / kTwoPi; }
inline cplx hz_to_rad(cplx hz) { return kTwoPi * hz; }

}  // namespace catq
