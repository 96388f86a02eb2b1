#pragma once

#include <span>
#include <vector>

#include "mgs/core.hpp"
#include "mgs/volume.hpp"

namespace mgs {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Normalized 1D Gaussian taps; the 2D/3D windows are their outer products.
std::vector<double> gaussian_window(int size = kSsimWindow, double sigma = kSsimSigma);

/// Mean SSIM over all fully contained 11x11 windows (valid mode), for images
/// laid out u-fastest. When grad_a is non-empty it receives d(mean SSIM)/da.
/// Throws ShapeMismatch or SliceTooSmall (either side < 11).
double ssim2d(std::span<const double> a, std::span<const double> b, int width, int height,
              std::span<double> grad_a = {});
double ssim2d(const Image2D& a, const Image2D& b);

/// Volumetric mean SSIM over fully contained 11^3 windows.
double ssim3d(const Volume& a, const Volume& b);

}  // namespace mgs
