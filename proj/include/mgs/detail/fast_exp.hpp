#pragma once

#include <bit>
#include <cmath>
#include <cstdint>

namespace mgs::detail {

/// exp(x) for x <= 0, branch-free so the render loops vectorize.
/// Cody-Waite reduction plus a degree-13 Taylor polynomial on |r| <= ln2/2;
/// relative error is a few ulp. Returns 0 below -708.
inline double exp_nonpositive(double x) {
    constexpr double kLog2e = 1.4426950408889634;
    constexpr double kLn2Hi = 6.93147180369123816490e-01;
    constexpr double kLn2Lo = 1.90821492927058770002e-10;
    const double xc = x < -708.0 ? -708.0 : x;
    const double k = std::floor(xc * kLog2e + 0.5);
    const double r = (xc - k * kLn2Hi) - k * kLn2Lo;
    double p = 1.0 / 6227020800.0;
    p = p * r + 1.0 / 479001600.0;
    p = p * r + 1.0 / 39916800.0;
    p = p * r + 1.0 / 3628800.0;
    p = p * r + 1.0 / 362880.0;
    p = p * r + 1.0 / 40320.0;
    p = p * r + 1.0 / 5040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    const auto bits = static_cast<std::uint64_t>(static_cast<std::int64_t>(k) + 1023) << 52;
    const double result = p * std::bit_cast<double>(bits);
    return x < -708.0 ? 0.0 : result;
}

}  // namespace mgs::detail
