#pragma once

#include <cstdint>
#include <cstring>

namespace mgs::detail {

// Four-lane double vectors (GCC/Clang vector extensions). With AVX2 or
// AVX-512VL each maps to one register; elsewhere the compiler splits them.
using V4d = double __attribute__((vector_size(32)));
using V4l = std::int64_t __attribute__((vector_size(32)));

inline V4d load4(const double* p) {
    V4d v;
    std::memcpy(&v, p, sizeof v);
    return v;
}

inline void store4(double* p, V4d v) { std::memcpy(p, &v, sizeof v); }

inline V4d splat(double x) { return V4d{x, x, x, x}; }

inline double hsum(V4d v) { return (v[0] + v[1]) + (v[2] + v[3]); }

/// Lanes [0, n) keep v, the rest become 0.
inline V4d keep_first(V4d v, std::int64_t n) {
    const V4l lane{0, 1, 2, 3};
    const V4l limit{n, n, n, n};
    return lane < limit ? v : V4d{0, 0, 0, 0};
}

/// Vector counterpart of exp_nonpositive: round-to-nearest reduction by
/// ln2 and the same degree-13 polynomial.
inline V4d exp_nonpositive(V4d x) {
    const V4d lo = splat(-708.0);
    const V4d xc = x < lo ? lo : x;
    const V4d shifter = splat(6755399441055744.0);  // 1.5 * 2^52
    const V4d k = (xc * 1.4426950408889634 + shifter) - shifter;
    const V4d r = (xc - k * 6.93147180369123816490e-01) - k * 1.90821492927058770002e-10;
    V4d p = splat(1.0 / 6227020800.0);
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
    const V4l ki = __builtin_convertvector(k, V4l);
    const V4l bits = (ki + 1023) << 52;
    const V4d result = p * (V4d)bits;
    return x < lo ? V4d{0, 0, 0, 0} : result;
}

}  // namespace mgs::detail
