#include "mgs/ssim.hpp"

#include <array>
#include <cmath>
#include <string>

namespace mgs {

std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> w(static_cast<std::size_t>(size));
    const double c = 0.5 * (size - 1);
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - c;
        w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

namespace {

using Dims = std::array<int, 3>;

std::size_t count(const Dims& d) { return static_cast<std::size_t>(d[0]) * d[1] * d[2]; }

std::size_t flat(const Dims& d, int x, int y, int z) { return (static_cast<std::size_t>(z) * d[1] + y) * d[0] + x; }

/// Valid-mode correlation with w along one axis; that axis shrinks by |w|-1.
std::vector<double> filter_valid(const std::vector<double>& in, Dims& dims, int axis, const std::vector<double>& w) {
    Dims out_dims = dims;
    const int taps = static_cast<int>(w.size());
    out_dims[axis] -= taps - 1;
    std::vector<double> out(count(out_dims), 0.0);
    for (int z = 0; z < out_dims[2]; ++z)
        for (int y = 0; y < out_dims[1]; ++y)
            for (int x = 0; x < out_dims[0]; ++x) {
                double acc = 0.0;
                for (int t = 0; t < taps; ++t) {
                    int p[3] = {x, y, z};
                    p[axis] += t;
                    acc += w[t] * in[flat(dims, p[0], p[1], p[2])];
                }
                out[flat(out_dims, x, y, z)] = acc;
            }
    dims = out_dims;
    return out;
}

/// Adjoint of filter_valid: scatters back onto the larger grid.
std::vector<double> filter_valid_adjoint(const std::vector<double>& in, Dims& dims, int axis,
                                         const std::vector<double>& w) {
    Dims out_dims = dims;
    const int taps = static_cast<int>(w.size());
    out_dims[axis] += taps - 1;
    std::vector<double> out(count(out_dims), 0.0);
    for (int z = 0; z < dims[2]; ++z)
        for (int y = 0; y < dims[1]; ++y)
            for (int x = 0; x < dims[0]; ++x) {
                const double v = in[flat(dims, x, y, z)];
                for (int t = 0; t < taps; ++t) {
                    int p[3] = {x, y, z};
                    p[axis] += t;
                    out[flat(out_dims, p[0], p[1], p[2])] += w[t] * v;
                }
            }
    dims = out_dims;
    return out;
}

std::vector<double> window_filter(const std::vector<double>& in, Dims dims, int spatial_axes,
                                  const std::vector<double>& w) {
    std::vector<double> cur = in;
    for (int a = 0; a < spatial_axes; ++a) cur = filter_valid(cur, dims, a, w);
    return cur;
}

std::vector<double> window_adjoint(const std::vector<double>& in, Dims small_dims, int spatial_axes,
                                   const std::vector<double>& w) {
    std::vector<double> cur = in;
    for (int a = spatial_axes - 1; a >= 0; --a) cur = filter_valid_adjoint(cur, small_dims, a, w);
    return cur;
}

/// Shared SSIM core for 2D (spatial_axes = 2, dims[2] = 1) and 3D.
double ssim_core(std::span<const double> a, std::span<const double> b, const Dims& dims, int spatial_axes,
                 std::span<double> grad_a) {
    const auto w = gaussian_window();
    const std::size_t n = count(dims);
    std::vector<double> va(a.begin(), a.end()), vb(b.begin(), b.end()), aa(n), bb(n), ab(n);
    for (std::size_t i = 0; i < n; ++i) {
        aa[i] = va[i] * va[i];
        bb[i] = vb[i] * vb[i];
        ab[i] = va[i] * vb[i];
    }
    const auto mu_a = window_filter(va, dims, spatial_axes, w);
    const auto mu_b = window_filter(vb, dims, spatial_axes, w);
    const auto e_aa = window_filter(aa, dims, spatial_axes, w);
    const auto e_bb = window_filter(bb, dims, spatial_axes, w);
    const auto e_ab = window_filter(ab, dims, spatial_axes, w);
    Dims small = dims;
    for (int k = 0; k < spatial_axes; ++k) small[k] -= kSsimWindow - 1;
    const std::size_t m = mu_a.size();

    const bool want_grad = !grad_a.empty();
    std::vector<double> g_mu, g_aa, g_ab;
    if (want_grad) g_mu.resize(m), g_aa.resize(m), g_ab.resize(m);
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double ma = mu_a[i], mb = mu_b[i];
        const double a1 = 2.0 * ma * mb + kSsimC1;
        const double a2 = 2.0 * (e_ab[i] - ma * mb) + kSsimC2;
        const double b1 = ma * ma + mb * mb + kSsimC1;
        const double b2 = (e_aa[i] - ma * ma) + (e_bb[i] - mb * mb) + kSsimC2;
        const double s = (a1 * a2) / (b1 * b2);
        total += s;
        if (want_grad) {
            g_mu[i] = s * (2.0 * mb / a1 - 2.0 * mb / a2 - 2.0 * ma / b1 + 2.0 * ma / b2);
            g_ab[i] = s * 2.0 / a2;
            g_aa[i] = -s / b2;
        }
    }
    const double mean = total / static_cast<double>(m);
    if (want_grad) {
        const double inv_m = 1.0 / static_cast<double>(m);
        const auto d_mu = window_adjoint(g_mu, small, spatial_axes, w);
        const auto d_aa = window_adjoint(g_aa, small, spatial_axes, w);
        const auto d_ab = window_adjoint(g_ab, small, spatial_axes, w);
        for (std::size_t i = 0; i < n; ++i) {
            grad_a[i] = inv_m * (d_mu[i] + 2.0 * va[i] * d_aa[i] + vb[i] * d_ab[i]);
        }
    }
    return mean;
}

}  // namespace

double ssim2d(std::span<const double> a, std::span<const double> b, int width, int height,
              std::span<double> grad_a) {
    const std::size_t n = static_cast<std::size_t>(width) * height;
    if (a.size() != n || b.size() != n || (!grad_a.empty() && grad_a.size() != n)) {
        throw Error(ErrorCode::ShapeMismatch, "ssim2d inputs disagree in size");
    }
    if (width < kSsimWindow || height < kSsimWindow) {
        throw Error(ErrorCode::SliceTooSmall,
                    "slice " + std::to_string(width) + "x" + std::to_string(height) + " is smaller than the 11x11 window");
    }
    return ssim_core(a, b, {width, height, 1}, 2, grad_a);
}

double ssim2d(const Image2D& a, const Image2D& b) {
    if (a.width != b.width || a.height != b.height) {
        throw Error(ErrorCode::ShapeMismatch, "ssim2d image shapes differ");
    }
    std::vector<double> da(a.data.begin(), a.data.end()), db(b.data.begin(), b.data.end());
    return ssim2d(da, db, a.width, a.height);
}

double ssim3d(const Volume& a, const Volume& b) {
    if (a.dims != b.dims) throw Error(ErrorCode::ShapeMismatch, "ssim3d volume shapes differ");
    for (int k = 0; k < 3; ++k) {
        if (a.dims[k] < kSsimWindow) {
            throw Error(ErrorCode::SliceTooSmall, "volume is smaller than the 11^3 window");
        }
    }
    std::vector<double> da(a.data.begin(), a.data.end()), db(b.data.begin(), b.data.end());
    return ssim_core(da, db, a.dims, 3, {});
}

}  // namespace mgs
