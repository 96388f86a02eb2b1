#include "mgs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"

#include "mgs/ssim.hpp"

namespace mgs {

namespace {

void check_same_shape(const Volume& a, const Volume& b) {
    if (a.dims != b.dims || a.data.size() != b.data.size()) {
        throw Error(ErrorCode::ShapeMismatch, "metric inputs have different dimensions");
    }
}

std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

double psnr(const Volume& pred, const Volume& gt) {
    check_same_shape(pred, gt);
    double sse = 0.0;
    for (std::size_t i = 0; i < gt.data.size(); ++i) {
        const double d = static_cast<double>(pred.data[i]) - gt.data[i];
        sse += d * d;
    }
    const double mse = sse / static_cast<double>(gt.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

double ncc(const Volume& pred, const Volume& gt) {
    check_same_shape(pred, gt);
    const double n = static_cast<double>(gt.data.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < gt.data.size(); ++i) {
        ma += pred.data[i];
        mb += gt.data[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < gt.data.size(); ++i) {
        const double a = pred.data[i] - ma, b = gt.data[i] - mb;
        sab += a * b;
        saa += a * a;
        sbb += b * b;
    }
    if (saa == 0.0 || sbb == 0.0) throw Error(ErrorCode::ConstantInput, "NCC is undefined for a constant volume");
    return sab / std::sqrt(saa * sbb);
}

double nrmse(const Volume& pred, const Volume& gt) {
    check_same_shape(pred, gt);
    double sse = 0.0;
    for (std::size_t i = 0; i < gt.data.size(); ++i) {
        const double d = static_cast<double>(pred.data[i]) - gt.data[i];
        sse += d * d;
    }
    const auto [lo, hi] = std::minmax_element(gt.data.begin(), gt.data.end());
    const double range = static_cast<double>(*hi) - *lo;
    if (range == 0.0) throw Error(ErrorCode::ConstantInput, "NRMSE needs a non-constant reference");
    return std::sqrt(sse / static_cast<double>(gt.data.size())) / range;
}

double ssim3d_metric(const Volume& pred, const Volume& gt) {
    check_same_shape(pred, gt);
    return ssim3d(pred, gt);
}

MetricReport evaluate_volumes(const Volume& pred, const Volume& gt) {
    MetricReport r;
    r.psnr_db = psnr(pred, gt);
    r.ssim = ssim3d_metric(pred, gt);
    r.ncc = ncc(pred, gt);
    r.nrmse = nrmse(pred, gt);
    return r;
}

std::string to_key_value(const MetricReport& r) {
    std::string out;
    out += "psnr_db=" + format_double(r.psnr_db) + "\n";
    out += "ssim=" + format_double(r.ssim) + "\n";
    out += "ncc=" + format_double(r.ncc) + "\n";
    out += "nrmse=" + format_double(r.nrmse) + "\n";
    out += "runtime_seconds=" + format_double(r.runtime_seconds) + "\n";
    return out;
}

std::string to_json(const MetricReport& r) {
    nlohmann::ordered_json j;
    if (std::isinf(r.psnr_db)) {
        j["psnr_db"] = "inf";
    } else {
        j["psnr_db"] = r.psnr_db;
    }
    j["ssim"] = r.ssim;
    j["ncc"] = r.ncc;
    j["nrmse"] = r.nrmse;
    j["runtime_seconds"] = r.runtime_seconds;
    return j.dump(2);
}

MetricReport report_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    MetricReport r;
    if (j.at("psnr_db").is_string()) {
        r.psnr_db = std::numeric_limits<double>::infinity();
    } else {
        r.psnr_db = j.at("psnr_db").get<double>();
    }
    r.ssim = j.at("ssim").get<double>();
    r.ncc = j.at("ncc").get<double>();
    r.nrmse = j.at("nrmse").get<double>();
    r.runtime_seconds = j.value("runtime_seconds", 0.0);
    return r;
}

}  // namespace mgs
