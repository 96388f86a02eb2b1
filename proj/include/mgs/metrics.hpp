#pragma once

#include <string>

#include "mgs/volume.hpp"

namespace mgs {

struct MetricReport {
    double psnr_db = 0.0;
    double ssim = 0.0;
    double ncc = 0.0;
    double nrmse = 0.0;
    double runtime_seconds = 0.0;
};

/// 10 log10(1 / MSE) with a unit peak; +infinity when the volumes match.
double psnr(const Volume& pred, const Volume& gt);
/// Pearson correlation over voxels. Throws ConstantInput if either side is flat.
double ncc(const Volume& pred, const Volume& gt);
/// RMSE / (max(gt) - min(gt)).
double nrmse(const Volume& pred, const Volume& gt);
/// Mean SSIM over 11^3 Gaussian windows (see ssim.hpp).
double ssim3d_metric(const Volume& pred, const Volume& gt);

MetricReport evaluate_volumes(const Volume& pred, const Volume& gt);

/// "key=value" lines, doubles printed round-trip exact (%.17g).
std::string to_key_value(const MetricReport& r);
/// JSON object; an infinite PSNR is written as the string "inf".
std::string to_json(const MetricReport& r);
MetricReport report_from_json(const std::string& text);

}  // namespace mgs
