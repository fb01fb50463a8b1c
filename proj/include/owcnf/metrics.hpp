#pragma once

#include "owcnf/image.hpp"

namespace owcnf {

struct MetricConfig {
    double peak = 1.0;
    int ssim_window = 11;
    double ssim_sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;

    void validate() const;
};

/// 10 log10(peak^2 / MSE). Identical images return +infinity.
double psnr(const Image& a, const Image& b, const MetricConfig& cfg = {});

/// Gaussian-weighted SSIM averaged over all fully-contained windows.
double ssim(const Image& a, const Image& b, const MetricConfig& cfg = {});

double mse(const Image& a, const Image& b);

} // namespace owcnf
