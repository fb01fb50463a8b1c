#include "owcnf/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace owcnf {

namespace {

void check_pair(const Image& a, const Image& b, const char* what) {
    require_consistent(a, what);
    require_consistent(b, what);
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(what) + ": image shapes differ");
    }
}

} // namespace

void MetricConfig::validate() const {
    if (!(peak > 0.0)) {
        throw std::invalid_argument("MetricConfig: peak must be positive");
    }
    if (ssim_window < 1 || ssim_window % 2 == 0) {
        throw std::invalid_argument("MetricConfig: SSIM window must be odd");
    }
    if (!(ssim_sigma > 0.0)) {
        throw std::invalid_argument("MetricConfig: SSIM sigma must be positive");
    }
}

double mse(const Image& a, const Image& b) {
    check_pair(a, b, "mse");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.data.size());
}

double psnr(const Image& a, const Image& b, const MetricConfig& cfg) {
    cfg.validate();
    const double m = mse(a, b);
    if (m == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return 10.0 * std::log10(cfg.peak * cfg.peak / m);
}

double ssim(const Image& a, const Image& b, const MetricConfig& cfg) {
    cfg.validate();
    check_pair(a, b, "ssim");
    const int win = cfg.ssim_window;
    if (a.width < win || a.height < win) {
        throw std::invalid_argument("ssim: image smaller than the SSIM window");
    }

    std::vector<double> kernel(static_cast<std::size_t>(win) * win);
    {
        const int r = win / 2;
        double total = 0.0;
        for (int i = 0; i < win; ++i) {
            for (int j = 0; j < win; ++j) {
                const double d2 = (i - r) * (i - r) + (j - r) * (j - r);
                kernel[i * win + j] = std::exp(-d2 / (2.0 * cfg.ssim_sigma * cfg.ssim_sigma));
                total += kernel[i * win + j];
            }
        }
        for (double& k : kernel) {
            k /= total;
        }
    }

    const double c1 = (cfg.k1 * cfg.peak) * (cfg.k1 * cfg.peak);
    const double c2 = (cfg.k2 * cfg.peak) * (cfg.k2 * cfg.peak);
    double sum = 0.0;
    int count = 0;
    for (int r0 = 0; r0 + win <= a.height; ++r0) {
        for (int q0 = 0; q0 + win <= a.width; ++q0) {
            double mu_a = 0.0;
            double mu_b = 0.0;
            for (int i = 0; i < win; ++i) {
                for (int j = 0; j < win; ++j) {
                    const double k = kernel[i * win + j];
                    mu_a += k * a(r0 + i, q0 + j);
                    mu_b += k * b(r0 + i, q0 + j);
                }
            }
            double var_a = 0.0;
            double var_b = 0.0;
            double cov = 0.0;
            for (int i = 0; i < win; ++i) {
                for (int j = 0; j < win; ++j) {
                    const double k = kernel[i * win + j];
                    const double da = a(r0 + i, q0 + j) - mu_a;
                    const double db = b(r0 + i, q0 + j) - mu_b;
                    var_a += k * da * da;
                    var_b += k * db * db;
                    cov += k * (da * db);
                }
            }
            sum += ((2.0 * (mu_a * mu_b) + c1) * (2.0 * cov + c2)) /
                   ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
            ++count;
        }
    }
    return sum / count;
}

} // namespace owcnf
