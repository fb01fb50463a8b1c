#include "owcnf/image.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace owcnf {

Image::Image(int width, int height, double fill) : width(width), height(height) {
    if (width < 0 || height < 0) {
        throw std::invalid_argument("Image: negative dimensions");
    }
    data.assign(static_cast<std::size_t>(width) * height, fill);
}

Sinogram::Sinogram(int n_views, int n_bins, double fill) : n_views(n_views), n_bins(n_bins) {
    if (n_views < 0 || n_bins < 0) {
        throw std::invalid_argument("Sinogram: negative dimensions");
    }
    data.assign(static_cast<std::size_t>(n_views) * n_bins, fill);
}

void require_finite(std::span<const double> values, std::string_view what) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw std::invalid_argument(std::string(what) + ": non-finite value at index " + std::to_string(i));
        }
    }
}

void require_consistent(const Image& img, std::string_view what) {
    if (img.width < 1 || img.height < 1 || img.data.size() != static_cast<std::size_t>(img.width) * img.height) {
        throw std::invalid_argument(std::string(what) + ": image shape " + std::to_string(img.width) + "x" +
                                    std::to_string(img.height) + " does not match " +
                                    std::to_string(img.data.size()) + " values");
    }
}

void require_consistent(const Sinogram& sino, std::string_view what) {
    if (sino.n_views < 1 || sino.n_bins < 1 || sino.data.size() != static_cast<std::size_t>(sino.n_views) * sino.n_bins) {
        throw std::invalid_argument(std::string(what) + ": sinogram shape " + std::to_string(sino.n_views) + "x" +
                                    std::to_string(sino.n_bins) + " does not match " +
                                    std::to_string(sino.data.size()) + " values");
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("dot: length mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

} // namespace owcnf
