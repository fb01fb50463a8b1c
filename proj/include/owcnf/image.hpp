#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace owcnf {

/// Square or rectangular grid of attenuation values, row-major.
/// Row r covers physical y in [r*pitch - half, (r+1)*pitch - half).
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    Image() = default;
    Image(int width, int height, double fill = 0.0);

    double& operator()(int row, int col) { return data[static_cast<std::size_t>(row) * width + col]; }
    double operator()(int row, int col) const { return data[static_cast<std::size_t>(row) * width + col]; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Image& other) const { return width == other.width && height == other.height; }
};

/// Line integrals indexed [view][bin], view-major.
struct Sinogram {
    int n_views = 0;
    int n_bins = 0;
    std::vector<double> data;

    Sinogram() = default;
    Sinogram(int n_views, int n_bins, double fill = 0.0);

    double& operator()(int view, int bin) { return data[static_cast<std::size_t>(view) * n_bins + bin]; }
    double operator()(int view, int bin) const { return data[static_cast<std::size_t>(view) * n_bins + bin]; }

    std::span<double> view_row(int view) { return {data.data() + static_cast<std::size_t>(view) * n_bins, static_cast<std::size_t>(n_bins)}; }
    std::span<const double> view_row(int view) const { return {data.data() + static_cast<std::size_t>(view) * n_bins, static_cast<std::size_t>(n_bins)}; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Sinogram& other) const { return n_views == other.n_views && n_bins == other.n_bins; }
};

/// Throws std::invalid_argument naming `what` if any value is NaN or infinite.
void require_finite(std::span<const double> values, std::string_view what);

/// Throws std::invalid_argument if the declared shape disagrees with the data length.
void require_consistent(const Image& img, std::string_view what);
void require_consistent(const Sinogram& sino, std::string_view what);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

} // namespace owcnf
