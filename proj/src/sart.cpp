#include "owcnf/sart.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace owcnf {

namespace {

Sinogram inverted(Sinogram s) {
    for (double& v : s.data) {
        v = v > 0.0 ? 1.0 / v : 0.0;
    }
    return s;
}

Image inverted(Image s) {
    for (double& v : s.data) {
        v = v > 0.0 ? 1.0 / v : 0.0;
    }
    return s;
}

Image apply_correction(const FanBeamGeometry& geom, std::span<const int> views, const Sinogram& inv_row,
                       const Image& inv_col, const Image& x, const Sinogram& y) {
    Sinogram residual(geom.n_views, geom.n_bins);
    forward_project_views(x, geom, views, residual);
    for (int v : views) {
        auto r = residual.view_row(v);
        auto meas = y.view_row(v);
        auto w = inv_row.view_row(v);
        for (int b = 0; b < geom.n_bins; ++b) {
            r[b] = (meas[b] - r[b]) * w[b];
        }
    }
    Image delta(geom.image_size, geom.image_size);
    back_project_views(residual, geom, views, delta);
    for (std::size_t i = 0; i < delta.data.size(); ++i) {
        delta.data[i] *= inv_col.data[i];
    }
    return delta;
}

void check_inputs(const Image& x, const Sinogram& y, const FanBeamGeometry& geom) {
    require_consistent(x, "os_sart: image");
    require_consistent(y, "os_sart: sinogram");
    if (x.width != geom.image_size || x.height != geom.image_size) {
        throw std::invalid_argument("os_sart: image does not match geometry");
    }
    if (y.n_views != geom.n_views || y.n_bins != geom.n_bins) {
        throw std::invalid_argument("os_sart: sinogram does not match geometry");
    }
    require_finite(y.data, "os_sart: sinogram");
}

} // namespace

void SartConfig::validate(int n_views) const {
    if (!std::isfinite(omega) || !(omega > 0.0)) {
        throw std::invalid_argument("SartConfig: omega must be finite and > 0");
    }
    if (n_subsets < 1 || n_subsets > n_views) {
        throw std::invalid_argument("SartConfig: n_subsets must lie in [1, n_views]");
    }
    if (n_iterations < 1) {
        throw std::invalid_argument("SartConfig: n_iterations must be positive");
    }
}

std::vector<std::vector<int>> make_subsets(int n_views, int n_subsets, SubsetOrder order) {
    if (n_subsets < 1 || n_subsets > n_views) {
        throw std::invalid_argument("make_subsets: n_subsets must lie in [1, n_views]");
    }
    std::vector<std::vector<int>> subsets(n_subsets);
    if (order == SubsetOrder::strided) {
        for (int v = 0; v < n_views; ++v) {
            subsets[v % n_subsets].push_back(v);
        }
    } else {
        for (int v = 0; v < n_views; ++v) {
            subsets[static_cast<long>(v) * n_subsets / n_views].push_back(v);
        }
    }
    return subsets;
}

OsSart::OsSart(FanBeamGeometry geom, int n_subsets, SubsetOrder order)
    : geom_(std::move(geom)), subsets_(make_subsets(geom_.n_views, n_subsets, order)) {
    geom_.validate();
    inv_row_.reserve(subsets_.size());
    inv_col_.reserve(subsets_.size());
    for (const auto& s : subsets_) {
        RayWeights w = row_and_column_sums(geom_, s);
        inv_row_.push_back(inverted(std::move(w.row_sums)));
        inv_col_.push_back(inverted(std::move(w.column_sums)));
    }
}

Image OsSart::correction(const Image& x, const Sinogram& y, int k) const {
    check_inputs(x, y, geom_);
    if (k < 0 || k >= n_subsets()) {
        throw std::invalid_argument("OsSart::correction: subset index out of range");
    }
    return apply_correction(geom_, subsets_[k], inv_row_[k], inv_col_[k], x, y);
}

Image OsSart::run(Image x, const Sinogram& y, double omega, int n_iterations, bool nonneg_clamp,
                  Image* delta_total) const {
    check_inputs(x, y, geom_);
    if (!std::isfinite(omega) || omega < 0.0) {
        throw std::invalid_argument("OsSart::run: omega must be finite and >= 0");
    }
    if (delta_total != nullptr) {
        *delta_total = Image(geom_.image_size, geom_.image_size);
    }
    for (int it = 0; it < n_iterations; ++it) {
        const bool last = it + 1 == n_iterations;
        for (int k = 0; k < n_subsets(); ++k) {
            const Image delta = apply_correction(geom_, subsets_[k], inv_row_[k], inv_col_[k], x, y);
            for (std::size_t i = 0; i < x.data.size(); ++i) {
                x.data[i] += omega * delta.data[i];
                if (nonneg_clamp && x.data[i] < 0.0) {
                    x.data[i] = 0.0;
                }
            }
            if (last && delta_total != nullptr) {
                for (std::size_t i = 0; i < x.data.size(); ++i) {
                    delta_total->data[i] += delta.data[i];
                }
            }
        }
    }
    return x;
}

Image os_sart(const Image& x0, const Sinogram& y, const FanBeamGeometry& geom, const SartConfig& cfg) {
    cfg.validate(geom.n_views);
    const OsSart solver(geom, cfg.n_subsets, cfg.subset_order);
    return solver.run(x0, y, cfg.omega, cfg.n_iterations, cfg.nonneg_clamp);
}

Image sart_correction(const Image& x, const Sinogram& y, const FanBeamGeometry& geom, std::span<const int> subset) {
    check_inputs(x, y, geom);
    RayWeights w = row_and_column_sums(geom, subset);
    return apply_correction(geom, subset, inverted(std::move(w.row_sums)), inverted(std::move(w.column_sums)), x, y);
}

} // namespace owcnf
