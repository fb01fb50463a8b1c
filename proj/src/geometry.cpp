#include "owcnf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace owcnf {

namespace {

struct ViewFrame {
    double cos_b;
    double sin_b;
};

// Calls visit(pixel_index, weight) for every bilinear interpolation weight of
// every sample on the ray from the source to the centre of `bin`. Samples are
// spaced by (at most) half a pixel along the clipped segment, midpoint rule.
// forward_project and back_project both go through here, so they are exact
// transposes of each other.
template <class Visit>
inline void trace_ray(const FanBeamGeometry& g, const ViewFrame& f, int bin, Visit&& visit) {
    const double half = g.half_extent();
    const double pitch = g.pixel_pitch;
    const int n = g.image_size;

    const double sx = g.source_radius * f.cos_b;
    const double sy = g.source_radius * f.sin_b;
    const double u = (bin + 0.5 - 0.5 * g.n_bins) * g.bin_width();
    const double ex = -g.detector_radius * f.cos_b - u * f.sin_b;
    const double ey = -g.detector_radius * f.sin_b + u * f.cos_b;

    double dx = ex - sx;
    double dy = ey - sy;
    const double length = std::hypot(dx, dy);
    dx /= length;
    dy /= length;

    // Support of the interpolant extends half a pixel past the outer centres.
    const double bound = half + 0.5 * pitch;
    double t0 = 0.0;
    double t1 = length;
    auto clip = [&](double origin, double dir) {
        if (std::abs(dir) < 1e-15) {
            return std::abs(origin) < bound;
        }
        double ta = (-bound - origin) / dir;
        double tb = (bound - origin) / dir;
        if (ta > tb) {
            std::swap(ta, tb);
        }
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        return t0 < t1;
    };
    if (!clip(sx, dx) || !clip(sy, dy)) {
        return;
    }

    const double seg = t1 - t0;
    const int n_samples = std::max(1, static_cast<int>(std::ceil(seg / (0.5 * pitch) - 1e-9)));
    const double dt = seg / n_samples;
    const double inv_pitch = 1.0 / pitch;

    for (int i = 0; i < n_samples; ++i) {
        const double t = t0 + (i + 0.5) * dt;
        const double cf = (sx + t * dx + half) * inv_pitch - 0.5;
        const double rf = (sy + t * dy + half) * inv_pitch - 0.5;
        const double c0f = std::floor(cf);
        const double r0f = std::floor(rf);
        const int c0 = static_cast<int>(c0f);
        const int r0 = static_cast<int>(r0f);
        const double fc = cf - c0f;
        const double fr = rf - r0f;

        const bool c0_in = c0 >= 0 && c0 < n;
        const bool c1_in = c0 + 1 >= 0 && c0 + 1 < n;
        if (r0 >= 0 && r0 < n) {
            const std::size_t base = static_cast<std::size_t>(r0) * n;
            if (c0_in) visit(base + c0, (1.0 - fr) * (1.0 - fc) * dt);
            if (c1_in) visit(base + c0 + 1, (1.0 - fr) * fc * dt);
        }
        if (r0 + 1 >= 0 && r0 + 1 < n) {
            const std::size_t base = static_cast<std::size_t>(r0 + 1) * n;
            if (c0_in) visit(base + c0, fr * (1.0 - fc) * dt);
            if (c1_in) visit(base + c0 + 1, fr * fc * dt);
        }
    }
}

ViewFrame frame(const FanBeamGeometry& g, int view) { return {std::cos(g.angles[view]), std::sin(g.angles[view])}; }

void check_image(const Image& image, const FanBeamGeometry& geom) {
    require_consistent(image, "forward_project");
    if (image.width != geom.image_size || image.height != geom.image_size) {
        throw std::invalid_argument("forward_project: image is " + std::to_string(image.width) + "x" +
                                    std::to_string(image.height) + " but geometry expects " +
                                    std::to_string(geom.image_size) + "x" + std::to_string(geom.image_size));
    }
    require_finite(image.data, "forward_project: image");
}

void check_sinogram(const Sinogram& sino, const FanBeamGeometry& geom) {
    require_consistent(sino, "back_project");
    if (sino.n_views != geom.n_views || sino.n_bins != geom.n_bins) {
        throw std::invalid_argument("back_project: sinogram is " + std::to_string(sino.n_views) + "x" +
                                    std::to_string(sino.n_bins) + " but geometry expects " +
                                    std::to_string(geom.n_views) + "x" + std::to_string(geom.n_bins));
    }
}

void check_views(const FanBeamGeometry& geom, std::span<const int> views) {
    for (int v : views) {
        if (v < 0 || v >= geom.n_views) {
            throw std::invalid_argument("view index " + std::to_string(v) + " out of range");
        }
    }
}

} // namespace

FanBeamGeometry FanBeamGeometry::make(int image_size, int n_views, int n_bins, double source_factor,
                                      double detector_factor) {
    FanBeamGeometry g;
    g.image_size = image_size;
    g.n_views = n_views;
    g.n_bins = n_bins;
    g.pixel_pitch = image_size > 0 ? 1.0 / image_size : 0.0;
    const double half = 0.5;
    g.source_radius = source_factor * half;
    g.detector_radius = detector_factor * half;
    g.angles.resize(std::max(n_views, 0));
    for (int v = 0; v < n_views; ++v) {
        g.angles[v] = 2.0 * std::numbers::pi * v / n_views;
    }
    // Fan half-angle subtended by the circumscribed circle, mapped onto the flat
    // detector, with one extra bin of margin on each side.
    const double circ = half * std::numbers::sqrt2;
    if (g.source_radius > circ) {
        const double gamma = std::asin(circ / g.source_radius);
        const double half_span = (g.source_radius + g.detector_radius) * std::tan(gamma);
        g.detector_span = 2.0 * half_span * (n_bins > 2 ? static_cast<double>(n_bins) / (n_bins - 2) : 1.0);
    }
    g.validate();
    return g;
}

FanBeamGeometry FanBeamGeometry::desk() { return make(64, 180, 128); }

FanBeamGeometry FanBeamGeometry::paper_rrm() { return make(128, 360, 256); }

void FanBeamGeometry::validate() const {
    if (n_views < 1 || n_bins < 1 || image_size < 1) {
        throw std::invalid_argument("FanBeamGeometry: n_views, n_bins and image_size must be positive");
    }
    if (static_cast<int>(angles.size()) != n_views) {
        throw std::invalid_argument("FanBeamGeometry: angle list length differs from n_views");
    }
    for (std::size_t i = 1; i < angles.size(); ++i) {
        if (!(angles[i] > angles[i - 1])) {
            throw std::invalid_argument("FanBeamGeometry: angles must be strictly increasing");
        }
    }
    if (!(pixel_pitch > 0.0) || !(detector_span > 0.0) || !(detector_radius >= 0.0)) {
        throw std::invalid_argument("FanBeamGeometry: pitch and detector span must be positive");
    }
    const double half_diag = half_extent() * std::numbers::sqrt2;
    if (!(source_radius > half_diag)) {
        throw std::invalid_argument("FanBeamGeometry: source must lie outside the object");
    }
}

std::vector<int> FanBeamGeometry::all_views() const {
    std::vector<int> v(n_views);
    for (int i = 0; i < n_views; ++i) {
        v[i] = i;
    }
    return v;
}

void forward_project_views(const Image& image, const FanBeamGeometry& geom, std::span<const int> views,
                           Sinogram& out) {
    check_image(image, geom);
    check_views(geom, views);
    if (out.n_views != geom.n_views || out.n_bins != geom.n_bins) {
        out = Sinogram(geom.n_views, geom.n_bins);
    }
    const double* px = image.data.data();
    for (int v : views) {
        const ViewFrame f = frame(geom, v);
        auto row = out.view_row(v);
        for (int b = 0; b < geom.n_bins; ++b) {
            double acc = 0.0;
            trace_ray(geom, f, b, [&](std::size_t idx, double w) { acc += w * px[idx]; });
            row[b] = acc;
        }
    }
}

void back_project_views(const Sinogram& sino, const FanBeamGeometry& geom, std::span<const int> views,
                        Image& accum) {
    check_sinogram(sino, geom);
    check_views(geom, views);
    if (accum.width != geom.image_size || accum.height != geom.image_size) {
        accum = Image(geom.image_size, geom.image_size);
    }
    double* px = accum.data.data();
    for (int v : views) {
        const ViewFrame f = frame(geom, v);
        auto row = sino.view_row(v);
        for (int b = 0; b < geom.n_bins; ++b) {
            const double val = row[b];
            if (val == 0.0) {
                continue;
            }
            trace_ray(geom, f, b, [&](std::size_t idx, double w) { px[idx] += w * val; });
        }
    }
}

Sinogram forward_project(const Image& image, const FanBeamGeometry& geom) {
    Sinogram out(geom.n_views, geom.n_bins);
    const auto views = geom.all_views();
    forward_project_views(image, geom, views, out);
    return out;
}

Image back_project(const Sinogram& sino, const FanBeamGeometry& geom) {
    Image out(geom.image_size, geom.image_size);
    const auto views = geom.all_views();
    back_project_views(sino, geom, views, out);
    return out;
}

RayWeights row_and_column_sums(const FanBeamGeometry& geom, std::span<const int> subset) {
    if (subset.empty()) {
        throw std::invalid_argument("row_and_column_sums: empty subset");
    }
    check_views(geom, subset);
    std::vector<char> seen(geom.n_views, 0);
    for (int v : subset) {
        if (seen[v]) {
            throw std::invalid_argument("row_and_column_sums: duplicate view " + std::to_string(v));
        }
        seen[v] = 1;
    }
    RayWeights out{Sinogram(geom.n_views, geom.n_bins), Image(geom.image_size, geom.image_size)};
    double* col = out.column_sums.data.data();
    for (int v : subset) {
        const ViewFrame f = frame(geom, v);
        auto row = out.row_sums.view_row(v);
        for (int b = 0; b < geom.n_bins; ++b) {
            double acc = 0.0;
            trace_ray(geom, f, b, [&](std::size_t idx, double w) {
                acc += w;
                col[idx] += w;
            });
            row[b] = acc;
        }
    }
    return out;
}

} // namespace owcnf
