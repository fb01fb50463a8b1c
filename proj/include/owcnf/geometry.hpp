#pragma once

#include "owcnf/image.hpp"

#include <span>
#include <vector>

namespace owcnf {

/// Fan-beam acquisition with a flat (linear) detector.
///
/// The object is a square of image_size * pixel_pitch centred on the rotation
/// axis. For view angle beta the source sits at source_radius * (cos b, sin b)
/// and the detector line passes through -detector_radius * (cos b, sin b),
/// oriented along (-sin b, cos b). Bins are equal-width cells of
/// detector_span / n_bins; each ray ends at a bin centre.
struct FanBeamGeometry {
    int n_views = 0;
    int n_bins = 0;
    std::vector<double> angles;
    double source_radius = 0.0;
    double detector_radius = 0.0;
    double detector_span = 0.0;
    int image_size = 0;
    double pixel_pitch = 0.0;

    /// Uniform angles over [0, 2pi), unit-square object, source at
    /// source_factor x image half-width, detector sized to cover the
    /// circumscribed circle of the object.
    static FanBeamGeometry make(int image_size, int n_views, int n_bins, double source_factor = 3.0,
                                double detector_factor = 3.0);

    /// 64x64, 180 views, 128 bins.
    static FanBeamGeometry desk();
    /// 128x128, 360 views, 256 bins.
    static FanBeamGeometry paper_rrm();

    void validate() const;

    double half_extent() const { return 0.5 * image_size * pixel_pitch; }
    double bin_width() const { return detector_span / n_bins; }
    std::size_t n_pixels() const { return static_cast<std::size_t>(image_size) * image_size; }
    std::size_t n_rays() const { return static_cast<std::size_t>(n_views) * n_bins; }

    std::vector<int> all_views() const;
};

/// Discretised line integrals along every source-to-bin ray.
Sinogram forward_project(const Image& image, const FanBeamGeometry& geom);

/// Exact transpose of forward_project.
Image back_project(const Sinogram& sino, const FanBeamGeometry& geom);

/// Projects only the listed views into `out`; other views are left untouched.
void forward_project_views(const Image& image, const FanBeamGeometry& geom, std::span<const int> views,
                           Sinogram& out);

/// Adds the back-projection of the listed views of `sino` into `accum`.
void back_project_views(const Sinogram& sino, const FanBeamGeometry& geom, std::span<const int> views,
                        Image& accum);

struct RayWeights {
    Sinogram row_sums;  ///< A_S * 1, zero for views outside the subset
    Image column_sums;  ///< A_S^T * 1
};

/// Interpolation-weight sums restricted to a subset of views.
RayWeights row_and_column_sums(const FanBeamGeometry& geom, std::span<const int> subset);

} // namespace owcnf
