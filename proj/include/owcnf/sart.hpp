#pragma once

#include "owcnf/geometry.hpp"
#include "owcnf/image.hpp"

#include <span>
#include <vector>

namespace owcnf {

enum class SubsetOrder { strided, sequential };

struct SartConfig {
    double omega = 1.0;
    int n_subsets = 10;
    int n_iterations = 1;
    SubsetOrder subset_order = SubsetOrder::strided;
    bool nonneg_clamp = true;

    void validate(int n_views) const;
};

/// Partition of [0, n_views) into n_subsets ordered subsets.
/// strided: subset k = {k, k + n_subsets, ...}; sequential: contiguous blocks.
std::vector<std::vector<int>> make_subsets(int n_views, int n_subsets, SubsetOrder order);

/// OS-SART with precomputed per-subset normalisation weights. Reuse one
/// instance across calls when the geometry and subsets are fixed.
class OsSart {
public:
    OsSart(FanBeamGeometry geom, int n_subsets, SubsetOrder order = SubsetOrder::strided);

    const FanBeamGeometry& geometry() const { return geom_; }
    int n_subsets() const { return static_cast<int>(subsets_.size()); }
    const std::vector<int>& subset(int k) const { return subsets_[k]; }

    /// D_col^-1 A_S^T D_row^-1 (y_S - A_S x) for subset k. Entries with zero
    /// weight sum are skipped.
    Image correction(const Image& x, const Sinogram& y, int k) const;

    /// n_iterations full passes of x <- x + omega * correction(x, y, k),
    /// optionally clamping to x >= 0 after each subset. omega = 0 is accepted
    /// here and leaves x unchanged. If `delta_total` is non-null it receives the
    /// sum of the per-subset corrections of the last pass.
    Image run(Image x, const Sinogram& y, double omega, int n_iterations, bool nonneg_clamp,
              Image* delta_total = nullptr) const;

private:
    FanBeamGeometry geom_;
    std::vector<std::vector<int>> subsets_;
    std::vector<Sinogram> inv_row_;
    std::vector<Image> inv_col_;
};

Image os_sart(const Image& x0, const Sinogram& y, const FanBeamGeometry& geom, const SartConfig& cfg);

/// Correction for an explicit view subset (weights recomputed on each call).
Image sart_correction(const Image& x, const Sinogram& y, const FanBeamGeometry& geom, std::span<const int> subset);

} // namespace owcnf
