#pragma once

#include "owcnf/geometry.hpp"
#include "owcnf/image.hpp"
#include "owcnf/sart.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace owcnf {

enum class Denoiser { nlm, gaussian, none };
enum class WaveletKind { haar, db4 };

/// Settings of the conditionalisation pipeline c = W(D(x)) + n.
struct ConditionConfig {
    Denoiser denoiser = Denoiser::nlm;
    double h = 0.1;          ///< NLM filtering strength, or Gaussian blur std in pixels
    int patch = 5;
    int window = 15;
    int wavelet_levels = 2;
    WaveletKind wavelet = WaveletKind::haar;
    int detail_levels_zeroed = 1;
    double sigma1 = 0.01;    ///< std of the additive Gaussian noise
    std::uint64_t seed = 7;

    /// Denoiser none, no detail levels zeroed, no noise.
    static ConditionConfig identity();
    void validate() const;
};

Denoiser parse_denoiser(const std::string& name);
WaveletKind parse_wavelet(const std::string& name);
std::string to_string(Denoiser d);
std::string to_string(WaveletKind w);

/// Non-local means with uniform square patches, weights exp(-d^2/h^2) where
/// d^2 is the mean squared patch difference. Borders use symmetric reflection.
Image nlm_denoise(const Image& img, double h, int patch, int window);

/// Separable Gaussian blur with reflected borders.
Image gaussian_blur(const Image& img, double sigma);

/// Orthonormal periodic 2D wavelet analysis/synthesis, in place on a
/// Mallat-layout coefficient image.
void wavelet_forward(Image& img, WaveletKind kind, int levels);
void wavelet_inverse(Image& img, WaveletKind kind, int levels);

/// Zeroes all detail subbands at the finest `detail_levels_zeroed` levels.
Image wavelet_lowpass(const Image& img, const ConditionConfig& cfg);

/// Applies D then W (no noise).
Image denoise_and_filter(const Image& img, const ConditionConfig& cfg);

/// Adds N(0, sigma1^2) noise keyed on (cfg.seed, stream).
Image add_condition_noise(Image img, const ConditionConfig& cfg, std::uint64_t stream);

/// Inference-side condition: W(D(R(y))) + n with R = OS-SART from zero.
Image make_condition_from_sinogram(const Sinogram& y, const FanBeamGeometry& geom, const SartConfig& sart_cfg,
                                   const ConditionConfig& cfg, std::uint64_t stream = 0);

/// Same pipeline started from an already reconstructed image (R skipped).
Image make_condition_from_reconstruction(const Image& r, const ConditionConfig& cfg, std::uint64_t stream = 0);

/// Training-side condition from a normal-dose image: W(D(x_nd)) + n.
Image make_condition_from_image(const Image& x_nd, const ConditionConfig& cfg, std::uint64_t stream = 0);

struct ConditionQuality {
    double ssim_pair = 0.0;     ///< SSIM(c_low, c_nd)
    double ssim_low_ref = 0.0;  ///< SSIM(c_low, x_nd)
    double ssim_nd_ref = 0.0;   ///< SSIM(c_nd, x_nd)
};

ConditionQuality condition_quality(const Image& c_low, const Image& c_nd, const Image& x_nd);

struct TuningPair {
    Image r_low;  ///< R(y_low)
    Image x_nd;   ///< normal-dose image
};

struct TuningGrid {
    std::vector<double> h;
    std::vector<int> detail_levels_zeroed;
    std::vector<double> sigma1;
    double nd_ref_floor = 0.0;
};

struct TuningCell {
    ConditionConfig cfg;
    ConditionQuality mean;
    bool feasible = false;
};

struct TuningResult {
    ConditionConfig best;
    ConditionQuality best_quality;
    ConditionQuality baseline;  ///< identity configuration
    std::vector<TuningCell> cells;

    std::string report() const;
};

/// Grid search over (h, detail_levels_zeroed, sigma1) with the other fields
/// of `base` held fixed. Maximises the mean ssim_pair subject to the mean
/// ssim_nd_ref being at least grid.nd_ref_floor.
TuningResult tune_condition(const std::vector<TuningPair>& pairs, const ConditionConfig& base, const TuningGrid& grid);

} // namespace owcnf
