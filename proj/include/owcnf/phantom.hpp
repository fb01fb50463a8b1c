#pragma once

#include "owcnf/geometry.hpp"
#include "owcnf/image.hpp"
#include "owcnf/sart.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace owcnf {

enum class StripeOrientation { horizontal, vertical, random };

/// Random ring-and-stripes phantom. Lengths are in units of the image
/// half-width (the ring's outer radius is at most 1). Stripes are stacked in
/// equal lanes across [-stripe_band, stripe_band] perpendicular to their
/// orientation, one stripe per lane.
struct RrmSpec {
    int image_size = 64;
    int n_stripes = 10;
    double ring_outer_min = 0.84;
    double ring_outer_max = 0.94;
    double ring_thickness_min = 0.06;
    double ring_thickness_max = 0.10;
    double ring_gray_min = 0.3;
    double ring_gray_max = 0.7;
    double stripe_band = 0.54;
    double stripe_length_min = 0.24;
    double stripe_length_max = 0.80;
    double stripe_width_min = 0.05;
    double stripe_width_max = 0.07;
    double stripe_gray_min = 0.2;
    double stripe_gray_max = 1.0;
    StripeOrientation orientation = StripeOrientation::horizontal;
    std::uint64_t seed = 0;

    void validate() const;
};

struct DoseModel {
    double i0 = 1e3;
    double floor = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

Image make_rrm_phantom(const RrmSpec& spec);

/// Photon counts I_d ~ Poisson(i0 * exp(-y_c)), one independent draw per
/// entry keyed on (dose.seed, entry index). No floor applied.
std::vector<double> sample_photon_counts(const Sinogram& y_clean, const DoseModel& dose);

/// y_n = -ln(max(I_d, floor) / i0). If `negative_inputs` is given it receives
/// the number of negative clean entries (allowed, but usually a caller bug).
Sinogram simulate_low_dose(const Sinogram& y_clean, const DoseModel& dose, std::size_t* negative_inputs = nullptr);

struct DatasetConfig {
    int n_train = 256;
    int n_val = 16;
    int n_test = 8;
    RrmSpec phantom;
    FanBeamGeometry geometry = FanBeamGeometry::desk();
    DoseModel dose_low{1e3, 1.0, 1};
    DoseModel dose_normal{1e6, 1.0, 2};
    SartConfig normal_recon{0.5, 10, 20, SubsetOrder::strided, true};
    std::uint64_t seed = 2024;
};

struct ManifestEntry {
    std::string kind;   ///< phantom, sino_clean, sino_low, sino_normal, recon_normal
    std::string split;  ///< train, val, test
    int index = 0;
    std::string path;   ///< relative to the dataset directory
    std::uint64_t seed = 0;
    std::vector<int> shape;
};

struct Manifest {
    std::vector<ManifestEntry> entries;

    std::string to_text() const;
    static Manifest parse(const std::string& text);
    static Manifest load(const std::filesystem::path& path);

    const ManifestEntry& find(const std::string& kind, const std::string& split, int index) const;
    int count(const std::string& kind, const std::string& split) const;
};

inline constexpr const char* kManifestName = "manifest.txt";

/// Writes every split to out_dir and returns the manifest (also written to
/// out_dir/manifest.txt).
Manifest make_dataset(const DatasetConfig& cfg, const std::filesystem::path& out_dir);

} // namespace owcnf
