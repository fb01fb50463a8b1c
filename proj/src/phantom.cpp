#include "owcnf/phantom.hpp"

#include "owcnf/io.hpp"
#include "owcnf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace owcnf {

namespace {

// Radial clearance between a stripe corner and the ring, in half-width units
// per pixel of image size.
constexpr double kClearancePixels = 2.0;

double uniform(SplitMix64& g, double lo, double hi) {
    return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(g);
}

double max_half_chord(const RrmSpec& s, double inner, double lane_abs_max_edge) {
    const double r2 = inner * inner - lane_abs_max_edge * lane_abs_max_edge;
    if (r2 <= 0.0) {
        return 0.0;
    }
    return std::sqrt(r2) - kClearancePixels * 2.0 / s.image_size;
}

double lane_height(const RrmSpec& s) { return 2.0 * s.stripe_band / s.n_stripes; }

const char* split_name(int split) {
    static const char* names[] = {"train", "val", "test"};
    return names[split];
}

std::string shape_text(const std::vector<int>& shape) {
    std::string out;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        out += (i ? "x" : "") + std::to_string(shape[i]);
    }
    return out;
}

} // namespace

void RrmSpec::validate() const {
    if (image_size < 8) {
        throw std::invalid_argument("RrmSpec: image_size must be at least 8");
    }
    if (n_stripes < 1) {
        throw std::invalid_argument("RrmSpec: n_stripes must be at least 1");
    }
    auto in_unit = [](double lo, double hi) { return lo >= 0.0 && hi <= 1.0 && lo <= hi; };
    if (!in_unit(ring_gray_min, ring_gray_max) || !in_unit(stripe_gray_min, stripe_gray_max)) {
        throw std::invalid_argument("RrmSpec: gray ranges must be ordered and lie in [0, 1]");
    }
    if (!(ring_outer_min <= ring_outer_max && ring_outer_max <= 1.0) || !(ring_thickness_min > 0.0) ||
        ring_thickness_min > ring_thickness_max) {
        throw std::invalid_argument("RrmSpec: invalid ring radii");
    }
    if (!(stripe_width_min > 0.0) || stripe_width_min > stripe_width_max || !(stripe_length_min > 0.0) ||
        stripe_length_min > stripe_length_max) {
        throw std::invalid_argument("RrmSpec: invalid stripe size ranges");
    }
    const double lane = lane_height(*this);
    if (stripe_width_max + 2.0 / image_size >= lane) {
        throw std::invalid_argument("RrmSpec: stripes cannot fit: lanes are narrower than the widest stripe plus a "
                                    "one-pixel gap");
    }
    const double inner_min = ring_outer_min - ring_thickness_max;
    const double edge = stripe_band + 0.5 * stripe_width_max;
    if (2.0 * max_half_chord(*this, inner_min, edge) < stripe_length_min) {
        throw std::invalid_argument("RrmSpec: stripes cannot fit inside the ring at the outermost lane");
    }
}

void DoseModel::validate() const {
    if (!(i0 > 0.0) || !std::isfinite(i0)) {
        throw std::invalid_argument("DoseModel: i0 must be positive and finite");
    }
    if (!(floor >= 1.0)) {
        throw std::invalid_argument("DoseModel: floor must be at least 1 photon");
    }
}

Image make_rrm_phantom(const RrmSpec& spec) {
    spec.validate();
    SplitMix64 g(derive_seed(spec.seed, {0x5252'4d00}));

    const double outer = uniform(g, spec.ring_outer_min, spec.ring_outer_max);
    const double inner = outer - uniform(g, spec.ring_thickness_min, spec.ring_thickness_max);
    const double ring_gray = uniform(g, spec.ring_gray_min, spec.ring_gray_max);

    bool vertical = spec.orientation == StripeOrientation::vertical;
    if (spec.orientation == StripeOrientation::random) {
        vertical = (g() & 1u) != 0;
    }

    struct Stripe {
        double along_lo, along_hi, across_lo, across_hi, gray;
    };
    std::vector<Stripe> stripes;
    const double lane = lane_height(spec);
    for (int k = 0; k < spec.n_stripes; ++k) {
        const double centre = -spec.stripe_band + (k + 0.5) * lane;
        const double width = uniform(g, spec.stripe_width_min, spec.stripe_width_max);
        const double half_chord = max_half_chord(spec, inner, std::abs(centre) + 0.5 * width);
        const double len_hi = std::min(spec.stripe_length_max, 2.0 * half_chord);
        if (len_hi < spec.stripe_length_min) {
            throw std::invalid_argument("make_rrm_phantom: stripe does not fit inside the ring");
        }
        const double length = uniform(g, spec.stripe_length_min, len_hi);
        const double slack = half_chord - 0.5 * length;
        const double mid = uniform(g, -slack, slack);
        const double gray = uniform(g, spec.stripe_gray_min, spec.stripe_gray_max);
        stripes.push_back({mid - 0.5 * length, mid + 0.5 * length, centre - 0.5 * width, centre + 0.5 * width, gray});
    }

    const int n = spec.image_size;
    Image img(n, n);
    for (int r = 0; r < n; ++r) {
        const double v = 2.0 * (r + 0.5) / n - 1.0;
        for (int c = 0; c < n; ++c) {
            const double u = 2.0 * (c + 0.5) / n - 1.0;
            const double rad = std::hypot(u, v);
            double val = (rad >= inner && rad <= outer) ? ring_gray : 0.0;
            const double along = vertical ? v : u;
            const double across = vertical ? u : v;
            for (const auto& s : stripes) {
                if (along >= s.along_lo && along <= s.along_hi && across >= s.across_lo && across <= s.across_hi) {
                    val = s.gray;
                }
            }
            img(r, c) = std::clamp(val, 0.0, 1.0);
        }
    }
    return img;
}

std::vector<double> sample_photon_counts(const Sinogram& y_clean, const DoseModel& dose) {
    dose.validate();
    require_consistent(y_clean, "simulate_low_dose");
    require_finite(y_clean.data, "simulate_low_dose: clean sinogram");
    std::vector<double> counts(y_clean.data.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
        SplitMix64 g(derive_seed(dose.seed, {i}));
        const double mean = dose.i0 * std::exp(-y_clean.data[i]);
        counts[i] = static_cast<double>(std::poisson_distribution<long long>(mean)(g));
    }
    return counts;
}

Sinogram simulate_low_dose(const Sinogram& y_clean, const DoseModel& dose, std::size_t* negative_inputs) {
    const auto counts = sample_photon_counts(y_clean, dose);
    Sinogram out(y_clean.n_views, y_clean.n_bins);
    std::size_t negatives = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        negatives += y_clean.data[i] < 0.0 ? 1 : 0;
        out.data[i] = -std::log(std::max(counts[i], dose.floor) / dose.i0);
    }
    if (negative_inputs != nullptr) {
        *negative_inputs = negatives;
    }
    return out;
}

std::string Manifest::to_text() const {
    std::ostringstream out;
    out << "# kind path seed shape\n";
    for (const auto& e : entries) {
        out << e.kind << " " << e.path << " " << e.seed << " " << shape_text(e.shape) << "\n";
    }
    return out.str();
}

Manifest Manifest::parse(const std::string& text) {
    Manifest m;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        std::istringstream ls(line);
        ManifestEntry e;
        std::string shape;
        if (!(ls >> e.kind >> e.path >> e.seed >> shape)) {
            throw std::invalid_argument("manifest: malformed line '" + line + "'");
        }
        std::istringstream ss(shape);
        std::string dim;
        while (std::getline(ss, dim, 'x')) {
            e.shape.push_back(std::stoi(dim));
        }
        // path is <split>/<index>.<kind>.owcf
        const auto slash = e.path.find('/');
        const auto dot = e.path.find('.', slash + 1);
        if (slash == std::string::npos || dot == std::string::npos) {
            throw std::invalid_argument("manifest: unexpected path '" + e.path + "'");
        }
        e.split = e.path.substr(0, slash);
        e.index = std::stoi(e.path.substr(slash + 1, dot - slash - 1));
        m.entries.push_back(std::move(e));
    }
    return m;
}

Manifest Manifest::load(const std::filesystem::path& path) { return parse(io::read_text(path)); }

const ManifestEntry& Manifest::find(const std::string& kind, const std::string& split, int index) const {
    for (const auto& e : entries) {
        if (e.kind == kind && e.split == split && e.index == index) {
            return e;
        }
    }
    throw std::invalid_argument("manifest: no " + kind + " entry for " + split + "/" + std::to_string(index));
}

int Manifest::count(const std::string& kind, const std::string& split) const {
    return static_cast<int>(std::count_if(entries.begin(), entries.end(),
                                          [&](const auto& e) { return e.kind == kind && e.split == split; }));
}

Manifest make_dataset(const DatasetConfig& cfg, const std::filesystem::path& out_dir) {
    if (cfg.n_train < 0 || cfg.n_val < 0 || cfg.n_test < 0) {
        throw std::invalid_argument("make_dataset: split sizes must be non-negative");
    }
    if (cfg.phantom.image_size != cfg.geometry.image_size) {
        throw std::invalid_argument("make_dataset: phantom and geometry image sizes differ");
    }
    cfg.dose_low.validate();
    cfg.dose_normal.validate();
    cfg.normal_recon.validate(cfg.geometry.n_views);

    const OsSart solver(cfg.geometry, cfg.normal_recon.n_subsets, cfg.normal_recon.subset_order);
    const int counts[] = {cfg.n_train, cfg.n_val, cfg.n_test};
    const std::vector<int> img_shape{cfg.geometry.image_size, cfg.geometry.image_size};
    const std::vector<int> sino_shape{cfg.geometry.n_views, cfg.geometry.n_bins};

    Manifest manifest;
    for (int split = 0; split < 3; ++split) {
        const auto dir = out_dir / split_name(split);
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) {
            throw std::runtime_error("make_dataset: cannot create '" + dir.string() + "': " + ec.message());
        }
        for (int i = 0; i < counts[split]; ++i) {
            char stem[32];
            std::snprintf(stem, sizeof(stem), "%04d", i);
            const std::string rel = std::string(split_name(split)) + "/" + stem;
            auto add = [&](const std::string& kind, std::uint64_t seed, const std::vector<int>& shape) {
                const std::string path = rel + "." + kind + ".owcf";
                manifest.entries.push_back({kind, split_name(split), i, path, seed, shape});
                return out_dir / path;
            };

            RrmSpec spec = cfg.phantom;
            spec.seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(split), static_cast<std::uint64_t>(i), 0});
            DoseModel low = cfg.dose_low;
            low.seed = derive_seed(cfg.dose_low.seed, {cfg.seed, static_cast<std::uint64_t>(split),
                                                       static_cast<std::uint64_t>(i), 1});
            DoseModel normal = cfg.dose_normal;
            normal.seed = derive_seed(cfg.dose_normal.seed, {cfg.seed, static_cast<std::uint64_t>(split),
                                                             static_cast<std::uint64_t>(i), 2});

            const Image phantom = make_rrm_phantom(spec);
            const Sinogram clean = forward_project(phantom, cfg.geometry);
            const Sinogram y_low = simulate_low_dose(clean, low);
            const Sinogram y_normal = simulate_low_dose(clean, normal);
            const Image x_nd = solver.run(Image(cfg.geometry.image_size, cfg.geometry.image_size), y_normal,
                                          cfg.normal_recon.omega, cfg.normal_recon.n_iterations,
                                          cfg.normal_recon.nonneg_clamp);

            io::write_image(add("phantom", spec.seed, img_shape), phantom);
            io::write_sinogram(add("sino_clean", spec.seed, sino_shape), clean);
            io::write_sinogram(add("sino_low", low.seed, sino_shape), y_low);
            io::write_sinogram(add("sino_normal", normal.seed, sino_shape), y_normal);
            io::write_image(add("recon_normal", normal.seed, img_shape), x_nd);
        }
    }
    io::write_text(out_dir / kManifestName, manifest.to_text());
    return manifest;
}

} // namespace owcnf
