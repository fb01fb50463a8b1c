#include "owcnf/condition.hpp"

#include "owcnf/metrics.hpp"
#include "owcnf/rng.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>

namespace owcnf {

namespace {

int reflect(int i, int n) {
    while (i < 0 || i >= n) {
        i = i < 0 ? -i - 1 : 2 * n - i - 1;
    }
    return i;
}

// Orthonormal low-pass analysis filters.
std::span<const double> lowpass_filter(WaveletKind kind) {
    static const double haar[] = {0.70710678118654752440, 0.70710678118654752440};
    static const double db4[] = {-0.010597401785069032193, 0.032883011666885199721, 0.030841381835560763606,
                                 -0.18703481171909308408,  -0.027983769416859854267, 0.63088076792985890788,
                                 0.71484657055291564709,   0.23037781330889650086};
    if (kind == WaveletKind::haar) {
        return haar;
    }
    return db4;
}

void analysis_1d(std::vector<double>& x, std::span<const double> h, std::vector<double>& tmp) {
    const int n = static_cast<int>(x.size());
    const int half = n / 2;
    const int len = static_cast<int>(h.size());
    tmp.assign(n, 0.0);
    for (int i = 0; i < half; ++i) {
        double a = 0.0;
        double d = 0.0;
        for (int k = 0; k < len; ++k) {
            const double v = x[(2 * i + k) % n];
            a += h[k] * v;
            d += ((k % 2 == 0) ? 1.0 : -1.0) * h[len - 1 - k] * v;
        }
        tmp[i] = a;
        tmp[half + i] = d;
    }
    x.swap(tmp);
}

void synthesis_1d(std::vector<double>& x, std::span<const double> h, std::vector<double>& tmp) {
    const int n = static_cast<int>(x.size());
    const int half = n / 2;
    const int len = static_cast<int>(h.size());
    tmp.assign(n, 0.0);
    for (int i = 0; i < half; ++i) {
        const double a = x[i];
        const double d = x[half + i];
        for (int k = 0; k < len; ++k) {
            const double g = ((k % 2 == 0) ? 1.0 : -1.0) * h[len - 1 - k];
            tmp[(2 * i + k) % n] += h[k] * a + g * d;
        }
    }
    x.swap(tmp);
}

template <class Op>
void transform_level(Image& img, int rows, int cols, Op&& op) {
    std::vector<double> line;
    std::vector<double> tmp;
    for (int r = 0; r < rows; ++r) {
        line.assign(img.data.begin() + static_cast<long>(r) * img.width,
                    img.data.begin() + static_cast<long>(r) * img.width + cols);
        op(line, tmp);
        std::copy(line.begin(), line.end(), img.data.begin() + static_cast<long>(r) * img.width);
    }
    line.resize(rows);
    for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < rows; ++r) {
            line[r] = img(r, c);
        }
        op(line, tmp);
        for (int r = 0; r < rows; ++r) {
            img(r, c) = line[r];
        }
    }
}

void check_wavelet_shape(const Image& img, int levels) {
    require_consistent(img, "wavelet");
    if (levels < 0) {
        throw std::invalid_argument("wavelet: negative level count");
    }
    const int div = 1 << levels;
    if (img.width % div != 0 || img.height % div != 0) {
        throw std::invalid_argument("wavelet: image sides must be divisible by 2^levels = " + std::to_string(div));
    }
}

} // namespace

ConditionConfig ConditionConfig::identity() {
    ConditionConfig c;
    c.denoiser = Denoiser::none;
    c.detail_levels_zeroed = 0;
    c.sigma1 = 0.0;
    return c;
}

void ConditionConfig::validate() const {
    if (!(sigma1 >= 0.0)) {
        throw std::invalid_argument("ConditionConfig: sigma1 must be >= 0");
    }
    if (wavelet_levels < 0 || detail_levels_zeroed < 0 || detail_levels_zeroed > wavelet_levels) {
        throw std::invalid_argument("ConditionConfig: need 0 <= detail_levels_zeroed <= wavelet_levels");
    }
    if (denoiser == Denoiser::nlm) {
        if (!(h > 0.0)) {
            throw std::invalid_argument("ConditionConfig: NLM strength h must be > 0");
        }
        if (patch < 1 || patch % 2 == 0 || window < 1 || window % 2 == 0) {
            throw std::invalid_argument("ConditionConfig: NLM patch and window sizes must be odd");
        }
        if (window < patch) {
            throw std::invalid_argument("ConditionConfig: NLM window smaller than patch");
        }
    }
    if (denoiser == Denoiser::gaussian && !(h > 0.0)) {
        throw std::invalid_argument("ConditionConfig: Gaussian blur width must be > 0");
    }
}

Denoiser parse_denoiser(const std::string& name) {
    if (name == "nlm") return Denoiser::nlm;
    if (name == "gaussian") return Denoiser::gaussian;
    if (name == "none") return Denoiser::none;
    throw std::invalid_argument("unknown denoiser '" + name + "'");
}

WaveletKind parse_wavelet(const std::string& name) {
    if (name == "haar") return WaveletKind::haar;
    if (name == "db4") return WaveletKind::db4;
    throw std::invalid_argument("unknown wavelet '" + name + "'");
}

std::string to_string(Denoiser d) {
    switch (d) {
    case Denoiser::nlm: return "nlm";
    case Denoiser::gaussian: return "gaussian";
    case Denoiser::none: return "none";
    }
    return "?";
}

std::string to_string(WaveletKind w) { return w == WaveletKind::haar ? "haar" : "db4"; }

Image nlm_denoise(const Image& img, double h, int patch, int window) {
    require_consistent(img, "nlm_denoise");
    if (!(h > 0.0)) {
        throw std::invalid_argument("nlm_denoise: h must be > 0");
    }
    if (patch < 1 || patch % 2 == 0 || window < 1 || window % 2 == 0) {
        throw std::invalid_argument("nlm_denoise: patch and window sizes must be odd");
    }
    if (window < patch) {
        throw std::invalid_argument("nlm_denoise: window smaller than patch");
    }
    const int W = img.width;
    const int H = img.height;
    const int pr = patch / 2;
    const int wr = window / 2;
    const int pad = pr + wr;

    // Reflect-padded copy so the inner loops are branch free.
    const int PW = W + 2 * pad;
    const int PH = H + 2 * pad;
    std::vector<double> padded(static_cast<std::size_t>(PW) * PH);
    for (int r = 0; r < PH; ++r) {
        for (int c = 0; c < PW; ++c) {
            padded[static_cast<std::size_t>(r) * PW + c] = img(reflect(r - pad, H), reflect(c - pad, W));
        }
    }
    auto at = [&](int r, int c) { return padded[static_cast<std::size_t>(r + pad) * PW + (c + pad)]; };

    const double inv_h2 = 1.0 / (h * h);
    const double inv_patch = 1.0 / (patch * patch);
    Image out(W, H);
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            double wsum = 0.0;
            double acc = 0.0;
            for (int dr = -wr; dr <= wr; ++dr) {
                for (int dc = -wr; dc <= wr; ++dc) {
                    double d2 = 0.0;
                    for (int pr_ = -pr; pr_ <= pr; ++pr_) {
                        for (int pc = -pr; pc <= pr; ++pc) {
                            const double diff = at(r + pr_, c + pc) - at(r + dr + pr_, c + dc + pc);
                            d2 += diff * diff;
                        }
                    }
                    const double w = std::exp(-d2 * inv_patch * inv_h2);
                    wsum += w;
                    acc += w * at(r + dr, c + dc);
                }
            }
            out(r, c) = acc / wsum;
        }
    }
    return out;
}

Image gaussian_blur(const Image& img, double sigma) {
    require_consistent(img, "gaussian_blur");
    if (!(sigma > 0.0)) {
        throw std::invalid_argument("gaussian_blur: sigma must be > 0");
    }
    const int rad = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * rad + 1);
    double total = 0.0;
    for (int i = -rad; i <= rad; ++i) {
        k[i + rad] = std::exp(-0.5 * i * i / (sigma * sigma));
        total += k[i + rad];
    }
    for (double& v : k) {
        v /= total;
    }
    Image tmp(img.width, img.height);
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            double acc = 0.0;
            for (int i = -rad; i <= rad; ++i) {
                acc += k[i + rad] * img(r, reflect(c + i, img.width));
            }
            tmp(r, c) = acc;
        }
    }
    Image out(img.width, img.height);
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            double acc = 0.0;
            for (int i = -rad; i <= rad; ++i) {
                acc += k[i + rad] * tmp(reflect(r + i, img.height), c);
            }
            out(r, c) = acc;
        }
    }
    return out;
}

void wavelet_forward(Image& img, WaveletKind kind, int levels) {
    check_wavelet_shape(img, levels);
    const auto h = lowpass_filter(kind);
    for (int l = 0; l < levels; ++l) {
        transform_level(img, img.height >> l, img.width >> l,
                        [&](std::vector<double>& x, std::vector<double>& tmp) { analysis_1d(x, h, tmp); });
    }
}

void wavelet_inverse(Image& img, WaveletKind kind, int levels) {
    check_wavelet_shape(img, levels);
    const auto h = lowpass_filter(kind);
    for (int l = levels - 1; l >= 0; --l) {
        transform_level(img, img.height >> l, img.width >> l,
                        [&](std::vector<double>& x, std::vector<double>& tmp) { synthesis_1d(x, h, tmp); });
    }
}

Image wavelet_lowpass(const Image& img, const ConditionConfig& cfg) {
    if (cfg.detail_levels_zeroed < 0 || cfg.detail_levels_zeroed > cfg.wavelet_levels) {
        throw std::invalid_argument("wavelet_lowpass: need 0 <= detail_levels_zeroed <= wavelet_levels");
    }
    if (cfg.detail_levels_zeroed == 0) {
        check_wavelet_shape(img, cfg.wavelet_levels);
        return img;
    }
    Image c = img;
    wavelet_forward(c, cfg.wavelet, cfg.wavelet_levels);
    // Level l (0 = finest) owns the region [0, H>>l) x [0, W>>l) minus its
    // low-pass quadrant [0, H>>(l+1)) x [0, W>>(l+1)).
    for (int l = 0; l < cfg.detail_levels_zeroed; ++l) {
        const int rows = img.height >> l;
        const int cols = img.width >> l;
        for (int r = 0; r < rows; ++r) {
            for (int q = 0; q < cols; ++q) {
                if (r >= rows / 2 || q >= cols / 2) {
                    c(r, q) = 0.0;
                }
            }
        }
    }
    wavelet_inverse(c, cfg.wavelet, cfg.wavelet_levels);
    return c;
}

Image denoise_and_filter(const Image& img, const ConditionConfig& cfg) {
    cfg.validate();
    Image d;
    switch (cfg.denoiser) {
    case Denoiser::nlm: d = nlm_denoise(img, cfg.h, cfg.patch, cfg.window); break;
    case Denoiser::gaussian: d = gaussian_blur(img, cfg.h); break;
    case Denoiser::none: d = img; break;
    }
    return wavelet_lowpass(d, cfg);
}

Image add_condition_noise(Image img, const ConditionConfig& cfg, std::uint64_t stream) {
    if (cfg.sigma1 == 0.0) {
        return img;
    }
    SplitMix64 g(derive_seed(cfg.seed, {stream, 0x6e6f697365}));
    std::normal_distribution<double> n(0.0, cfg.sigma1);
    for (double& v : img.data) {
        v += n(g);
    }
    return img;
}

Image make_condition_from_reconstruction(const Image& r, const ConditionConfig& cfg, std::uint64_t stream) {
    return add_condition_noise(denoise_and_filter(r, cfg), cfg, stream);
}

Image make_condition_from_sinogram(const Sinogram& y, const FanBeamGeometry& geom, const SartConfig& sart_cfg,
                                   const ConditionConfig& cfg, std::uint64_t stream) {
    cfg.validate();
    const Image r = os_sart(Image(geom.image_size, geom.image_size), y, geom, sart_cfg);
    return make_condition_from_reconstruction(r, cfg, stream);
}

Image make_condition_from_image(const Image& x_nd, const ConditionConfig& cfg, std::uint64_t stream) {
    return add_condition_noise(denoise_and_filter(x_nd, cfg), cfg, stream);
}

ConditionQuality condition_quality(const Image& c_low, const Image& c_nd, const Image& x_nd) {
    if (!c_low.same_shape(c_nd) || !c_low.same_shape(x_nd)) {
        throw std::invalid_argument("condition_quality: image shapes differ");
    }
    return {ssim(c_low, c_nd), ssim(c_low, x_nd), ssim(c_nd, x_nd)};
}

std::string TuningResult::report() const {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-10s %-7s %-9s %-10s %-13s %-12s %s\n", "h", "zeroed", "sigma1", "ssim_pair",
                  "ssim_low_ref", "ssim_nd_ref", "feasible");
    out << line;
    auto row = [&](const std::string& h, int z, double s, const ConditionQuality& q, const char* tag) {
        std::snprintf(line, sizeof(line), "%-10s %-7d %-9.4g %-10.5f %-13.5f %-12.5f %s\n", h.c_str(), z, s,
                      q.ssim_pair, q.ssim_low_ref, q.ssim_nd_ref, tag);
        out << line;
    };
    row("identity", 0, 0.0, baseline, "baseline");
    for (const auto& c : cells) {
        char hbuf[32];
        std::snprintf(hbuf, sizeof(hbuf), "%.4g", c.cfg.h);
        row(hbuf, c.cfg.detail_levels_zeroed, c.cfg.sigma1, c.mean, c.feasible ? "yes" : "no");
    }
    std::snprintf(line, sizeof(line), "best: denoiser=%s h=%.6g detail_levels_zeroed=%d sigma1=%.6g ssim_pair=%.5f\n",
                  to_string(best.denoiser).c_str(), best.h, best.detail_levels_zeroed, best.sigma1,
                  best_quality.ssim_pair);
    out << line;
    return out.str();
}

TuningResult tune_condition(const std::vector<TuningPair>& pairs, const ConditionConfig& base, const TuningGrid& grid) {
    if (pairs.empty()) {
        throw std::invalid_argument("tune_condition: no tuning pairs");
    }
    if (grid.h.empty() || grid.detail_levels_zeroed.empty() || grid.sigma1.empty()) {
        throw std::invalid_argument("tune_condition: every grid axis needs at least one value");
    }
    const double n = static_cast<double>(pairs.size());
    auto accumulate = [&](auto&& make_low, auto&& make_nd) {
        ConditionQuality q;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const auto qi = condition_quality(make_low(i), make_nd(i), pairs[i].x_nd);
            q.ssim_pair += qi.ssim_pair / n;
            q.ssim_low_ref += qi.ssim_low_ref / n;
            q.ssim_nd_ref += qi.ssim_nd_ref / n;
        }
        return q;
    };

    TuningResult result;
    result.baseline = accumulate([&](std::size_t i) { return pairs[i].r_low; }, [&](std::size_t i) { return pairs[i].x_nd; });

    bool have_best = false;
    bool best_feasible = false;
    for (double h : grid.h) {
        ConditionConfig denoise_cfg = base;
        denoise_cfg.h = h;
        denoise_cfg.detail_levels_zeroed = 0;
        denoise_cfg.sigma1 = 0.0;
        std::vector<Image> d_low;
        std::vector<Image> d_nd;
        for (const auto& p : pairs) {
            ConditionConfig no_wavelet = denoise_cfg;
            d_low.push_back(denoise_and_filter(p.r_low, no_wavelet));
            d_nd.push_back(denoise_and_filter(p.x_nd, no_wavelet));
        }
        for (int zeroed : grid.detail_levels_zeroed) {
            ConditionConfig wcfg = base;
            wcfg.h = h;
            wcfg.detail_levels_zeroed = zeroed;
            std::vector<Image> w_low;
            std::vector<Image> w_nd;
            for (std::size_t i = 0; i < pairs.size(); ++i) {
                w_low.push_back(wavelet_lowpass(d_low[i], wcfg));
                w_nd.push_back(wavelet_lowpass(d_nd[i], wcfg));
            }
            for (double s1 : grid.sigma1) {
                TuningCell cell;
                cell.cfg = wcfg;
                cell.cfg.sigma1 = s1;
                cell.cfg.validate();
                cell.mean = accumulate([&](std::size_t i) { return add_condition_noise(w_low[i], cell.cfg, 2 * i); },
                                       [&](std::size_t i) { return add_condition_noise(w_nd[i], cell.cfg, 2 * i + 1); });
                cell.feasible = cell.mean.ssim_nd_ref >= grid.nd_ref_floor;
                const bool better = !have_best || (cell.feasible && !best_feasible) ||
                                    (cell.feasible == best_feasible && cell.mean.ssim_pair > result.best_quality.ssim_pair);
                if (better) {
                    result.best = cell.cfg;
                    result.best_quality = cell.mean;
                    have_best = true;
                    best_feasible = cell.feasible;
                }
                result.cells.push_back(cell);
            }
        }
    }
    return result;
}

} // namespace owcnf
