#include "owcnf/recon.hpp"

#include "owcnf/geometry.hpp"
#include "owcnf/metrics.hpp"
#include "owcnf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>

namespace owcnf {

OmegaRule parse_omega_rule(const std::string& name) {
    if (name == "gradient") return OmegaRule::gradient;
    if (name == "line_search") return OmegaRule::line_search;
    throw std::invalid_argument("unknown omega rule '" + name + "' (expected gradient or line_search)");
}

std::string to_string(OmegaRule r) { return r == OmegaRule::gradient ? "gradient" : "line_search"; }

void ReconConfig::validate() const {
    for (const double v : {lambda, sigma, r1, r2, omega0, omega_lr, omega_min, omega_max, z_temperature}) {
        if (!std::isfinite(v)) throw std::invalid_argument("ReconConfig: all values must be finite");
    }
    if (!(sigma > 0.0)) throw std::invalid_argument("ReconConfig: sigma must be > 0");
    if (lambda < 0.0 || r1 < 0.0 || r2 < 0.0) throw std::invalid_argument("ReconConfig: lambda, r1, r2 must be >= 0");
    if (!(lambda + r2 > 0.0)) throw std::invalid_argument("ReconConfig: lambda + r2 must be > 0");
    if (K < 0) throw std::invalid_argument("ReconConfig: K must be >= 0");
    if (!(omega0 > 0.0)) throw std::invalid_argument("ReconConfig: omega0 must be > 0");
    if (!(omega_min > 0.0 && omega_min <= omega_max)) throw std::invalid_argument("ReconConfig: bad omega bounds");
    if (omega_lr < 0.0) throw std::invalid_argument("ReconConfig: omega_lr must be >= 0");
    if (n_subsets < 1) throw std::invalid_argument("ReconConfig: n_subsets must be >= 1");
    if (early_stop_window < 1 || !(early_stop_tol > 0.0)) throw std::invalid_argument("ReconConfig: bad early stop");
}

std::string ReconTrace::to_csv() const {
    std::ostringstream out;
    out << "iteration,fidelity,z_norm,proximity,omega,psnr,psnr_x\n";
    out.precision(17);
    for (const auto& r : rows) {
        out << r.iteration << ',' << r.fidelity << ',' << r.z_norm << ',' << r.proximity << ',' << r.omega << ','
            << r.psnr << ',' << r.psnr_x << '\n';
    }
    return out.str();
}

int ReconTrace::plateau_iteration(double tol, int window) const {
    int run = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double prev = rows[i - 1].proximity;
        const double cur = rows[i].proximity;
        const double rel = std::abs(cur - prev) / std::max(std::abs(prev), 1e-12);
        run = rel < tol ? run + 1 : 0;
        if (run >= window) return rows[i].iteration;
    }
    return -1;
}

Image combine_x(const Image& x_half, const Image& g, const Image& xn, const ReconConfig& cfg) {
    if (!x_half.same_shape(g) || !x_half.same_shape(xn)) {
        throw std::invalid_argument("combine_x: image shapes differ");
    }
    const double denom = 1.0 + cfg.sigma + cfg.r1;
    Image out(xn.width, xn.height);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = (x_half.data[i] + cfg.sigma * g.data[i] + cfg.r1 * xn.data[i]) / denom;
    }
    return out;
}

Image x_update(const Image& xn, const Image& g, const Sinogram& y, const OsSart& sart, double omega,
               const ReconConfig& cfg, Image* delta_total) {
    const Image x_half = sart.run(xn, y, omega, 1, cfg.nonneg_clamp, delta_total);
    return combine_x(x_half, g, xn, cfg);
}

Image x_update(const Image& xn, const flow::Tensor<float>& zn, const Sinogram& y, const Prior& prior,
               const OsSart& sart, double omega, const ReconConfig& cfg) {
    const Image g = flow::to_image(flow::decode(zn, prior.condition, *prior.params).x);
    return x_update(xn, g, y, sart, omega, cfg);
}

template <class T>
flow::Tensor<T> z_update(const flow::Tensor<T>& zn, const Image& xnp1, const flow::DecodeTape<T>& tape,
                         const ReconConfig& cfg) {
    if (!(cfg.lambda + cfg.r2 > 0.0)) throw std::invalid_argument("z_update: lambda + r2 must be > 0");
    const auto& g = tape.output();
    if (xnp1.size() != g.data.size()) throw std::invalid_argument("z_update: image does not match the flow");
    flow::Tensor<T> r(g.shape);
    for (std::size_t i = 0; i < r.data.size(); ++i) r.data[i] = static_cast<T>(xnp1.data[i] - g.data[i]);
    const auto jt = tape.vjp(r);
    flow::Tensor<T> out(zn.shape);
    const double denom = cfg.lambda + cfg.r2;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = static_cast<T>((cfg.sigma * jt.data[i] + cfg.r2 * zn.data[i]) / denom);
    }
    return out;
}

template flow::Tensor<float> z_update<float>(const flow::Tensor<float>&, const Image&, const flow::DecodeTape<float>&,
                                             const ReconConfig&);
template flow::Tensor<double> z_update<double>(const flow::Tensor<double>&, const Image&,
                                               const flow::DecodeTape<double>&, const ReconConfig&);

double OmegaSurrogate::value(double omega) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] + omega * b.data[i];
        acc += d * d;
    }
    return 0.5 * acc;
}

double OmegaSurrogate::derivative(double omega) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) acc += (a.data[i] + omega * b.data[i]) * b.data[i];
    return acc;
}

double OmegaSurrogate::minimiser(double omega) const {
    const double bb = dot(b.data, b.data);
    if (bb == 0.0) return omega;
    return -dot(a.data, b.data) / bb;
}

OmegaSurrogate omega_surrogate(const Image& xn, const Image& g, const Image& delta_total, const ReconConfig& cfg) {
    if (!xn.same_shape(g) || !xn.same_shape(delta_total)) {
        throw std::invalid_argument("omega_surrogate: image shapes differ");
    }
    const double denom = 1.0 + cfg.sigma + cfg.r1;
    OmegaSurrogate s{Image(xn.width, xn.height), Image(xn.width, xn.height)};
    for (std::size_t i = 0; i < xn.data.size(); ++i) {
        s.a.data[i] = (1.0 + cfg.r1) * (xn.data[i] - g.data[i]) / denom;
        s.b.data[i] = delta_total.data[i] / denom;
    }
    return s;
}

double omega_step(double omega, const Image& xn, const Image& g, const Image& delta_total, const ReconConfig& cfg) {
    const OmegaSurrogate s = omega_surrogate(xn, g, delta_total, cfg);
    const double next =
        cfg.omega_rule == OmegaRule::line_search ? s.minimiser(omega) : omega - cfg.omega_lr * s.derivative(omega);
    return std::clamp(next, cfg.omega_min, cfg.omega_max);
}

flow::Tensor<float> initial_latent(const flow::FlowArch& arch, const ReconConfig& cfg) {
    flow::Tensor<float> z(arch.latent_shape());
    SplitMix64 g(derive_seed(cfg.seed, {0x2e0}));
    std::normal_distribution<double> n(0.0, 1.0);
    for (float& v : z.data) v = static_cast<float>(cfg.z_temperature * n(g));
    return z;
}

namespace {

double tensor_norm(const flow::Tensor<float>& t) {
    double acc = 0.0;
    for (const float v : t.data) acc += static_cast<double>(v) * v;
    return std::sqrt(acc);
}

double residual_norm(const Sinogram& y, const Image& x, const FanBeamGeometry& geom) {
    const Sinogram ax = forward_project(x, geom);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i) acc += (y.data[i] - ax.data[i]) * (y.data[i] - ax.data[i]);
    return std::sqrt(acc);
}

double distance(const Image& a, const Image& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) acc += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
    return std::sqrt(acc);
}

void check_inputs(const Sinogram& y, const Prior& prior, const OsSart& sart) {
    const auto& geom = sart.geometry();
    if (y.n_views != geom.n_views || y.n_bins != geom.n_bins) {
        throw std::invalid_argument("reconstruct: sinogram shape does not match the geometry");
    }
    require_finite(y.data, "reconstruct: sinogram");
    if (prior.params == nullptr) throw std::invalid_argument("reconstruct: no flow parameters");
    const auto& a = prior.params->arch;
    if (a.height != geom.image_size || a.width != geom.image_size || a.in_channels != 1) {
        throw std::invalid_argument("reconstruct: flow image shape does not match the geometry");
    }
    if (!(prior.condition.shape == a.cond_input_shape())) {
        throw std::invalid_argument("reconstruct: condition shape does not match the flow");
    }
}

[[noreturn]] void abort_non_finite(const ReconTrace& trace, const char* what) {
    std::ostringstream msg;
    msg << "reconstruct: non-finite " << what << " after iteration " << trace.rows.size() << "\n" << trace.to_csv();
    throw std::runtime_error(msg.str());
}

template <class V>
bool all_finite(const std::vector<V>& v) {
    return std::all_of(v.begin(), v.end(), [](V e) { return std::isfinite(e); });
}

enum class LatentRule { one_way, two_way };

ReconResult run_flow_loop(const Sinogram& y, const Prior& prior, const OsSart& sart, const ReconConfig& cfg,
                          const Image* reference, LatentRule rule) {
    cfg.validate();
    check_inputs(y, prior, sart);
    const auto& params = *prior.params;
    const auto& c = prior.condition;
    const auto& geom = sart.geometry();

    ReconResult res;
    flow::Tensor<float> z = initial_latent(params.arch, cfg);
    auto tape = std::make_unique<flow::DecodeTape<float>>(z, c, params);
    Image g = flow::to_image(tape->output());
    Image x = g;
    double omega = cfg.omega0;

    auto record = [&](int n) {
        TraceRow r;
        r.iteration = n;
        r.fidelity = residual_norm(y, x, geom);
        r.z_norm = tensor_norm(z);
        r.proximity = distance(x, g);
        r.omega = omega;
        if (reference != nullptr) {
            r.psnr = psnr(g, *reference);
            r.psnr_x = psnr(x, *reference);
        }
        res.trace.rows.push_back(r);
    };

    for (int n = 0; n < cfg.K; ++n) {
        record(n);
        Image delta;
        Image x_next = x_update(x, g, y, sart, omega, cfg, cfg.auto_omega ? &delta : nullptr);
        if (!all_finite(x_next.data)) abort_non_finite(res.trace, "image iterate");
        if (cfg.auto_omega) omega = omega_step(omega, x, g, delta, cfg);
        if (rule == LatentRule::one_way) {
            z = z_update(z, x_next, *tape, cfg);
        } else {
            z = flow::encode(flow::to_tensor<float>(x_next), c, params).z;
        }
        if (!all_finite(z.data)) abort_non_finite(res.trace, "latent iterate");
        x = std::move(x_next);
        tape = std::make_unique<flow::DecodeTape<float>>(z, c, params);
        g = flow::to_image(tape->output());
        if (cfg.early_stop && res.trace.plateau_iteration(cfg.early_stop_tol, cfg.early_stop_window) >= 0) {
            break;
        }
    }
    record(static_cast<int>(res.trace.rows.size()));
    res.image = std::move(g);
    res.last_x = std::move(x);
    res.z = std::move(z);
    return res;
}

} // namespace

ReconResult reconstruct(const Sinogram& y, const Prior& prior, const OsSart& sart, const ReconConfig& cfg,
                        const Image* reference) {
    return run_flow_loop(y, prior, sart, cfg, reference, LatentRule::one_way);
}

ReconResult reconstruct_two_way(const Sinogram& y, const Prior& prior, const OsSart& sart, const ReconConfig& cfg,
                                const Image* reference) {
    return run_flow_loop(y, prior, sart, cfg, reference, LatentRule::two_way);
}

ReconResult reconstruct_sart(const Sinogram& y, const OsSart& sart, const ReconConfig& cfg, const Image* reference) {
    if (cfg.K < 0 || !(cfg.omega0 > 0.0)) throw std::invalid_argument("reconstruct_sart: bad K or omega0");
    const auto& geom = sart.geometry();
    if (y.n_views != geom.n_views || y.n_bins != geom.n_bins) {
        throw std::invalid_argument("reconstruct_sart: sinogram shape does not match the geometry");
    }
    ReconResult res;
    Image x(geom.image_size, geom.image_size);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    auto record = [&](int n) {
        TraceRow r{n, residual_norm(y, x, geom), nan, nan, cfg.omega0, nan, nan};
        if (reference != nullptr) r.psnr = r.psnr_x = psnr(x, *reference);
        res.trace.rows.push_back(r);
    };
    for (int n = 0; n < cfg.K; ++n) {
        record(n);
        x = sart.run(std::move(x), y, cfg.omega0, 1, cfg.nonneg_clamp);
    }
    record(cfg.K);
    res.image = x;
    res.last_x = std::move(x);
    return res;
}

} // namespace owcnf
