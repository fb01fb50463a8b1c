#pragma once

#include "owcnf/flow.hpp"
#include "owcnf/image.hpp"
#include "owcnf/sart.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace owcnf {

enum class OmegaRule { gradient, line_search };

OmegaRule parse_omega_rule(const std::string& name);
std::string to_string(OmegaRule r);

struct ReconConfig {
    double lambda = 1e-3;  ///< weight of ||z||^2
    double sigma = 0.5;    ///< weight of ||x - G(z, c)||^2
    double r1 = 0.1;       ///< proximity of consecutive x iterates
    double r2 = 0.5;       ///< proximity of consecutive z iterates
    double omega0 = 0.1;
    bool auto_omega = true;
    OmegaRule omega_rule = OmegaRule::gradient;
    double omega_lr = 1e-3;
    double omega_min = 1e-4;
    double omega_max = 1.0;
    int K = 60;
    int n_subsets = 10;
    SubsetOrder subset_order = SubsetOrder::strided;
    bool nonneg_clamp = true;
    double z_temperature = 0.7;  ///< z0 = temperature * N(0, I)
    std::uint64_t seed = 0;
    bool early_stop = false;
    double early_stop_tol = 0.01;
    int early_stop_window = 5;

    /// Full loop requirements: sigma > 0, lambda + r2 > 0, K >= 0, finite.
    void validate() const;
};

struct TraceRow {
    int iteration = 0;
    double fidelity = 0.0;   ///< ||y - A x^n||
    double z_norm = 0.0;     ///< ||z^n||
    double proximity = 0.0;  ///< ||x^n - G(z^n, c)||
    double omega = 0.0;      ///< relaxation used by the pass that produced iteration n + 1
    double psnr = std::numeric_limits<double>::quiet_NaN();    ///< of G(z^n, c) vs the reference
    double psnr_x = std::numeric_limits<double>::quiet_NaN();  ///< of x^n vs the reference
};

struct ReconTrace {
    std::vector<TraceRow> rows;

    /// Columns: iteration, fidelity, z_norm, proximity, omega, psnr, psnr_x.
    std::string to_csv() const;
    /// First iteration n such that the relative change of the proximity stayed
    /// below `tol` for `window` consecutive iterations ending at n, or -1.
    int plateau_iteration(double tol = 0.01, int window = 5) const;
};

struct ReconResult {
    Image image;   ///< G(z^K, c) for the flow methods
    Image last_x;  ///< x^K
    flow::Tensor<float> z;
    ReconTrace trace;
};

/// The flow-side inputs of a reconstruction.
struct Prior {
    const flow::FlowParams<float>* params = nullptr;
    flow::Tensor<float> condition;
};

/// Weighted average (x_half + sigma g + r1 xn) / (1 + sigma + r1).
Image combine_x(const Image& x_half, const Image& g, const Image& xn, const ReconConfig& cfg);

/// One OS-SART pass from xn at `omega` followed by combine_x. If
/// `delta_total` is non-null it receives the summed subset corrections.
Image x_update(const Image& xn, const Image& g, const Sinogram& y, const OsSart& sart, double omega,
               const ReconConfig& cfg, Image* delta_total = nullptr);

/// Convenience form that decodes g = G(zn, c) itself.
Image x_update(const Image& xn, const flow::Tensor<float>& zn, const Sinogram& y, const Prior& prior,
               const OsSart& sart, double omega, const ReconConfig& cfg);

/// z^{n+1} = (sigma J^T (x^{n+1} - G(zn, c)) + r2 zn) / (lambda + r2), using a
/// tape recorded at zn.
template <class T>
flow::Tensor<T> z_update(const flow::Tensor<T>& zn, const Image& xnp1, const flow::DecodeTape<T>& tape,
                         const ReconConfig& cfg);

template <class T>
flow::Tensor<T> z_update(const flow::Tensor<T>& zn, const Image& xnp1, const flow::Tensor<T>& c,
                         const flow::FlowParams<T>& params, const ReconConfig& cfg) {
    return z_update(zn, xnp1, flow::DecodeTape<T>(zn, c, params), cfg);
}

/// Surrogate phi(w) = 1/2 ||a + w b||^2 of the distance between x^{n+1}(w)
/// and g, with a = (1 + r1)(xn - g) / (1 + sigma + r1) and
/// b = delta_total / (1 + sigma + r1).
struct OmegaSurrogate {
    Image a;
    Image b;

    double value(double omega) const;
    double derivative(double omega) const;
    /// Unconstrained minimiser -<a, b> / ||b||^2 (current omega if b = 0).
    double minimiser(double omega) const;
};

OmegaSurrogate omega_surrogate(const Image& xn, const Image& g, const Image& delta_total, const ReconConfig& cfg);

/// One update of omega on the surrogate (gradient step or exact line search),
/// clamped to [omega_min, omega_max].
double omega_step(double omega, const Image& xn, const Image& g, const Image& delta_total, const ReconConfig& cfg);

flow::Tensor<float> initial_latent(const flow::FlowArch& arch, const ReconConfig& cfg);

/// Algorithm: x0 = G(z0, c); for n < K: OS-SART pass, weighted average,
/// linearised z step; output G(z^K, c). Never calls encode. `reference`
/// (optional) fills the PSNR columns of the trace.
ReconResult reconstruct(const Sinogram& y, const Prior& prior, const OsSart& sart, const ReconConfig& cfg,
                        const Image* reference = nullptr);

/// Ablation: same loop with z^{n+1} = encode(x^{n+1}, c).
ReconResult reconstruct_two_way(const Sinogram& y, const Prior& prior, const OsSart& sart, const ReconConfig& cfg,
                                const Image* reference = nullptr);

/// Baseline: OS-SART from zero with the same number of passes (K) and the
/// same relaxation (omega0) as the flow methods.
ReconResult reconstruct_sart(const Sinogram& y, const OsSart& sart, const ReconConfig& cfg,
                             const Image* reference = nullptr);

} // namespace owcnf
