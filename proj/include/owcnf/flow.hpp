#pragma once

#include "owcnf/image.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace owcnf::flow {

struct Shape {
    int c = 0;
    int h = 0;
    int w = 0;

    int pixels() const { return h * w; }
    int size() const { return c * h * w; }
    bool operator==(const Shape&) const = default;
};

/// Channel-major (C, H, W) tensor.
template <class T>
struct Tensor {
    Shape shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(Shape s, T fill = T(0)) : shape(s), data(static_cast<std::size_t>(s.size()), fill) {}

    T* channel(int ch) { return data.data() + static_cast<std::size_t>(ch) * shape.pixels(); }
    const T* channel(int ch) const { return data.data() + static_cast<std::size_t>(ch) * shape.pixels(); }
};

template <class T>
Tensor<T> to_tensor(const Image& img);
template <class T>
Image to_image(const Tensor<T>& t);

/// Space-to-depth by 2: out[4c + 2dy + dx, i, j] = in[c, 2i + dy, 2j + dx].
template <class T>
Tensor<T> squeeze(const Tensor<T>& in);
template <class T>
Tensor<T> unsqueeze(const Tensor<T>& in);

/// Architecture of the conditional flow. Each block squeezes its input by 2
/// and applies steps_per_block x (actnorm, 1x1 mixing, affine coupling). There
/// is no factor-out, so the latent has as many elements as the input.
struct FlowArch {
    int n_blocks = 2;
    int steps_per_block = 6;
    int hidden_channels = 64;
    int in_channels = 1;
    int height = 64;
    int width = 64;
    int cond_channels = 1;  ///< the condition has the same height and width as the input
    double scale_clamp = 2.0;

    static FlowArch desk();
    /// 4 blocks x 12 steps, 512 hidden channels, 128 x 128.
    static FlowArch paper();

    void validate() const;

    Shape input_shape() const { return {in_channels, height, width}; }
    Shape cond_input_shape() const { return {cond_channels, height, width}; }
    Shape block_shape(int block) const;
    Shape cond_shape(int block) const;
    Shape latent_shape() const { return block_shape(n_blocks - 1); }
    int n_steps() const { return n_blocks * steps_per_block; }
    int dims() const { return input_shape().size(); }

    bool operator==(const FlowArch&) const = default;
};

/// Parameters of one actnorm / 1x1 mixing / affine coupling step.
///
/// Coupling subnetwork: 3x3 conv (ca + cond -> hidden), ReLU, 1x1 conv
/// (hidden -> hidden), ReLU, 3x3 conv (hidden -> 2 cb). The first cb output
/// channels are the shift, the rest the raw log-scale.
template <class T>
struct StepParams {
    std::vector<T> an_logscale;  ///< [C]
    std::vector<T> an_bias;      ///< [C]
    std::vector<T> mix;          ///< [C x C], row-major
    std::vector<T> w1, b1;       ///< [H x (ca + cc) x 3 x 3], [H]
    std::vector<T> w2, b2;       ///< [H x H], [H]
    std::vector<T> w3, b3;       ///< [2cb x H x 3 x 3], [2cb]
};

template <class T>
struct FlowParams {
    FlowArch arch;
    std::vector<StepParams<T>> steps;  ///< block-major

    /// Same layout, all zeros (used for gradients).
    static FlowParams zeros(const FlowArch& arch);

    /// Visits every parameter tensor as (name, values, dims).
    void for_each(const std::function<void(const std::string&, std::vector<T>&, const std::vector<int>&)>& fn);
    void for_each(const std::function<void(const std::string&, const std::vector<T>&, const std::vector<int>&)>& fn) const;

    std::size_t count() const;
    std::vector<T> flatten() const;
    void unflatten(std::span<const T> values);

    template <class U>
    FlowParams<U> cast() const;

    /// Throws if any value is non-finite or any mixing matrix is singular.
    void validate() const;
};

/// Unit actnorm, identity mixing, random hidden layers, zero coupling output
/// layer: the flow is the identity map up to squeezing.
template <class T>
FlowParams<T> make_identity_params(const FlowArch& arch, std::uint64_t seed);

/// As make_identity_params but with random orthogonal mixing matrices.
template <class T>
FlowParams<T> make_initial_params(const FlowArch& arch, std::uint64_t seed);

template <class T>
struct EncodeResult {
    Tensor<T> z;
    double logdet = 0.0;  ///< log |det dF/dx|
};

template <class T>
struct DecodeResult {
    Tensor<T> x;
    double logdet = 0.0;  ///< log |det dG/dz| = -logdet of encode at x
};

/// z = F(x, c).
template <class T>
EncodeResult<T> encode(const Tensor<T>& x, const Tensor<T>& c, const FlowParams<T>& params);

/// x = G(z, c).
template <class T>
DecodeResult<T> decode(const Tensor<T>& z, const Tensor<T>& c, const FlowParams<T>& params);

/// Negative log-likelihood per dimension in nats:
/// -(sum log N(z_i; 0, 1) + logdet) / D.
template <class T>
double nll(const Tensor<T>& x, const Tensor<T>& c, const FlowParams<T>& params);

/// Mean NLL over the batch; `grad` receives its exact gradient (overwritten).
template <class T>
double grad_params_nll(std::span<const Tensor<T>> xs, std::span<const Tensor<T>> cs, const FlowParams<T>& params,
                       FlowParams<T>& grad);

/// Data-dependent actnorm initialisation: walks the batch through the flow and
/// sets each actnorm so its output has zero mean and unit variance per channel.
template <class T>
void actnorm_data_init(FlowParams<T>& params, std::span<const Tensor<T>> xs, std::span<const Tensor<T>> cs);

/// Records one decode so vector-Jacobian products of G at z can be taken
/// without re-running it.
template <class T>
class DecodeTape {
public:
    DecodeTape(const Tensor<T>& z, const Tensor<T>& c, const FlowParams<T>& params);
    ~DecodeTape();
    DecodeTape(DecodeTape&&) noexcept;
    DecodeTape& operator=(DecodeTape&&) noexcept;

    const Tensor<T>& output() const;
    /// J_G(z)^T v.
    Tensor<T> vjp(const Tensor<T>& v) const;

private:
    struct Impl;
    Impl* impl_;
};

/// J_G(z, c)^T v, i.e. the gradient in z of <v, G(z, c)>.
template <class T>
Tensor<T> vjp_z(const Tensor<T>& z, const Tensor<T>& c, const FlowParams<T>& params, const Tensor<T>& v);

/// Number of encode() calls made by this process. Lets callers assert that a
/// code path never maps an image back into the latent space.
long long encode_call_count();

} // namespace owcnf::flow
