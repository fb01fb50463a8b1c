#include "owcnf/flow.hpp"

#include "owcnf/rng.hpp"

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace owcnf::flow {

namespace {

std::atomic<long long> g_encode_calls{0};

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using CMatMap = Eigen::Map<const RowMat<T>>;

struct StepDims {
    int channels;  // C
    int ca;        // conditioning half (passes through)
    int cb;        // transformed half
    int cc;        // condition channels at this block
    int hidden;
    int height;
    int width;

    int pixels() const { return height * width; }
    int net_in() const { return ca + cc; }
};

StepDims step_dims(const FlowArch& a, int block) {
    const Shape s = a.block_shape(block);
    const Shape c = a.cond_shape(block);
    return {s.c, s.c / 2, s.c - s.c / 2, c.c, a.hidden_channels, s.h, s.w};
}

std::string layer_name(const FlowArch& a, int k, const char* layer) {
    return "block " + std::to_string(k / a.steps_per_block) + " step " + std::to_string(k % a.steps_per_block) + " " +
           layer;
}

template <class T>
void check_finite(const std::vector<T>& v, const FlowArch& a, int k, const char* layer) {
    for (const T x : v) {
        if (!std::isfinite(x)) {
            throw std::runtime_error("flow: non-finite value after " + layer_name(a, k, layer));
        }
    }
}

// col has (C * 9) rows and H * W columns; zero padding.
template <class T>
void im2col3(const T* in, int C, int H, int W, T* col) {
    const std::size_t N = static_cast<std::size_t>(H) * W;
    for (int c = 0; c < C; ++c) {
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                T* row = col + static_cast<std::size_t>(c * 9 + ky * 3 + kx) * N;
                const int dx = kx - 1;
                for (int y = 0; y < H; ++y) {
                    const int sy = y + ky - 1;
                    T* out = row + static_cast<std::size_t>(y) * W;
                    if (sy < 0 || sy >= H) {
                        std::fill(out, out + W, T(0));
                        continue;
                    }
                    const T* src = in + (static_cast<std::size_t>(c) * H + sy) * W;
                    const int x0 = std::max(0, -dx);
                    const int x1 = std::min(W, W - dx);
                    for (int x = 0; x < x0; ++x) out[x] = T(0);
                    for (int x = x0; x < x1; ++x) out[x] = src[x + dx];
                    for (int x = x1; x < W; ++x) out[x] = T(0);
                }
            }
        }
    }
}

template <class T>
void col2im3_add(const T* col, int C, int H, int W, T* in) {
    const std::size_t N = static_cast<std::size_t>(H) * W;
    for (int c = 0; c < C; ++c) {
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const T* row = col + static_cast<std::size_t>(c * 9 + ky * 3 + kx) * N;
                const int dx = kx - 1;
                for (int y = 0; y < H; ++y) {
                    const int sy = y + ky - 1;
                    if (sy < 0 || sy >= H) {
                        continue;
                    }
                    const T* src = row + static_cast<std::size_t>(y) * W;
                    T* dst = in + (static_cast<std::size_t>(c) * H + sy) * W;
                    const int x0 = std::max(0, -dx);
                    const int x1 = std::min(W, W - dx);
                    for (int x = x0; x < x1; ++x) dst[x + dx] += src[x];
                }
            }
        }
    }
}

template <class T>
void add_bias_relu(std::vector<T>& m, const std::vector<T>& bias, int rows, int cols, bool relu) {
    for (int r = 0; r < rows; ++r) {
        T* row = m.data() + static_cast<std::size_t>(r) * cols;
        const T b = bias[r];
        for (int i = 0; i < cols; ++i) {
            const T v = row[i] + b;
            row[i] = relu ? (v > T(0) ? v : T(0)) : v;
        }
    }
}

template <class T>
void add_row_sums(const std::vector<T>& m, int rows, int cols, std::vector<T>& out) {
    for (int r = 0; r < rows; ++r) {
        const T* row = m.data() + static_cast<std::size_t>(r) * cols;
        T acc = 0;
        for (int i = 0; i < cols; ++i) acc += row[i];
        out[r] += acc;
    }
}

// Activations of one coupling subnetwork evaluation.
template <class T>
struct NetTape {
    std::vector<T> net_in;  // (ca + cc) x N
    std::vector<T> h1;      // hidden x N, post-ReLU
    std::vector<T> h2;      // hidden x N, post-ReLU
};

template <class T>
void net_forward(const StepParams<T>& p, const StepDims& d, NetTape<T>& tape, std::vector<T>& out) {
    const int N = d.pixels();
    const int cin = d.net_in();
    std::vector<T> col(static_cast<std::size_t>(cin) * 9 * N);
    im2col3(tape.net_in.data(), cin, d.height, d.width, col.data());
    tape.h1.resize(static_cast<std::size_t>(d.hidden) * N);
    MatMap<T>(tape.h1.data(), d.hidden, N).noalias() =
        CMatMap<T>(p.w1.data(), d.hidden, cin * 9) * CMatMap<T>(col.data(), cin * 9, N);
    add_bias_relu(tape.h1, p.b1, d.hidden, N, true);

    tape.h2.resize(static_cast<std::size_t>(d.hidden) * N);
    MatMap<T>(tape.h2.data(), d.hidden, N).noalias() =
        CMatMap<T>(p.w2.data(), d.hidden, d.hidden) * CMatMap<T>(tape.h1.data(), d.hidden, N);
    add_bias_relu(tape.h2, p.b2, d.hidden, N, true);

    col.resize(static_cast<std::size_t>(d.hidden) * 9 * N);
    im2col3(tape.h2.data(), d.hidden, d.height, d.width, col.data());
    out.resize(static_cast<std::size_t>(2 * d.cb) * N);
    MatMap<T>(out.data(), 2 * d.cb, N).noalias() =
        CMatMap<T>(p.w3.data(), 2 * d.cb, d.hidden * 9) * CMatMap<T>(col.data(), d.hidden * 9, N);
    add_bias_relu(out, p.b3, 2 * d.cb, N, false);
}

// Backpropagates g_out (2cb x N) through the subnetwork. Parameter gradients
// are accumulated into gp when non-null; the input gradient is written to
// g_net_in ((ca + cc) x N) when non-null.
template <class T>
void net_backward(const StepParams<T>& p, const StepDims& d, const NetTape<T>& tape, const std::vector<T>& g_out,
                  StepParams<T>* gp, std::vector<T>* g_net_in) {
    const int N = d.pixels();
    const int cin = d.net_in();
    const int H = d.hidden;
    std::vector<T> col(static_cast<std::size_t>(H) * 9 * N);

    CMatMap<T> G3(g_out.data(), 2 * d.cb, N);
    if (gp != nullptr) {
        im2col3(tape.h2.data(), H, d.height, d.width, col.data());
        MatMap<T>(gp->w3.data(), 2 * d.cb, H * 9).noalias() += G3 * CMatMap<T>(col.data(), H * 9, N).transpose();
        add_row_sums(g_out, 2 * d.cb, N, gp->b3);
    }
    MatMap<T>(col.data(), H * 9, N).noalias() = CMatMap<T>(p.w3.data(), 2 * d.cb, H * 9).transpose() * G3;
    std::vector<T> g_h2(static_cast<std::size_t>(H) * N, T(0));
    col2im3_add(col.data(), H, d.height, d.width, g_h2.data());
    for (std::size_t i = 0; i < g_h2.size(); ++i) {
        if (!(tape.h2[i] > T(0))) g_h2[i] = T(0);
    }

    CMatMap<T> G2(g_h2.data(), H, N);
    if (gp != nullptr) {
        MatMap<T>(gp->w2.data(), H, H).noalias() += G2 * CMatMap<T>(tape.h1.data(), H, N).transpose();
        add_row_sums(g_h2, H, N, gp->b2);
    }
    std::vector<T> g_h1(static_cast<std::size_t>(H) * N);
    MatMap<T>(g_h1.data(), H, N).noalias() = CMatMap<T>(p.w2.data(), H, H).transpose() * G2;
    for (std::size_t i = 0; i < g_h1.size(); ++i) {
        if (!(tape.h1[i] > T(0))) g_h1[i] = T(0);
    }

    CMatMap<T> G1(g_h1.data(), H, N);
    if (gp != nullptr) {
        col.resize(static_cast<std::size_t>(cin) * 9 * N);
        im2col3(tape.net_in.data(), cin, d.height, d.width, col.data());
        MatMap<T>(gp->w1.data(), H, cin * 9).noalias() += G1 * CMatMap<T>(col.data(), cin * 9, N).transpose();
        add_row_sums(g_h1, H, N, gp->b1);
    }
    if (g_net_in != nullptr) {
        col.resize(static_cast<std::size_t>(cin) * 9 * N);
        MatMap<T>(col.data(), cin * 9, N).noalias() = CMatMap<T>(p.w1.data(), H, cin * 9).transpose() * G1;
        g_net_in->assign(static_cast<std::size_t>(cin) * N, T(0));
        col2im3_add(col.data(), cin, d.height, d.width, g_net_in->data());
    }
}

// Everything the backward pass of one step needs.
template <class T>
struct StepTape {
    std::vector<T> an_in;   // encode: actnorm input
    std::vector<T> mix_in;  // encode: mixing input
    NetTape<T> net;
    std::vector<T> s;       // bounded log-scale, cb x N
    std::vector<T> xb;      // encode: transformed-half input; decode: transformed-half output
};

template <class T>
double log_abs_det(const std::vector<T>& m, int n) {
    RowMat<double> a = CMatMap<T>(m.data(), n, n).template cast<double>();
    Eigen::PartialPivLU<RowMat<double>> lu(a);
    const auto& u = lu.matrixLU();
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        acc += std::log(std::abs(u(i, i)));
    }
    return acc;
}

template <class T>
RowMat<T> inverse_of(const std::vector<T>& m, int n) {
    RowMat<double> a = CMatMap<T>(m.data(), n, n).template cast<double>();
    return a.inverse().template cast<T>();
}

template <class T>
void fill_net_in(const T* xa, const Tensor<T>& cond, const StepDims& d, std::vector<T>& net_in) {
    const std::size_t N = d.pixels();
    net_in.resize(static_cast<std::size_t>(d.net_in()) * N);
    std::copy(xa, xa + d.ca * N, net_in.begin());
    std::copy(cond.data.begin(), cond.data.end(), net_in.begin() + d.ca * N);
}

// Bounded log-scale s = clamp * tanh(raw / clamp).
template <class T>
T bounded(T raw, T clamp) {
    return clamp * std::tanh(raw / clamp);
}

template <class T>
double step_forward(const FlowParams<T>& P, int k, const StepDims& d, Tensor<T>& h, const Tensor<T>& cond,
                    StepTape<T>* tape) {
    const StepParams<T>& p = P.steps[k];
    const int N = d.pixels();
    const int C = d.channels;
    double logdet = 0.0;

    if (tape) tape->an_in = h.data;
    for (int c = 0; c < C; ++c) {
        const T e = std::exp(p.an_logscale[c]);
        const T b = p.an_bias[c];
        T* row = h.channel(c);
        for (int i = 0; i < N; ++i) row[i] = row[i] * e + b;
        logdet += static_cast<double>(N) * p.an_logscale[c];
    }
    check_finite(h.data, P.arch, k, "actnorm");

    if (tape) tape->mix_in = h.data;
    {
        RowMat<T> y = CMatMap<T>(p.mix.data(), C, C) * CMatMap<T>(h.data.data(), C, N);
        MatMap<T>(h.data.data(), C, N) = y;
        logdet += static_cast<double>(N) * log_abs_det(p.mix, C);
    }
    check_finite(h.data, P.arch, k, "1x1 mixing");

    NetTape<T> local;
    NetTape<T>& net = tape ? tape->net : local;
    fill_net_in(h.data.data(), cond, d, net.net_in);
    std::vector<T> out;
    net_forward(p, d, net, out);
    const T clamp = static_cast<T>(P.arch.scale_clamp);
    T* xb = h.channel(d.ca);
    if (tape) {
        tape->xb.assign(xb, xb + static_cast<std::size_t>(d.cb) * N);
        tape->s.resize(static_cast<std::size_t>(d.cb) * N);
    }
    double sum_s = 0.0;
    for (std::size_t i = 0; i < static_cast<std::size_t>(d.cb) * N; ++i) {
        const T t = out[i];
        const T s = bounded(out[d.cb * N + i], clamp);
        xb[i] = xb[i] * std::exp(s) + t;
        sum_s += s;
        if (tape) tape->s[i] = s;
    }
    logdet += sum_s;
    check_finite(h.data, P.arch, k, "affine coupling");
    return logdet;
}

// Backward of one encode step. g: gradient w.r.t. the step output, replaced by
// the gradient w.r.t. its input. beta: gradient of the loss w.r.t. logdet.
template <class T>
void step_backward(const FlowParams<T>& P, int k, const StepDims& d, const StepTape<T>& tape, Tensor<T>& g, T beta,
                   StepParams<T>& gp) {
    const StepParams<T>& p = P.steps[k];
    const int N = d.pixels();
    const int C = d.channels;
    const T clamp = static_cast<T>(P.arch.scale_clamp);

    // coupling
    {
        std::vector<T> g_out(static_cast<std::size_t>(2 * d.cb) * N);
        T* gyb = g.channel(d.ca);
        for (std::size_t i = 0; i < static_cast<std::size_t>(d.cb) * N; ++i) {
            const T s = tape.s[i];
            const T es = std::exp(s);
            const T gy = gyb[i];
            g_out[i] = gy;
            const T gs = gy * tape.xb[i] * es + beta;
            const T r = s / clamp;
            g_out[d.cb * N + i] = gs * (T(1) - r * r);
            gyb[i] = gy * es;
        }
        std::vector<T> g_net_in;
        net_backward(p, d, tape.net, g_out, &gp, &g_net_in);
        T* gya = g.channel(0);
        for (std::size_t i = 0; i < static_cast<std::size_t>(d.ca) * N; ++i) {
            gya[i] += g_net_in[i];
        }
    }

    // 1x1 mixing
    {
        CMatMap<T> G(g.data.data(), C, N);
        MatMap<T> gW(gp.mix.data(), C, C);
        gW.noalias() += G * CMatMap<T>(tape.mix_in.data(), C, N).transpose();
        gW += (beta * static_cast<T>(N)) * inverse_of(p.mix, C).transpose();
        RowMat<T> gx = CMatMap<T>(p.mix.data(), C, C).transpose() * G;
        MatMap<T>(g.data.data(), C, N) = gx;
    }

    // actnorm
    for (int c = 0; c < C; ++c) {
        const T e = std::exp(p.an_logscale[c]);
        T* gr = g.channel(c);
        const T* x = tape.an_in.data() + static_cast<std::size_t>(c) * N;
        T g_ls = 0;
        T g_b = 0;
        for (int i = 0; i < N; ++i) {
            g_ls += gr[i] * x[i] * e;
            g_b += gr[i];
            gr[i] *= e;
        }
        gp.an_logscale[c] += g_ls + beta * static_cast<T>(N);
        gp.an_bias[c] += g_b;
    }
}

template <class T>
double step_inverse(const FlowParams<T>& P, int k, const StepDims& d, Tensor<T>& h, const Tensor<T>& cond,
                    StepTape<T>* tape, RowMat<T>* mix_inv_out) {
    const StepParams<T>& p = P.steps[k];
    const int N = d.pixels();
    const int C = d.channels;
    const T clamp = static_cast<T>(P.arch.scale_clamp);
    double logdet = 0.0;

    NetTape<T> local;
    NetTape<T>& net = tape ? tape->net : local;
    fill_net_in(h.data.data(), cond, d, net.net_in);
    std::vector<T> out;
    net_forward(p, d, net, out);
    T* yb = h.channel(d.ca);
    if (tape) tape->s.resize(static_cast<std::size_t>(d.cb) * N);
    double sum_s = 0.0;
    for (std::size_t i = 0; i < static_cast<std::size_t>(d.cb) * N; ++i) {
        const T t = out[i];
        const T s = bounded(out[d.cb * N + i], clamp);
        // divide by the same exp(s) the forward pass multiplies by
        yb[i] = (yb[i] - t) / std::exp(s);
        sum_s += s;
        if (tape) tape->s[i] = s;
    }
    if (tape) tape->xb.assign(yb, yb + static_cast<std::size_t>(d.cb) * N);
    logdet -= sum_s;
    check_finite(h.data, P.arch, k, "affine coupling (inverse)");

    {
        // Solved in double and rounded once; a float-rounded inverse loses
        // about cond(W) ulps per step.
        const RowMat<double> inv_d = CMatMap<T>(p.mix.data(), C, C).template cast<double>().inverse();
        const RowMat<double> x = inv_d * CMatMap<T>(h.data.data(), C, N).template cast<double>();
        MatMap<T>(h.data.data(), C, N) = x.template cast<T>();
        RowMat<T> inv = inv_d.template cast<T>();
        logdet -= static_cast<double>(N) * log_abs_det(p.mix, C);
        if (mix_inv_out) *mix_inv_out = std::move(inv);
    }
    check_finite(h.data, P.arch, k, "1x1 mixing (inverse)");

    for (int c = 0; c < C; ++c) {
        const T e = std::exp(p.an_logscale[c]);
        const T b = p.an_bias[c];
        T* row = h.channel(c);
        for (int i = 0; i < N; ++i) row[i] = (row[i] - b) / e;
        logdet -= static_cast<double>(N) * p.an_logscale[c];
    }
    check_finite(h.data, P.arch, k, "actnorm (inverse)");
    return logdet;
}

template <class T>
std::vector<Tensor<T>> condition_pyramid(const Tensor<T>& c, const FlowArch& a) {
    if (!(c.shape == a.cond_input_shape())) {
        throw std::invalid_argument("flow: condition shape does not match the architecture");
    }
    std::vector<Tensor<T>> out;
    Tensor<T> cur = c;
    for (int b = 0; b < a.n_blocks; ++b) {
        cur = squeeze(cur);
        out.push_back(cur);
    }
    return out;
}

template <class T>
void check_input(const Tensor<T>& x, Shape expected, const char* what) {
    if (!(x.shape == expected) || x.data.size() != static_cast<std::size_t>(expected.size())) {
        throw std::invalid_argument(std::string("flow: ") + what + " shape does not match the architecture");
    }
    for (const T v : x.data) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument(std::string("flow: ") + what + " contains non-finite values");
        }
    }
}

template <class T>
EncodeResult<T> encode_impl(const Tensor<T>& x, const std::vector<Tensor<T>>& conds, const FlowParams<T>& P,
                            std::vector<StepTape<T>>* tapes) {
    const FlowArch& a = P.arch;
    Tensor<T> h = x;
    double logdet = 0.0;
    if (tapes) tapes->resize(a.n_steps());
    for (int b = 0; b < a.n_blocks; ++b) {
        h = squeeze(h);
        const StepDims d = step_dims(a, b);
        for (int s = 0; s < a.steps_per_block; ++s) {
            const int k = b * a.steps_per_block + s;
            logdet += step_forward(P, k, d, h, conds[b], tapes ? &(*tapes)[k] : nullptr);
        }
    }
    return {std::move(h), logdet};
}

template <class T>
double nll_from(const Tensor<T>& z, double logdet) {
    const double D = static_cast<double>(z.data.size());
    double sq = 0.0;
    for (const T v : z.data) sq += static_cast<double>(v) * v;
    return (0.5 * sq + 0.5 * D * std::log(2.0 * std::numbers::pi) - logdet) / D;
}

template <class T>
void random_hidden(StepParams<T>& p, const StepDims& d, SplitMix64& g) {
    std::normal_distribution<double> n(0.0, 1.0);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(d.net_in() * 9));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(d.hidden));
    for (T& v : p.w1) v = static_cast<T>(n(g) * s1);
    for (T& v : p.w2) v = static_cast<T>(n(g) * s2);
}

} // namespace

// ---------------------------------------------------------------------------

template <class T>
Tensor<T> to_tensor(const Image& img) {
    require_consistent(img, "to_tensor");
    Tensor<T> t(Shape{1, img.height, img.width});
    for (std::size_t i = 0; i < img.data.size(); ++i) t.data[i] = static_cast<T>(img.data[i]);
    return t;
}

template <class T>
Image to_image(const Tensor<T>& t) {
    if (t.shape.c != 1) {
        throw std::invalid_argument("to_image: tensor must have one channel");
    }
    Image img(t.shape.w, t.shape.h);
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<double>(t.data[i]);
    return img;
}

template <class T>
Tensor<T> squeeze(const Tensor<T>& in) {
    const Shape s = in.shape;
    if (s.h % 2 != 0 || s.w % 2 != 0) {
        throw std::invalid_argument("squeeze: spatial dimensions must be even");
    }
    Tensor<T> out(Shape{4 * s.c, s.h / 2, s.w / 2});
    const int oh = s.h / 2;
    const int ow = s.w / 2;
    for (int c = 0; c < s.c; ++c)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                T* dst = out.channel(4 * c + 2 * dy + dx);
                const T* src = in.channel(c);
                for (int i = 0; i < oh; ++i)
                    for (int j = 0; j < ow; ++j) dst[i * ow + j] = src[(2 * i + dy) * s.w + 2 * j + dx];
            }
    return out;
}

template <class T>
Tensor<T> unsqueeze(const Tensor<T>& in) {
    const Shape s = in.shape;
    if (s.c % 4 != 0) {
        throw std::invalid_argument("unsqueeze: channel count must be a multiple of 4");
    }
    Tensor<T> out(Shape{s.c / 4, s.h * 2, s.w * 2});
    const int W = s.w * 2;
    for (int c = 0; c < s.c / 4; ++c)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                const T* src = in.channel(4 * c + 2 * dy + dx);
                T* dst = out.channel(c);
                for (int i = 0; i < s.h; ++i)
                    for (int j = 0; j < s.w; ++j) dst[(2 * i + dy) * W + 2 * j + dx] = src[i * s.w + j];
            }
    return out;
}

FlowArch FlowArch::desk() { return FlowArch{}; }

FlowArch FlowArch::paper() {
    FlowArch a;
    a.n_blocks = 4;
    a.steps_per_block = 12;
    a.hidden_channels = 512;
    a.height = 128;
    a.width = 128;
    return a;
}

void FlowArch::validate() const {
    if (n_blocks < 1 || steps_per_block < 1 || hidden_channels < 1 || in_channels < 1 || cond_channels < 0) {
        throw std::invalid_argument("FlowArch: counts must be positive");
    }
    if (n_blocks > 12) {
        throw std::invalid_argument("FlowArch: too many blocks");
    }
    const int div = 1 << n_blocks;
    if (height < 1 || width < 1 || height % div != 0 || width % div != 0) {
        throw std::invalid_argument("FlowArch: spatial dimensions must be divisible by 2^n_blocks");
    }
    if (!(scale_clamp > 0.0) || !std::isfinite(scale_clamp)) {
        throw std::invalid_argument("FlowArch: scale_clamp must be positive");
    }
}

Shape FlowArch::block_shape(int block) const {
    const int f = 1 << (block + 1);
    return {in_channels * f * f, height / f, width / f};
}

Shape FlowArch::cond_shape(int block) const {
    const int f = 1 << (block + 1);
    return {cond_channels * f * f, height / f, width / f};
}

template <class T>
FlowParams<T> FlowParams<T>::zeros(const FlowArch& arch) {
    arch.validate();
    FlowParams<T> p;
    p.arch = arch;
    for (int b = 0; b < arch.n_blocks; ++b) {
        const StepDims d = step_dims(arch, b);
        for (int s = 0; s < arch.steps_per_block; ++s) {
            StepParams<T> sp;
            sp.an_logscale.assign(d.channels, T(0));
            sp.an_bias.assign(d.channels, T(0));
            sp.mix.assign(static_cast<std::size_t>(d.channels) * d.channels, T(0));
            sp.w1.assign(static_cast<std::size_t>(d.hidden) * d.net_in() * 9, T(0));
            sp.b1.assign(d.hidden, T(0));
            sp.w2.assign(static_cast<std::size_t>(d.hidden) * d.hidden, T(0));
            sp.b2.assign(d.hidden, T(0));
            sp.w3.assign(static_cast<std::size_t>(2 * d.cb) * d.hidden * 9, T(0));
            sp.b3.assign(2 * d.cb, T(0));
            p.steps.push_back(std::move(sp));
        }
    }
    return p;
}

namespace {

template <class P, class Fn>
void visit_params(P& params, Fn&& fn) {
    const FlowArch& a = params.arch;
    for (int k = 0; k < static_cast<int>(params.steps.size()); ++k) {
        const StepDims d = step_dims(a, k / a.steps_per_block);
        char prefix[32];
        std::snprintf(prefix, sizeof(prefix), "step%02d.", k);
        const std::string pre(prefix);
        auto& s = params.steps[k];
        fn(pre + "actnorm.logscale", s.an_logscale, std::vector<int>{d.channels});
        fn(pre + "actnorm.bias", s.an_bias, std::vector<int>{d.channels});
        fn(pre + "mix", s.mix, std::vector<int>{d.channels, d.channels});
        fn(pre + "coupling.w1", s.w1, std::vector<int>{d.hidden, d.net_in(), 3, 3});
        fn(pre + "coupling.b1", s.b1, std::vector<int>{d.hidden});
        fn(pre + "coupling.w2", s.w2, std::vector<int>{d.hidden, d.hidden});
        fn(pre + "coupling.b2", s.b2, std::vector<int>{d.hidden});
        fn(pre + "coupling.w3", s.w3, std::vector<int>{2 * d.cb, d.hidden, 3, 3});
        fn(pre + "coupling.b3", s.b3, std::vector<int>{2 * d.cb});
    }
}

} // namespace

template <class T>
void FlowParams<T>::for_each(
    const std::function<void(const std::string&, std::vector<T>&, const std::vector<int>&)>& fn) {
    visit_params(*this, fn);
}

template <class T>
void FlowParams<T>::for_each(
    const std::function<void(const std::string&, const std::vector<T>&, const std::vector<int>&)>& fn) const {
    visit_params(*this, fn);
}

template <class T>
std::size_t FlowParams<T>::count() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const std::vector<T>& v, const std::vector<int>&) { n += v.size(); });
    return n;
}

template <class T>
std::vector<T> FlowParams<T>::flatten() const {
    std::vector<T> out;
    out.reserve(count());
    for_each([&](const std::string&, const std::vector<T>& v, const std::vector<int>&) {
        out.insert(out.end(), v.begin(), v.end());
    });
    return out;
}

template <class T>
void FlowParams<T>::unflatten(std::span<const T> values) {
    if (values.size() != count()) {
        throw std::invalid_argument("FlowParams::unflatten: length mismatch");
    }
    std::size_t pos = 0;
    for_each([&](const std::string&, std::vector<T>& v, const std::vector<int>&) {
        std::copy(values.begin() + pos, values.begin() + pos + v.size(), v.begin());
        pos += v.size();
    });
}

template <class T>
template <class U>
FlowParams<U> FlowParams<T>::cast() const {
    FlowParams<U> out = FlowParams<U>::zeros(arch);
    const auto flat = flatten();
    std::vector<U> conv(flat.begin(), flat.end());
    out.unflatten(conv);
    return out;
}

template <class T>
void FlowParams<T>::validate() const {
    arch.validate();
    if (static_cast<int>(steps.size()) != arch.n_steps()) {
        throw std::invalid_argument("FlowParams: step count does not match the architecture");
    }
    const FlowParams<T> ref = zeros(arch);
    for (std::size_t k = 0; k < steps.size(); ++k) {
        const auto& a = steps[k];
        const auto& b = ref.steps[k];
        if (a.an_logscale.size() != b.an_logscale.size() || a.an_bias.size() != b.an_bias.size() ||
            a.mix.size() != b.mix.size() || a.w1.size() != b.w1.size() || a.b1.size() != b.b1.size() ||
            a.w2.size() != b.w2.size() || a.b2.size() != b.b2.size() || a.w3.size() != b.w3.size() ||
            a.b3.size() != b.b3.size()) {
            throw std::invalid_argument("FlowParams: tensor sizes do not match the architecture at step " +
                                        std::to_string(k));
        }
    }
    for_each([&](const std::string& name, const std::vector<T>& v, const std::vector<int>& dims) {
        for (const T x : v) {
            if (!std::isfinite(x)) {
                throw std::invalid_argument("FlowParams: non-finite value in " + name);
            }
        }
        if (name.ends_with(".mix")) {
            const double ld = log_abs_det(v, dims[0]);
            if (!std::isfinite(ld)) {
                throw std::invalid_argument("FlowParams: singular 1x1 mixing matrix " + name);
            }
        }
    });
}

template <class T>
FlowParams<T> make_identity_params(const FlowArch& arch, std::uint64_t seed) {
    FlowParams<T> p = FlowParams<T>::zeros(arch);
    SplitMix64 g(derive_seed(seed, {0x1d}));
    for (int k = 0; k < arch.n_steps(); ++k) {
        const StepDims d = step_dims(arch, k / arch.steps_per_block);
        auto& sp = p.steps[k];
        for (int i = 0; i < d.channels; ++i) sp.mix[static_cast<std::size_t>(i) * d.channels + i] = T(1);
        random_hidden(sp, d, g);
    }
    return p;
}

template <class T>
FlowParams<T> make_initial_params(const FlowArch& arch, std::uint64_t seed) {
    FlowParams<T> p = make_identity_params<T>(arch, seed);
    SplitMix64 g(derive_seed(seed, {0x0b}));
    std::normal_distribution<double> n(0.0, 1.0);
    for (int k = 0; k < arch.n_steps(); ++k) {
        const int C = step_dims(arch, k / arch.steps_per_block).channels;
        RowMat<double> a(C, C);
        for (int i = 0; i < C; ++i)
            for (int j = 0; j < C; ++j) a(i, j) = n(g);
        Eigen::HouseholderQR<RowMat<double>> qr(a);
        RowMat<double> q = qr.householderQ();
        MatMap<T>(p.steps[k].mix.data(), C, C) = q.cast<T>();
    }
    return p;
}

template <class T>
EncodeResult<T> encode(const Tensor<T>& x, const Tensor<T>& c, const FlowParams<T>& params) {
    ++g_encode_calls;
    check_input(x, params.arch.input_shape(), "input");
    const auto conds = condition_pyramid(c, params.arch);
    return encode_impl<T>(x, conds, params, nullptr);
}

template <class T>
DecodeResult<T> decode(const Tensor<T>& z, const Tensor<T>& c, const FlowParams<T>& params) {
    const FlowArch& a = params.arch;
    check_input(z, a.latent_shape(), "latent");
    const auto conds = condition_pyramid(c, a);
    Tensor<T> h = z;
    double logdet = 0.0;
    for (int b = a.n_blocks - 1; b >= 0; --b) {
        const StepDims d = step_dims(a, b);
        for (int s = a.steps_per_block - 1; s >= 0; --s) {
            logdet += step_inverse<T>(params, b * a.steps_per_block + s, d, h, conds[b], nullptr, nullptr);
        }
        h = unsqueeze(h);
    }
    return {std::move(h), logdet};
}

template <class T>
double nll(const Tensor<T>& x, const Tensor<T>& c, const FlowParams<T>& params) {
    const auto r = encode(x, c, params);
    return nll_from(r.z, r.logdet);
}

template <class T>
double grad_params_nll(std::span<const Tensor<T>> xs, std::span<const Tensor<T>> cs, const FlowParams<T>& params,
                       FlowParams<T>& grad) {
    if (xs.empty() || xs.size() != cs.size()) {
        throw std::invalid_argument("grad_params_nll: need a non-empty batch with one condition per image");
    }
    const FlowArch& a = params.arch;
    grad = FlowParams<T>::zeros(a);
    const double B = static_cast<double>(xs.size());
    const double D = static_cast<double>(a.dims());
    double total = 0.0;
    std::vector<StepTape<T>> tapes;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        ++g_encode_calls;
        check_input(xs[i], a.input_shape(), "input");
        const auto conds = condition_pyramid(cs[i], a);
        auto r = encode_impl(xs[i], conds, params, &tapes);
        total += nll_from(r.z, r.logdet);

        const T scale = static_cast<T>(1.0 / (D * B));
        Tensor<T> g = r.z;
        for (T& v : g.data) v *= scale;
        const T beta = -scale;
        for (int b = a.n_blocks - 1; b >= 0; --b) {
            const StepDims d = step_dims(a, b);
            for (int s = a.steps_per_block - 1; s >= 0; --s) {
                const int k = b * a.steps_per_block + s;
                step_backward(params, k, d, tapes[k], g, beta, grad.steps[k]);
            }
            g = unsqueeze(g);
        }
    }
    grad.for_each([&](const std::string& name, const std::vector<T>& v, const std::vector<int>&) {
        for (const T x : v) {
            if (!std::isfinite(x)) {
                throw std::runtime_error("grad_params_nll: non-finite gradient in " + name);
            }
        }
    });
    return total / B;
}

template <class T>
void actnorm_data_init(FlowParams<T>& params, std::span<const Tensor<T>> xs, std::span<const Tensor<T>> cs) {
    if (xs.empty() || xs.size() != cs.size()) {
        throw std::invalid_argument("actnorm_data_init: need a non-empty batch with one condition per image");
    }
    const FlowArch& a = params.arch;
    std::vector<Tensor<T>> hs(xs.begin(), xs.end());
    std::vector<std::vector<Tensor<T>>> conds;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        check_input(xs[i], a.input_shape(), "input");
        conds.push_back(condition_pyramid(cs[i], a));
    }
    for (int b = 0; b < a.n_blocks; ++b) {
        for (auto& h : hs) h = squeeze(h);
        const StepDims d = step_dims(a, b);
        for (int s = 0; s < a.steps_per_block; ++s) {
            const int k = b * a.steps_per_block + s;
            auto& sp = params.steps[k];
            for (int c = 0; c < d.channels; ++c) {
                double sum = 0.0;
                double sq = 0.0;
                double n = 0.0;
                for (const auto& h : hs) {
                    const T* row = h.channel(c);
                    for (int i = 0; i < d.pixels(); ++i) {
                        sum += row[i];
                        sq += static_cast<double>(row[i]) * row[i];
                    }
                    n += d.pixels();
                }
                const double mean = sum / n;
                const double var = std::max(0.0, sq / n - mean * mean);
                const double ls = -std::log(std::sqrt(var) + 1e-6);
                sp.an_logscale[c] = static_cast<T>(ls);
                sp.an_bias[c] = static_cast<T>(-mean * std::exp(ls));
            }
            for (std::size_t i = 0; i < hs.size(); ++i) {
                step_forward<T>(params, k, d, hs[i], conds[i][b], nullptr);
            }
        }
    }
}

template <class T>
struct DecodeTape<T>::Impl {
    const FlowParams<T>* params;
    Tensor<T> output;
    std::vector<StepTape<T>> tapes;
    std::vector<RowMat<T>> mix_inv;
};

template <class T>
DecodeTape<T>::DecodeTape(const Tensor<T>& z, const Tensor<T>& c, const FlowParams<T>& params) : impl_(new Impl) {
    const FlowArch& a = params.arch;
    impl_->params = &params;
    try {
        check_input(z, a.latent_shape(), "latent");
        const auto conds = condition_pyramid(c, a);
        impl_->tapes.resize(a.n_steps());
        impl_->mix_inv.resize(a.n_steps());
        Tensor<T> h = z;
        for (int b = a.n_blocks - 1; b >= 0; --b) {
            const StepDims d = step_dims(a, b);
            for (int s = a.steps_per_block - 1; s >= 0; --s) {
                const int k = b * a.steps_per_block + s;
                step_inverse(params, k, d, h, conds[b], &impl_->tapes[k], &impl_->mix_inv[k]);
            }
            h = unsqueeze(h);
        }
        impl_->output = std::move(h);
    } catch (...) {
        delete impl_;
        throw;
    }
}

template <class T>
DecodeTape<T>::~DecodeTape() {
    delete impl_;
}

template <class T>
DecodeTape<T>::DecodeTape(DecodeTape&& o) noexcept : impl_(o.impl_) {
    o.impl_ = nullptr;
}

template <class T>
DecodeTape<T>& DecodeTape<T>::operator=(DecodeTape&& o) noexcept {
    if (this != &o) {
        delete impl_;
        impl_ = o.impl_;
        o.impl_ = nullptr;
    }
    return *this;
}

template <class T>
const Tensor<T>& DecodeTape<T>::output() const {
    return impl_->output;
}

template <class T>
Tensor<T> DecodeTape<T>::vjp(const Tensor<T>& v) const {
    const FlowParams<T>& P = *impl_->params;
    const FlowArch& a = P.arch;
    if (!(v.shape == a.input_shape())) {
        throw std::invalid_argument("DecodeTape::vjp: cotangent shape does not match the image shape");
    }
    const T clamp = static_cast<T>(a.scale_clamp);
    Tensor<T> g = v;
    for (int b = 0; b < a.n_blocks; ++b) {
        g = squeeze(g);
        const StepDims d = step_dims(a, b);
        const int N = d.pixels();
        const int C = d.channels;
        for (int s = 0; s < a.steps_per_block; ++s) {
            const int k = b * a.steps_per_block + s;
            const StepParams<T>& p = P.steps[k];
            const StepTape<T>& tape = impl_->tapes[k];

            // actnorm inverse: x = (y - b) e^{-ls}
            for (int c = 0; c < C; ++c) {
                const T e = std::exp(-p.an_logscale[c]);
                T* gr = g.channel(c);
                for (int i = 0; i < N; ++i) gr[i] *= e;
            }
            // mixing inverse: x = W^{-1} y
            {
                RowMat<T> gy = impl_->mix_inv[k].transpose() * CMatMap<T>(g.data.data(), C, N);
                MatMap<T>(g.data.data(), C, N) = gy;
            }
            // coupling inverse: xb = (yb - t) e^{-s}
            {
                std::vector<T> g_out(static_cast<std::size_t>(2 * d.cb) * N);
                T* gxb = g.channel(d.ca);
                for (std::size_t i = 0; i < static_cast<std::size_t>(d.cb) * N; ++i) {
                    const T s_ = tape.s[i];
                    const T em = std::exp(-s_);
                    const T gx = gxb[i];
                    g_out[i] = -gx * em;
                    const T r = s_ / clamp;
                    g_out[d.cb * N + i] = -gx * tape.xb[i] * (T(1) - r * r);
                    gxb[i] = gx * em;
                }
                std::vector<T> g_net_in;
                net_backward<T>(p, d, tape.net, g_out, nullptr, &g_net_in);
                T* gya = g.channel(0);
                for (std::size_t i = 0; i < static_cast<std::size_t>(d.ca) * N; ++i) gya[i] += g_net_in[i];
            }
        }
    }
    return g;
}

template <class T>
Tensor<T> vjp_z(const Tensor<T>& z, const Tensor<T>& c, const FlowParams<T>& params, const Tensor<T>& v) {
    return DecodeTape<T>(z, c, params).vjp(v);
}

long long encode_call_count() { return g_encode_calls.load(); }

#define OWCNF_INSTANTIATE(T)                                                                                          \
    template Tensor<T> to_tensor<T>(const Image&);                                                                    \
    template Image to_image<T>(const Tensor<T>&);                                                                     \
    template Tensor<T> squeeze<T>(const Tensor<T>&);                                                                  \
    template Tensor<T> unsqueeze<T>(const Tensor<T>&);                                                                \
    template struct FlowParams<T>;                                                                                    \
    template FlowParams<T> make_identity_params<T>(const FlowArch&, std::uint64_t);                                   \
    template FlowParams<T> make_initial_params<T>(const FlowArch&, std::uint64_t);                                    \
    template EncodeResult<T> encode<T>(const Tensor<T>&, const Tensor<T>&, const FlowParams<T>&);                     \
    template DecodeResult<T> decode<T>(const Tensor<T>&, const Tensor<T>&, const FlowParams<T>&);                     \
    template double nll<T>(const Tensor<T>&, const Tensor<T>&, const FlowParams<T>&);                                 \
    template double grad_params_nll<T>(std::span<const Tensor<T>>, std::span<const Tensor<T>>, const FlowParams<T>&,  \
                                       FlowParams<T>&);                                                               \
    template void actnorm_data_init<T>(FlowParams<T>&, std::span<const Tensor<T>>, std::span<const Tensor<T>>);     \
    template class DecodeTape<T>;                                                                                     \
    template Tensor<T> vjp_z<T>(const Tensor<T>&, const Tensor<T>&, const FlowParams<T>&, const Tensor<T>&);

OWCNF_INSTANTIATE(float)
OWCNF_INSTANTIATE(double)

template FlowParams<double> FlowParams<float>::cast<double>() const;
template FlowParams<float> FlowParams<double>::cast<float>() const;
template FlowParams<float> FlowParams<float>::cast<float>() const;
template FlowParams<double> FlowParams<double>::cast<double>() const;

} // namespace owcnf::flow
