#pragma once

#include "owcnf/flow.hpp"
#include "owcnf/image.hpp"
#include "owcnf/rng.hpp"

#include <cmath>
#include <random>

namespace testing {

inline owcnf::Image random_image(int w, int h, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    owcnf::SplitMix64 g(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    owcnf::Image img(w, h);
    for (double& v : img.data) v = u(g);
    return img;
}

template <class T>
owcnf::flow::Tensor<T> random_tensor(owcnf::flow::Shape s, std::uint64_t seed, double scale = 1.0) {
    owcnf::SplitMix64 g(seed);
    std::normal_distribution<double> n(0.0, scale);
    owcnf::flow::Tensor<T> t(s);
    for (T& v : t.data) v = static_cast<T>(n(g));
    return t;
}

// Moves every layer away from the identity so tests exercise all paths.
template <class T>
void perturb(owcnf::flow::FlowParams<T>& p, std::uint64_t seed, double scale = 0.1) {
    owcnf::SplitMix64 g(seed);
    std::normal_distribution<double> n(0.0, scale);
    for (auto& s : p.steps) {
        for (T& v : s.an_logscale) v += static_cast<T>(n(g));
        for (T& v : s.an_bias) v += static_cast<T>(n(g));
        for (T& v : s.w3) v += static_cast<T>(n(g));
        for (T& v : s.b3) v += static_cast<T>(n(g));
        for (T& v : s.b1) v += static_cast<T>(n(g));
        for (T& v : s.b2) v += static_cast<T>(n(g));
    }
}

inline owcnf::flow::FlowArch tiny_arch(int size = 8, int blocks = 1, int steps = 2, int hidden = 8) {
    owcnf::flow::FlowArch a;
    a.n_blocks = blocks;
    a.steps_per_block = steps;
    a.hidden_channels = hidden;
    a.height = size;
    a.width = size;
    return a;
}

template <class T>
double max_abs_diff(const std::vector<T>& a, const std::vector<T>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
    return m;
}

} // namespace testing
