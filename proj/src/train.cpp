#include "owcnf/train.hpp"

#include "owcnf/io.hpp"
#include "owcnf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace owcnf::flow {

Optimizer parse_optimizer(const std::string& name) {
    if (name == "adam") return Optimizer::adam;
    if (name == "sgd") return Optimizer::sgd;
    throw std::invalid_argument("unknown optimizer '" + name + "' (expected adam or sgd)");
}

std::string to_string(Optimizer o) { return o == Optimizer::adam ? "adam" : "sgd"; }

void TrainConfig::validate() const {
    if (steps < 0) throw std::invalid_argument("TrainConfig: steps must be >= 0");
    if (batch_size < 0) throw std::invalid_argument("TrainConfig: batch_size must be >= 0");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("TrainConfig: lr must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw std::invalid_argument("TrainConfig: Adam betas must lie in [0, 1)");
    }
    if (!(dequant_std >= 0.0)) throw std::invalid_argument("TrainConfig: dequant_std must be >= 0");
    if (!(divergence_factor > 1.0) || divergence_patience < 1) {
        throw std::invalid_argument("TrainConfig: divergence settings out of range");
    }
}

TrainState TrainState::fresh(const FlowArch& arch, std::uint64_t seed) {
    TrainState s;
    s.params = make_initial_params<float>(arch, seed);
    s.adam_m.assign(s.params.count(), 0.0f);
    s.adam_v.assign(s.params.count(), 0.0f);
    return s;
}

std::vector<int> batch_indices(int n_items, int batch_size, long long step, std::uint64_t seed) {
    if (n_items < 1) throw std::invalid_argument("batch_indices: empty dataset");
    if (batch_size <= 0 || batch_size >= n_items) {
        std::vector<int> all(n_items);
        std::iota(all.begin(), all.end(), 0);
        return all;
    }
    std::vector<int> out;
    long long epoch_cached = -1;
    std::vector<int> perm(n_items);
    for (int j = 0; j < batch_size; ++j) {
        const long long s = step * batch_size + j;
        const long long epoch = s / n_items;
        if (epoch != epoch_cached) {
            std::iota(perm.begin(), perm.end(), 0);
            SplitMix64 g(derive_seed(seed, {0xe90c, static_cast<std::uint64_t>(epoch)}));
            // Fisher-Yates with our own draws: std::shuffle is not specified
            // bit-for-bit across standard libraries.
            for (int i = n_items - 1; i > 0; --i) {
                const int k = static_cast<int>(g() % static_cast<std::uint64_t>(i + 1));
                std::swap(perm[i], perm[k]);
            }
            epoch_cached = epoch;
        }
        out.push_back(perm[s % n_items]);
    }
    return out;
}

namespace {

Tensor<float> dequantize(const Tensor<float>& x, double std_dev, std::uint64_t seed, long long step, int slot) {
    if (std_dev == 0.0) return x;
    Tensor<float> out = x;
    SplitMix64 g(derive_seed(seed, {0xde9, static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(slot)}));
    std::normal_distribution<double> n(0.0, std_dev);
    for (float& v : out.data) v = static_cast<float>(v + n(g));
    return out;
}

bool diverged(double loss, double initial, double factor) {
    return loss > initial + (factor - 1.0) * std::max(std::abs(initial), 1.0);
}

} // namespace

void train(std::span<const Tensor<float>> images, std::span<const Tensor<float>> conditions, TrainState& state,
           const TrainConfig& cfg, const std::function<void(const LossRecord&)>& on_step,
           const std::filesystem::path& checkpoint) {
    cfg.validate();
    if (images.empty() || images.size() != conditions.size()) {
        throw std::invalid_argument("train: need a non-empty dataset with one condition per image");
    }
    state.params.validate();
    const std::size_t n_params = state.params.count();
    if (state.adam_m.size() != n_params || state.adam_v.size() != n_params) {
        throw std::invalid_argument("train: optimizer state does not match the parameters");
    }
    const int n = static_cast<int>(images.size());

    std::vector<Tensor<float>> xs;
    std::vector<Tensor<float>> cs;
    FlowParams<float> grad;
    while (state.step < cfg.steps) {
        const auto idx = batch_indices(n, cfg.batch_size, state.step, cfg.seed);
        xs.clear();
        cs.clear();
        for (std::size_t j = 0; j < idx.size(); ++j) {
            xs.push_back(dequantize(images[idx[j]], cfg.dequant_std, cfg.seed, state.step, static_cast<int>(j)));
            cs.push_back(conditions[idx[j]]);
        }
        if (state.step == 0 && cfg.actnorm_init) {
            actnorm_data_init<float>(state.params, xs, cs);
        }

        const double loss = grad_params_nll<float>(xs, cs, state.params, grad);
        std::vector<float> g = grad.flatten();
        double norm = 0.0;
        for (const float v : g) norm += static_cast<double>(v) * v;
        norm = std::sqrt(norm);
        if (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) {
            const float scale = static_cast<float>(cfg.clip_norm / norm);
            for (float& v : g) v *= scale;
        }

        std::vector<float> p = state.params.flatten();
        const long long t = state.step + 1;
        if (cfg.optimizer == Optimizer::adam) {
            const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
            const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double m = cfg.beta1 * state.adam_m[i] + (1.0 - cfg.beta1) * g[i];
                const double v = cfg.beta2 * state.adam_v[i] + (1.0 - cfg.beta2) * static_cast<double>(g[i]) * g[i];
                state.adam_m[i] = static_cast<float>(m);
                state.adam_v[i] = static_cast<float>(v);
                p[i] = static_cast<float>(p[i] - cfg.lr * (m / c1) / (std::sqrt(v / c2) + cfg.adam_eps));
            }
        } else {
            for (std::size_t i = 0; i < p.size(); ++i) p[i] = static_cast<float>(p[i] - cfg.lr * g[i]);
        }
        state.params.unflatten(p);
        state.params.validate();
        state.step = t;

        if (t == 1) state.initial_loss = static_cast<float>(loss);
        state.diverging_steps = diverged(loss, state.initial_loss, cfg.divergence_factor) ? state.diverging_steps + 1 : 0;
        if (on_step) on_step({t, loss, norm});
        if (state.diverging_steps >= cfg.divergence_patience) {
            std::ostringstream msg;
            msg << "train: diverged at step " << t << ": nll " << loss << " stayed above "
                << cfg.divergence_factor << "x the initial " << state.initial_loss << " for "
                << state.diverging_steps << " steps (lower the learning rate)";
            throw DivergenceError(msg.str());
        }
        if (!checkpoint.empty() && cfg.checkpoint_every > 0 && t % cfg.checkpoint_every == 0) {
            save_checkpoint(checkpoint, state);
        }
    }
    if (!checkpoint.empty()) save_checkpoint(checkpoint, state);
}

namespace {

io::TensorRecord arch_record(const FlowArch& a) {
    return {"arch",
            {8},
            {static_cast<float>(a.n_blocks), static_cast<float>(a.steps_per_block), static_cast<float>(a.hidden_channels),
             static_cast<float>(a.in_channels), static_cast<float>(a.height), static_cast<float>(a.width),
             static_cast<float>(a.cond_channels), static_cast<float>(a.scale_clamp)}};
}

FlowArch arch_from(const io::TensorRecord& r) {
    if (r.data.size() != 8) throw std::invalid_argument("checkpoint: malformed arch record");
    FlowArch a;
    a.n_blocks = static_cast<int>(r.data[0]);
    a.steps_per_block = static_cast<int>(r.data[1]);
    a.hidden_channels = static_cast<int>(r.data[2]);
    a.in_channels = static_cast<int>(r.data[3]);
    a.height = static_cast<int>(r.data[4]);
    a.width = static_cast<int>(r.data[5]);
    a.cond_channels = static_cast<int>(r.data[6]);
    a.scale_clamp = r.data[7];
    a.validate();
    return a;
}

std::vector<io::TensorRecord> param_records(const FlowParams<float>& params) {
    std::vector<io::TensorRecord> recs{arch_record(params.arch)};
    params.for_each([&](const std::string& name, const std::vector<float>& v, const std::vector<int>& dims) {
        recs.push_back({name, std::vector<std::uint32_t>(dims.begin(), dims.end()), v});
    });
    return recs;
}

FlowParams<float> params_from(const std::vector<io::TensorRecord>& recs, const std::filesystem::path& path) {
    FlowParams<float> p = FlowParams<float>::zeros(arch_from(io::find_record(recs, "arch")));
    p.for_each([&](const std::string& name, std::vector<float>& v, const std::vector<int>& dims) {
        const auto& r = io::find_record(recs, name);
        if (!std::equal(r.dims.begin(), r.dims.end(), dims.begin(), dims.end(),
                        [](std::uint32_t a, int b) { return a == static_cast<std::uint32_t>(b); })) {
            throw std::invalid_argument(path.string() + ": record " + name + " has the wrong shape for the architecture");
        }
        v = r.data;
    });
    try {
        p.validate();
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
    return p;
}

} // namespace

void save_params(const std::filesystem::path& path, const FlowParams<float>& params) {
    io::write_container(path, param_records(params));
}

FlowParams<float> load_params(const std::filesystem::path& path) { return params_from(io::read_container(path), path); }

void save_checkpoint(const std::filesystem::path& path, const TrainState& state) {
    auto recs = param_records(state.params);
    const auto n = static_cast<std::uint32_t>(state.adam_m.size());
    recs.push_back({"optim.adam_m", {n}, state.adam_m});
    recs.push_back({"optim.adam_v", {n}, state.adam_v});
    // The step count is split into two exactly representable halves.
    const auto lo = static_cast<float>(state.step % (1 << 20));
    const auto hi = static_cast<float>(state.step / (1 << 20));
    recs.push_back({"optim.state", {4}, {lo, hi, state.initial_loss, static_cast<float>(state.diverging_steps)}});
    io::write_container(path, recs);
}

TrainState load_checkpoint(const std::filesystem::path& path) {
    const auto recs = io::read_container(path);
    TrainState s;
    s.params = params_from(recs, path);
    s.adam_m = io::find_record(recs, "optim.adam_m").data;
    s.adam_v = io::find_record(recs, "optim.adam_v").data;
    const auto& st = io::find_record(recs, "optim.state").data;
    if (st.size() != 4 || s.adam_m.size() != s.params.count() || s.adam_v.size() != s.params.count()) {
        throw std::invalid_argument(path.string() + ": malformed optimizer state");
    }
    s.step = static_cast<long long>(st[0]) + static_cast<long long>(st[1]) * (1 << 20);
    s.initial_loss = st[2];
    s.diverging_steps = static_cast<int>(st[3]);
    return s;
}

} // namespace owcnf::flow
