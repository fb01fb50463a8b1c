#pragma once

#include "owcnf/flow.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace owcnf::flow {

enum class Optimizer { adam, sgd };

Optimizer parse_optimizer(const std::string& name);
std::string to_string(Optimizer o);

struct TrainConfig {
    long long steps = 3000;
    int batch_size = 16;       ///< 0 uses the whole dataset every step
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 50.0;   ///< global gradient-norm clip; <= 0 disables
    double dequant_std = 1.0 / 512.0;
    bool actnorm_init = true;
    Optimizer optimizer = Optimizer::adam;
    std::uint64_t seed = 1;
    long long checkpoint_every = 0;  ///< 0 disables periodic checkpoints
    double divergence_factor = 10.0;
    int divergence_patience = 100;

    void validate() const;
};

/// Everything needed to continue training bit-exactly.
struct TrainState {
    FlowParams<float> params;
    std::vector<float> adam_m;
    std::vector<float> adam_v;
    long long step = 0;
    float initial_loss = 0.0f;  ///< loss of the first step; meaningful once step > 0
    int diverging_steps = 0;

    static TrainState fresh(const FlowArch& arch, std::uint64_t seed);
};

struct LossRecord {
    long long step = 0;   ///< 1-based index of the step that produced this loss
    double nll = 0.0;     ///< mean NLL of the batch before the update
    double grad_norm = 0.0;
};

class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Batch indices of a given step: consecutive slices of per-epoch
/// permutations, so the schedule is a pure function of (seed, step).
std::vector<int> batch_indices(int n_items, int batch_size, long long step, std::uint64_t seed);

/// Runs steps until state.step == cfg.steps. Images and conditions are aligned
/// one-to-one. `on_step` receives every loss; `checkpoint` (if non-empty)
/// receives periodic checkpoints and the final state.
void train(std::span<const Tensor<float>> images, std::span<const Tensor<float>> conditions, TrainState& state,
           const TrainConfig& cfg, const std::function<void(const LossRecord&)>& on_step = {},
           const std::filesystem::path& checkpoint = {});

void save_checkpoint(const std::filesystem::path& path, const TrainState& state);
TrainState load_checkpoint(const std::filesystem::path& path);

/// Parameters only (a checkpoint file is also accepted). Loading validates the
/// architecture record and the invertibility of every mixing matrix.
void save_params(const std::filesystem::path& path, const FlowParams<float>& params);
FlowParams<float> load_params(const std::filesystem::path& path);

} // namespace owcnf::flow
