#pragma once

#include "owcnf/condition.hpp"
#include "owcnf/io.hpp"
#include "owcnf/metrics.hpp"
#include "owcnf/phantom.hpp"
#include "owcnf/recon.hpp"
#include "owcnf/train.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace owcnf::pipeline {

enum class Method { ow, tw, sart };

Method parse_method(const std::string& name);
std::string to_string(Method m);

/// Every experiment setting, parsed from a config file.
struct Settings {
    std::filesystem::path work_dir = "work";
    DatasetConfig data;
    std::string clean_kind = "phantom";             ///< dataset kind used as the clean image x
    std::string condition_kind = "recon_normal";    ///< dataset kind the training-side condition is built from
    flow::FlowArch arch;
    std::uint64_t flow_seed = 11;
    flow::TrainConfig train;
    ConditionConfig condition;
    SartConfig condition_recon{0.5, 10, 20, SubsetOrder::strided, true};  ///< R in c = W(D(R(y))) + n
    TuningGrid tuning;
    std::string tuning_split = "val";
    ReconConfig recon;
    MetricConfig metrics;
    std::vector<double> sweep_omegas;
    std::string sweep_split = "test";

    static Settings from_config(const io::Config& cfg);
};

/// Loads a config file and applies "section.key=value" overrides in order.
io::Config load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

// Layout under work_dir.
std::filesystem::path data_dir(const Settings& s);
std::filesystem::path tuned_condition_path(const Settings& s);
std::filesystem::path checkpoint_path(const Settings& s);
std::filesystem::path loss_log_path(const Settings& s);
std::filesystem::path results_dir(const Settings& s, Method m, const std::string& split);
std::filesystem::path metrics_path(const Settings& s, const std::string& split);
std::filesystem::path sweep_path(const Settings& s);

/// Noise stream of a condition, distinct per (split, index, side).
std::uint64_t condition_stream(const std::string& split, int index, bool low_dose);

Manifest gen_data(const Settings& s);

/// Tunes on the configured split and writes the tuned config and report.
TuningResult tune_condition(const Settings& s);

/// The tuned condition config if present in the work dir, else the configured one.
ConditionConfig active_condition(const Settings& s);
ConditionConfig read_condition(const std::filesystem::path& path, ConditionConfig base);
std::string condition_to_text(const ConditionConfig& c);

/// Clean image x, the normal-dose image behind the training-side condition,
/// and the inference-side condition for one dataset item.
Image load_clean(const Settings& s, const Manifest& m, const std::string& split, int index);
Image load_normal_dose(const Settings& s, const Manifest& m, const std::string& split, int index);
Image training_condition(const Settings& s, const ConditionConfig& cc, const Manifest& m, int index);
Image inference_condition(const Settings& s, const ConditionConfig& cc, const Sinogram& y_low, const std::string& split,
                          int index);

/// Trains (or resumes) the flow; appends "step,nll,grad_norm" rows to the loss log.
flow::TrainState train(const Settings& s, bool resume, std::ostream* progress = nullptr);

struct ItemResult {
    int index = 0;
    double psnr = 0.0;
    double ssim = 0.0;
    double seconds = 0.0;
    ReconTrace trace;
};

/// Reconstructs every item of `split` (or just `only_index`) and writes
/// image, trace CSV and PGM preview per item.
std::vector<ItemResult> reconstruct_split(const Settings& s, Method m, const std::string& split,
                                          std::optional<int> only_index = std::nullopt,
                                          std::ostream* progress = nullptr);

/// Reconstructs one sinogram file with the trained model.
ReconResult reconstruct_file(const Settings& s, Method m, const std::filesystem::path& sinogram);

struct MethodRow {
    std::string method;
    int n = 0;
    double psnr_mean = 0.0;
    double psnr_std = 0.0;
    double ssim_mean = 0.0;
    double ssim_std = 0.0;
};

/// Metrics table of every method with results on `split`; written to metrics_path.
std::vector<MethodRow> evaluate(const Settings& s, const std::string& split);
std::string metrics_csv(const std::vector<MethodRow>& rows);

struct SweepRow {
    double omega = 0.0;
    double psnr_mean = 0.0;
};

/// Mean PSNR of the one-way method at each fixed omega (auto_omega off).
std::vector<SweepRow> sweep_omega(const Settings& s, std::ostream* progress = nullptr);
std::string sweep_csv(const std::vector<SweepRow>& rows);

} // namespace owcnf::pipeline
