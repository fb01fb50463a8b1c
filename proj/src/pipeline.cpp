#include "owcnf/pipeline.hpp"

#include "owcnf/geometry.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace owcnf::pipeline {

namespace fs = std::filesystem;

Method parse_method(const std::string& name) {
    if (name == "ow") return Method::ow;
    if (name == "tw") return Method::tw;
    if (name == "sart") return Method::sart;
    throw std::invalid_argument("unknown method '" + name + "' (expected ow, tw or sart)");
}

std::string to_string(Method m) {
    switch (m) {
    case Method::ow: return "ow";
    case Method::tw: return "tw";
    case Method::sart: return "sart";
    }
    return "?";
}

namespace {

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    io::write_text(path, text);
}

StripeOrientation parse_orientation(const std::string& s) {
    if (s == "horizontal") return StripeOrientation::horizontal;
    if (s == "vertical") return StripeOrientation::vertical;
    if (s == "random") return StripeOrientation::random;
    throw std::invalid_argument("unknown stripe orientation '" + s + "'");
}

SubsetOrder parse_order(const std::string& s) {
    if (s == "strided") return SubsetOrder::strided;
    if (s == "sequential") return SubsetOrder::sequential;
    throw std::invalid_argument("unknown subset order '" + s + "'");
}

std::vector<int> to_ints(const std::vector<double>& v) { return {v.begin(), v.end()}; }

std::uint64_t get_seed(const io::Config& c, const std::string& key, std::uint64_t fallback) {
    return static_cast<std::uint64_t>(c.get_int(key, static_cast<long long>(fallback)));
}

void read_condition_keys(const io::Config& c, const std::string& sec, ConditionConfig& cc) {
    cc.denoiser = parse_denoiser(c.get_string(sec + ".denoiser", to_string(cc.denoiser)));
    cc.h = c.get_double(sec + ".h", cc.h);
    cc.patch = static_cast<int>(c.get_int(sec + ".patch", cc.patch));
    cc.window = static_cast<int>(c.get_int(sec + ".window", cc.window));
    cc.wavelet = parse_wavelet(c.get_string(sec + ".wavelet", to_string(cc.wavelet)));
    cc.wavelet_levels = static_cast<int>(c.get_int(sec + ".wavelet_levels", cc.wavelet_levels));
    cc.detail_levels_zeroed = static_cast<int>(c.get_int(sec + ".detail_levels_zeroed", cc.detail_levels_zeroed));
    cc.sigma1 = c.get_double(sec + ".sigma1", cc.sigma1);
    cc.seed = get_seed(c, sec + ".seed", cc.seed);
}

} // namespace

Settings Settings::from_config(const io::Config& c) {
    Settings s;
    s.work_dir = c.get_string("paths.work", s.work_dir.string());

    // geometry
    const std::string preset = c.get_string("geometry.preset", "desk");
    FanBeamGeometry g = preset == "paper" ? FanBeamGeometry::paper_rrm() : FanBeamGeometry::desk();
    if (preset != "desk" && preset != "paper") throw std::invalid_argument("unknown geometry preset '" + preset + "'");
    g = FanBeamGeometry::make(static_cast<int>(c.get_int("geometry.image_size", g.image_size)),
                              static_cast<int>(c.get_int("geometry.n_views", g.n_views)),
                              static_cast<int>(c.get_int("geometry.n_bins", g.n_bins)),
                              c.get_double("geometry.source_factor", 3.0), c.get_double("geometry.detector_factor", 3.0));
    s.data.geometry = g;

    // data
    s.data.n_train = static_cast<int>(c.get_int("data.n_train", s.data.n_train));
    s.data.n_val = static_cast<int>(c.get_int("data.n_val", s.data.n_val));
    s.data.n_test = static_cast<int>(c.get_int("data.n_test", s.data.n_test));
    s.data.seed = get_seed(c, "data.seed", s.data.seed);
    s.clean_kind = c.get_string("data.clean", s.clean_kind);
    s.condition_kind = c.get_string("data.condition_source", s.condition_kind);
    for (const auto* k : {&s.clean_kind, &s.condition_kind}) {
        if (*k != "phantom" && *k != "recon_normal") {
            throw std::invalid_argument("data.clean and data.condition_source must be phantom or recon_normal");
        }
    }
    s.data.normal_recon.omega = c.get_double("data.normal_recon_omega", s.data.normal_recon.omega);
    s.data.normal_recon.n_iterations =
        static_cast<int>(c.get_int("data.normal_recon_passes", s.data.normal_recon.n_iterations));
    s.data.normal_recon.n_subsets = static_cast<int>(c.get_int("data.normal_recon_subsets", s.data.normal_recon.n_subsets));

    auto& ph = s.data.phantom;
    ph.image_size = g.image_size;
    ph.n_stripes = static_cast<int>(c.get_int("phantom.n_stripes", ph.n_stripes));
    ph.orientation = parse_orientation(c.get_string("phantom.orientation", "horizontal"));

    // dose
    s.data.dose_low.i0 = c.get_double("dose.i0_low", s.data.dose_low.i0);
    s.data.dose_normal.i0 = c.get_double("dose.i0_normal", s.data.dose_normal.i0);
    s.data.dose_low.floor = s.data.dose_normal.floor = c.get_double("dose.floor", 1.0);
    s.data.dose_low.seed = get_seed(c, "dose.seed_low", s.data.dose_low.seed);
    s.data.dose_normal.seed = get_seed(c, "dose.seed_normal", s.data.dose_normal.seed);

    // flow
    const std::string fp = c.get_string("flow.preset", "desk");
    if (fp != "desk" && fp != "paper") throw std::invalid_argument("unknown flow preset '" + fp + "'");
    s.arch = fp == "paper" ? flow::FlowArch::paper() : flow::FlowArch::desk();
    s.arch.n_blocks = static_cast<int>(c.get_int("flow.n_blocks", s.arch.n_blocks));
    s.arch.steps_per_block = static_cast<int>(c.get_int("flow.steps_per_block", s.arch.steps_per_block));
    s.arch.hidden_channels = static_cast<int>(c.get_int("flow.hidden_channels", s.arch.hidden_channels));
    s.arch.scale_clamp = c.get_double("flow.scale_clamp", s.arch.scale_clamp);
    s.arch.height = s.arch.width = g.image_size;
    s.flow_seed = get_seed(c, "flow.seed", s.flow_seed);

    // train
    auto& t = s.train;
    t.steps = c.get_int("train.steps", t.steps);
    t.batch_size = static_cast<int>(c.get_int("train.batch_size", t.batch_size));
    t.lr = c.get_double("train.lr", t.lr);
    t.clip_norm = c.get_double("train.clip_norm", t.clip_norm);
    t.dequant_std = c.get_double("train.dequant_std", t.dequant_std);
    t.actnorm_init = c.get_bool("train.actnorm_init", t.actnorm_init);
    t.optimizer = flow::parse_optimizer(c.get_string("train.optimizer", to_string(t.optimizer)));
    t.seed = get_seed(c, "train.seed", t.seed);
    t.checkpoint_every = c.get_int("train.checkpoint_every", t.checkpoint_every);

    // condition
    read_condition_keys(c, "condition", s.condition);
    s.condition_recon.omega = c.get_double("condition.r_omega", s.condition_recon.omega);
    s.condition_recon.n_subsets = static_cast<int>(c.get_int("condition.r_subsets", s.condition_recon.n_subsets));
    s.condition_recon.n_iterations = static_cast<int>(c.get_int("condition.r_passes", s.condition_recon.n_iterations));
    s.tuning.h = c.get_doubles("condition.tune_h", {s.condition.h});
    s.tuning.detail_levels_zeroed =
        to_ints(c.get_doubles("condition.tune_detail_levels_zeroed", {double(s.condition.detail_levels_zeroed)}));
    s.tuning.sigma1 = c.get_doubles("condition.tune_sigma1", {s.condition.sigma1});
    s.tuning.nd_ref_floor = c.get_double("condition.nd_ref_floor", 0.0);
    s.tuning_split = c.get_string("condition.tune_split", s.tuning_split);

    // recon
    auto& r = s.recon;
    r.lambda = c.get_double("recon.lambda", r.lambda);
    r.sigma = c.get_double("recon.sigma", r.sigma);
    r.r1 = c.get_double("recon.r1", r.r1);
    r.r2 = c.get_double("recon.r2", r.r2);
    r.omega0 = c.get_double("recon.omega0", r.omega0);
    r.auto_omega = c.get_bool("recon.auto_omega", r.auto_omega);
    r.omega_rule = parse_omega_rule(c.get_string("recon.omega_rule", to_string(r.omega_rule)));
    r.omega_lr = c.get_double("recon.omega_lr", r.omega_lr);
    r.K = static_cast<int>(c.get_int("recon.K", r.K));
    r.n_subsets = static_cast<int>(c.get_int("recon.n_subsets", r.n_subsets));
    r.subset_order = parse_order(c.get_string("recon.subset_order", "strided"));
    r.z_temperature = c.get_double("recon.z_temperature", r.z_temperature);
    r.seed = get_seed(c, "recon.seed", r.seed);
    r.early_stop = c.get_bool("recon.early_stop", r.early_stop);
    s.sweep_omegas = c.get_doubles("recon.sweep_omegas", {r.omega0});
    s.sweep_split = c.get_string("recon.sweep_split", s.sweep_split);

    // metrics
    s.metrics.peak = c.get_double("metrics.peak", s.metrics.peak);
    s.metrics.ssim_window = static_cast<int>(c.get_int("metrics.ssim_window", s.metrics.ssim_window));
    s.metrics.ssim_sigma = c.get_double("metrics.ssim_sigma", s.metrics.ssim_sigma);

    s.data.geometry.validate();
    s.arch.validate();
    s.train.validate();
    s.condition.validate();
    s.recon.validate();
    s.metrics.validate();
    return s;
}

io::Config load_config(const fs::path& path, const std::vector<std::string>& overrides) {
    io::Config c = io::Config::load(path);
    for (const auto& o : overrides) c.apply_override(o);
    return c;
}

fs::path data_dir(const Settings& s) { return s.work_dir / "data"; }
fs::path tuned_condition_path(const Settings& s) { return s.work_dir / "condition" / "tuned.ini"; }
fs::path checkpoint_path(const Settings& s) { return s.work_dir / "model" / "checkpoint.owcf"; }
fs::path loss_log_path(const Settings& s) { return s.work_dir / "model" / "loss.csv"; }
fs::path results_dir(const Settings& s, Method m, const std::string& split) {
    return s.work_dir / "results" / to_string(m) / split;
}
fs::path metrics_path(const Settings& s, const std::string& split) {
    return s.work_dir / "results" / ("metrics_" + split + ".csv");
}
fs::path sweep_path(const Settings& s) { return s.work_dir / "results" / "sweep_omega.csv"; }

std::uint64_t condition_stream(const std::string& split, int index, bool low_dose) {
    const std::uint64_t code = split == "train" ? 1 : split == "val" ? 2 : 3;
    return code * 1000000ULL + 2ULL * static_cast<std::uint64_t>(index) + (low_dose ? 0 : 1);
}

Manifest gen_data(const Settings& s) { return make_dataset(s.data, data_dir(s)); }

Image load_clean(const Settings& s, const Manifest& m, const std::string& split, int index) {
    return io::read_image(data_dir(s) / m.find(s.clean_kind, split, index).path);
}

Image load_normal_dose(const Settings& s, const Manifest& m, const std::string& split, int index) {
    return io::read_image(data_dir(s) / m.find(s.condition_kind, split, index).path);
}

Image training_condition(const Settings& s, const ConditionConfig& cc, const Manifest& m, int index) {
    return make_condition_from_image(load_normal_dose(s, m, "train", index), cc, condition_stream("train", index, false));
}

Image inference_condition(const Settings& s, const ConditionConfig& cc, const Sinogram& y_low, const std::string& split,
                          int index) {
    return make_condition_from_sinogram(y_low, s.data.geometry, s.condition_recon, cc,
                                        condition_stream(split, index, true));
}

std::string condition_to_text(const ConditionConfig& c) {
    std::ostringstream out;
    out << "[condition]\n"
        << "denoiser = " << to_string(c.denoiser) << "\n"
        << "h = " << io::format_double(c.h) << "\n"
        << "patch = " << c.patch << "\n"
        << "window = " << c.window << "\n"
        << "wavelet = " << to_string(c.wavelet) << "\n"
        << "wavelet_levels = " << c.wavelet_levels << "\n"
        << "detail_levels_zeroed = " << c.detail_levels_zeroed << "\n"
        << "sigma1 = " << io::format_double(c.sigma1) << "\n"
        << "seed = " << c.seed << "\n";
    return out.str();
}

ConditionConfig read_condition(const fs::path& path, ConditionConfig base) {
    read_condition_keys(io::Config::load(path), "condition", base);
    base.validate();
    return base;
}

ConditionConfig active_condition(const Settings& s) {
    const auto p = tuned_condition_path(s);
    return fs::exists(p) ? read_condition(p, s.condition) : s.condition;
}

TuningResult tune_condition(const Settings& s) {
    const Manifest m = Manifest::load(data_dir(s) / kManifestName);
    const int n = m.count("sino_low", s.tuning_split);
    if (n == 0) throw std::runtime_error("tune-condition: split '" + s.tuning_split + "' is empty");
    std::vector<TuningPair> pairs;
    const OsSart r(s.data.geometry, s.condition_recon.n_subsets, s.condition_recon.subset_order);
    for (int i = 0; i < n; ++i) {
        const Sinogram y = io::read_sinogram(data_dir(s) / m.find("sino_low", s.tuning_split, i).path);
        Image r_low = r.run(Image(s.data.geometry.image_size, s.data.geometry.image_size), y, s.condition_recon.omega,
                            s.condition_recon.n_iterations, s.condition_recon.nonneg_clamp);
        pairs.push_back({std::move(r_low), load_normal_dose(s, m, s.tuning_split, i)});
    }
    TuningResult res = owcnf::tune_condition(pairs, s.condition, s.tuning);
    write_file(tuned_condition_path(s), condition_to_text(res.best));
    write_file(tuned_condition_path(s).parent_path() / "report.txt", res.report());
    return res;
}

flow::TrainState train(const Settings& s, bool resume, std::ostream* progress) {
    const Manifest m = Manifest::load(data_dir(s) / kManifestName);
    const int n = m.count(s.clean_kind, "train");
    if (n == 0) throw std::runtime_error("train: the training split is empty");
    const ConditionConfig cc = active_condition(s);
    std::vector<flow::Tensor<float>> xs;
    std::vector<flow::Tensor<float>> cs;
    for (int i = 0; i < n; ++i) {
        xs.push_back(flow::to_tensor<float>(load_clean(s, m, "train", i)));
        cs.push_back(flow::to_tensor<float>(training_condition(s, cc, m, i)));
    }

    const fs::path ckpt = checkpoint_path(s);
    fs::create_directories(ckpt.parent_path());
    flow::TrainState state;
    const bool resuming = resume && fs::exists(ckpt);
    if (resuming) {
        state = flow::load_checkpoint(ckpt);
        if (!(state.params.arch == s.arch)) throw std::runtime_error("train: checkpoint architecture differs from config");
    } else {
        state = flow::TrainState::fresh(s.arch, s.flow_seed);
    }

    // The log is rewritten up to the resumed step so reruns stay byte-identical.
    std::vector<std::string> kept;
    if (resuming && fs::exists(loss_log_path(s))) {
        std::istringstream in(io::read_text(loss_log_path(s)));
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            if (std::stoll(line.substr(0, line.find(','))) <= state.step) kept.push_back(line);
        }
    }
    std::ofstream log(loss_log_path(s), std::ios::binary | std::ios::trunc);
    if (!log) throw std::runtime_error("train: cannot write " + loss_log_path(s).string());
    log << "step,nll,grad_norm\n";
    for (const auto& l : kept) log << l << "\n";

    const auto t0 = std::chrono::steady_clock::now();
    flow::train(xs, cs, state, s.train,
                [&](const flow::LossRecord& r) {
                    log << r.step << ',' << io::format_double(r.nll) << ',' << io::format_double(r.grad_norm) << "\n";
                    if (progress && (r.step % 100 == 0 || r.step == s.train.steps)) {
                        const double el = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                        *progress << "step " << r.step << " nll " << r.nll << " |g| " << r.grad_norm << " (" << el
                                  << " s)" << std::endl;
                    }
                },
                ckpt);
    // Wall time, accumulated over resumes; kept out of the reproducible outputs.
    const fs::path timing = ckpt.parent_path() / "train_seconds.txt";
    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (resuming && fs::exists(timing)) seconds += std::stod(io::read_text(timing));
    write_file(timing, io::format_double(seconds) + "\n");
    return state;
}

namespace {

struct Context {
    Manifest manifest;
    ConditionConfig cc;
    OsSart sart;
    std::optional<flow::FlowParams<float>> params;
};

Context make_context(const Settings& s, bool need_flow) {
    Context ctx{Manifest::load(data_dir(s) / kManifestName), active_condition(s),
                OsSart(s.data.geometry, s.recon.n_subsets, s.recon.subset_order), std::nullopt};
    if (need_flow) {
        ctx.params = flow::load_params(checkpoint_path(s));
        if (!(ctx.params->arch == s.arch)) throw std::runtime_error("checkpoint architecture differs from config");
    }
    return ctx;
}

ReconResult run_method(const Context& ctx, Method m, const Sinogram& y, const Image& condition,
                       const ReconConfig& rc, const Image* reference) {
    if (m == Method::sart) return reconstruct_sart(y, ctx.sart, rc, reference);
    Prior prior{&*ctx.params, flow::to_tensor<float>(condition)};
    return m == Method::ow ? reconstruct(y, prior, ctx.sart, rc, reference)
                           : reconstruct_two_way(y, prior, ctx.sart, rc, reference);
}

std::vector<ItemResult> run_split(const Settings& s, const Context& ctx, Method m, const std::string& split,
                                  const ReconConfig& rc, std::optional<int> only, const fs::path* out_dir,
                                  std::ostream* progress) {
    const int n = ctx.manifest.count("sino_low", split);
    std::vector<ItemResult> out;
    for (int i = 0; i < n; ++i) {
        if (only && *only != i) continue;
        const auto t0 = std::chrono::steady_clock::now();
        const Sinogram y = io::read_sinogram(data_dir(s) / ctx.manifest.find("sino_low", split, i).path);
        const Image ref = load_clean(s, ctx.manifest, split, i);
        const Image cond = m == Method::sart ? Image() : inference_condition(s, ctx.cc, y, split, i);
        const ReconResult r = run_method(ctx, m, y, cond, rc, &ref);
        ItemResult item{i, psnr(r.image, ref, s.metrics), ssim(r.image, ref, s.metrics),
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), r.trace};
        if (out_dir) {
            char stem[16];
            std::snprintf(stem, sizeof(stem), "%04d", i);
            fs::create_directories(*out_dir);
            io::write_image(*out_dir / (std::string(stem) + ".image.owcf"), r.image);
            write_file(*out_dir / (std::string(stem) + ".trace.csv"), r.trace.to_csv());
            io::export_pgm(r.image, *out_dir / (std::string(stem) + ".pgm"), 0.0, 1.0);
        }
        if (progress) {
            *progress << to_string(m) << " " << split << "/" << i << ": psnr " << item.psnr << " ssim " << item.ssim
                      << " (" << item.seconds << " s)" << std::endl;
        }
        out.push_back(std::move(item));
    }
    if (only && out.empty()) throw std::invalid_argument("no item " + std::to_string(*only) + " in split " + split);
    return out;
}

} // namespace

std::vector<ItemResult> reconstruct_split(const Settings& s, Method m, const std::string& split,
                                          std::optional<int> only_index, std::ostream* progress) {
    const Context ctx = make_context(s, m != Method::sart);
    const fs::path dir = results_dir(s, m, split);
    auto items = run_split(s, ctx, m, split, s.recon, only_index, &dir, progress);
    std::ostringstream timing;
    for (const auto& it : items) timing << it.index << ' ' << io::format_double(it.seconds) << "\n";
    write_file(dir / "seconds.txt", timing.str());
    return items;
}

ReconResult reconstruct_file(const Settings& s, Method m, const fs::path& sinogram) {
    const Sinogram y = io::read_sinogram(sinogram);
    ConditionConfig cc = active_condition(s);
    std::optional<flow::FlowParams<float>> params;
    if (m != Method::sart) params = flow::load_params(checkpoint_path(s));
    const OsSart sart(s.data.geometry, s.recon.n_subsets, s.recon.subset_order);
    if (m == Method::sart) return reconstruct_sart(y, sart, s.recon);
    const Image cond =
        make_condition_from_sinogram(y, s.data.geometry, s.condition_recon, cc, condition_stream("file", 0, true));
    Prior prior{&*params, flow::to_tensor<float>(cond)};
    return m == Method::ow ? reconstruct(y, prior, sart, s.recon) : reconstruct_two_way(y, prior, sart, s.recon);
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double var = 0.0;
    for (const double x : v) var += (x - mean) * (x - mean);
    return {mean, v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0};
}

} // namespace

std::vector<MethodRow> evaluate(const Settings& s, const std::string& split) {
    const Manifest m = Manifest::load(data_dir(s) / kManifestName);
    const int n = m.count("sino_low", split);
    std::vector<MethodRow> rows;
    std::ostringstream per_image;
    per_image << "method,index,psnr,ssim\n";
    for (const Method method : {Method::sart, Method::tw, Method::ow}) {
        const fs::path dir = results_dir(s, method, split);
        if (!fs::exists(dir)) continue;
        std::vector<double> ps;
        std::vector<double> ss;
        for (int i = 0; i < n; ++i) {
            char stem[16];
            std::snprintf(stem, sizeof(stem), "%04d", i);
            const fs::path p = dir / (std::string(stem) + ".image.owcf");
            if (!fs::exists(p)) continue;
            const Image img = io::read_image(p);
            const Image ref = load_clean(s, m, split, i);
            ps.push_back(psnr(img, ref, s.metrics));
            ss.push_back(ssim(img, ref, s.metrics));
            per_image << to_string(method) << ',' << i << ',' << io::format_double(ps.back()) << ','
                      << io::format_double(ss.back()) << "\n";
        }
        if (ps.empty()) continue;
        const auto [pm, psd] = mean_std(ps);
        const auto [sm, ssd] = mean_std(ss);
        rows.push_back({to_string(method), static_cast<int>(ps.size()), pm, psd, sm, ssd});
    }
    write_file(metrics_path(s, split), metrics_csv(rows));
    write_file(s.work_dir / "results" / ("per_image_" + split + ".csv"), per_image.str());
    return rows;
}

std::string metrics_csv(const std::vector<MethodRow>& rows) {
    std::ostringstream out;
    out << "method,n,psnr_mean,psnr_std,ssim_mean,ssim_std\n";
    for (const auto& r : rows) {
        out << r.method << ',' << r.n << ',' << io::format_double(r.psnr_mean) << ',' << io::format_double(r.psnr_std)
            << ',' << io::format_double(r.ssim_mean) << ',' << io::format_double(r.ssim_std) << "\n";
    }
    return out.str();
}

std::vector<SweepRow> sweep_omega(const Settings& s, std::ostream* progress) {
    const Context ctx = make_context(s, true);
    std::vector<SweepRow> rows;
    for (const double w : s.sweep_omegas) {
        ReconConfig rc = s.recon;
        rc.auto_omega = false;
        rc.omega0 = w;
        const auto items = run_split(s, ctx, Method::ow, s.sweep_split, rc, std::nullopt, nullptr, nullptr);
        std::vector<double> ps;
        for (const auto& it : items) ps.push_back(it.psnr);
        rows.push_back({w, mean_std(ps).first});
        if (progress) *progress << "omega " << w << ": mean psnr " << rows.back().psnr_mean << std::endl;
    }
    write_file(sweep_path(s), sweep_csv(rows));
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "omega,psnr_mean\n";
    for (const auto& r : rows) out << io::format_double(r.omega) << ',' << io::format_double(r.psnr_mean) << "\n";
    return out.str();
}

} // namespace owcnf::pipeline
