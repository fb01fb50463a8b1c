// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.
//
// The desk experiment lives in the work dir of configs/desk.ini (relative to
// the working directory, or OWCNF_ACCEPTANCE_WORK). Each stage is skipped when
// its outputs exist and were produced from the same config keys; a stamp file
// per stage records those keys.

#include "support.hpp"

#include "owcnf/pipeline.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

using namespace owcnf;
namespace fs = std::filesystem;
namespace pl = owcnf::pipeline;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool all_passed = true;

void run(int id, const std::string& name, const std::function<void(Outcome&)>& body) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(o);
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail << " [error: " << e.what() << "]";
    }
    all_passed = all_passed && o.pass;
    std::cout << "criterion " << id << " " << (o.pass ? "PASS" : "FAIL") << ": " << name << " -" << o.detail.str()
              << " (" << seconds_since(t0) << " s)" << std::endl;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

Image phantom(int size, int stripes, std::uint64_t seed) {
    RrmSpec spec;
    spec.image_size = size;
    spec.n_stripes = stripes;
    spec.seed = seed;
    return make_rrm_phantom(spec);
}

// ---------------------------------------------------------------- desk run

const fs::path kConfigs = fs::path(OWCNF_SOURCE_DIR) / "configs";

std::string stamp_text(const io::Config& c, std::initializer_list<const char*> sections) {
    std::string out;
    for (const auto& [k, v] : c.entries()) {
        for (const char* s : sections) {
            if (k.rfind(std::string(s) + ".", 0) == 0) out += k + "=" + v + "\n";
        }
    }
    return out;
}

struct Stage {
    std::string name;
    std::string stamp;
    std::function<bool()> complete;
    std::function<void()> make;
};

// Runs each stage whose stamp or outputs are stale; a rerun invalidates the
// stages after it.
void run_stages(const fs::path& work, std::vector<Stage>& stages) {
    bool stale = false;
    for (auto& st : stages) {
        const fs::path stamp = work / "stamps" / (st.name + ".txt");
        if (!stale && fs::exists(stamp) && slurp(stamp) == st.stamp && st.complete()) {
            std::cout << "  stage " << st.name << ": up to date" << std::endl;
            continue;
        }
        stale = true;
        std::cout << "  stage " << st.name << ": running" << std::endl;
        const auto t0 = std::chrono::steady_clock::now();
        fs::remove(stamp);
        st.make();
        fs::create_directories(stamp.parent_path());
        io::write_text(stamp, st.stamp);
        std::cout << "  stage " << st.name << ": done in " << seconds_since(t0) << " s" << std::endl;
    }
}

struct Desk {
    pl::Settings s;
    io::Config cfg;
};

const Desk& desk() {
    static const Desk d = [] {
        std::vector<std::string> overrides;
        if (const char* w = std::getenv("OWCNF_ACCEPTANCE_WORK")) overrides.push_back(std::string("paths.work=") + w);
        Desk out{pl::Settings(), pl::load_config(kConfigs / "desk.ini", overrides)};
        out.s = pl::Settings::from_config(out.cfg);
        const auto& s = out.s;
        const fs::path work = s.work_dir;
        std::cout << "desk experiment in " << fs::absolute(work).string() << std::endl;

        const auto methods = {pl::Method::sart, pl::Method::tw, pl::Method::ow};
        auto results_complete = [&s, methods] {
            for (const auto m : methods) {
                const auto dir = pl::results_dir(s, m, "test");
                if (!fs::exists(dir / "seconds.txt")) return false;
                for (int i = 0; i < s.data.n_test; ++i) {
                    char stem[16];
                    std::snprintf(stem, sizeof(stem), "%04d", i);
                    if (!fs::exists(dir / (std::string(stem) + ".image.owcf"))) return false;
                }
            }
            return true;
        };
        std::vector<Stage> stages{
            {"data", stamp_text(out.cfg, {"data", "phantom", "geometry", "dose"}),
             [&s] { return fs::exists(pl::data_dir(s) / kManifestName); }, [&s] { pl::gen_data(s); }},
            {"condition", stamp_text(out.cfg, {"condition"}), [&s] { return fs::exists(pl::tuned_condition_path(s)); },
             [&s] { pl::tune_condition(s); }},
            {"train", stamp_text(out.cfg, {"flow", "train"}),
             [&s] {
                 return fs::exists(pl::checkpoint_path(s)) &&
                        fs::exists(pl::checkpoint_path(s).parent_path() / "train_seconds.txt") &&
                        flow::load_checkpoint(pl::checkpoint_path(s)).step == s.train.steps;
             },
             [&s] { pl::train(s, false, &std::cout); }},
            {"reconstruct", stamp_text(out.cfg, {"recon", "metrics"}), results_complete,
             [&s, methods] {
                 for (const auto m : methods) pl::reconstruct_split(s, m, "test", std::nullopt, &std::cout);
             }},
            {"sweep", stamp_text(out.cfg, {"recon", "metrics"}), [&s] { return fs::exists(pl::sweep_path(s)); },
             [&s] { pl::sweep_omega(s, &std::cout); }},
        };
        run_stages(work, stages);
        pl::evaluate(s, "test");
        return out;
    }();
    return d;
}

std::vector<double> per_image_psnr(const pl::Settings& s, pl::Method m) {
    const Manifest man = Manifest::load(pl::data_dir(s) / kManifestName);
    std::vector<double> out;
    for (int i = 0; i < s.data.n_test; ++i) {
        char stem[16];
        std::snprintf(stem, sizeof(stem), "%04d", i);
        const Image img = io::read_image(pl::results_dir(s, m, "test") / (std::string(stem) + ".image.owcf"));
        out.push_back(psnr(img, pl::load_clean(s, man, "test", i), s.metrics));
    }
    return out;
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (const double x : v) s += x;
    return s / static_cast<double>(v.size());
}

ReconTrace read_trace(const fs::path& p) {
    std::istringstream in(slurp(p));
    std::string line;
    std::getline(in, line);
    ReconTrace t;
    while (std::getline(in, line)) {
        std::vector<double> f;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(cell == "nan" ? std::nan("") : std::stod(cell));
        if (f.size() < 5) throw std::runtime_error("short trace row in " + p.string());
        t.rows.push_back({static_cast<int>(f[0]), f[1], f[2], f[3], f[4]});
    }
    return t;
}

// ---------------------------------------------------------------- criteria

void projector_adjointness(Outcome& o) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto g = FanBeamGeometry::desk();
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const Image x = testing::random_image(64, 64, 1000 + i);
        Sinogram y(g.n_views, g.n_bins);
        SplitMix64 rng(5000 + i);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (double& v : y.data) v = u(rng);
        const Sinogram ax = forward_project(x, g);
        const Image aty = back_project(y, g);
        const double lhs = dot(ax.data, y.data);
        const double rhs = dot(x.data, aty.data);
        const double scale = std::sqrt(dot(ax.data, ax.data)) * std::sqrt(dot(y.data, y.data));
        worst = std::max(worst, std::abs(lhs - rhs) / scale);
    }
    const double t = seconds_since(t0);
    o.detail << " worst relative gap " << worst << " over 100 pairs";
    o.require(worst <= 1e-4, "gap <= 1e-4");
    o.require(t < 10.0, "under 10 s");
}

void flow_correctness(Outcome& o) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& s = desk().s;
    const auto trained = flow::load_params(pl::checkpoint_path(s));
    auto untrained = flow::make_initial_params<float>(s.arch, 3);
    testing::perturb(untrained, 4, 0.02);
    const Manifest man = Manifest::load(pl::data_dir(s) / kManifestName);
    const ConditionConfig cc = pl::active_condition(s);

    double worst_rt = 0.0;
    const std::vector<const flow::FlowParams<float>*> models{&trained, &untrained};
    for (const auto* p : models) {
        for (int i = 0; i < 100; ++i) {
            // Conditions from the training split; inputs are phantoms plus
            // noise, latents are standard normal.
            const int k = i % s.data.n_train;
            const auto c = flow::to_tensor<float>(pl::training_condition(s, cc, man, k));
            Image x = pl::load_clean(s, man, "train", k);
            const Image noise = testing::random_image(64, 64, 700 + i, -0.02, 0.02);
            for (std::size_t j = 0; j < x.size(); ++j) x.data[j] += noise.data[j];
            const auto xt = flow::to_tensor<float>(x);
            const auto back = flow::decode(flow::encode(xt, c, *p).z, c, *p).x;
            worst_rt = std::max(worst_rt, testing::max_abs_diff(back.data, xt.data));
            const auto z = testing::random_tensor<float>(s.arch.latent_shape(), 900 + i);
            const auto zz = flow::encode(flow::decode(z, c, *p).x, c, *p).z;
            worst_rt = std::max(worst_rt, testing::max_abs_diff(zz.data, z.data));
        }
    }
    o.detail << " round trip max-abs " << worst_rt;
    o.require(worst_rt <= 1e-4, "round trip <= 1e-4");

    // Dense Jacobian on 4x4x1.
    {
        const auto a = testing::tiny_arch(4, 1, 1, 8);
        auto p = flow::make_initial_params<double>(a, 41);
        testing::perturb(p, 42, 0.3);
        const auto x = testing::random_tensor<double>(a.input_shape(), 43);
        const auto c = testing::random_tensor<double>(a.cond_input_shape(), 44);
        const int d = a.dims();
        Eigen::MatrixXd jac(d, d);
        const double eps = 1e-5;
        for (int j = 0; j < d; ++j) {
            auto xp = x;
            auto xm = x;
            xp.data[j] += eps;
            xm.data[j] -= eps;
            const auto zp = flow::encode(xp, c, p).z;
            const auto zm = flow::encode(xm, c, p).z;
            for (int i = 0; i < d; ++i) jac(i, j) = (zp.data[i] - zm.data[i]) / (2 * eps);
        }
        const double ref = std::log(std::abs(jac.determinant()));
        const double rel = std::abs(flow::encode(x, c, p).logdet - ref) / std::abs(ref);
        o.detail << "; logdet rel err " << rel;
        o.require(rel <= 1e-3, "logdet rel err <= 1e-3");
    }

    // NLL parameter gradient and vjp_z against central differences.
    {
        const auto a = testing::tiny_arch(8, 2, 2, 8);
        auto p = flow::make_initial_params<double>(a, 51);
        testing::perturb(p, 52, 0.2);
        const std::vector<flow::Tensor<double>> xs{testing::random_tensor<double>(a.input_shape(), 53)};
        const std::vector<flow::Tensor<double>> cs{testing::random_tensor<double>(a.cond_input_shape(), 54)};
        flow::FlowParams<double> g;
        flow::grad_params_nll<double>(xs, cs, p, g);
        const auto flat = p.flatten();
        const auto gflat = g.flatten();
        SplitMix64 rng(55);
        std::uniform_int_distribution<std::size_t> pick(0, flat.size() - 1);
        double worst = 0.0;
        int n = 0;
        for (; n < 25; ++n) {
            const std::size_t i = pick(rng);
            auto up = flat;
            auto dn = flat;
            up[i] += 1e-5;
            dn[i] -= 1e-5;
            flow::FlowParams<double> q = p;
            q.unflatten(up);
            const double fu = flow::nll(xs[0], cs[0], q);
            q.unflatten(dn);
            const double fdn = flow::nll(xs[0], cs[0], q);
            const double fd = (fu - fdn) / 2e-5;
            worst = std::max(worst, std::abs(fd - gflat[i]) / std::max({std::abs(fd), std::abs(gflat[i]), 1e-8}));
        }
        o.detail << "; nll grad rel err " << worst << " on " << n << " coords";
        o.require(worst <= 1e-2, "nll gradient rel err <= 1e-2");

        const auto z = testing::random_tensor<double>(a.latent_shape(), 56);
        const auto v = testing::random_tensor<double>(a.input_shape(), 57);
        const auto jt = flow::vjp_z(z, cs[0], p, v);
        double worst_v = 0.0;
        int m = 0;
        for (; m < 25; ++m) {
            const std::size_t k = static_cast<std::size_t>(m) * 7 % z.data.size();
            auto zp = z;
            auto zm = z;
            zp.data[k] += 1e-5;
            zm.data[k] -= 1e-5;
            const double fd = (dot(v.data, flow::decode(zp, cs[0], p).x.data) -
                               dot(v.data, flow::decode(zm, cs[0], p).x.data)) /
                              2e-5;
            worst_v = std::max(worst_v, std::abs(fd - jt.data[k]) / std::max({std::abs(fd), std::abs(jt.data[k]), 1e-8}));
        }
        o.detail << "; vjp_z rel err " << worst_v << " on " << m << " coords";
        o.require(worst_v <= 1e-2, "vjp_z rel err <= 1e-2");
    }
    const double t = seconds_since(t0);
    o.require(t < 120.0, "under 2 min");
}

void os_sart_checks(Outcome& o) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto g = FanBeamGeometry::desk();
    const OsSart sart(g, 10);

    bool fixed = true;
    bool monotone = true;
    for (int k = 0; k < 5; ++k) {
        const Image x = phantom(64, 10, 300 + k);
        const Sinogram y = forward_project(x, g);
        fixed = fixed && sart.run(x, y, 0.3, 1, true).data == x.data;
        Image it(64, 64);
        auto res = [&](const Image& img) {
            const Sinogram ax = forward_project(img, g);
            double s2 = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) s2 += (y.data[i] - ax.data[i]) * (y.data[i] - ax.data[i]);
            return std::sqrt(s2);
        };
        double prev = res(it);
        for (int p = 0; p < 20; ++p) {
            it = sart.run(it, y, 0.3, 1, true);
            const double r = res(it);
            monotone = monotone && r <= prev;
            prev = r;
        }
    }
    o.detail << " fixed point " << (fixed ? "exact" : "inexact") << "; residual "
             << (monotone ? "non-increasing" : "increased");
    o.require(fixed, "fixed point exact");
    o.require(monotone, "residual non-increasing");

    // Dense 2x2 oracle.
    FanBeamGeometry tg = FanBeamGeometry::make(2, 2, 2);
    tg.angles = {0.3, 1.9};
    Eigen::MatrixXd a(4, 4);
    for (int p = 0; p < 4; ++p) {
        Image e(2, 2);
        e.data[p] = 1.0;
        const Sinogram col = forward_project(e, tg);
        for (int r = 0; r < 4; ++r) a(r, p) = col.data[r];
    }
    const Image x_true = testing::random_image(2, 2, 5, 0.2, 1.0);
    const Sinogram y = forward_project(x_true, tg);
    const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data.data(), 4);
    const Image x0 = testing::random_image(2, 2, 6, 0.0, 0.5);
    Eigen::VectorXd want = Eigen::Map<const Eigen::VectorXd>(x0.data.data(), 4);
    const Eigen::VectorXd r = yv - a * want;
    Eigen::VectorXd rn = r;
    const Eigen::VectorXd rs = a.rowwise().sum();
    for (int i = 0; i < 4; ++i) rn(i) = rs(i) > 0 ? r(i) / rs(i) : 0.0;
    Eigen::VectorXd bp = a.transpose() * rn;
    const Eigen::VectorXd cs = a.colwise().sum().transpose();
    for (int j = 0; j < 4; ++j) bp(j) = cs(j) > 0 ? bp(j) / cs(j) : 0.0;
    want += 0.7 * bp;
    const Image got = OsSart(tg, 1, SubsetOrder::sequential).run(x0, y, 0.7, 1, false);
    double err = 0.0;
    for (int i = 0; i < 4; ++i) err = std::max(err, std::abs(got.data[i] - want(i)));
    o.detail << "; dense 2x2 max err " << err;
    o.require(err <= 1e-6, "dense oracle <= 1e-6");
    o.require(seconds_since(t0) < 60.0, "under 1 min");
}

void poisson_checks(Outcome& o) {
    const auto t0 = std::chrono::steady_clock::now();
    Sinogram y(1, 100000);
    std::fill(y.data.begin(), y.data.end(), 1.0);
    for (const double i0 : {1e3, 1e4}) {
        const auto counts = sample_photon_counts(y, DoseModel{i0, 1.0, 77});
        double m = 0.0;
        for (const double c : counts) m += c;
        m /= static_cast<double>(counts.size());
        double v = 0.0;
        for (const double c : counts) v += (c - m) * (c - m);
        v /= static_cast<double>(counts.size() - 1);
        const double expect = i0 * std::exp(-1.0);
        o.detail << " I0=" << i0 << ": mean/expected " << m / expect << " var/expected " << v / expect << ";";
        o.require(std::abs(m - expect) <= 0.05 * expect, "mean within 5%");
        o.require(std::abs(v - expect) <= 0.05 * expect, "variance within 5%");
    }
    o.require(seconds_since(t0) < 30.0, "under 30 s");
}

void conditionalization(Outcome& o) {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (const auto kind : {WaveletKind::haar, WaveletKind::db4}) {
        for (int z = 1; z <= 2; ++z) {
            ConditionConfig cfg;
            cfg.wavelet = kind;
            cfg.wavelet_levels = 2;
            cfg.detail_levels_zeroed = z;
            const Image img = testing::random_image(64, 64, 11 + z);
            const Image once = wavelet_lowpass(img, cfg);
            worst = std::max(worst, testing::max_abs_diff(wavelet_lowpass(once, cfg).data, once.data));
        }
    }
    o.detail << " W idempotence max-abs " << worst;
    o.require(worst <= 1e-5, "W idempotent to 1e-5");

    const auto& s = desk().s;
    const Manifest man = Manifest::load(pl::data_dir(s) / kManifestName);
    const ConditionConfig cc = pl::active_condition(s);
    const OsSart r(s.data.geometry, s.condition_recon.n_subsets, s.condition_recon.subset_order);
    double pair = 0.0;
    double base = 0.0;
    for (int i = 0; i < s.data.n_test; ++i) {
        const Sinogram y = io::read_sinogram(pl::data_dir(s) / man.find("sino_low", "test", i).path);
        const Image r_low = r.run(Image(64, 64), y, s.condition_recon.omega, s.condition_recon.n_iterations,
                                  s.condition_recon.nonneg_clamp);
        const Image x_nd = pl::load_normal_dose(s, man, "test", i);
        const Image c_low = make_condition_from_reconstruction(r_low, cc, pl::condition_stream("test", i, true));
        const Image c_nd = make_condition_from_image(x_nd, cc, pl::condition_stream("test", i, false));
        pair += ssim(c_low, c_nd, s.metrics);
        base += ssim(r_low, x_nd, s.metrics);
    }
    pair /= s.data.n_test;
    base /= s.data.n_test;
    o.detail << "; test SSIM(c_low, c_nd) " << pair << " vs SSIM(R(y_low), x_nd) " << base;
    o.require(pair >= 0.8, "SSIM(c_low, c_nd) >= 0.8");
    o.require(pair > base, "tuned pair beats the unconditioned reconstruction");
    o.require(seconds_since(t0) < 300.0, "under 5 min");
}

void end_to_end(Outcome& o) {
    const auto& s = desk().s;
    const auto ow = per_image_psnr(s, pl::Method::ow);
    const auto tw = per_image_psnr(s, pl::Method::tw);
    const auto sa = per_image_psnr(s, pl::Method::sart);
    o.detail << " mean PSNR ow " << mean(ow) << " tw " << mean(tw) << " sart " << mean(sa) << " on " << ow.size()
             << " images";
    o.require(ow.size() >= 8, ">= 8 test images");
    o.require(mean(ow) >= mean(sa) + 4.0, "ow >= sart + 4 dB");
    o.require(mean(ow) >= mean(tw), "ow >= tw");

    const double train_s = std::stod(slurp(pl::checkpoint_path(s).parent_path() / "train_seconds.txt"));
    o.detail << "; training " << train_s << " s";
    o.require(train_s <= 4 * 3600.0, "training <= 4 h");

    double worst_s = 0.0;
    std::istringstream timing(slurp(pl::results_dir(s, pl::Method::ow, "test") / "seconds.txt"));
    int idx = 0;
    double sec = 0.0;
    while (timing >> idx >> sec) worst_s = std::max(worst_s, sec);
    o.detail << "; slowest ow image " << worst_s << " s";
    o.require(worst_s <= 120.0, "reconstruction <= 2 min/image");

    int worst_plateau = 0;
    for (int i = 0; i < s.data.n_test; ++i) {
        char stem[16];
        std::snprintf(stem, sizeof(stem), "%04d", i);
        const auto t = read_trace(pl::results_dir(s, pl::Method::ow, "test") / (std::string(stem) + ".trace.csv"));
        const int p = t.plateau_iteration(0.01, 5);
        worst_plateau = p < 0 ? 1 << 30 : std::max(worst_plateau, p);
    }
    o.detail << "; latest plateau at iteration " << (worst_plateau == 1 << 30 ? -1 : worst_plateau);
    o.require(worst_plateau <= 100, "converged within 100 iterations");
}

void omega_sweep(Outcome& o) {
    const auto& s = desk().s;
    std::istringstream in(slurp(pl::sweep_path(s)));
    std::string line;
    std::getline(in, line);
    std::vector<double> w;
    std::vector<double> p;
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        w.push_back(std::stod(line.substr(0, comma)));
        p.push_back(std::stod(line.substr(comma + 1)));
    }
    if (w.size() < 3) throw std::runtime_error("sweep needs at least three omegas");
    const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    bool unimodal = true;
    for (std::size_t i = 0; i + 1 < p.size(); ++i) unimodal = unimodal && (i < best ? p[i] <= p[i + 1] : p[i] >= p[i + 1]);
    o.detail << " curve";
    for (std::size_t i = 0; i < w.size(); ++i) o.detail << " " << w[i] << ":" << p[i];
    const double auto_psnr = mean(per_image_psnr(s, pl::Method::ow));
    o.detail << "; auto omega " << auto_psnr << " vs best fixed " << p[best];
    o.require(unimodal, "unimodal");
    o.require(w[best] <= 0.5, "maximum at omega <= 0.5");
    o.require(std::abs(auto_psnr - p[best]) <= 0.5, "auto omega within 0.5 dB of the best fixed omega");
}

void metric_cases(Outcome& o) {
    Image a(8, 8, 0.5);
    Image b = a;
    for (std::size_t i = 0; i < b.size(); ++i) b.data[i] += (i % 2 ? 0.1 : -0.1);
    const double p = psnr(b, a);
    o.detail << " PSNR(rmse 0.1) " << p;
    o.require(std::abs(p - 20.0) <= 1e-12, "20 dB case");
    const Image x = testing::random_image(32, 32, 3);
    const Image y = testing::random_image(32, 32, 4);
    o.require(ssim(x, x) == 1.0, "SSIM of identical images is 1");
    o.require(ssim(x, y) == ssim(y, x), "SSIM symmetric");
    o.require(std::isinf(psnr(x, x)), "PSNR of identical images is the sentinel");
    o.detail << "; SSIM(x,x) " << ssim(x, x) << ", symmetric " << (ssim(x, y) == ssim(y, x) ? "yes" : "no");
}

void reproducibility(Outcome& o) {
    // The tiny config end to end twice, then the desk outputs against a fresh
    // regeneration of their data and of one reconstruction per method.
    std::vector<fs::path> dirs;
    for (const char* tag : {"a", "b"}) {
        const fs::path w = fs::temp_directory_path() / (std::string("owcnf_acceptance_tiny_") + tag);
        fs::remove_all(w);
        const auto s = pl::Settings::from_config(pl::load_config(kConfigs / "tiny.ini", {"paths.work=" + w.string()}));
        pl::gen_data(s);
        pl::tune_condition(s);
        pl::train(s, false);
        for (const auto m : {pl::Method::sart, pl::Method::tw, pl::Method::ow}) pl::reconstruct_split(s, m, "test");
        pl::evaluate(s, "test");
        pl::sweep_omega(s);
        dirs.push_back(w);
    }
    int compared = 0;
    int differing = 0;
    for (const auto& e : fs::recursive_directory_iterator(dirs[0])) {
        const auto ext = e.path().extension();
        if (!e.is_regular_file() || (ext != ".owcf" && ext != ".csv")) continue;
        const fs::path other = dirs[1] / fs::relative(e.path(), dirs[0]);
        ++compared;
        if (!fs::exists(other) || slurp(e.path()) != slurp(other)) ++differing;
    }
    o.detail << " tiny pipeline: " << compared << " files compared, " << differing << " differ";
    o.require(compared > 50 && differing == 0, "tiny pipeline bit-identical");
    for (const auto& d : dirs) fs::remove_all(d);

    const auto& s = desk().s;
    const fs::path w = fs::temp_directory_path() / "owcnf_acceptance_desk";
    fs::remove_all(w);
    pl::Settings fresh = s;
    fresh.work_dir = w;
    const Manifest m = pl::gen_data(fresh);
    int data_diff = 0;
    for (const auto& e : m.entries) data_diff += slurp(pl::data_dir(s) / e.path) != slurp(pl::data_dir(fresh) / e.path);
    data_diff += slurp(pl::data_dir(s) / kManifestName) != slurp(pl::data_dir(fresh) / kManifestName);
    fs::create_directories(w / "model");
    fs::copy(pl::tuned_condition_path(s).parent_path(), w / "condition");
    fs::copy_file(pl::checkpoint_path(s), pl::checkpoint_path(fresh));
    int recon_diff = 0;
    for (const auto method : {pl::Method::sart, pl::Method::tw, pl::Method::ow}) {
        pl::reconstruct_split(fresh, method, "test", 0);
        for (const char* f : {"0000.image.owcf", "0000.trace.csv"}) {
            recon_diff += slurp(pl::results_dir(s, method, "test") / f) != slurp(pl::results_dir(fresh, method, "test") / f);
        }
    }
    o.detail << "; desk data regenerated: " << m.entries.size() + 1 << " files, " << data_diff
             << " differ; desk reconstructions rerun: 6 files, " << recon_diff << " differ";
    o.require(data_diff == 0, "desk data bit-identical");
    o.require(recon_diff == 0, "desk reconstructions bit-identical");
    fs::remove_all(w);
}

} // namespace

int main() {
    std::cout.setf(std::ios::fmtflags(0), std::ios::floatfield);
    desk();
    run(1, "projector adjointness", projector_adjointness);
    run(2, "flow correctness", flow_correctness);
    run(3, "OS-SART", os_sart_checks);
    run(4, "Poisson simulator", poisson_checks);
    run(5, "conditionalization", conditionalization);
    run(6, "end-to-end desk experiment", end_to_end);
    run(7, "omega sweep", omega_sweep);
    run(8, "metrics", metric_cases);
    run(9, "reproducibility", reproducibility);
    std::cout << (all_passed ? "all criteria passed" : "some criteria failed") << std::endl;
    return all_passed ? 0 : 1;
}
