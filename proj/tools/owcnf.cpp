#include "owcnf/pipeline.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <iostream>

namespace pl = owcnf::pipeline;

int main(int argc, char** argv) {
    CLI::App app{"Unsupervised low-dose CT reconstruction with a conditional normalizing-flow prior"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string work;
    app.add_option("--config", config_path, "Experiment config (.ini)")->required()->check(CLI::ExistingFile);
    app.add_option("--set", overrides, "Override a key, e.g. --set train.steps=100")->take_all();
    app.add_option("--work", work, "Work directory (overrides paths.work)");

    auto* gen = app.add_subcommand("gen-data", "Generate phantoms, sinograms and the manifest");
    auto* tune = app.add_subcommand("tune-condition", "Grid-search the condition pipeline on the tuning split");

    auto* train = app.add_subcommand("train", "Train the flow prior on clean images");
    bool resume = false;
    train->add_flag("--resume", resume, "Continue from the checkpoint in the work dir");

    auto* recon = app.add_subcommand("reconstruct", "Reconstruct a split or a single sinogram file");
    std::string method = "ow";
    std::string split = "test";
    std::optional<int> index;
    std::optional<int> iterations;
    std::string sinogram;
    std::string output;
    recon->add_option("--method", method, "ow, tw or sart")->check(CLI::IsMember({"ow", "tw", "sart"}));
    recon->add_option("--split", split, "Dataset split");
    recon->add_option("--index", index, "Only this item of the split");
    recon->add_option("--K", iterations, "Number of outer iterations");
    recon->add_option("--sinogram", sinogram, "Reconstruct this sinogram file instead of a split")
        ->check(CLI::ExistingFile);
    recon->add_option("--output", output, "Output image file (with --sinogram); the trace goes next to it");

    auto* eval = app.add_subcommand("evaluate", "Tabulate PSNR and SSIM of every reconstructed method");
    std::string eval_split = "test";
    eval->add_option("--split", eval_split, "Dataset split");

    auto* sweep = app.add_subcommand("sweep-omega", "Mean PSNR of the one-way method at each fixed omega");

    CLI11_PARSE(app, argc, argv);

    try {
        if (!work.empty()) overrides.push_back("paths.work=" + work);
        if (iterations) overrides.push_back("recon.K=" + std::to_string(*iterations));
        const pl::Settings s = pl::Settings::from_config(pl::load_config(config_path, overrides));

        if (gen->parsed()) {
            const auto m = pl::gen_data(s);
            std::cout << "wrote " << m.entries.size() << " files to " << pl::data_dir(s).string() << "\n";
        } else if (tune->parsed()) {
            const auto r = pl::tune_condition(s);
            std::cout << r.report() << "tuned config: " << pl::tuned_condition_path(s).string() << "\n";
        } else if (train->parsed()) {
            const auto st = pl::train(s, resume, &std::cout);
            std::cout << "trained to step " << st.step << "; checkpoint " << pl::checkpoint_path(s).string() << "\n";
        } else if (recon->parsed()) {
            const pl::Method m = pl::parse_method(method);
            if (!sinogram.empty()) {
                if (output.empty()) throw std::invalid_argument("--sinogram needs --output");
                const auto r = pl::reconstruct_file(s, m, sinogram);
                owcnf::io::write_image(output, r.image);
                const auto trace = std::filesystem::path(output).replace_extension(".trace.csv");
                owcnf::io::write_text(trace, r.trace.to_csv());
                std::cout << "wrote " << output << " and " << trace.string() << "\n";
            } else {
                const auto items = pl::reconstruct_split(s, m, split, index, &std::cout);
                std::cout << "wrote " << items.size() << " reconstructions to "
                          << pl::results_dir(s, m, split).string() << "\n";
            }
        } else if (eval->parsed()) {
            const auto rows = pl::evaluate(s, eval_split);
            std::cout << pl::metrics_csv(rows);
        } else if (sweep->parsed()) {
            const auto rows = pl::sweep_omega(s, &std::cout);
            std::cout << pl::sweep_csv(rows);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
