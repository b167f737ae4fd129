#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "netsight/netsight.hpp"

namespace {

using netsight::CommandResult;
using netsight::ExitCode;
using netsight::PipelineConfig;

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool force = false;
};

PipelineConfig resolve(const Options& o) {
    PipelineConfig cfg = o.config.empty() ? PipelineConfig{} : netsight::load_config(o.config);
    if (o.seed) cfg.seed = *o.seed;
    if (!o.out.empty()) cfg.out = o.out;
    if (o.force) cfg.force = true;
    cfg.apply_seed();
    cfg.validate();
    return cfg;
}

void print_lifecycle(const netsight::Json& rep) {
    fmt::print("{:<7} {:<7} {:>6} {:>10} {:>9} {:>11} {:>10}\n", "window", "role", "n", "f1_before", "f1_after",
               "acc_before", "acc_after");
    for (const auto& w : rep.at("windows")) {
        fmt::print("{:<7} {:<7} {:>6}", w.at("window").get<std::size_t>(), w.at("role").get<std::string>(),
                   w.at("samples").get<std::size_t>());
        if (w.at("before").is_null()) {
            fmt::print("  (unlabeled)\n");
            continue;
        }
        fmt::print(" {:>10.4f} {:>9.4f} {:>11.4f} {:>10.4f}\n", w.at("before").at("f1").get<double>(),
                   w.at("after").at("f1").get<double>(), w.at("before").at("accuracy").get<double>(),
                   w.at("after").at("accuracy").get<double>());
    }
    std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"NetSight: continual anomaly detection for network flow records"};
    app.require_subcommand(1);
    Options opt;
    auto add_common = [&opt](CLI::App* sub) {
        sub->add_option("--config", opt.config, "Config file (sectioned key = value)");
        sub->add_option("--seed", opt.seed, "Override the run seed");
        sub->add_option("--out", opt.out, "Output directory");
        sub->add_flag("--force", opt.force, "Skip shift gating");
    };
    struct Cmd {
        const char* name;
        const char* help;
        CommandResult (*fn)(const PipelineConfig&);
    };
    const Cmd cmds[] = {
        {"train", "Train the autoencoder and fit the labeler on data.train", netsight::cmd_train},
        {"label", "Append pseudo-labels to data.input", netsight::cmd_label},
        {"detect", "Permutation test between data.old and data.new", netsight::cmd_detect},
        {"explain", "Select the samples that explain a detected shift", netsight::cmd_explain},
        {"adapt", "Fine-tune on an explanation's selection", netsight::cmd_adapt},
        {"eval", "Metrics of a checkpoint on data.test", netsight::cmd_eval},
        {"lifecycle", "Full train/detect/explain/adapt/eval loop over windows", netsight::cmd_lifecycle},
        {"simulate", "Write the configured synthetic scenario as CSV windows", netsight::cmd_simulate},
    };
    for (const auto& c : cmds) add_common(app.add_subcommand(c.name, c.help));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ExitCode::config);
    }

    try {
        const auto cfg = resolve(opt);
        for (const auto& c : cmds) {
            if (!app.got_subcommand(c.name)) continue;
            const auto res = c.fn(cfg);
            if (std::string(c.name) == "lifecycle") {
                print_lifecycle(res.summary);
            } else {
                std::cout << res.summary.dump(2) << "\n";
            }
            for (const auto& p : res.artifacts) std::cout << "wrote " << p.string() << "\n";
        }
        return static_cast<int>(ExitCode::ok);
    } catch (const netsight::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.exit_code());
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::data);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::numerical);
    }
}
