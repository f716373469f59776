// advrobust: command-line driver for the adversarial robustness toolkit.
//
//   advrobust perturb|risk|bounds|pareto|kalman [options]
//   advrobust experiment <fig-condition|fig-observability|fig-kf-vs-adv|...> [options]
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "advrobust/errors.hpp"
#include "advrobust/experiment.hpp"
#include "advrobust/montecarlo.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> samples;
    std::optional<std::string> out;
    bool svg = false;
    bool print_config = false;
    unsigned threads = 0;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config_path, "JSON configuration file");
    cmd->add_option("--seed", o.seed, "random seed (overrides the config)");
    cmd->add_option("--samples", o.samples, "Monte Carlo samples (overrides the config)");
    cmd->add_option("--out", o.out, "CSV output path (default: stdout)");
    cmd->add_flag("--svg", o.svg, "also write an SVG chart next to the CSV");
    cmd->add_flag("--print-config", o.print_config,
                  "print the effective configuration as JSON and exit");
    cmd->add_option("--threads", o.threads, "worker threads, 0 = all cores");
}

int run(advrobust::ExperimentKind kind, const CommonOptions& o) {
    using namespace advrobust;
    ExperimentConfig config = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
    config.kind = kind;
    if (o.seed) config.seed = *o.seed;
    if (o.samples) config.n_samples = *o.samples;
    if (o.out) config.output_path = *o.out;
    if (o.svg) config.svg = true;
    if (o.print_config) {
        std::cout << config_to_json(config);
        return 0;
    }
    set_worker_threads(o.threads);
    write_outputs(run_experiment(config), config);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    using advrobust::ExperimentKind;
    CLI::App app{"Adversarially robust linear estimation toolkit"};
    app.require_subcommand(1);

    CommonOptions opts;
    std::optional<ExperimentKind> kind;
    struct Simple {
        const char* name;
        const char* help;
        ExperimentKind kind;
    };
    const Simple simple[] = {
        {"perturb", "solve one worst-case perturbation problem", ExperimentKind::perturb},
        {"risk", "standard and adversarial risk of a linear model", ExperimentKind::risk},
        {"bounds", "analytic bounds on the adversarial risk gap", ExperimentKind::bounds},
        {"pareto", "trace the standard/adversarial risk frontier", ExperimentKind::pareto},
        {"kalman", "Kalman estimator risks and gap bounds", ExperimentKind::kalman_bounds},
    };
    for (const auto& s : simple) {
        auto* cmd = app.add_subcommand(s.name, s.help);
        add_common(cmd, opts);
        const ExperimentKind k = s.kind;
        cmd->callback([&kind, k] { kind = k; });
    }

    std::string experiment_name;
    auto* exp = app.add_subcommand("experiment", "run a named experiment configuration");
    exp->add_option("name", experiment_name,
                    "perturb, risk, bounds, pareto, kalman-bounds, fig-condition, "
                    "fig-observability or fig-kf-vs-adv")
        ->required();
    add_common(exp, opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (exp->parsed()) kind = advrobust::parse_experiment_kind(experiment_name);
        return run(*kind, opts);
    } catch (const advrobust::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const advrobust::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const advrobust::IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kExitIo;
    }
}
