// gg1ipa: run, validate and palm-check experiment configs.
//
// Exit codes: 0 success, 2 validation failure, 3 instability, 4 estimation error.

#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "gg1ipa/experiment.hpp"

namespace {

using namespace gg1ipa;

constexpr int kOk = 0;
constexpr int kValidation = 2;
constexpr int kUnstable = 3;
constexpr int kEstimation = 4;

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> replications;
    std::string out;
    unsigned jobs = 1;
    bool force_unstable = false;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("config", c.config, "experiment config (JSON)")->required();
    cmd->add_option("--seed", c.seed, "override the base seed");
    cmd->add_option("--replications", c.replications, "override the replication count")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--out", c.out, "results file (JSON Lines); stdout when omitted");
    cmd->add_option("--jobs", c.jobs, "replications run concurrently")->check(CLI::PositiveNumber);
    cmd->add_flag("--force-unstable", c.force_unstable, "run even when the load is not below 1");
}

void print_issues(const ConfigError& e) {
    for (const auto& i : e.issues()) std::cerr << "config error: " << (i.field.empty() ? "<root>" : i.field) << ": "
                                               << i.message << '\n';
}

// Opens --out, or returns stdout.
std::ostream& output(const std::string& path, std::unique_ptr<std::ofstream>& holder) {
    if (path.empty()) return std::cout;
    holder = std::make_unique<std::ofstream>(path);
    if (!*holder) throw std::runtime_error("cannot write '" + path + "'");
    return *holder;
}

template <typename Body>
int guarded(Body&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        print_issues(e);
        return kValidation;
    } catch (const UnstableInput& e) {
        std::cerr << "unstable: " << e.what() << " (use --force-unstable to run anyway)\n";
        return kUnstable;
    } catch (const std::exception& e) {
        std::cerr << "estimation error: " << e.what() << '\n';
        return kEstimation;
    }
}

RunOptions run_options(const Common& c) {
    RunOptions o;
    o.seed = c.seed;
    o.replications = c.replications;
    o.force_unstable = c.force_unstable;
    o.jobs = c.jobs;
    return o;
}

int cmd_run(const Common& c, const std::string& csv) {
    return guarded([&] {
        const ExperimentConfig cfg = load_config(c.config);
        const RunResult result = run_experiment(cfg, run_options(c));
        std::unique_ptr<std::ofstream> file;
        write_jsonl(result, output(c.out, file));
        if (!csv.empty()) {
            std::ofstream table(csv);
            if (!table) throw std::runtime_error("cannot write '" + csv + "'");
            write_csv(result, table);
        }
        return kOk;
    });
}

int cmd_validate(const std::string& path, bool probe) {
    json doc;
    try {
        doc = read_json_file(path);
    } catch (const ConfigError& e) {
        std::cout << ValidationReport{e.issues(), {}}.to_json().dump(2) << '\n';
        return kValidation;
    }
    const ValidationReport report = validate_config(doc, probe);
    std::cout << report.to_json().dump(2) << '\n';
    return report.ok() ? kOk : kValidation;
}

int cmd_palm(const Common& c) {
    return guarded([&] {
        ExperimentConfig cfg = load_config(c.config);
        if (cfg.palm_checks.empty()) {
            cfg.palm_checks = {PalmIdentity::inversion, PalmIdentity::wald_lemma};
            if (cfg.scenario.kind == ParameterKind::service_theta)
                cfg.palm_checks.push_back(PalmIdentity::ergodic_equivalence);
        }
        RunOptions o = run_options(c);
        o.estimators = false;
        o.oracles = false;
        const RunResult result = run_experiment(cfg, o);
        std::unique_ptr<std::ofstream> file;
        write_jsonl(result, output(c.out, file));
        bool all = true;
        for (const auto& p : result.pooled_palm) {
            std::cerr << (p.pass ? "PASS " : "FAIL ") << to_string(p.identity) << ": lhs " << p.lhs << " rhs "
                      << p.rhs << " tolerance " << p.tolerance << '\n';
            all = all && p.pass;
        }
        return all ? kOk : kEstimation;
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"IPA derivative estimates for G/G/1 workload functionals"};
    app.require_subcommand(1);

    Common run_args;
    std::string csv;
    auto* run = app.add_subcommand("run", "simulate, estimate, compare with oracles, emit results");
    add_common(run, run_args);
    run->add_option("--csv", csv, "also write the pooled CSV table here");

    std::string validate_path;
    bool no_probe = false;
    auto* validate = app.add_subcommand("validate", "check a config without simulating");
    validate->add_option("config", validate_path, "experiment config (JSON)")->required();
    validate->add_flag("--no-probe", no_probe, "skip the stability probe");

    Common palm_args;
    auto* palm = app.add_subcommand("palm-check", "run the Palm identity checks only");
    add_common(palm, palm_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    if (*run) return cmd_run(run_args, csv);
    if (*validate) return cmd_validate(validate_path, !no_probe);
    return cmd_palm(palm_args);
}
