#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "iwatsuka/experiments.hpp"

namespace {

constexpr int exit_config = 2;
constexpr int exit_numerical = 3;

int run(const std::string& experiment, const std::string& config_path, std::string out, std::string format,
        int threads, double tol) {
    using namespace iwatsuka;
    json doc;
    {
        std::ifstream in(config_path);
        if (!in) {
            std::cerr << "error: cannot open config " << config_path << '\n';
            return exit_config;
        }
        try {
            in >> doc;
        } catch (const json::parse_error& e) {
            std::cerr << "error: config is not valid JSON: " << e.what() << '\n';
            return exit_config;
        }
    }
    if (!doc.is_object()) {
        std::cerr << "error: config must be a JSON object\n";
        return exit_config;
    }
    // Flags that change the output bytes are folded into the document so the hash covers them.
    // The destination is not: the same run written to two files must be identical.
    if (tol > 0.0) doc["parameters"]["tol"] = tol;
    if (!format.empty()) doc["output"]["format"] = format;

    try {
        ExperimentConfig cfg = parse_config(doc, experiment);
        if (!out.empty()) cfg.output_path = out;
        default_threads() = threads;
        const Table table = run_experiment(cfg, threads);
        auto emit = [&](std::ostream& os) {
            if (cfg.format == "json") write_json(os, cfg, table); else write_csv(os, cfg, table);
        };
        if (cfg.output_path.empty() || cfg.output_path == "-") {
            emit(std::cout);
        } else {
            std::ofstream f(cfg.output_path);
            if (!f) {
                std::cerr << "error: cannot write " << cfg.output_path << '\n';
                return exit_config;
            }
            emit(f);
        }
        return 0;
    } catch (const numerical_failure& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return exit_numerical;
    } catch (const json::exception& e) {
        std::cerr << "invalid config: " << e.what() << '\n';
        return exit_config;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid config: " << e.what() << '\n';
        return exit_config;
    } catch (const std::domain_error& e) {
        std::cerr << "invalid config: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << '\n';
        return exit_numerical;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Band functions, quasimodes and eigenvalue counts for Iwatsuka magnetic fields"};
    app.set_version_flag("--version", std::string("iwatsuka-cli ") + iwatsuka::tool_version);
    app.require_subcommand(1);
    app.fallthrough();

    std::string config, out, format;
    int threads = 1;
    double tol = 0.0;
    app.add_option("--config", config, "JSON experiment config")->required()->check(CLI::ExistingFile);
    app.add_option("--out", out, "output file; '-' or empty writes to stdout");
    app.add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--threads", threads, "worker threads")->check(CLI::Range(1, 256));
    app.add_option("--tol", tol, "fiber eigenvalue tolerance")->check(CLI::PositiveNumber);
    for (const auto& name : iwatsuka::experiment_names()) app.add_subcommand(name, "run the " + name + " experiment")->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_config;
    }
    return run(app.get_subcommands().front()->get_name(), config, out, format, threads, tol);
}
