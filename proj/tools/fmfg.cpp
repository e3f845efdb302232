// Command line front end: run, compare and validate.

#include "fmfg/config.hpp"
#include "fmfg/runner.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace {

enum Exit { ok = 0, failed = 1, usage = 2, solver = 3 };

int cmd_run(const std::string& path, int threads, const std::string& out) {
    const fmfg::RunConfig cfg = fmfg::load_config(path);
    fmfg::RunOptions opts;
    opts.threads = threads;
    if (!out.empty()) opts.out = out;
    const fmfg::RunRecord rec = fmfg::run(cfg, opts);
    fmfg::print_summary(rec, std::cout);
    return ok;
}

int cmd_validate(const std::string& path) {
    const fmfg::RunConfig cfg = fmfg::load_config(path);
    const fmfg::ValidationReport rep = fmfg::validate(fmfg::build_instance(cfg));
    std::cout << "config " << path << "  hash " << cfg.hash() << '\n';
    for (const auto& c : rep.checks)
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << "  " << c.detail << '\n';
    std::cout << (rep.all_passed() ? "all assumptions hold" : "some assumptions fail") << '\n';
    return rep.all_passed() ? ok : failed;
}

int cmd_compare(const std::string& a, const std::string& b, double tol) {
    fmfg::CompareOptions opts;
    opts.tolerance = tol;
    const fmfg::CompareReport rep = fmfg::compare(a, b, opts);
    fmfg::print_compare(rep, std::cout);
    return rep.ok() ? ok : failed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fractional mean field game simulator"};
    app.require_subcommand(1);
    int threads = 1;
    std::string out;
    app.add_option("--threads", threads, "Worker threads for sweeps and ladders")->check(CLI::PositiveNumber);
    app.add_option("--out", out, "Root directory for run outputs");

    std::string config;
    auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
    run->add_option("config", config, "Config file")->required()->check(CLI::ExistingFile);

    auto* validate = app.add_subcommand("validate", "Check the model assumptions of a config");
    validate->add_option("config", config, "Config file")->required()->check(CLI::ExistingFile);

    std::string dir_a, dir_b;
    double tol = 0.10;
    auto* compare = app.add_subcommand("compare", "Compare two run directories");
    compare->add_option("dirA", dir_a, "First run directory")->required()->check(CLI::ExistingDirectory);
    compare->add_option("dirB", dir_b, "Second run directory")->required()->check(CLI::ExistingDirectory);
    compare->add_option("--tol", tol, "Relative tolerance on rates and plateau")->check(CLI::PositiveNumber);

    for (auto* sub : {run, validate, compare}) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(config, threads, out);
        if (*validate) return cmd_validate(config);
        if (*compare) return cmd_compare(dir_a, dir_b, tol);
    } catch (const fmfg::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return usage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage;
    } catch (const std::exception& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return solver;
    }
    return usage;
}
