// subrad: run, scan, spectrum and validate experiment configs.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "subrad/errors.hpp"
#include "subrad/harness/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;

struct Common {
    std::string config;
    std::string out = "out";
    int workers = 1;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c, bool with_out) {
    cmd->add_option("config", c.config, "JSON run configuration")->required();
    if (with_out) cmd->add_option("--out", c.out, "output directory")->capture_default_str();
    cmd->add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--seed", c.seed, "base seed (overrides the config)");
}

subrad::harness::RunConfig load(const Common& c) {
    auto cfg = subrad::harness::RunConfig::load(c.config);
    if (c.seed) cfg.seed = *c.seed;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Transient subradiance simulations for dipole-coupled emitter arrays"};
    app.set_version_flag("--version", std::string(SUBRAD_VERSION));
    app.require_subcommand(1);

    Common c;
    auto* run = app.add_subcommand("run", "execute one configuration");
    auto* scan = app.add_subcommand("scan", "sweep one or two parameters");
    auto* spectrum = app.add_subcommand("spectrum", "dynamic fluorescence spectra only");
    auto* validate = app.add_subcommand("validate", "check a configuration without running it");
    for (auto* cmd : {run, scan, spectrum}) add_common(cmd, c, true);
    add_common(validate, c, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    namespace h = subrad::harness;
    try {
        const auto cfg = load(c);
        if (run->parsed()) {
            const auto r = h::run(cfg, c.out, c.workers);
            std::cout << "backend " << r.backend << ", " << r.series.size() << " realization(s), wrote " << c.out
                      << '\n';
            for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
        } else if (scan->parsed()) {
            const auto s = h::scan(cfg, c.out, c.workers);
            std::cout << s.size() << " scan point(s), wrote " << c.out << '\n';
        } else if (spectrum->parsed()) {
            const auto s = h::spectrum(cfg, c.out, c.workers);
            for (const auto& r : s)
                for (const auto& w : r.warnings) std::cerr << "warning: t' = " << r.t_prime << ": " << w << '\n';
            std::cout << s.size() << " spectrum/spectra, wrote " << c.out << '\n';
        } else if (validate->parsed()) {
            std::cout << h::validate(cfg).dump(2) << '\n';
        }
    } catch (const subrad::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const subrad::Error& e) {
        std::cerr << "solver error: " << e.what() << '\n';
        return kExitSolver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitSolver;
    }
    return kExitOk;
}
