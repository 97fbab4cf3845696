// momentflow: command-line driver for the moment-constrained diffusion library.
//
//   momentflow run <config.json> [--out DIR] [--seed S] [--parallel K]
//   momentflow check [--seed S] [--samples M] [--out DIR]
//   momentflow spectrum --n N --y KIND --points P [--count K]
//
// Exit codes: 0 success, 1 numerical failure, 2 configuration error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "momentflow/runner.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kNumerical = 1;
constexpr int kConfig = 2;

int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const momentflow::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const momentflow::ProxFailure& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumerical;
    }
}

}  // namespace

int main(int argc, char** argv) {
    using namespace momentflow;
    CLI::App app{"momentflow: H^-1 gradient flows with moment constraints on (0,1)"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run an experiment described by a JSON manifest");
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> parallel;
    run->add_option("config", config_path, "Manifest file")->required();
    run->add_option("--out", out_dir, "Output directory (overrides the manifest)");
    run->add_option("--seed", seed, "Seed (overrides the manifest)");
    run->add_option("--parallel", parallel, "Concurrent runs for decay_sweep")->check(CLI::PositiveNumber);

    auto* check = app.add_subcommand("check", "Run the identity suite with default settings");
    std::uint64_t check_seed = 42;
    int check_samples = 200;
    std::string check_out;
    check->add_option("--seed", check_seed, "Seed for the random polynomials");
    check->add_option("--samples", check_samples, "Polynomials per identity")->check(CLI::PositiveNumber);
    check->add_option("--out", check_out, "Also write identity.json here");

    auto* spec = app.add_subcommand("spectrum", "Smallest eigenvalues of A_Y");
    int spec_n = 1;
    std::string spec_y = "zero_zero";
    std::size_t spec_points = 513;
    std::size_t spec_count = 10;
    spec->add_option("--n", spec_n, "Moment order n")->required();
    spec->add_option("--y", spec_y, "zero_zero | zero_free | full | line:<slope>")->required();
    spec->add_option("--points", spec_points, "Grid points")->required();
    spec->add_option("--count", spec_count, "Number of eigenvalues");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    if (*run) {
        return guarded([&] {
            RunManifest m = load_config(config_path);
            if (seed) m.seed = *seed;
            if (parallel) m.parallel = *parallel;
            if (!out_dir.empty()) m.output = out_dir;
            if (m.kind == ExperimentKind::IdentitySuite) {
                print_identity_table(std::cout, identity_suite(m.seed, m.samples, m.max_degree));
            }
            for (const auto& path : run_manifest(m, m.output)) std::cout << "wrote " << path.string() << "\n";
            return kOk;
        });
    }
    if (*check) {
        return guarded([&] {
            const IdentityReport report = identity_suite(check_seed, check_samples);
            print_identity_table(std::cout, report);
            if (!check_out.empty()) {
                RunManifest m;
                m.seed = check_seed;
                m.samples = check_samples;
                m.output = check_out;
                run_manifest(m, check_out);
            }
            return report.all_pass() ? kOk : kNumerical;
        });
    }
    return guarded([&] {
        RunManifest m;
        m.kind = ExperimentKind::Spectrum;
        if (spec_n < 1) throw ConfigError("n", "must be a positive integer");
        m.n = spec_n;
        try {
            m.y = ConstraintSpace::parse(spec_y);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("y", e.what());
        }
        if (spec_points < 17) throw ConfigError("points", "must be at least 17");
        m.n_points = spec_points;
        if (spec_count < 1) throw ConfigError("count", "must be at least 1");
        m.eigenvalues = spec_count;
        std::cout << spectrum_report(m);
        return kOk;
    });
}
