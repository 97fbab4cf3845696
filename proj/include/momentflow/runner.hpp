#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "momentflow/flow.hpp"
#include "momentflow/hminus.hpp"
#include "momentflow/operator.hpp"

namespace momentflow {

// Invalid manifest; field() is the offending key (dotted for nested keys).
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& message)
        : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

enum class ExperimentKind { IdentitySuite, LinearFlow, NonlinearFlow, Spectrum, DecaySweep };

std::string kind_name(ExperimentKind kind);

/**
 * Initial data, sampled on the grid and projected onto V_Y:
 *   "default"                 1 - 6x + 6x^2 + x^3
 *   "random(seed, degree)"    random_polynomial from Rng(seed)
 *   {"coefficients": [...]}   monomial coefficients, lowest first
 * Any form may carry an amplitude multiplier.
 */
struct InitialSpec {
    enum class Kind { Default, Random, Coefficients };
    Kind kind = Kind::Default;
    std::vector<double> coefficients;
    std::uint64_t seed = 0;
    int degree = 6;
    double amplitude = 1.0;

    Polynomial polynomial() const;
};

struct RunManifest {
    ExperimentKind kind = ExperimentKind::IdentitySuite;
    std::optional<int> n;
    ConstraintSpace y = ConstraintSpace::zero_zero();
    std::size_t n_points = 513;
    double p = 2.0;
    double dt = 1e-3;
    double t_final = 5.0;
    double prox_tol = 1e-10;
    double eps_reg = 1e-8;
    int max_newton = 60;
    // linear_flow only
    double eta = 1.0;
    Scheme scheme = Scheme::ImplicitEuler;
    InitialSpec initial;
    std::uint64_t seed = 0;
    std::string output = "out";
    // spectrum: number of eigenvalues written
    std::size_t eigenvalues = 10;
    // identity_suite
    int samples = 200;
    int max_degree = 6;
    // decay_sweep
    std::vector<double> p_values{1.5, 2.0, 3.0, 4.0};
    int parallel = 1;

    FlowConfig flow_config() const;
};

RunManifest parse_manifest(const std::string& json_text);
RunManifest load_config(const std::filesystem::path& path);
// Pretty-printed JSON of every field, defaults included.
std::string manifest_json(const RunManifest& m);

struct IdentityRow {
    std::string name;
    int n = 0;
    double max_residual = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct IdentityReport {
    std::vector<IdentityRow> rows;
    bool all_pass() const;
};

// Exact-path identities for n = 1..5 and integration by parts for n = 1..4, on
// `samples` random polynomials (and pairs) drawn from Rng(seed).
IdentityReport identity_suite(std::uint64_t seed, int samples = 200, int max_degree = 6);
void print_identity_table(std::ostream& os, const IdentityReport& report);

// Time stepping of the linear flow with the FlowRecord bookkeeping of run_flow
// (energy with p = 2, dissipation residual |d/dt 1/2 |u|^2 + 2 E(u)|).
FlowRun run_linear_flow(const OperatorAssembly& asm_, const GridFunction& u0, const FlowConfig& cfg, double eta,
                        Scheme scheme);

void write_flow_csv(std::ostream& os, const std::vector<FlowRecord>& records, const std::string& manifest);

// JSON text of the smallest eigenvalues with the embedded manifest.
std::string spectrum_report(const RunManifest& m);

// Runs the manifest and writes its outputs into out_dir. Returns the list of written files.
// Throws ConfigError for invalid input and std::runtime_error (including ProxFailure) for numerical failure.
std::vector<std::filesystem::path> run_manifest(const RunManifest& m, const std::filesystem::path& out_dir);

}  // namespace momentflow
