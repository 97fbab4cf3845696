#include "momentflow/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "momentflow/moments.hpp"
#include "momentflow/random.hpp"

namespace momentflow {

using json = nlohmann::ordered_json;

namespace {

std::string format_real(double v) {
    if (!std::isfinite(v)) return "null";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

bool scalar_array(const json& j) {
    return std::all_of(j.begin(), j.end(), [](const json& e) { return !e.is_structured(); });
}

// nlohmann prints the shortest round-trip form; outputs here use a fixed 17 digits.
void emit(std::ostream& os, const json& j, int depth) {
    const std::string pad(2 * (depth + 1), ' ');
    const std::string close(2 * depth, ' ');
    if (j.is_object()) {
        if (j.empty()) {
            os << "{}";
            return;
        }
        os << "{\n";
        bool first = true;
        for (const auto& [key, value] : j.items()) {
            if (!first) os << ",\n";
            first = false;
            os << pad << json(key).dump() << ": ";
            emit(os, value, depth + 1);
        }
        os << "\n" << close << "}";
    } else if (j.is_array()) {
        if (j.empty() || scalar_array(j)) {
            os << "[";
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) os << ", ";
                emit(os, j[i], depth + 1);
            }
            os << "]";
            return;
        }
        os << "[\n";
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i) os << ",\n";
            os << pad;
            emit(os, j[i], depth + 1);
        }
        os << "\n" << close << "]";
    } else if (j.is_number_float()) {
        os << format_real(j.get<double>());
    } else {
        os << j.dump();
    }
}

std::string to_text(const json& j) {
    std::ostringstream os;
    emit(os, j, 0);
    os << "\n";
    return os.str();
}

const std::set<std::string> kKnownFields = {
    "kind",    "n",          "y",       "n_points",   "p",        "dt",      "t_final",
    "prox_tol", "eps_reg",   "max_newton", "eta",     "scheme",   "initial", "seed",
    "output",  "eigenvalues", "samples", "max_degree", "p_values", "parallel"};

double get_real(const json& j, const std::string& key, double fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number()) throw ConfigError(key, "must be a number");
    return v.get<double>();
}

long long get_integer(const json& j, const std::string& key, long long fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (v.is_number_integer() || v.is_number_unsigned()) return v.get<long long>();
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 9e15) return static_cast<long long>(d);
    }
    throw ConfigError(key, "must be an integer");
}

std::string get_string(const json& j, const std::string& key, const std::string& fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_string()) throw ConfigError(key, "must be a string");
    return v.get<std::string>();
}

ExperimentKind parse_kind(const std::string& s) {
    if (s == "identity_suite") return ExperimentKind::IdentitySuite;
    if (s == "linear_flow") return ExperimentKind::LinearFlow;
    if (s == "nonlinear_flow") return ExperimentKind::NonlinearFlow;
    if (s == "spectrum") return ExperimentKind::Spectrum;
    if (s == "decay_sweep") return ExperimentKind::DecaySweep;
    throw ConfigError("kind", "unknown experiment kind '" + s + "'");
}

InitialSpec parse_preset(const std::string& text, const std::string& field) {
    InitialSpec spec;
    if (text == "default") return spec;
    static const std::regex random_form(R"(\s*random\s*\(\s*(\d+)\s*,\s*(\d+)\s*\)\s*)");
    std::smatch m;
    if (std::regex_match(text, m, random_form)) {
        spec.kind = InitialSpec::Kind::Random;
        try {
            spec.seed = std::stoull(m[1].str());
            spec.degree = std::stoi(m[2].str());
        } catch (const std::exception&) {
            throw ConfigError(field, "random(seed, degree) arguments out of range");
        }
        if (spec.degree > 20) throw ConfigError(field, "random degree must be <= 20");
        return spec;
    }
    throw ConfigError(field, "unknown preset '" + text + "' (expected default or random(seed, degree))");
}

InitialSpec parse_initial(const json& j) {
    if (j.is_string()) return parse_preset(j.get<std::string>(), "initial");
    if (!j.is_object()) throw ConfigError("initial", "must be a preset string or an object");
    for (const auto& [key, value] : j.items()) {
        if (key != "preset" && key != "coefficients" && key != "amplitude") {
            throw ConfigError("initial." + key, "unknown field");
        }
    }
    if (j.contains("preset") && j.contains("coefficients")) {
        throw ConfigError("initial", "give either preset or coefficients, not both");
    }
    InitialSpec spec;
    if (j.contains("preset")) {
        if (!j.at("preset").is_string()) throw ConfigError("initial.preset", "must be a string");
        spec = parse_preset(j.at("preset").get<std::string>(), "initial.preset");
    } else if (j.contains("coefficients")) {
        const json& c = j.at("coefficients");
        if (!c.is_array() || c.empty()) throw ConfigError("initial.coefficients", "must be a nonempty array");
        spec.kind = InitialSpec::Kind::Coefficients;
        for (const auto& e : c) {
            if (!e.is_number() || !std::isfinite(e.get<double>())) {
                throw ConfigError("initial.coefficients", "entries must be finite numbers");
            }
            spec.coefficients.push_back(e.get<double>());
        }
    }
    spec.amplitude = get_real(j, "amplitude", 1.0);
    if (!std::isfinite(spec.amplitude)) throw ConfigError("initial.amplitude", "must be finite");
    return spec;
}

json initial_json(const InitialSpec& s) {
    json j;
    switch (s.kind) {
        case InitialSpec::Kind::Default: j["preset"] = "default"; break;
        case InitialSpec::Kind::Random:
            j["preset"] = "random(" + std::to_string(s.seed) + ", " + std::to_string(s.degree) + ")";
            break;
        case InitialSpec::Kind::Coefficients: j["coefficients"] = s.coefficients; break;
    }
    j["amplitude"] = s.amplitude;
    return j;
}

json manifest_object(const RunManifest& m) {
    json j;
    j["kind"] = kind_name(m.kind);
    j["n"] = m.n ? json(*m.n) : json(nullptr);
    j["y"] = m.y.name();
    j["n_points"] = m.n_points;
    j["p"] = m.p;
    j["dt"] = m.dt;
    j["t_final"] = m.t_final;
    j["prox_tol"] = m.prox_tol;
    j["eps_reg"] = m.eps_reg;
    j["max_newton"] = m.max_newton;
    j["eta"] = m.eta;
    j["scheme"] = m.scheme == Scheme::ImplicitEuler ? "implicit_euler" : "exponential";
    j["initial"] = initial_json(m.initial);
    j["seed"] = m.seed;
    j["output"] = m.output;
    j["eigenvalues"] = m.eigenvalues;
    j["samples"] = m.samples;
    j["max_degree"] = m.max_degree;
    j["p_values"] = m.p_values;
    j["parallel"] = m.parallel;
    return j;
}

json record_json(const FlowRecord& r) {
    return json{{"t", r.t},           {"mu0", r.mu0},
                {"mu1", r.mu1},       {"mun", r.mun},
                {"lp_energy", r.lp_energy}, {"hy_norm_sq", r.hy_norm_sq},
                {"dissipation_residual", r.dissipation_residual}};
}

json fit_json(const std::vector<FlowRecord>& records, DecayModel model) {
    try {
        const DecayFit f = fit_decay(records, model);
        return json{{"slope", f.slope},
                    {"intercept", f.intercept},
                    {"rate", f.rate},
                    {"r_squared", f.r_squared},
                    {"window_start", f.window_start},
                    {"window_end", f.window_end},
                    {"count", f.count}};
    } catch (const std::invalid_argument&) {
        return json(nullptr);
    }
}

json flow_summary(const FlowRun& run, const RunManifest& m, double p, const OperatorAssembly& a) {
    json j;
    j["steps"] = run.records.empty() ? 0 : run.records.size() - 1;
    j["initial"] = record_json(run.records.front());
    j["final"] = record_json(run.records.back());
    double moment_violation = 0.0;
    double residual_sum = 0.0;
    for (std::size_t i = 0; i < run.records.size(); ++i) {
        const auto& r = run.records[i];
        moment_violation = std::max(moment_violation, m.y.violation(r.mu0, r.mun));
        if (i > 0) residual_sum += r.dissipation_residual;
    }
    j["max_moment_violation"] = moment_violation;
    j["mean_dissipation_residual"] =
        run.records.size() > 1 ? residual_sum / static_cast<double>(run.records.size() - 1) : 0.0;
    j["fit_exponential"] = fit_json(run.records, DecayModel::Exponential);
    j["fit_polynomial"] = fit_json(run.records, DecayModel::Polynomial);
    if (run.records.size() >= 3) {
        const InequalityCheck ic = differential_inequality_check(run.records, p);
        j["inequality"] = json{{"max_violation", ic.max_violation}, {"c_empirical", ic.c_empirical}, {"points", ic.points}};
    }
    const double c0 = embedding_constant(a, p);
    j["embedding_constant"] = c0;
    j["k_pred"] = 2.0 * c0 * std::pow(run.records.front().hy_norm_sq, 0.5 * (p - 2.0));
    j["newton_iterations"] = run.newton_iterations;
    j["floor_limited_steps"] = run.floor_limited_steps;
    j["retries"] = run.retries;
    j["final_eps_reg"] = run.final_eps_reg;
    return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os << text;
    if (!os) throw std::runtime_error("write failed for " + path.string());
}

std::string csv_text(const std::vector<FlowRecord>& records, const std::string& manifest) {
    std::ostringstream os;
    write_flow_csv(os, records, manifest);
    return os.str();
}

std::string p_label(double p) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%g", p);
    return buf;
}

GridFunction initial_state(const RunManifest& m) {
    const GridFunction raw = poly_to_grid(m.initial.polynomial(), m.n_points) * m.initial.amplitude;
    return project_initial(raw, *m.n, m.y);
}

}  // namespace

std::string kind_name(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::IdentitySuite: return "identity_suite";
        case ExperimentKind::LinearFlow: return "linear_flow";
        case ExperimentKind::NonlinearFlow: return "nonlinear_flow";
        case ExperimentKind::Spectrum: return "spectrum";
        case ExperimentKind::DecaySweep: return "decay_sweep";
    }
    return "?";
}

Polynomial InitialSpec::polynomial() const {
    switch (kind) {
        case Kind::Default: return Polynomial{1, -6, 6, 1};
        case Kind::Random: {
            Rng rng(seed);
            return random_polynomial(rng, degree);
        }
        case Kind::Coefficients: {
            std::vector<Rational> c;
            for (double v : coefficients) c.push_back(to_rational(v));
            return Polynomial(std::move(c));
        }
    }
    return {};
}

FlowConfig RunManifest::flow_config() const {
    FlowConfig cfg;
    cfg.p = p;
    cfg.n = n.value_or(1);
    cfg.y = y;
    cfg.n_points = n_points;
    cfg.dt = dt;
    cfg.t_final = t_final;
    cfg.prox_tol = prox_tol;
    cfg.eps_reg = eps_reg;
    cfg.max_newton = max_newton;
    return cfg;
}

RunManifest parse_manifest(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config", std::string("JSON parse error: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config", "top level must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!kKnownFields.count(key)) throw ConfigError(key, "unknown field");
    }

    RunManifest m;
    if (!j.contains("kind")) throw ConfigError("kind", "missing");
    m.kind = parse_kind(get_string(j, "kind", ""));

    if (j.contains("n") && !j.at("n").is_null()) {
        const long long n = get_integer(j, "n", 0);
        if (n < 1 || n > 64) throw ConfigError("n", "must be an integer in [1, 64]");
        m.n = static_cast<int>(n);
    } else if (m.kind != ExperimentKind::IdentitySuite) {
        throw ConfigError("n", "missing (required for " + kind_name(m.kind) + ")");
    }

    try {
        m.y = ConstraintSpace::parse(get_string(j, "y", "zero_zero"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError("y", e.what());
    }
    const long long n_points = get_integer(j, "n_points", 513);
    if (n_points < 17 || n_points > 20001) throw ConfigError("n_points", "must be in [17, 20001]");
    m.n_points = static_cast<std::size_t>(n_points);
    m.p = get_real(j, "p", m.p);
    m.dt = get_real(j, "dt", m.dt);
    m.t_final = get_real(j, "t_final", m.t_final);
    m.prox_tol = get_real(j, "prox_tol", m.prox_tol);
    m.eps_reg = get_real(j, "eps_reg", m.eps_reg);
    m.max_newton = static_cast<int>(get_integer(j, "max_newton", m.max_newton));
    m.eta = get_real(j, "eta", m.eta);
    if (!std::isfinite(m.eta)) throw ConfigError("eta", "must be finite");
    const std::string scheme = get_string(j, "scheme", "implicit_euler");
    if (scheme == "implicit_euler") {
        m.scheme = Scheme::ImplicitEuler;
    } else if (scheme == "exponential") {
        m.scheme = Scheme::Exponential;
        if (m.eta != 1.0) throw ConfigError("eta", "the exponential scheme requires eta = 1");
    } else {
        throw ConfigError("scheme", "must be implicit_euler or exponential");
    }
    if (j.contains("initial")) m.initial = parse_initial(j.at("initial"));
    const long long seed = get_integer(j, "seed", 0);
    if (seed < 0) throw ConfigError("seed", "must be nonnegative");
    m.seed = static_cast<std::uint64_t>(seed);
    m.output = get_string(j, "output", m.output);
    const long long eigenvalues = get_integer(j, "eigenvalues", 10);
    if (eigenvalues < 1 || eigenvalues > n_points) throw ConfigError("eigenvalues", "must be in [1, n_points]");
    m.eigenvalues = static_cast<std::size_t>(eigenvalues);
    const long long samples = get_integer(j, "samples", m.samples);
    if (samples < 1 || samples > 1000000) throw ConfigError("samples", "must be in [1, 1000000]");
    m.samples = static_cast<int>(samples);
    const long long max_degree = get_integer(j, "max_degree", m.max_degree);
    if (max_degree < 0 || max_degree > 20) throw ConfigError("max_degree", "must be in [0, 20]");
    m.max_degree = static_cast<int>(max_degree);
    if (j.contains("p_values")) {
        const json& pv = j.at("p_values");
        if (!pv.is_array() || pv.empty()) throw ConfigError("p_values", "must be a nonempty array");
        m.p_values.clear();
        for (std::size_t i = 0; i < pv.size(); ++i) {
            const std::string field = "p_values[" + std::to_string(i) + "]";
            if (!pv[i].is_number()) throw ConfigError(field, "must be a number");
            const double p = pv[i].get<double>();
            if (!(p > 1.0) || !std::isfinite(p)) throw ConfigError(field, "must be a finite real > 1");
            m.p_values.push_back(p);
        }
    }
    const long long parallel = get_integer(j, "parallel", 1);
    if (parallel < 1 || parallel > 256) throw ConfigError("parallel", "must be in [1, 256]");
    m.parallel = static_cast<int>(parallel);

    try {
        FlowConfig cfg = m.flow_config();
        cfg.n = m.n.value_or(1);
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        const auto colon = msg.find(':');
        if (colon == std::string::npos) throw ConfigError("config", msg);
        throw ConfigError(msg.substr(0, colon), msg.substr(colon + 2));
    }
    return m;
}

RunManifest load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config", "cannot read " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_manifest(text.str());
}

std::string manifest_json(const RunManifest& m) { return to_text(manifest_object(m)); }

bool IdentityReport::all_pass() const {
    return std::all_of(rows.begin(), rows.end(), [](const IdentityRow& r) { return r.pass; });
}

IdentityReport identity_suite(std::uint64_t seed, int samples, int max_degree) {
    if (samples < 1) throw std::invalid_argument("identity_suite: samples must be >= 1");
    constexpr double tol = 1e-12;
    Rng rng(seed);
    auto draw = [&] {
        std::vector<Polynomial> out;
        for (int i = 0; i < samples; ++i) out.push_back(random_polynomial(rng, max_degree));
        return out;
    };
    const std::vector<Polynomial> fs = draw();
    const std::vector<Polynomial> phis = draw();
    const std::vector<Polynomial> us = draw();
    const std::vector<Polynomial> hs = draw();

    IdentityReport report;
    auto add = [&](std::string name, int n, const Rational& worst) {
        const double r = to_double(worst);
        report.rows.push_back({std::move(name), n, r, tol, r <= tol});
    };
    for (int n = 1; n <= 5; ++n) {
        Rational e[6] = {0, 0, 0, 0, 0, 0};
        auto track = [](Rational& slot, const Rational& diff) {
            const Rational d = abs(diff);
            if (d > slot) slot = d;
        };
        for (std::size_t i = 0; i < fs.size(); ++i) {
            const Polynomial& f = fs[i];
            const Polynomial pf = apply_Pn(f, n);
            const Rational mun = moment(f, n);
            track(e[0], moment(pf, n - 1));
            track(e[1], pf(Rational(0)) + mun);
            track(e[2], pf(Rational(1)) - (moment(f, 0) - mun));
            track(e[3], moment(pf, 0) - (moment(f, 1) - mun));
            track(e[4], mun - n * moment(primitive(f), n - 1));
            track(e[5], poly_definite_integral(pf * phis[i], 0, 1) -
                            poly_definite_integral(f * apply_Jn(phis[i], n), 0, 1));
        }
        add("mu_{n-1}(P_n f) = 0", n, e[0]);
        add("P_n f(0) = -mu_n(f)", n, e[1]);
        add("P_n f(1) = mu_0(f) - mu_n(f)", n, e[2]);
        add("mu_0(P_n f) = mu_1(f) - mu_n(f)", n, e[3]);
        add("mu_n(f) = n mu_{n-1}(I f)", n, e[4]);
        add("<P_n u, phi> = <u, J_n phi>", n, e[5]);
    }
    for (int n = 1; n <= 4; ++n) {
        Rational worst = 0;
        for (std::size_t i = 0; i < us.size(); ++i) {
            const auto [lhs, rhs] = ibp_sides_exact(us[i], hs[i], n);
            const Rational d = abs(lhs - rhs);
            if (d > worst) worst = d;
        }
        add("integration by parts", n, worst);
    }
    {
        const auto [lhs, rhs] = ibp_sides_exact(Polynomial{0, 0, 1}, Polynomial{1}, 2);
        const Rational target(2, 9);
        add("integration by parts, u = x^2, h = 1 (2/9)", 2, std::max(abs(lhs - target), abs(rhs - target)));
    }
    return report;
}

void print_identity_table(std::ostream& os, const IdentityReport& report) {
    char line[160];
    std::snprintf(line, sizeof line, "%-44s %2s  %-12s %-8s %s\n", "identity", "n", "max_residual", "tol", "result");
    os << line;
    for (const auto& r : report.rows) {
        std::snprintf(line, sizeof line, "%-44s %2d  %.6e %.0e    %s\n", r.name.c_str(), r.n, r.max_residual,
                      r.tolerance, r.pass ? "PASS" : "FAIL");
        os << line;
    }
    os << (report.all_pass() ? "all identities hold\n" : "identity check FAILED\n");
}

FlowRun run_linear_flow(const OperatorAssembly& a, const GridFunction& u0, const FlowConfig& cfg, double eta,
                        Scheme scheme) {
    if (u0.size() != a.size()) throw std::invalid_argument("run_linear_flow: initial data has the wrong grid size");
    const LinearStepper stepper(a, cfg.dt, scheme, eta);
    const auto steps = static_cast<std::size_t>(std::llround(cfg.t_final / cfg.dt));
    FlowRun run;
    run.records.reserve(steps + 1);
    run.records.push_back(make_record(a, u0, 0.0, 2.0));
    GridFunction u = u0;
    for (std::size_t k = 1; k <= steps; ++k) {
        u = stepper.step(u);
        FlowRecord rec = make_record(a, u, static_cast<double>(k) * cfg.dt, 2.0);
        const double dv = 0.5 * (rec.hy_norm_sq - run.records.back().hy_norm_sq) / cfg.dt;
        rec.dissipation_residual = std::abs(dv + 2.0 * rec.lp_energy);
        run.records.push_back(rec);
    }
    run.final_state = u;
    return run;
}

void write_flow_csv(std::ostream& os, const std::vector<FlowRecord>& records, const std::string& manifest) {
    std::istringstream lines(manifest);
    for (std::string line; std::getline(lines, line);) os << "# " << line << "\n";
    os << "t,mu0,mu1,mun,lp_energy,hy_norm_sq,dissipation_residual\n";
    for (const auto& r : records) {
        os << format_real(r.t) << ',' << format_real(r.mu0) << ',' << format_real(r.mu1) << ',' << format_real(r.mun)
           << ',' << format_real(r.lp_energy) << ',' << format_real(r.hy_norm_sq) << ','
           << format_real(r.dissipation_residual) << "\n";
    }
}

std::string spectrum_report(const RunManifest& m) {
    if (!m.n) throw ConfigError("n", "missing (required for spectrum)");
    const OperatorAssembly a = assemble(*m.n, m.y, m.n_points);
    const std::size_t dim = m.n_points - static_cast<std::size_t>(m.y.rank());
    const std::vector<double> ev = spectrum(a, std::min(m.eigenvalues, dim));
    const bool positive = std::all_of(ev.begin(), ev.end(), [](double v) { return v > 0.0; });
    return to_text(json{{"manifest", manifest_object(m)}, {"eigenvalues", ev}, {"all_positive", positive}});
}

std::vector<std::filesystem::path> run_manifest(const RunManifest& m, const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const std::string manifest = manifest_json(m);
    const json manifest_obj = manifest_object(m);
    std::vector<fs::path> written;

    switch (m.kind) {
        case ExperimentKind::IdentitySuite: {
            const IdentityReport report = identity_suite(m.seed, m.samples, m.max_degree);
            json rows = json::array();
            for (const auto& r : report.rows) {
                rows.push_back(json{{"identity", r.name},
                                    {"n", r.n},
                                    {"max_residual", r.max_residual},
                                    {"tolerance", r.tolerance},
                                    {"pass", r.pass}});
            }
            json out{{"manifest", manifest_obj}, {"all_pass", report.all_pass()}, {"checks", rows}};
            written.push_back(out_dir / "identity.json");
            write_text(written.back(), to_text(out));
            if (!report.all_pass()) throw std::runtime_error("identity suite: at least one identity failed");
            break;
        }
        case ExperimentKind::Spectrum: {
            written.push_back(out_dir / "spectrum.json");
            write_text(written.back(), spectrum_report(m));
            break;
        }
        case ExperimentKind::LinearFlow: {
            const FlowConfig cfg = m.flow_config();
            const OperatorAssembly a = assemble(*m.n, m.y, m.n_points);
            const FlowRun run = run_linear_flow(a, initial_state(m), cfg, m.eta, m.scheme);
            written.push_back(out_dir / "linear_flow.csv");
            write_text(written.back(), csv_text(run.records, manifest));
            json summary = flow_summary(run, m, 2.0, a);
            summary["lambda1"] = spectrum(a, 1).front();
            json out{{"manifest", manifest_obj}, {"summary", summary}};
            written.push_back(out_dir / "linear_flow.json");
            write_text(written.back(), to_text(out));
            break;
        }
        case ExperimentKind::NonlinearFlow: {
            const FlowConfig cfg = m.flow_config();
            const OperatorAssembly a = assemble(*m.n, m.y, m.n_points);
            const FlowRun run = run_flow(a, initial_state(m), cfg);
            written.push_back(out_dir / "nonlinear_flow.csv");
            write_text(written.back(), csv_text(run.records, manifest));
            json out{{"manifest", manifest_obj}, {"summary", flow_summary(run, m, m.p, a)}};
            written.push_back(out_dir / "nonlinear_flow.json");
            write_text(written.back(), to_text(out));
            break;
        }
        case ExperimentKind::DecaySweep: {
            const OperatorAssembly a = assemble(*m.n, m.y, m.n_points);
            const GridFunction u0 = initial_state(m);
            const std::size_t jobs = m.p_values.size();
            std::vector<json> summaries(jobs);
            std::vector<std::exception_ptr> errors(jobs);
            std::vector<fs::path> csvs(jobs);
            for (std::size_t i = 0; i < jobs; ++i) csvs[i] = out_dir / ("decay_p" + p_label(m.p_values[i]) + ".csv");

            // Each job owns its CSV and its summary slot; the assembly and u0 are read-only.
            auto work = [&](std::size_t i) {
                try {
                    FlowConfig cfg = m.flow_config();
                    cfg.p = m.p_values[i];
                    const FlowRun run = run_flow(a, u0, cfg);
                    write_text(csvs[i], csv_text(run.records, manifest));
                    json s = flow_summary(run, m, cfg.p, a);
                    s["p"] = cfg.p;
                    s["csv"] = csvs[i].filename().string();
                    summaries[i] = std::move(s);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            };
            const std::size_t width = std::min<std::size_t>(static_cast<std::size_t>(m.parallel), jobs);
            std::atomic<std::size_t> next{0};
            std::vector<std::thread> pool;
            for (std::size_t w = 0; w < width; ++w) {
                pool.emplace_back([&] {
                    for (std::size_t i = next++; i < jobs; i = next++) work(i);
                });
            }
            for (auto& t : pool) t.join();
            for (const auto& e : errors) {
                if (e) std::rethrow_exception(e);
            }
            written.insert(written.end(), csvs.begin(), csvs.end());
            json out{{"manifest", manifest_obj}, {"runs", json(summaries)}};
            written.push_back(out_dir / "decay_sweep.json");
            write_text(written.back(), to_text(out));
            break;
        }
    }
    return written;
}

}  // namespace momentflow
