#include "affine/config.hpp"
#include "affine/factorization.hpp"
#include "affine/oracles.hpp"
#include "affine/riccati.hpp"
#include "affine/simulate.hpp"
#include "affine/version.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace {

using affine::ModelConfig;
using affine::VecD;
using nlohmann::json;

struct CliArgs {
    std::string config_path;
    std::string preset;
    std::string out;
    std::uint64_t seed = 0;
    std::int64_t paths = 100000;
    double dt = 1.0 / 250.0;
    double horizon = 0.0;  // per-command default resolved at dispatch
    double tol_abs = 1e-10;
    double tol_rel = 1e-10;
    double t = 12.0;
    bool m0_only = false;
};

ModelConfig load_config(const CliArgs& args) {
    if (!args.config_path.empty() && !args.preset.empty())
        throw affine::ConfigError("--config and --preset are mutually exclusive");
    if (!args.config_path.empty()) {
        std::ifstream in(args.config_path);
        if (!in)
            throw affine::ConfigError("cannot read config file: " + args.config_path);
        std::stringstream ss;
        ss << in.rdbuf();
        return affine::parse_config(ss.str());
    }
    if (!args.preset.empty()) return affine::preset_config(args.preset);
    throw affine::ConfigError("need --config or --preset");
}

void require_admissible(const affine::AffineModelD& model) {
    const auto report = affine::validate_admissibility(model);
    if (!report.passed)
        throw affine::ConfigError("model failed admissibility: condition " +
                                  report.violations.front().condition + ", " +
                                  report.violations.front().message);
}

// Evaluation state: stationary mean when it exists, else the configured x0.
VecD resolve_state(const ModelConfig& cfg) {
    if (const auto xbar = affine::stationary_state(cfg.model)) return *xbar;
    if (cfg.x0.size() > 0) return cfg.x0;
    throw affine::ConfigError(
        "no stationary state exists and the config does not set x0");
}

std::string resolve_out(const std::string& flag, const char* verb) {
    if (!flag.empty()) return flag;
    const std::string name = std::string(verb) + ".csv";
    if (const char* dir = std::getenv("LTFACT_OUT_DIR"); dir && *dir)
        return std::string(dir) + "/" + name;
    return name;
}

void write_csv_file(const std::string& path, const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows) {
    std::ofstream os(path);
    if (!os) throw affine::ConfigError("cannot write CSV to " + path);
    affine::write_csv(os, header, rows);
}

json jvec(const VecD& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

json jmat(const affine::MatD& m) {
    json a = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(jvec(m.row(r)));
    return a;
}

json base_report(const char* command, const ModelConfig& cfg) {
    json r;
    r["command"] = command;
    r["config_hash"] = affine::config_hash(cfg);
    r["tool_version"] = affine::tool_version;
    r["time_unit"] = cfg.model.time_unit;
    if (!cfg.preset.empty()) r["preset"] = cfg.preset;
    return r;
}

void emit(const json& report) { std::cout << report.dump(2) << "\n"; }

int report_divergent(const affine::FixedPointOutcome& outcome) {
    std::cerr << "error: no fixed point: long forward measure does not exist for "
                 "this model ("
              << (outcome.reason == affine::DivergenceReason::blow_up ? "blow-up"
                                                                      : "no settling")
              << (outcome.note.empty() ? "" : "; " + outcome.note) << ")\n";
    return 3;
}

json diagnostics_json(const affine::FixedPointDiagnostics& d) {
    return json{{"horizon", d.horizon},
                {"terminal_psi_dot", d.terminal_psi_dot},
                {"qve_residual", d.qve_residual},
                {"ode_gap", d.ode_gap},
                {"newton_iters", d.newton_iters}};
}

int cmd_check(const CliArgs& args) {
    const ModelConfig cfg = load_config(args);
    const auto report = affine::validate_admissibility(cfg.model);
    json r = base_report("check", cfg);
    r["passed"] = report.passed;
    json violations = json::array();
    for (const auto& v : report.violations)
        violations.push_back({{"condition", v.condition}, {"message", v.message}});
    r["violations"] = violations;
    emit(r);
    return report.passed ? 0 : 2;
}

int cmd_factorize(const CliArgs& args) {
    const ModelConfig cfg = load_config(args);
    require_admissible(cfg.model);

    const auto rnf = affine::risk_neutral_factorize(cfg.model, cfg.pk);
    affine::FixedPointOpts opts;
    opts.integrate.abs_tol = args.tol_abs;
    opts.integrate.rel_tol = args.tol_rel;
    const auto outcome = affine::find_fixed_point(cfg.model, cfg.pk, opts);
    if (!outcome.converged) return report_divergent(outcome);
    const auto& ltf = *outcome.ltf;

    json r = base_report("factorize", cfg);
    r["risk_neutral"] = json{{"g", rnf.g},
                             {"h", jvec(rnf.h)},
                             {"mpr_loading", jvec(rnf.mpr_loading)},
                             {"drift_b", jvec(rnf.q_model.b)},
                             {"drift_B", jmat(rnf.q_model.B)}};
    r["long_term"] = json{{"v", jvec(ltf.v)},
                          {"lambda", ltf.lambda},
                          {"eigen_coeffs", jvec(ltf.eigen_coeffs)},
                          {"longbond_vol_loading", jvec(ltf.longbond_vol_loading)},
                          {"mpr_inf_loading", jvec(ltf.mpr_inf_loading)},
                          {"drift_b", jvec(ltf.l_model.b)},
                          {"drift_B", jmat(ltf.l_model.B)}};
    r["diagnostics"] = diagnostics_json(outcome.diagnostics);

    // Transform trajectories at the integrator's own nodes, for plotting.
    const double span = args.horizon > 0.0 ? args.horizon : outcome.diagnostics.horizon;
    const auto sol = affine::integrate(cfg.model, cfg.pk, span, opts.integrate);
    std::vector<std::string> header{"t", "phi"};
    for (Eigen::Index j = 0; j < cfg.model.dim(); ++j)
        header.push_back("psi_" + std::to_string(j + 1));
    std::vector<std::vector<std::string>> rows;
    rows.reserve(sol.grid.size());
    for (std::size_t k = 0; k < sol.grid.size(); ++k) {
        std::vector<std::string> row{affine::csv_number(sol.grid[k]),
                                     affine::csv_number(sol.phi(static_cast<Eigen::Index>(k)))};
        for (Eigen::Index j = 0; j < cfg.model.dim(); ++j)
            row.push_back(affine::csv_number(sol.psi(j, static_cast<Eigen::Index>(k))));
        rows.push_back(std::move(row));
    }
    const std::string out_path = resolve_out(args.out, "factorize");
    write_csv_file(out_path, header, rows);
    r["csv"] = out_path;
    r["csv_rows"] = rows.size();
    emit(r);
    return 0;
}

int cmd_curve(const CliArgs& args) {
    const ModelConfig cfg = load_config(args);
    require_admissible(cfg.model);
    if (!(args.horizon > 0.0)) throw affine::ConfigError("--horizon must be positive");

    const VecD x = resolve_state(cfg);
    affine::IntegrateOptions iopts;
    iopts.abs_tol = args.tol_abs;
    iopts.rel_tol = args.tol_rel;
    const auto sol = affine::integrate(cfg.model, cfg.pk, args.horizon, iopts);

    const int n_points = 120;
    const double lo = std::min(1e-4, args.horizon / 2.0);
    std::vector<double> maturities(n_points);
    for (int i = 0; i < n_points; ++i) {
        const double w = static_cast<double>(i) / (n_points - 1);
        maturities[static_cast<std::size_t>(i)] =
            std::exp(std::log(lo) + w * (std::log(args.horizon) - std::log(lo)));
    }
    maturities.back() = args.horizon;
    const auto points = affine::yield_curve(sol, cfg.pk, x, maturities);

    std::vector<std::vector<std::string>> rows;
    rows.reserve(points.size() + 1);
    for (const auto& p : points)
        rows.push_back({affine::csv_number(p.maturity), affine::csv_number(p.price),
                        affine::csv_number(p.yield)});

    json r = base_report("curve", cfg);
    r["state"] = jvec(x);
    const auto outcome = affine::find_fixed_point(cfg.model, cfg.pk);
    if (outcome.converged) {
        rows.push_back({"inf", "", affine::csv_number(outcome.ltf->lambda)});
        r["lambda"] = outcome.ltf->lambda;
    } else {
        r["lambda"] = nullptr;
    }
    const std::string out_path = resolve_out(args.out, "curve");
    write_csv_file(out_path, {"maturity", "price", "yield"}, rows);
    r["csv"] = out_path;
    r["csv_rows"] = rows.size();
    emit(r);
    return 0;
}

int cmd_simulate(const CliArgs& args) {
    const ModelConfig cfg = load_config(args);
    require_admissible(cfg.model);

    affine::SimConfig sc;
    sc.n_paths = args.paths;
    sc.horizon = args.horizon;
    sc.dt = args.dt;
    sc.seed = args.seed;
    sc.store_increments = false;
    const double bytes = static_cast<double>(sc.n_paths) *
                         (sc.horizon / sc.dt + 1.0) *
                         static_cast<double>(cfg.model.dim()) * 8.0;
    if (bytes > 4e9)
        throw affine::ConfigError(
            "path storage would exceed 4 GB; reduce --paths or increase --dt");

    const auto rnf = affine::risk_neutral_factorize(cfg.model, cfg.pk);
    std::optional<affine::LongTermFactorization> ltf;
    if (!args.m0_only) {
        const auto outcome = affine::find_fixed_point(cfg.model, cfg.pk);
        if (!outcome.converged) return report_divergent(outcome);
        ltf = *outcome.ltf;
    }

    const VecD x0 = cfg.x0.size() > 0 ? cfg.x0 : resolve_state(cfg);
    const auto paths = affine::simulate(cfg.model, x0, sc);
    const auto series = affine::kernel_processes(paths, cfg.pk, &rnf,
                                                 ltf ? &*ltf : nullptr, {sc.horizon});

    json r = base_report("simulate", cfg);
    r["seed"] = args.seed;
    r["n_paths"] = sc.n_paths;
    r["dt"] = sc.dt;
    r["horizon"] = sc.horizon;
    r["x0"] = jvec(x0);
    r["measure"] = affine::measure_name(paths.measure);

    std::vector<std::vector<std::string>> rows;
    json estimates = json::array();
    bool all_pass = true;
    bool stderr_defined = true;
    const auto add = [&](const char* name, const affine::MatD& m) {
        const auto est = affine::martingale_test(m, series.times, sc.horizon);
        // A degenerate series that is identically one has zero deviation and
        // zero standard error; score it zero rather than 0/0.
        const double dev = est.mean - 1.0;
        const double z = dev == 0.0 ? 0.0 : dev / est.std_error;
        const bool pass = std::isfinite(z) && std::abs(z) < 3.0;
        if (!std::isfinite(est.std_error)) stderr_defined = false;
        all_pass = all_pass && pass;
        estimates.push_back({{"series", name},
                             {"t", sc.horizon},
                             {"mean", est.mean},
                             {"std_error", est.std_error},
                             {"z", z},
                             {"pass", pass}});
        rows.push_back({name, affine::csv_number(sc.horizon),
                        affine::csv_number(est.mean), affine::csv_number(est.std_error),
                        affine::csv_number(z), pass ? "1" : "0"});
    };
    add("M0", series.M0);
    if (ltf) add("M_inf", series.M_inf);
    r["estimates"] = estimates;
    r["stderr_defined"] = stderr_defined;
    r["all_pass"] = stderr_defined && all_pass;

    const std::string out_path = resolve_out(args.out, "simulate");
    write_csv_file(out_path, {"series", "t", "mean", "std_error", "z", "pass"}, rows);
    r["csv"] = out_path;
    emit(r);
    if (!stderr_defined) return 4;
    return all_pass ? 0 : 1;
}

int cmd_convergence(const CliArgs& args) {
    const ModelConfig cfg = load_config(args);
    require_admissible(cfg.model);
    if (!(args.t > 0.0)) throw affine::ConfigError("--t must be positive");
    if (args.horizon < args.t)
        throw affine::ConfigError("--horizon must be at least --t");

    const auto outcome = affine::find_fixed_point(cfg.model, cfg.pk);
    if (!outcome.converged) return report_divergent(outcome);
    const auto& ltf = *outcome.ltf;

    const VecD x = resolve_state(cfg);
    affine::IntegrateOptions iopts;
    iopts.abs_tol = args.tol_abs;
    iopts.rel_tol = args.tol_rel;
    const auto sol = affine::integrate(cfg.model, cfg.pk, args.t + args.horizon, iopts);

    // X_t and X_0 both sit at the evaluation state, so the long bond value is
    // e^{lambda t} and the T-roll-over value is P(T, x)/P(t+T, x).
    const double b_inf = std::exp(ltf.lambda * args.t);
    std::vector<std::vector<std::string>> rows;
    double last_ratio = std::numeric_limits<double>::quiet_NaN();
    for (double T = args.t; T <= args.horizon * (1.0 + 1e-12); T += args.t) {
        const double roll = affine::bond_price(sol, cfg.pk, T, x) /
                            affine::bond_price(sol, cfg.pk, args.t + T, x);
        last_ratio = roll / b_inf;
        rows.push_back({affine::csv_number(T), affine::csv_number(roll),
                        affine::csv_number(b_inf), affine::csv_number(last_ratio)});
    }

    json r = base_report("convergence", cfg);
    r["t"] = args.t;
    r["state"] = jvec(x);
    r["lambda"] = ltf.lambda;
    r["longbond_value"] = b_inf;
    r["final_ratio"] = last_ratio;
    const std::string out_path = resolve_out(args.out, "convergence");
    write_csv_file(out_path, {"T", "roll_value", "longbond_value", "ratio"}, rows);
    r["csv"] = out_path;
    r["csv_rows"] = rows.size();
    emit(r);
    return 0;
}

void add_config_flags(CLI::App* cmd, CliArgs& args) {
    cmd->add_option("--config", args.config_path, "Path to a model config document");
    cmd->add_option("--preset", args.preset,
                    "Named preset: cir, vasicek, breeden, bhs, gaussian-nonreverting");
}

void add_tol_flags(CLI::App* cmd, CliArgs& args) {
    cmd->add_option("--tol-abs", args.tol_abs, "ODE absolute tolerance");
    cmd->add_option("--tol-rel", args.tol_rel, "ODE relative tolerance");
}

}  // namespace

int main(int argc, char** argv) {
    CliArgs args;
    CLI::App app{"Risk-neutral and long-term factorizations of affine pricing kernels"};
    app.require_subcommand(1);

    auto* check = app.add_subcommand("check", "Validate a model configuration");
    add_config_flags(check, args);

    auto* factorize =
        app.add_subcommand("factorize", "Compute both factorizations and emit "
                                        "transform trajectories");
    add_config_flags(factorize, args);
    add_tol_flags(factorize, args);
    factorize->add_option("--out", args.out, "CSV output path");
    factorize->add_option("--horizon", args.horizon,
                          "Trajectory span (default: settling horizon)");

    auto* curve = app.add_subcommand("curve", "Zero-coupon yield curve");
    add_config_flags(curve, args);
    add_tol_flags(curve, args);
    curve->add_option("--out", args.out, "CSV output path");
    double curve_horizon = 100.0;
    curve->add_option("--horizon", curve_horizon, "Longest maturity");

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo martingale tests");
    add_config_flags(simulate, args);
    simulate->add_option("--out", args.out, "CSV output path");
    simulate->add_option("--seed", args.seed, "RNG seed");
    simulate->add_option("--paths", args.paths, "Number of paths");
    simulate->add_option("--dt", args.dt, "Euler step");
    double sim_horizon = 1.0;
    simulate->add_option("--horizon", sim_horizon, "Test horizon");
    simulate->add_flag("--m0-only", args.m0_only,
                       "Skip the long-term factorization and test only M0");

    auto* convergence =
        app.add_subcommand("convergence", "Roll-over value against the long bond");
    add_config_flags(convergence, args);
    add_tol_flags(convergence, args);
    convergence->add_option("--out", args.out, "CSV output path");
    convergence->add_option("--t", args.t, "Evaluation time");
    double conv_horizon = 600.0;
    convergence->add_option("--horizon", conv_horizon, "Largest compounding period");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (check->parsed()) return cmd_check(args);
        if (factorize->parsed()) return cmd_factorize(args);
        if (curve->parsed()) {
            args.horizon = curve_horizon;
            return cmd_curve(args);
        }
        if (simulate->parsed()) {
            args.horizon = sim_horizon;
            return cmd_simulate(args);
        }
        if (convergence->parsed()) {
            args.horizon = conv_horizon;
            return cmd_convergence(args);
        }
        std::cerr << "error: no command\n";
        return 2;
    } catch (const affine::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const affine::DivergentError& e) {
        std::cerr << "error: no fixed point: long forward measure does not exist "
                     "for this model ("
                  << e.what() << ")\n";
        return 3;
    } catch (const affine::FiniteExplosion& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const affine::Unsupported& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const affine::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
