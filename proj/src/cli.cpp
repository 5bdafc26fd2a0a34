#include "refctl/cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "refctl/errors.hpp"
#include "refctl/json_writer.hpp"

namespace refctl {

namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& file, const std::string& text) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw InputError("cannot write " + file.string());
    os << text;
    if (!os) throw InputError("failed writing " + file.string());
}

fs::path prepare_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory " + dir + ": " + ec.message());
    return fs::path(dir);
}

std::string fmt(double v) { return JsonWriter::format_double(v); }

void write_hjb(JsonWriter& j, const HjbReport& h) {
    j.key("hjb").begin_object();
    j.field("passed", h.passed);
    j.field("tol", h.tol);
    j.field("max_pde_violation", h.max_pde_violation);
    j.field("max_gradient_violation", h.max_gradient_violation);
    j.field("max_hjb_residual", h.max_hjb_residual);
    j.field("neumann_residual", h.neumann_residual);
    j.field("neumann_tol", h.neumann_tol);
    j.field("smooth_fit_first", h.smooth_fit_first);
    j.field("smooth_fit_second", h.smooth_fit_second);
    j.field("vb_identity", h.vb_identity);
    auto intervals = [&](const char* name, const std::vector<Interval>& v) {
        j.key(name).begin_array();
        for (const auto& iv : v) j.begin_array().value(iv.lo).value(iv.hi).end_array();
        j.end_array();
    };
    intervals("pde_active", h.pde_active);
    intervals("gradient_active", h.gradient_active);
    j.end_object();
}

void write_estimate(JsonWriter& j, const SimEstimate& e) {
    j.field("mean", e.mean);
    j.field("std_error", e.std_error);
    j.field("n_paths", static_cast<std::uint64_t>(e.n_paths));
    j.field("failed_paths", static_cast<std::uint64_t>(e.failed_paths));
    j.field("tail_bound", e.tail_bound);
    j.field("horizon_T", e.horizon_T);
    j.key("integrability").begin_object();
    j.field("discounted_D", e.mean_discounted_D);
    j.field("discounted_L", e.mean_discounted_L);
    j.field("discounted_D_first_half", e.mean_discounted_D_half);
    j.field("discounted_L_first_half", e.mean_discounted_L_half);
    j.end_object();
}

double value_x_max(const ProblemConfig& cfg, const ControlSolution& sol) {
    const double x_hi = sol.basis().grid().x_hi();
    double x = cfg.output.value_x_max;
    if (!(x > 0.0)) x = sol.regime == RegimeKind::ReflectAtBand ? std::max(2.0 * sol.b_star, 1.0) : 1.0;
    return std::min(x, x_hi);
}

}  // namespace

SolvedProblem solve_problem(const ProblemConfig& cfg) {
    SolvedProblem out;
    out.spec = cfg.build_diffusion();
    const Grid grid = cfg.build_grid();
    const ValidationReport vr = validate_assumptions(out.spec, cfg.reward.r, grid);
    if (!vr.passed()) {
        std::string msg = "diffusion violates the standing assumptions";
        for (const auto& m : vr.messages) msg += "; " + m;
        throw InputError(msg);
    }
    if (cfg.solver.route == "cylinder") {
        auto p = cfg.ou_params();
        if (!p) throw InputError("solver.route cylinder requires an OU diffusion with constant eta");
        out.basis = std::make_shared<FundamentalBasis>(ou_hat_basis(*p, grid));
    } else {
        out.basis = std::make_shared<FundamentalBasis>(compute_basis(out.spec, cfg.reward.r, grid));
    }
    out.reward = cfg.build_reward(*out.basis);
    out.label = classify(out.spec, out.reward, grid);
    out.solution = std::make_shared<ControlSolution>(build_value(*out.basis, out.reward, out.label,
                                                                 cfg.solver.kappa_mode));
    return out;
}

int cmd_solve(const ProblemConfig& cfg, std::ostream& out, std::ostream& err) {
    const SolvedProblem sp = solve_problem(cfg);
    const ControlSolution& sol = *sp.solution;
    const HjbReport hjb = verify_hjb(sol, sp.basis->grid());
    const BasisDiagnostics diag = sp.basis->diagnostics();

    JsonWriter j;
    j.begin_object();
    j.field("schema_version", kConfigSchemaVersion);
    j.field("command", "solve");
    j.field("name", cfg.name);
    j.field("case", sp.label.name());
    if (sp.label.kind == CaseKind::B) j.field("x_bar", sp.label.x_bar);
    j.field("regime", regime_name(sol.regime));
    if (sol.regime == RegimeKind::ReflectAtBand) {
        j.field("b_star", sol.b_star);
    } else {
        j.key("b_star").null();
    }
    j.field("alpha", sol.alpha);
    j.field("beta", sol.beta);
    j.field("v_at_bstar", sol.v_at_bstar);
    j.field("v_at_0", sol.value(0.0));
    j.field("kappa", sp.reward.kappa);
    j.field("eta0", sp.reward.eta0());
    j.field("r", sp.reward.r);
    j.field("route", cfg.solver.route);
    j.key("basis").begin_object();
    j.field("source", sp.basis->source());
    j.field("x_lo", sp.basis->grid().x_lo());
    j.field("x_hi", sp.basis->grid().x_hi());
    j.field("nodes", static_cast<std::uint64_t>(sp.basis->grid().size()));
    j.field("W", sp.basis->W());
    j.field("w", sp.basis->w());
    j.field("wronskian_rel_std", diag.wronskian_rel_std);
    j.field("hat_wronskian_rel_std", diag.hat_wronskian_rel_std);
    j.field("ode_residual_max", diag.ode_residual_max);
    j.field("hat_ode_residual_max", diag.hat_ode_residual_max);
    j.field("monotone", diag.monotone());
    j.end_object();
    write_hjb(j, hjb);
    if (sol.regime == RegimeKind::ReflectAtBand) {
        try {
            const TangencyReport t = transformed_scale_check(sol);
            j.key("tangency").begin_object();
            j.field("passed", t.passed);
            j.field("tangency_residual", t.tangency_residual);
            j.field("min_dominance_gap", t.min_dominance_gap);
            j.field("convexity_samples", static_cast<std::uint64_t>(t.convexity_samples));
            j.field("convexity_mismatches", static_cast<std::uint64_t>(t.convexity_mismatches));
            j.end_object();
        } catch (const NumericalError& e) {
            j.key("tangency").begin_object().field("error", std::string(e.what())).end_object();
        }
    }
    j.key("notes").begin_array();
    for (const auto& n : sol.notes) j.value(n);
    j.end_array();
    j.end_object();

    const fs::path dir = prepare_dir(cfg.output.dir);
    write_file(dir / "solution.json", j.str());

    std::ostringstream csv;
    csv << "x,v,v_prime,v_second,eta,pde_residual,gradient_slack\n";
    const double x_max = value_x_max(cfg, sol);
    const std::size_t n = cfg.output.value_points;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = i + 1 == n ? x_max : x_max * static_cast<double>(i) / static_cast<double>(n - 1);
        const double v = sol.value(x), v1 = sol.d1(x), v2 = sol.d2(x);
        const double pde = generator_X(sp.spec, v, v1, v2, x) - sp.reward.r * v;
        csv << fmt(x) << ',' << fmt(v) << ',' << fmt(v1) << ',' << fmt(v2) << ',' << fmt(sp.reward.eta(x)) << ','
            << fmt(pde) << ',' << fmt(v1 - sp.reward.eta(x)) << '\n';
    }
    write_file(dir / "value_function.csv", csv.str());
    out << j.str();
    if (!hjb.passed) err << "HJB verification failed\n";
    return hjb.passed ? kExitOk : kExitNumerical;
}

int cmd_simulate(const ProblemConfig& cfg, std::optional<double> policy_b, std::ostream& out, std::ostream& err) {
    const SolvedProblem sp = solve_problem(cfg);
    const ControlSolution& sol = *sp.solution;
    const SimConfig& sc = cfg.sim.cfg;

    if (policy_b && !(*policy_b > 0.0 && std::isfinite(*policy_b))) throw InputError("--policy-b must be positive");
    const bool no_action = sol.regime == RegimeKind::NoAction && !policy_b;
    double b = 0.0;
    if (!no_action) {
        if (policy_b) {
            b = *policy_b;
        } else if (sol.regime == RegimeKind::ReflectAtBand) {
            b = sol.b_star;
        } else {
            throw InputError("regime " + regime_name(sol.regime) + " has no optimal band; pass --policy-b");
        }
    }
    const bool optimal_policy = no_action || (sol.regime == RegimeKind::ReflectAtBand && b == sol.b_star);

    std::vector<BandQuery> queries;
    for (double x : cfg.sim.x) queries.push_back({no_action ? std::numeric_limits<double>::infinity() : b, x});
    const auto estimates = estimate_payoff_batch(sp.spec, sp.reward, queries, sc);

    JsonWriter j;
    j.begin_object();
    j.field("schema_version", kConfigSchemaVersion);
    j.field("command", "simulate");
    j.field("name", cfg.name);
    j.field("regime", regime_name(sol.regime));
    j.field("estimator", no_action ? "case_c_value" : "band_payoff");
    if (no_action) {
        j.key("policy_b").null();
    } else {
        j.field("policy_b", b);
    }
    j.field("policy_is_optimal", optimal_policy);
    j.field("seed", static_cast<std::uint64_t>(sc.rng_seed));
    j.field("dt", sc.dt);
    j.field("n_paths_requested", static_cast<std::uint64_t>(sc.n_paths));
    j.field("antithetic", sc.antithetic);
    j.field("barrier_correction", sc.barrier_correction);
    j.field("richardson", sc.richardson);
    j.field("tail_rel_tol", sc.tail_rel_tol);
    bool consistent = true;
    j.key("estimates").begin_array();
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const double x = cfg.sim.x[i];
        const SimEstimate& e = estimates[i];
        const double V = sol.value(x);
        j.begin_object();
        j.field("x", x);
        write_estimate(j, e);
        j.field("analytic_value", V);
        if (optimal_policy) {
            const double z = e.std_error > 0.0 ? (e.mean - V) / e.std_error : 0.0;
            j.field("z_score", z);
            j.field("within_3_std_errors", std::abs(e.mean - V) <= 3.0 * e.std_error);
            consistent = consistent && std::abs(e.mean - V) <= 3.0 * e.std_error;
        } else {
            j.field("below_value_plus_3_std_errors", e.mean <= V + 3.0 * e.std_error);
        }
        j.end_object();
    }
    j.end_array();
    j.end_object();

    const fs::path dir = prepare_dir(cfg.output.dir);
    write_file(dir / "simulation.json", j.str());
    if (cfg.sim.path_dump > 0 && !no_action) {
        for (std::size_t p = 0; p < cfg.sim.path_dump; ++p) {
            PathRequest req;
            req.path = p;
            req.trace_cap = cfg.sim.path_dump_rows;
            const std::size_t steps =
                static_cast<std::size_t>(std::ceil(resolved_horizon(sp.spec, sp.reward, b, sc) / sc.dt));
            req.trace_every = std::max<std::size_t>(1, steps / std::max<std::size_t>(cfg.sim.path_dump_rows, 1));
            const PathRecord rec = simulate_double_reflection(sp.spec, sp.reward, b, cfg.sim.x.front(), sc, req);
            write_path_csv(rec, (dir / ("path_" + std::to_string(p) + ".csv")).string());
        }
    }
    out << j.str();
    if (optimal_policy && !consistent) err << "warning: an estimate differs from the analytic value by more than 3 std errors\n";
    return kExitOk;
}

int cmd_sweep(const ProblemConfig& cfg, const std::string& parameter, const std::vector<double>& values,
              std::ostream& out, std::ostream& err) {
    if (values.empty()) throw InputError("sweep needs a nonempty --values list");
    const SweepParameter which = parse_sweep_parameter(parameter);
    const auto base = cfg.ou_params();
    if (!base) throw InputError("sweep requires an OU diffusion with a constant eta");
    SweepOptions opt;
    opt.value_points = cfg.sweep.value_points;
    opt.cells = cfg.grid.cells;
    opt.threads = cfg.sim.cfg.threads;
    const SweepTable table = sensitivity_sweep(*base, which, values, opt);

    std::ostringstream csv;
    const std::string pname = sweep_parameter_name(which);
    csv << pname << ",b_star,V0,V_bstar,ok,b_star_trend,v_trend,error\n";
    const SweepRow* prev = nullptr;
    for (const auto& row : table.rows) {
        std::string bt, vt;
        if (row.ok && prev && prev->ok && row.value != prev->value) {
            const double sgn = row.value > prev->value ? 1.0 : -1.0;
            const double db = sgn * (row.b_star - prev->b_star);
            bt = db > 0 ? "up" : (db < 0 ? "down" : "flat");
            bool up = true, down = true;
            for (std::size_t k = 0; k < row.v_grid.size() && k < prev->v_grid.size(); ++k) {
                const double dv = sgn * (row.v_grid[k] - prev->v_grid[k]);
                if (dv > 0) down = false;
                if (dv < 0) up = false;
            }
            vt = up && down ? "flat" : (up ? "up" : (down ? "down" : "mixed"));
        }
        std::string error = row.error;
        for (char& c : error)
            if (c == ',' || c == '\n') c = ';';
        csv << fmt(row.value) << ',' << (row.ok ? fmt(row.b_star) : "") << ',' << (row.ok ? fmt(row.v0) : "") << ','
            << (row.ok ? fmt(row.v_at_bstar) : "") << ',' << (row.ok ? "1" : "0") << ',' << bt << ',' << vt << ','
            << error << '\n';
        prev = &row;
    }

    JsonWriter j;
    j.begin_object();
    j.field("schema_version", kConfigSchemaVersion);
    j.field("command", "sweep");
    j.field("name", cfg.name);
    j.field("parameter", pname);
    j.key("rows").begin_array();
    for (const auto& row : table.rows) {
        j.begin_object();
        j.field("value", row.value);
        j.field("ok", row.ok);
        if (row.ok) {
            j.field("b_star", row.b_star);
            j.field("v0", row.v0);
            j.field("v_at_bstar", row.v_at_bstar);
        } else {
            j.field("error", row.error);
        }
        j.end_object();
    }
    j.end_array();
    j.key("verdicts").begin_array();
    for (const auto& v : table.verdicts) {
        j.begin_object();
        j.field("name", v.name);
        j.field("asserted", v.asserted);
        j.field("holds", v.holds);
        j.end_object();
    }
    j.end_array();
    j.end_object();

    const fs::path dir = prepare_dir(cfg.output.dir);
    write_file(dir / "sweep.csv", csv.str());
    write_file(dir / "sweep.json", j.str());
    out << csv.str();
    for (const auto& v : table.verdicts)
        out << v.name << ": " << (v.holds ? "pass" : "fail") << (v.asserted ? "" : " (descriptive)") << '\n';
    if (!table.all_rows_ok()) {
        err << "some sweep rows failed to solve\n";
        return kExitNumerical;
    }
    if (!table.asserted_verdicts_hold()) {
        err << "an asserted monotonicity does not hold\n";
        return kExitNumerical;
    }
    return kExitOk;
}

std::vector<double> parse_value_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        if (b == std::string::npos) throw InputError("empty entry in value list '" + text + "'");
        const auto e = item.find_last_not_of(" \t");
        item = item.substr(b, e - b + 1);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size() || !std::isfinite(v)) throw InputError("bad number '" + item + "' in value list");
        out.push_back(v);
    }
    return out;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Singular control of reflected one-dimensional diffusions"};
    app.require_subcommand(1);
    std::string config_path, out_dir, param, values_text;
    std::optional<std::uint64_t> seed;
    std::optional<double> policy_b, grid_hi;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Problem configuration (JSON)")->required();
        sub->add_option("--out", out_dir, "Output directory (overrides output.dir)");
        sub->add_option("--grid-hi", grid_hi, "Upper end of the working grid (overrides grid.hi)");
    };
    CLI::App* solve = app.add_subcommand("solve", "Solve for b* and V, verify the HJB system");
    add_common(solve);
    CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo estimate of the band policy payoff");
    add_common(simulate);
    simulate->add_option("--seed", seed, "RNG seed (overrides sim.seed)");
    simulate->add_option("--policy-b", policy_b, "Band level to simulate (default b*)");
    CLI::App* sweep = app.add_subcommand("sweep", "OU sensitivity sweep over one parameter");
    add_common(sweep);
    sweep->add_option("--param", param, "sigma, theta, kappa or eta0");
    sweep->add_option("--values", values_text, "Comma-separated parameter values");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        ProblemConfig cfg = load_config(config_path);
        if (!out_dir.empty()) cfg.output.dir = out_dir;
        if (grid_hi) {
            if (!(*grid_hi > 0.0)) throw InputError("--grid-hi must be positive");
            cfg.grid.hi = *grid_hi;
        }
        const auto t0 = std::chrono::steady_clock::now();
        int code = kExitOk;
        if (solve->parsed()) {
            code = cmd_solve(cfg, std::cout, std::cerr);
        } else if (simulate->parsed()) {
            if (seed) cfg.sim.cfg.rng_seed = *seed;
            code = cmd_simulate(cfg, policy_b, std::cout, std::cerr);
        } else {
            const std::string p = !param.empty() ? param : cfg.sweep.parameter;
            if (p.empty()) throw InputError("sweep needs --param or sweep.parameter");
            const std::vector<double> vals =
                sweep->count("--values") ? parse_value_list(values_text) : cfg.sweep.values;
            code = cmd_sweep(cfg, p, vals, std::cout, std::cerr);
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cerr << "elapsed " << secs << " s\n";
        return code;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kExitInput;
    } catch (const ModelError& e) {
        std::cerr << "model error: " << e.what() << '\n';
        return kExitInput;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
}

}  // namespace refctl
