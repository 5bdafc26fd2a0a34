#include "refctl/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "refctl/errors.hpp"
#include "refctl/json_writer.hpp"

namespace refctl {

namespace {

using nlohmann::json;

void allow_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
    const std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!ok.count(it.key())) throw InputError("unknown field " + where + "." + it.key());
}

const json* child(const json& obj, const char* k, const std::string& where) {
    if (!obj.contains(k)) return nullptr;
    const json& c = obj.at(k);
    if (!c.is_object()) throw InputError(where + "." + k + " must be an object");
    return &c;
}

double get_number(const json& obj, const char* k, const std::string& where, double fallback) {
    if (!obj.contains(k)) return fallback;
    const json& v = obj.at(k);
    if (!v.is_number()) throw InputError(where + "." + k + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw InputError(where + "." + k + " must be finite");
    return d;
}

std::optional<double> get_optional(const json& obj, const char* k, const std::string& where) {
    if (!obj.contains(k) || obj.at(k).is_null()) return std::nullopt;
    return get_number(obj, k, where, 0.0);
}

std::size_t get_count(const json& obj, const char* k, const std::string& where, std::size_t fallback) {
    if (!obj.contains(k)) return fallback;
    const json& v = obj.at(k);
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw InputError(where + "." + k + " must be a nonnegative integer");
    return v.get<std::size_t>();
}

std::string get_string(const json& obj, const char* k, const std::string& where, const std::string& fallback) {
    if (!obj.contains(k)) return fallback;
    const json& v = obj.at(k);
    if (!v.is_string()) throw InputError(where + "." + k + " must be a string");
    return v.get<std::string>();
}

bool get_bool(const json& obj, const char* k, const std::string& where, bool fallback) {
    if (!obj.contains(k)) return fallback;
    const json& v = obj.at(k);
    if (!v.is_boolean()) throw InputError(where + "." + k + " must be true or false");
    return v.get<bool>();
}

std::vector<double> get_numbers(const json& obj, const char* k, const std::string& where,
                                const std::vector<double>& fallback) {
    if (!obj.contains(k)) return fallback;
    const json& v = obj.at(k);
    if (!v.is_array()) throw InputError(where + "." + k + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number() || !std::isfinite(e.get<double>()))
            throw InputError(where + "." + k + " must contain finite numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

void require_positive(double v, const std::string& field) {
    if (!(v > 0.0)) throw InputError(field + " must be positive");
}

SmoothFunction eta_function(const RewardDecl& d) {
    if (d.eta_kind == "constant") return SmoothFunction::constant(d.eta_value);
    if (d.eta_kind == "linear") return SmoothFunction::affine(d.eta_intercept, d.eta_slope);
    if (d.eta_kind == "exp-decay") {
        std::ostringstream os;
        os.precision(17);
        os << d.eta_scale << " * exp(-(" << d.eta_rate << ") * x)";
        return SmoothFunction::parse(os.str());
    }
    if (d.eta_kind == "expression") return SmoothFunction::parse(d.eta_expression);
    throw InputError("reward.eta.kind must be one of constant, linear, exp-decay, expression");
}

}  // namespace

ProblemConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InputError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw InputError("config must be a JSON object");
    allow_keys(doc, "config", {"schema_version", "name", "diffusion", "reward", "grid", "solver", "sim", "sweep",
                               "output"});
    ProblemConfig cfg;
    if (!doc.contains("schema_version")) throw InputError("schema_version is required");
    if (!doc.at("schema_version").is_number_integer()) throw InputError("schema_version must be an integer");
    cfg.schema_version = doc.at("schema_version").get<int>();
    if (cfg.schema_version != kConfigSchemaVersion)
        throw InputError("schema_version " + std::to_string(cfg.schema_version) + " is not supported (expected " +
                         std::to_string(kConfigSchemaVersion) + ")");
    cfg.name = get_string(doc, "name", "config", "");

    const json* d = child(doc, "diffusion", "config");
    if (!d) throw InputError("diffusion is required");
    allow_keys(*d, "diffusion", {"kind", "mu", "theta", "sigma", "drift", "volatility"});
    auto& dd = cfg.diffusion;
    dd.kind = get_string(*d, "kind", "diffusion", "ou");
    if (dd.kind == "ou" || dd.kind == "brownian") {
        dd.mu = get_number(*d, "mu", "diffusion", dd.mu);
        dd.sigma = get_number(*d, "sigma", "diffusion", dd.sigma);
        require_positive(dd.sigma, "diffusion.sigma");
        if (dd.kind == "ou") {
            dd.theta = get_number(*d, "theta", "diffusion", dd.theta);
            require_positive(dd.theta, "diffusion.theta");
        } else if (d->contains("theta")) {
            throw InputError("diffusion.theta is only valid for kind ou");
        }
    } else if (dd.kind == "expression") {
        dd.drift = get_string(*d, "drift", "diffusion", "");
        dd.volatility = get_string(*d, "volatility", "diffusion", "");
        if (dd.drift.empty() || dd.volatility.empty())
            throw InputError("diffusion.drift and diffusion.volatility are required for kind expression");
    } else {
        throw InputError("diffusion.kind must be one of ou, brownian, expression");
    }

    const json* rw = child(doc, "reward", "config");
    if (!rw) throw InputError("reward is required");
    allow_keys(*rw, "reward", {"r", "kappa", "eta", "running"});
    auto& rd = cfg.reward;
    rd.r = get_number(*rw, "r", "reward", rd.r);
    require_positive(rd.r, "reward.r");
    rd.kappa = get_optional(*rw, "kappa", "reward");
    if (const json* run = child(*rw, "running", "reward")) {
        allow_keys(*run, "reward.running", {"pi", "alpha"});
        rd.running_pi = get_string(*run, "pi", "reward.running", "");
        if (rd.running_pi->empty()) throw InputError("reward.running.pi is required");
        rd.running_alpha = get_number(*run, "alpha", "reward.running", 0.0);
        if (rd.running_alpha < 0.0) throw InputError("reward.running.alpha must be >= 0");
        if (rw->contains("eta") || rd.kappa)
            throw InputError("reward.running replaces reward.eta and reward.kappa; give one or the other");
    } else {
        const json* eta = child(*rw, "eta", "reward");
        if (!eta) throw InputError("reward.eta is required");
        allow_keys(*eta, "reward.eta", {"kind", "value", "intercept", "slope", "scale", "rate", "expression"});
        rd.eta_kind = get_string(*eta, "kind", "reward.eta", "constant");
        rd.eta_value = get_number(*eta, "value", "reward.eta", rd.eta_value);
        rd.eta_intercept = get_number(*eta, "intercept", "reward.eta", rd.eta_intercept);
        rd.eta_slope = get_number(*eta, "slope", "reward.eta", rd.eta_slope);
        rd.eta_scale = get_number(*eta, "scale", "reward.eta", rd.eta_scale);
        rd.eta_rate = get_number(*eta, "rate", "reward.eta", rd.eta_rate);
        rd.eta_expression = get_string(*eta, "expression", "reward.eta", "");
        if (!rd.kappa) throw InputError("reward.kappa is required");
        const SmoothFunction f = eta_function(rd);
        const double eta0 = f(0.0);
        if (*rd.kappa < eta0)
            throw ModelError("reward.kappa must be >= eta(0) = " + JsonWriter::format_double(eta0) +
                             "; the value function may be infinite otherwise");
    }

    if (const json* g = child(doc, "grid", "config")) {
        allow_keys(*g, "grid", {"lo", "hi", "cells"});
        cfg.grid.lo = get_optional(*g, "lo", "grid");
        cfg.grid.hi = get_optional(*g, "hi", "grid");
        cfg.grid.cells = get_count(*g, "cells", "grid", cfg.grid.cells);
        if (cfg.grid.cells < 16) throw InputError("grid.cells must be at least 16");
        if (cfg.grid.lo && !(*cfg.grid.lo < 0.0)) throw InputError("grid.lo must be negative");
        if (cfg.grid.hi && !(*cfg.grid.hi > 0.0)) throw InputError("grid.hi must be positive");
    }

    if (const json* s = child(doc, "solver", "config")) {
        allow_keys(*s, "solver", {"route", "kappa_mode"});
        cfg.solver.route = get_string(*s, "route", "solver", cfg.solver.route);
        if (cfg.solver.route != "generic" && cfg.solver.route != "cylinder")
            throw InputError("solver.route must be generic or cylinder");
        if (cfg.solver.route == "cylinder" && cfg.diffusion.kind != "ou")
            throw InputError("solver.route cylinder requires diffusion.kind ou");
        const std::string mode = get_string(*s, "kappa_mode", "solver", "auto");
        if (mode == "auto") cfg.solver.kappa_mode = KappaMode::Auto;
        else if (mode == "strict") cfg.solver.kappa_mode = KappaMode::Strict;
        else if (mode == "equal") cfg.solver.kappa_mode = KappaMode::Equal;
        else throw InputError("solver.kappa_mode must be auto, strict or equal");
    }

    if (const json* s = child(doc, "sim", "config")) {
        allow_keys(*s, "sim", {"dt", "horizon_T", "n_paths", "seed", "antithetic", "barrier_correction",
                               "richardson", "tail_rel_tol", "max_failure_rate", "threads", "x", "path_dump",
                               "path_dump_rows"});
        auto& sc = cfg.sim.cfg;
        sc.dt = get_number(*s, "dt", "sim", sc.dt);
        require_positive(sc.dt, "sim.dt");
        sc.horizon_T = get_number(*s, "horizon_T", "sim", sc.horizon_T);
        if (sc.horizon_T < 0.0) throw InputError("sim.horizon_T must be >= 0");
        sc.n_paths = get_count(*s, "n_paths", "sim", sc.n_paths);
        if (sc.n_paths == 0) throw InputError("sim.n_paths must be positive");
        if (s->contains("seed")) {
            const json& v = s->at("seed");
            if (!v.is_number_unsigned()) throw InputError("sim.seed must be a nonnegative integer");
            sc.rng_seed = v.get<std::uint64_t>();
        }
        sc.antithetic = get_bool(*s, "antithetic", "sim", sc.antithetic);
        sc.barrier_correction = get_bool(*s, "barrier_correction", "sim", sc.barrier_correction);
        sc.richardson = get_bool(*s, "richardson", "sim", sc.richardson);
        sc.tail_rel_tol = get_number(*s, "tail_rel_tol", "sim", sc.tail_rel_tol);
        require_positive(sc.tail_rel_tol, "sim.tail_rel_tol");
        sc.max_failure_rate = get_number(*s, "max_failure_rate", "sim", sc.max_failure_rate);
        if (sc.max_failure_rate < 0.0) throw InputError("sim.max_failure_rate must be >= 0");
        sc.threads = static_cast<unsigned>(get_count(*s, "threads", "sim", sc.threads));
        cfg.sim.x = get_numbers(*s, "x", "sim", cfg.sim.x);
        if (cfg.sim.x.empty()) throw InputError("sim.x must not be empty");
        for (double x : cfg.sim.x)
            if (x < 0.0) throw InputError("sim.x entries must be >= 0");
        cfg.sim.path_dump = get_count(*s, "path_dump", "sim", cfg.sim.path_dump);
        cfg.sim.path_dump_rows = get_count(*s, "path_dump_rows", "sim", cfg.sim.path_dump_rows);
    }

    if (const json* s = child(doc, "sweep", "config")) {
        allow_keys(*s, "sweep", {"parameter", "values", "value_points"});
        cfg.sweep.parameter = get_string(*s, "parameter", "sweep", "");
        cfg.sweep.values = get_numbers(*s, "values", "sweep", {});
        cfg.sweep.value_points = get_count(*s, "value_points", "sweep", cfg.sweep.value_points);
    }

    if (const json* o = child(doc, "output", "config")) {
        allow_keys(*o, "output", {"dir", "value_points", "value_x_max"});
        cfg.output.dir = get_string(*o, "dir", "output", cfg.output.dir);
        cfg.output.value_points = get_count(*o, "value_points", "output", cfg.output.value_points);
        if (cfg.output.value_points < 2) throw InputError("output.value_points must be at least 2");
        cfg.output.value_x_max = get_number(*o, "value_x_max", "output", 0.0);
        if (cfg.output.value_x_max < 0.0) throw InputError("output.value_x_max must be >= 0");
    }

    // Catch expression errors at load time rather than mid-solve.
    (void)cfg.build_diffusion();
    return cfg;
}

ProblemConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

DiffusionSpec ProblemConfig::build_diffusion() const {
    const auto& d = diffusion;
    if (d.kind == "ou") return DiffusionSpec::ornstein_uhlenbeck(d.mu, d.theta, d.sigma);
    if (d.kind == "brownian") return DiffusionSpec::brownian(d.mu, d.sigma);
    return DiffusionSpec::from_expressions(d.drift, d.volatility);
}

Grid ProblemConfig::build_grid() const {
    const DiffusionSpec spec = build_diffusion();
    auto [lo, hi] = default_domain(spec, reward.r);
    if (grid.lo) lo = *grid.lo;
    if (grid.hi) hi = *grid.hi;
    if (!(lo < 0.0 && hi > 0.0)) throw InputError("grid must satisfy lo < 0 < hi");
    return Grid::uniform(lo, hi, grid.cells);
}

RewardSpec ProblemConfig::build_reward(const FundamentalBasis& basis) const {
    if (reward.running_pi)
        return from_running_reward(basis, SmoothFunction::parse(*reward.running_pi), reward.running_alpha);
    return RewardSpec::make(eta_function(reward), *reward.kappa, reward.r);
}

std::optional<OUParams> ProblemConfig::ou_params() const {
    if (diffusion.kind != "ou" || reward.running_pi || reward.eta_kind != "constant") return std::nullopt;
    OUParams p;
    p.mu = diffusion.mu;
    p.theta = diffusion.theta;
    p.sigma = diffusion.sigma;
    p.r = reward.r;
    p.kappa = *reward.kappa;
    p.eta0 = reward.eta_value;
    return p;
}

}  // namespace refctl
