#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "refctl/cli.hpp"
#include "refctl/config.hpp"
#include "refctl/errors.hpp"
#include "refctl/free_boundary.hpp"
#include "refctl/ou.hpp"
#include "refctl/simulator.hpp"

namespace py = pybind11;
using namespace refctl;

namespace {

py::dict estimate_dict(const SimEstimate& e) {
    py::dict d;
    d["mean"] = e.mean;
    d["std_error"] = e.std_error;
    d["n_paths"] = e.n_paths;
    d["tail_bound"] = e.tail_bound;
    d["horizon_T"] = e.horizon_T;
    d["dt"] = e.dt;
    d["seed"] = e.seed;
    d["failed_paths"] = e.failed_paths;
    d["unfinished_paths"] = e.unfinished_paths;
    return d;
}

SimConfig sim_config(const ProblemConfig& cfg, std::optional<std::size_t> n_paths, std::optional<std::uint64_t> seed,
                     std::optional<double> dt, std::optional<double> horizon_T) {
    SimConfig sc = cfg.sim.cfg;
    if (n_paths) sc.n_paths = *n_paths;
    if (seed) sc.rng_seed = *seed;
    if (dt) sc.dt = *dt;
    if (horizon_T) sc.horizon_T = *horizon_T;
    return sc;
}

/// A solved configuration: the parsed problem together with its solution.
class Problem {
public:
    explicit Problem(const std::string& json_text) : cfg_(parse_config(json_text)), solved_(solve_problem(cfg_)) {}

    const ControlSolution& solution() const { return *solved_.solution; }
    std::string case_name() const { return solved_.label.name(); }
    std::string regime() const { return regime_name(solution().regime); }
    std::optional<double> b_star() const {
        if (solution().regime != RegimeKind::ReflectAtBand) return std::nullopt;
        return solution().b_star;
    }
    double value(double x) const { return solution().value(x); }
    double derivative(double x) const { return solution().d1(x); }
    std::vector<double> values(const std::vector<double>& xs) const {
        std::vector<double> out;
        out.reserve(xs.size());
        for (double x : xs) out.push_back(solution().value(x));
        return out;
    }

    py::dict verify() const {
        const auto rep = verify_hjb(solution(), solved_.basis->grid());
        py::dict d;
        d["passed"] = rep.passed;
        d["max_pde_violation"] = rep.max_pde_violation;
        d["max_gradient_violation"] = rep.max_gradient_violation;
        d["neumann_residual"] = rep.neumann_residual;
        d["smooth_fit_first"] = rep.smooth_fit_first;
        d["smooth_fit_second"] = rep.smooth_fit_second;
        d["tolerance"] = rep.tol;
        return d;
    }

    py::dict simulate(double x, std::optional<double> b, std::optional<std::size_t> n_paths,
                      std::optional<std::uint64_t> seed, std::optional<double> dt,
                      std::optional<double> horizon_T) const {
        const SimConfig sc = sim_config(cfg_, n_paths, seed, dt, horizon_T);
        SimEstimate e;
        {
            py::gil_scoped_release release;
            if (b) {
                e = estimate_payoff(solved_.spec, solved_.reward, *b, x, sc);
            } else if (solution().regime == RegimeKind::ReflectAtBand) {
                e = estimate_payoff(solved_.spec, solved_.reward, solution().b_star, x, sc);
            } else if (solution().regime == RegimeKind::NoAction) {
                e = estimate_case_c_value(solved_.spec, solved_.reward, x, sc);
            } else {
                throw InputError("simulate: the squeeze regime has no band; pass b explicitly");
            }
        }
        return estimate_dict(e);
    }

private:
    ProblemConfig cfg_;
    SolvedProblem solved_;
};

OUParams make_ou(double mu, double theta, double sigma, double r, double kappa, double eta0) {
    OUParams p;
    p.mu = mu;
    p.theta = theta;
    p.sigma = sigma;
    p.r = r;
    p.kappa = kappa;
    p.eta0 = eta0;
    p.validate();
    return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Reflected follower control problems: free boundary, value function and Monte Carlo checks";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<InputError>(m, "InputError", base.ptr());
    py::register_exception<ModelError>(m, "ModelError", base.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

    py::class_<Problem>(m, "Problem")
        .def(py::init<const std::string&>(), py::arg("config_json"),
             "Parse a JSON configuration document and solve it.")
        .def_property_readonly("case", &Problem::case_name)
        .def_property_readonly("regime", &Problem::regime)
        .def_property_readonly("b_star", &Problem::b_star)
        .def_property_readonly("alpha", [](const Problem& p) { return p.solution().alpha; })
        .def_property_readonly("beta", [](const Problem& p) { return p.solution().beta; })
        .def("value", &Problem::value, py::arg("x"))
        .def("values", &Problem::values, py::arg("xs"))
        .def("derivative", &Problem::derivative, py::arg("x"))
        .def("verify", &Problem::verify, "Grid check of the variational inequality.")
        .def("simulate", &Problem::simulate, py::arg("x"), py::arg("b") = py::none(),
             py::arg("n_paths") = py::none(), py::arg("seed") = py::none(), py::arg("dt") = py::none(),
             py::arg("horizon_T") = py::none(),
             "Monte Carlo estimate of the payoff of the band policy at b (default: the optimal one).");

    m.def(
        "solve_ou_boundary",
        [](double mu, double theta, double sigma, double r, double kappa, double eta0) {
            return solve_ou_boundary(make_ou(mu, theta, sigma, r, kappa, eta0));
        },
        py::arg("mu") = 0.1, py::arg("theta") = 1.0, py::arg("sigma") = OUParams{}.sigma, py::arg("r") = 0.05,
        py::arg("kappa") = 1.0, py::arg("eta0") = 0.5);

    m.def(
        "ou_sweep",
        [](const std::string& parameter, const std::vector<double>& values, double mu, double theta, double sigma,
           double r, double kappa, double eta0) {
            SweepTable t;
            const OUParams p = make_ou(mu, theta, sigma, r, kappa, eta0);
            {
                py::gil_scoped_release release;
                SweepOptions opt;
                opt.threads = 0;
                t = sensitivity_sweep(p, parse_sweep_parameter(parameter), values, opt);
            }
            py::list rows;
            for (const auto& row : t.rows) {
                py::dict d;
                d["value"] = row.value;
                d["ok"] = row.ok;
                d["b_star"] = row.ok ? py::cast(row.b_star) : py::none();
                d["v0"] = row.ok ? py::cast(row.v0) : py::none();
                d["error"] = row.error;
                rows.append(d);
            }
            py::dict verdicts;
            for (const auto& v : t.verdicts) verdicts[py::str(v.name)] = v.holds;
            py::dict out;
            out["rows"] = rows;
            out["verdicts"] = verdicts;
            return out;
        },
        py::arg("parameter"), py::arg("values"), py::arg("mu") = 0.1, py::arg("theta") = 1.0,
        py::arg("sigma") = OUParams{}.sigma, py::arg("r") = 0.05, py::arg("kappa") = 1.0, py::arg("eta0") = 0.5);

    m.def("cylinder_d", &cylinder_D, py::arg("order"), py::arg("x"), "Parabolic cylinder function D_order(x), order < 0.");

    m.def(
        "run_cli",
        [](std::vector<std::string> args) {
            args.insert(args.begin(), "refctl");
            std::vector<char*> argv;
            for (auto& a : args) argv.push_back(a.data());
            py::gil_scoped_release release;
            return run_cli(static_cast<int>(argv.size()), argv.data());
        },
        py::arg("args"), "Run the command-line front end in process and return its exit code.");
}
