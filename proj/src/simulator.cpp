#include "refctl/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <thread>
#include <tuple>

#include "refctl/errors.hpp"
#include "refctl/quadrature.hpp"
#include "refctl/rng.hpp"

namespace refctl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// -zeta(1/2) / sqrt(2 pi)
constexpr double kBarrierShift = 0.5825971579390106;

enum Stream : std::uint32_t { kBandStream = 0, kStoppingStream = 1, kHittingStream = 2 };

void check_config(const SimConfig& cfg) {
    if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) throw InputError("sim.dt must be positive");
    if (cfg.horizon_T < 0.0 || !std::isfinite(cfg.horizon_T)) throw InputError("sim.horizon_T must be >= 0");
    if (cfg.n_paths == 0) throw InputError("sim.n_paths must be positive");
    if (!(cfg.tail_rel_tol > 0.0)) throw InputError("sim.tail_rel_tol must be positive");
    if (!(cfg.max_failure_rate >= 0.0)) throw InputError("sim.max_failure_rate must be >= 0");
}

unsigned worker_count(const SimConfig& cfg, std::size_t work_items) {
    unsigned n = cfg.threads != 0 ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(work_items, 1)));
}

/// Runs body(item) for item in [0, count) on `workers` threads. Items are
/// claimed dynamically; callers write results into per-item slots so the
/// final reduction never depends on the schedule.
template <class Body>
void parallel_for(std::size_t count, unsigned workers, Body&& body) {
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto run = [&] {
        try {
            for (std::size_t i = next++; i < count && !failed; i = next++) body(i);
        } catch (...) {
            if (!failed.exchange(true)) error = std::current_exception();
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(run);
    run();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

double max_abs_on(const SmoothFunction& f, double lo, double hi) {
    double m = 0.0;
    for (int i = 0; i <= 64; ++i) m = std::max(m, std::abs(f(lo + (hi - lo) * i / 64.0)));
    return m;
}

/// Crude bound on the expected discounted control exerted per unit time.
double push_rate_bound(const DiffusionSpec& spec, const RewardSpec& reward, double b) {
    const double hi = std::isfinite(b) ? b : 10.0 * spec.vol(0.0) / std::sqrt(2.0 * reward.r);
    const double eta_max = std::isfinite(b) ? max_abs_on(reward.eta, 0.0, b) : 0.0;
    return (reward.kappa + eta_max) * (max_abs_on(spec.mu, 0.0, hi) + max_abs_on(spec.sigma, 0.0, hi));
}

double payoff_scale(const DiffusionSpec& spec, const RewardSpec& reward, double b) {
    (void)spec;
    return reward.kappa + (std::isfinite(b) ? max_abs_on(reward.eta, 0.0, b) : 0.0);
}

struct Shifts {
    double lo = 0.0;
    double hi = 0.0;
};

Shifts barrier_shifts(const DiffusionSpec& spec, double b, double dt, const SimConfig& cfg) {
    if (!cfg.barrier_correction) return {};
    const double sq = std::sqrt(dt);
    Shifts s{kBarrierShift * spec.vol(0.0) * sq, std::isfinite(b) ? kBarrierShift * spec.vol(b) * sq : 0.0};
    if (std::isfinite(b) && s.lo + s.hi > 0.5 * b) {
        const double scale = 0.5 * b / (s.lo + s.hi);
        s.lo *= scale;
        s.hi *= scale;
    }
    return s;
}

/// Drift and volatility evaluation for the path kernels. The affine form
/// keeps the inner loops free of calls so they vectorize.
struct AffineModel {
    double a, slope, sigma;
    double drift(double x) const { return a + slope * x; }
    double vol(double) const { return sigma; }
};

struct GenericModel {
    const DiffusionSpec* spec;
    double drift(double x) const { return spec->drift(x); }
    double vol(double x) const { return spec->vol(x); }
};

bool affine_model(const DiffusionSpec& spec, AffineModel& out) {
    const auto& m = spec.mu.affine_form();
    const auto& s = spec.sigma.affine_form();
    if (!m || !s || s->slope != 0.0) return false;
    out = {m->intercept, m->slope, s->intercept};
    return true;
}

/// Per-lane state of one band query inside a batch of units.
struct LaneState {
    std::vector<double> x, D, L, D_half, L_half;
    std::vector<double> xc, Dc, Lc;  // coarse (2 dt) companion paths
    void reset(std::size_t lanes, double x0) {
        x.assign(lanes, x0);
        xc.assign(lanes, x0);
        Dc.assign(lanes, 0.0);
        Lc.assign(lanes, 0.0);
        D.assign(lanes, 0.0);
        L.assign(lanes, 0.0);
        D_half.assign(lanes, 0.0);
        L_half.assign(lanes, 0.0);
    }
};

constexpr std::size_t kUnitsPerBatch = 64;

struct UnitResult {
    double payoff = 0.0;
    double D = 0.0;
    double L = 0.0;
    double D_half = 0.0;
    double L_half = 0.0;
    double Dc = 0.0;
    double Lc = 0.0;
    bool failed = false;
};

struct PreparedQuery {
    double lo = 0.0;
    double hi = kInf;
    double lo_coarse = 0.0;
    double hi_coarse = kInf;
    double x0 = 0.0;
    double eta_b = 0.0;
    std::size_t n_steps = 0;
};

template <class Model>
void advance_block(const Model& model, const double* zt, std::size_t lanes, std::size_t steps, const double* disc,
                   double dt, double sqdt, double lo, double hi, double* __restrict x, double* __restrict D,
                   double* __restrict L) {
    for (std::size_t s = 0; s < steps; ++s) {
        const double w = disc[s];
        const double* z = zt + s * lanes;
        for (std::size_t j = 0; j < lanes; ++j) {
            const double xv = x[j];
            const double xt = xv + model.drift(xv) * dt + model.vol(xv) * sqdt * z[j];
            L[j] += w * std::max(lo - xt, 0.0);
            D[j] += w * std::max(xt - hi, 0.0);
            x[j] = std::min(std::max(xt, lo), hi);
        }
    }
}

template <class Model>
void run_band_batch(const Model& model, const std::vector<PreparedQuery>& queries, const SimConfig& cfg, double r,
                    double kappa, std::size_t unit_begin, std::size_t unit_end,
                    std::vector<std::vector<UnitResult>>& out) {
    const std::size_t per_unit = cfg.antithetic ? 2 : 1;
    const std::size_t units = unit_end - unit_begin;
    const std::size_t lanes = units * per_unit;
    const double sqdt = std::sqrt(cfg.dt);
    std::size_t n_steps = 0;
    for (const auto& pq : queries) n_steps = std::max(n_steps, pq.n_steps);

    std::vector<LaneState> state(queries.size());
    for (std::size_t q = 0; q < queries.size(); ++q) state[q].reset(lanes, queries[q].x0);

    std::vector<double> normals(units * kNormalBlock);
    std::vector<double> zt(kNormalBlock * lanes);
    std::vector<double> zc(cfg.richardson ? kNormalBlock / 2 * lanes : 0);
    double disc[kNormalBlock];
    double disc_coarse[kNormalBlock / 2];
    const double dt2 = 2.0 * cfg.dt;
    const double sqdt2 = std::sqrt(dt2);

    const std::size_t n_blocks = (n_steps + kNormalBlock - 1) / kNormalBlock;
    for (std::size_t blk = 0; blk < n_blocks; ++blk) {
        const std::size_t first = blk * kNormalBlock;
        const std::size_t steps = std::min(kNormalBlock, n_steps - first);
        for (std::size_t u = 0; u < units; ++u)
            philox_normals(cfg.rng_seed, kBandStream, unit_begin + u, blk, normals.data() + u * kNormalBlock);
        for (std::size_t s = 0; s < steps; ++s) {
            double* row = zt.data() + s * lanes;
            if (per_unit == 2) {
                for (std::size_t u = 0; u < units; ++u) {
                    const double z = normals[u * kNormalBlock + s];
                    row[2 * u] = z;
                    row[2 * u + 1] = -z;
                }
            } else {
                for (std::size_t u = 0; u < units; ++u) row[u] = normals[u * kNormalBlock + s];
            }
            disc[s] = std::exp(-r * cfg.dt * static_cast<double>(first + s + 1));
        }
        if (cfg.richardson) {
            // The coarse path sees the sum of each pair of fine increments.
            for (std::size_t s = 0; s + 1 < steps; s += 2) {
                const double* a = zt.data() + s * lanes;
                const double* b = a + lanes;
                double* row = zc.data() + (s / 2) * lanes;
                for (std::size_t j = 0; j < lanes; ++j) row[j] = (a[j] + b[j]) * M_SQRT1_2;
                disc_coarse[s / 2] = disc[s + 1];
            }
        }
        for (std::size_t q = 0; q < queries.size(); ++q) {
            const auto& pq = queries[q];
            if (first >= pq.n_steps) continue;
            auto& st = state[q];
            const std::size_t mine = std::min(steps, pq.n_steps - first);
            // Split at the half-horizon so the integrability snapshot is exact.
            const std::size_t half = pq.n_steps / 2;
            std::size_t split = mine;
            if (half >= first && half < first + mine) split = half - first;
            advance_block(model, zt.data(), lanes, split, disc, cfg.dt, sqdt, pq.lo, pq.hi, st.x.data(),
                          st.D.data(), st.L.data());
            if (split < mine) {
                st.D_half = st.D;
                st.L_half = st.L;
                advance_block(model, zt.data() + split * lanes, lanes, mine - split, disc + split, cfg.dt, sqdt,
                              pq.lo, pq.hi, st.x.data(), st.D.data(), st.L.data());
            }
            if (cfg.richardson)
                advance_block(model, zc.data(), lanes, mine / 2, disc_coarse, dt2, sqdt2, pq.lo_coarse,
                              pq.hi_coarse, st.xc.data(), st.Dc.data(), st.Lc.data());
        }
    }

    const double inv = 1.0 / static_cast<double>(per_unit);
    for (std::size_t q = 0; q < queries.size(); ++q) {
        const auto& st = state[q];
        const auto& pq = queries[q];
        for (std::size_t u = 0; u < units; ++u) {
            UnitResult res;
            for (std::size_t k = 0; k < per_unit; ++k) {
                const std::size_t j = u * per_unit + k;
                if (!std::isfinite(st.x[j]) || !std::isfinite(st.D[j]) || !std::isfinite(st.L[j]))
                    res.failed = true;
                res.D += st.D[j];
                res.L += st.L[j];
                res.Dc += st.Dc[j];
                res.Lc += st.Lc[j];
                if (!std::isfinite(st.xc[j]) || !std::isfinite(st.Dc[j]) || !std::isfinite(st.Lc[j]))
                    res.failed = true;
                res.D_half += st.D_half[j];
                res.L_half += st.L_half[j];
            }
            res.D *= inv;
            res.L *= inv;
            res.D_half *= inv;
            res.L_half *= inv;
            res.Dc *= inv;
            res.Lc *= inv;
            res.payoff = pq.eta_b * res.D - kappa * res.L;
            if (cfg.richardson) {
                // 2 J(dt) - J(2 dt) cancels the first-order discretization bias.
                const double coarse = pq.eta_b * res.Dc - kappa * res.Lc;
                res.payoff = 2.0 * res.payoff - coarse;
            }
            out[q][unit_begin + u] = res;
        }
    }
}

std::size_t unit_count(const SimConfig& cfg) {
    return cfg.antithetic ? (cfg.n_paths + 1) / 2 : cfg.n_paths;
}

/// Mean and standard error over units, summed in unit order.
template <class Get>
std::pair<double, double> unit_statistics(const std::vector<UnitResult>& units, Get get, std::size_t& used) {
    double sum = 0.0;
    used = 0;
    for (const auto& u : units) {
        if (u.failed) continue;
        sum += get(u);
        ++used;
    }
    if (used == 0) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
    const double mean = sum / static_cast<double>(used);
    double ss = 0.0;
    for (const auto& u : units) {
        if (u.failed) continue;
        const double d = get(u) - mean;
        ss += d * d;
    }
    const double var = used > 1 ? ss / static_cast<double>(used - 1) : 0.0;
    return {mean, std::sqrt(var / static_cast<double>(used))};
}

void enforce_failure_rate(std::size_t failed, std::size_t total, const SimConfig& cfg) {
    if (static_cast<double>(failed) > cfg.max_failure_rate * static_cast<double>(total))
        throw NumericalError("simulation aborted: " + std::to_string(failed) + " of " + std::to_string(total) +
                             " paths produced non-finite states");
}

std::size_t steps_for(double T, double dt) {
    return static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
}

}  // namespace

double resolved_horizon(const DiffusionSpec& spec, const RewardSpec& reward, double b, const SimConfig& cfg) {
    if (cfg.horizon_T > 0.0) return cfg.horizon_T;
    const double C = push_rate_bound(spec, reward, b);
    const double target = cfg.tail_rel_tol * payoff_scale(spec, reward, b);
    // Tail after T is at most C e^{-rT} / r.
    const double T = std::log(C / (reward.r * target)) / reward.r;
    return std::max(T, 1.0 / reward.r);
}

std::vector<SimEstimate> estimate_payoff_batch(const DiffusionSpec& spec, const RewardSpec& reward,
                                               const std::vector<BandQuery>& queries, const SimConfig& cfg) {
    check_config(cfg);
    // Queries that differ only in an initial jump share one simulated state.
    std::vector<PreparedQuery> prepared;
    std::vector<std::size_t> state_of;
    std::vector<double> jumps;
    for (const auto& q : queries) {
        if (!(q.b > 0.0)) throw InputError("band level b must be positive");
        if (!(q.x >= 0.0) || !std::isfinite(q.x)) throw InputError("initial state x must be finite and >= 0");
        const Shifts sh = barrier_shifts(spec, q.b, cfg.dt, cfg);
        PreparedQuery pq;
        pq.lo = sh.lo;
        pq.hi = std::isfinite(q.b) ? q.b - sh.hi : kInf;
        const Shifts shc = barrier_shifts(spec, q.b, 2.0 * cfg.dt, cfg);
        pq.lo_coarse = shc.lo;
        pq.hi_coarse = std::isfinite(q.b) ? q.b - shc.hi : kInf;
        pq.eta_b = std::isfinite(q.b) ? reward.eta(q.b) : 0.0;
        double jump = 0.0;
        if (q.x > q.b) {
            jump = integrate([&](double y) { return reward.eta(y); }, q.b, q.x);
            pq.x0 = q.b;
        } else {
            pq.x0 = q.x;
        }
        const double T = resolved_horizon(spec, reward, q.b, cfg);
        pq.n_steps = steps_for(T, cfg.dt);
        // Keep both halves of the horizon a whole number of coarse steps.
        if (cfg.richardson) pq.n_steps = (pq.n_steps + 3) / 4 * 4;
        jumps.push_back(jump);
        std::size_t k = 0;
        while (k < prepared.size() && !(prepared[k].lo == pq.lo && prepared[k].hi == pq.hi &&
                                         prepared[k].x0 == pq.x0 && prepared[k].n_steps == pq.n_steps))
            ++k;
        if (k == prepared.size()) prepared.push_back(pq);
        state_of.push_back(k);
    }
    if (prepared.empty()) return {};

    const std::size_t units = unit_count(cfg);
    std::vector<std::vector<UnitResult>> results(prepared.size(), std::vector<UnitResult>(units));
    const std::size_t batches = (units + kUnitsPerBatch - 1) / kUnitsPerBatch;
    AffineModel affine{};
    const bool fast = affine_model(spec, affine);
    GenericModel generic{&spec};
    parallel_for(batches, worker_count(cfg, batches), [&](std::size_t i) {
        const std::size_t begin = i * kUnitsPerBatch;
        const std::size_t end = std::min(units, begin + kUnitsPerBatch);
        if (fast)
            run_band_batch(affine, prepared, cfg, reward.r, reward.kappa, begin, end, results);
        else
            run_band_batch(generic, prepared, cfg, reward.r, reward.kappa, begin, end, results);
    });

    const std::size_t per_unit = cfg.antithetic ? 2 : 1;
    std::vector<SimEstimate> out;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const std::size_t q = state_of[i];
        SimEstimate e;
        std::size_t used = 0;
        std::tie(e.mean, e.std_error) = unit_statistics(results[q], [](const UnitResult& u) { return u.payoff; }, used);
        e.mean += jumps[i];
        const std::size_t failed = units - used;
        enforce_failure_rate(failed * per_unit, units * per_unit, cfg);
        std::size_t dummy = 0;
        e.mean_discounted_D = unit_statistics(results[q], [](const UnitResult& u) { return u.D; }, dummy).first;
        e.mean_discounted_L = unit_statistics(results[q], [](const UnitResult& u) { return u.L; }, dummy).first;
        e.mean_discounted_D_half =
            unit_statistics(results[q], [](const UnitResult& u) { return u.D_half; }, dummy).first;
        e.mean_discounted_L_half =
            unit_statistics(results[q], [](const UnitResult& u) { return u.L_half; }, dummy).first;
        e.n_paths = used * per_unit;
        e.failed_paths = failed * per_unit;
        e.horizon_T = static_cast<double>(prepared[q].n_steps) * cfg.dt;
        e.dt = cfg.dt;
        e.seed = cfg.rng_seed;
        e.tail_bound = push_rate_bound(spec, reward, queries[i].b) * std::exp(-reward.r * e.horizon_T) / reward.r;
        out.push_back(e);
    }
    return out;
}

SimEstimate estimate_payoff(const DiffusionSpec& spec, const RewardSpec& reward, double b, double x,
                            const SimConfig& cfg) {
    if (!std::isfinite(b)) throw InputError("band level b must be finite");
    return estimate_payoff_batch(spec, reward, {BandQuery{b, x}}, cfg).front();
}

SimEstimate estimate_case_c_value(const DiffusionSpec& spec, const RewardSpec& reward, double x,
                                  const SimConfig& cfg) {
    return estimate_payoff_batch(spec, reward, {BandQuery{kInf, x}}, cfg).front();
}

PathRecord simulate_double_reflection(const DiffusionSpec& spec, const RewardSpec& reward, double b, double x,
                                      const SimConfig& cfg, const PathRequest& req) {
    check_config(cfg);
    if (!(b > 0.0)) throw InputError("band level b must be positive");
    if (!(x >= 0.0) || !std::isfinite(x)) throw InputError("initial state x must be finite and >= 0");
    const Shifts sh = barrier_shifts(spec, b, cfg.dt, cfg);
    const double lo = sh.lo;
    const double hi = std::isfinite(b) ? b - sh.hi : kInf;
    PathRecord rec;
    double X = x;
    if (x > b) {
        rec.initial_jump = x - b;
        rec.initial_jump_payoff = integrate([&](double y) { return reward.eta(y); }, b, x);
        X = b;
    }
    const std::size_t n_steps = steps_for(resolved_horizon(spec, reward, b, cfg), cfg.dt);
    const double sqdt = std::sqrt(cfg.dt);
    const double sign = req.negate ? -1.0 : 1.0;
    const std::size_t every = std::max<std::size_t>(req.trace_every, 1);
    double Lraw = 0.0, Draw = rec.initial_jump;
    auto trace = [&](double t) {
        if (rec.t.size() >= req.trace_cap) return;
        rec.t.push_back(t);
        rec.X.push_back(X);
        rec.L.push_back(Lraw);
        rec.D.push_back(Draw);
    };
    trace(0.0);
    double z[kNormalBlock];
    for (std::size_t k = 0; k < n_steps; ++k) {
        if (k % kNormalBlock == 0) philox_normals(cfg.rng_seed, kBandStream, req.path, k / kNormalBlock, z);
        const double xt = X + spec.drift(X) * cfg.dt + spec.vol(X) * sqdt * (sign * z[k % kNormalBlock]);
        if (!std::isfinite(xt)) throw PathError("non-finite state in simulate_double_reflection", k);
        const double dl = std::max(lo - xt, 0.0);
        const double dd = std::max(xt - hi, 0.0);
        if (dl > 0.0 && dd > 0.0) rec.both_pushed = true;
        if (dd > 0.0 && !(xt > hi)) rec.upper_push_below_barrier = true;
        X = std::min(std::max(xt, lo), hi);
        if (X < 0.0 || X > b) rec.left_band = true;
        const double w = std::exp(-reward.r * cfg.dt * static_cast<double>(k + 1));
        rec.discounted_L += w * dl;
        rec.discounted_D += w * dd;
        Lraw += dl;
        Draw += dd;
        if ((k + 1) % every == 0) trace(cfg.dt * static_cast<double>(k + 1));
    }
    rec.steps = n_steps;
    const double eta_b = std::isfinite(b) ? reward.eta(b) : 0.0;
    rec.payoff = rec.initial_jump_payoff + eta_b * rec.discounted_D - reward.kappa * rec.discounted_L;
    return rec;
}

void write_path_csv(const PathRecord& rec, const std::string& file) {
    std::ofstream os(file);
    if (!os) throw InputError("cannot open " + file + " for writing");
    os.precision(17);
    os << "t,X,L,D\n";
    for (std::size_t i = 0; i < rec.t.size(); ++i)
        os << rec.t[i] << ',' << rec.X[i] << ',' << rec.L[i] << ',' << rec.D[i] << '\n';
}

namespace {

/// Runs one stopping path driven by the fine normals of `unit`; with
/// coarse = true the path takes steps of 2 dt driven by the sums of pairs of
/// fine increments. Returns the payoff (0 if the path is still running at
/// the horizon) and flags unfinished or non-finite paths.
template <class Stepper>
double stopping_path(const Stepper& stepper, const SimConfig& cfg, std::uint32_t stream, std::uint64_t unit,
                     double sign, std::size_t n_steps, bool coarse, bool& unfinished, bool& bad) {
    double z[kNormalBlock];
    auto state = stepper.start();
    if (state.stopped) return state.value;
    const std::size_t stride = coarse ? 2 : 1;
    for (std::size_t s = 0; s < n_steps; s += stride) {
        if (s % kNormalBlock == 0) philox_normals(cfg.rng_seed, stream, unit, s / kNormalBlock, z);
        const std::size_t i = s % kNormalBlock;
        const double dz = coarse ? (z[i] + z[i + 1]) * M_SQRT1_2 : z[i];
        if (stepper.advance(state, sign * dz, s / stride)) {
            if (!std::isfinite(state.value)) bad = true;
            return state.value;
        }
        if (!std::isfinite(state.x)) {
            bad = true;
            return 0.0;
        }
    }
    unfinished = true;
    return 0.0;
}

template <class Stepper>
SimEstimate run_stopping(const SimConfig& cfg, std::uint32_t stream, std::size_t n_steps, const Stepper& fine,
                         const Stepper& coarse) {
    const std::size_t units = unit_count(cfg);
    const std::size_t per_unit = cfg.antithetic ? 2 : 1;
    std::vector<UnitResult> results(units);
    std::vector<unsigned char> unfinished(units, 0);
    parallel_for(units, worker_count(cfg, units / 256 + 1), [&](std::size_t u) {
        UnitResult res;
        for (std::size_t k = 0; k < per_unit; ++k) {
            const double sign = k == 0 ? 1.0 : -1.0;
            bool open = false, bad = false;
            double value = stopping_path(fine, cfg, stream, u, sign, n_steps, false, open, bad);
            if (cfg.richardson) {
                bool open_c = false;
                const double c = stopping_path(coarse, cfg, stream, u, sign, n_steps, true, open_c, bad);
                value = 2.0 * value - c;
            }
            if (open) unfinished[u] += 1;
            if (bad) res.failed = true;
            res.payoff += value;
        }
        res.payoff /= static_cast<double>(per_unit);
        results[u] = res;
    });
    SimEstimate e;
    std::size_t used = 0;
    std::tie(e.mean, e.std_error) = unit_statistics(results, [](const UnitResult& r) { return r.payoff; }, used);
    enforce_failure_rate((units - used) * per_unit, units * per_unit, cfg);
    e.n_paths = used * per_unit;
    e.failed_paths = (units - used) * per_unit;
    for (auto c : unfinished) e.unfinished_paths += c;
    e.horizon_T = static_cast<double>(n_steps) * cfg.dt;
    e.dt = cfg.dt;
    e.seed = cfg.rng_seed;
    return e;
}

struct StopState {
    double x = 0.0;
    double log_disc = 0.0;
    double rate = 0.0;  // killing rate r - mu' at x
    bool stopped = false;
    double value = 0.0;
};

/// Absorbing levels shifted inward by the continuity correction for step dt.
Shifts absorbing_shifts(const DiffusionSpec& spec, double top, double dt, const SimConfig& cfg) {
    if (!cfg.barrier_correction) return {};
    const double sq = std::sqrt(dt);
    Shifts s{kBarrierShift * spec.vol(0.0) * sq, kBarrierShift * spec.vol(top) * sq};
    if (s.lo + s.hi > 0.5 * top) {
        const double scale = 0.5 * top / (s.lo + s.hi);
        s.lo *= scale;
        s.hi *= scale;
    }
    return s;
}

/// The companion diffusion killed at rate r - mu', absorbed at 0 and b*.
struct CompanionStepper {
    const DiffusionSpec* spec;
    AffineModel am;
    bool affine;
    double r, x0, b, kappa, eta_b;
    double lo, hi, dt, sqdt;

    double drift(double y) const { return affine ? am.drift(y) : spec->hat_drift(y); }
    double vol(double y) const { return affine ? am.sigma : spec->vol(y); }
    double rate(double y) const {
        y = std::min(std::max(y, 0.0), b);
        return affine ? r - am.slope : r - spec->drift_prime(y);
    }
    StopState start() const {
        StopState s;
        s.x = x0;
        s.rate = rate(x0);
        // The t = 0 test uses the true levels.
        if (x0 <= 0.0) {
            s.stopped = true;
            s.value = kappa;
        } else if (x0 >= b) {
            s.stopped = true;
            s.value = eta_b;
        }
        return s;
    }
    bool advance(StopState& s, double z, std::size_t) const {
        const double xn = s.x + drift(s.x) * dt + vol(s.x) * sqdt * z;
        const double rn = rate(xn);
        s.log_disc -= 0.5 * dt * (s.rate + rn);
        s.x = xn;
        s.rate = rn;
        if (xn <= lo) {
            s.value = kappa * std::exp(s.log_disc);
            return true;
        }
        if (xn >= hi) {
            s.value = eta_b * std::exp(s.log_disc);
            return true;
        }
        return false;
    }
};

/// The process reflected at 0 and stopped on reaching n, discounted at r.
struct HittingStepper {
    const DiffusionSpec* spec;
    AffineModel am;
    bool affine;
    double r, x0, n;
    double lo, hi, dt, sqdt;

    StopState start() const {
        StopState s;
        s.x = x0;
        if (x0 >= n) {
            s.stopped = true;
            s.value = 1.0;
        }
        return s;
    }
    bool advance(StopState& s, double z, std::size_t step) const {
        const double mu = affine ? am.drift(s.x) : spec->drift(s.x);
        const double sg = affine ? am.sigma : spec->vol(s.x);
        s.x = std::max(s.x + mu * dt + sg * sqdt * z, lo);
        if (s.x >= hi) {
            s.value = std::exp(-r * dt * static_cast<double>(step + 1));
            return true;
        }
        return false;
    }
};

}  // namespace

SimEstimate estimate_vprime_stopping(const DiffusionSpec& spec, const RewardSpec& reward, double b_star,
                                     double x, const SimConfig& cfg) {
    check_config(cfg);
    if (!(b_star > 0.0) || !std::isfinite(b_star)) throw InputError("b_star must be positive and finite");
    if (!(x >= 0.0 && x <= b_star)) throw InputError("x must lie in [0, b_star]");
    const double r = reward.r;
    double r_o = kInf;
    for (int i = 0; i <= 64; ++i) r_o = std::min(r_o, r - spec.drift_prime(b_star * i / 64.0));
    if (!(r_o > 0.0)) throw InputError("r - mu' must be positive on [0, b_star]");
    const double T = cfg.horizon_T > 0.0 ? cfg.horizon_T : std::log(1.0 / cfg.tail_rel_tol) / r_o;
    const std::size_t n_steps = (steps_for(T, cfg.dt) + 1) / 2 * 2;

    CompanionStepper fine{&spec, {}, false, r, x, b_star, reward.kappa, reward.eta(b_star), 0, 0, 0, 0};
    fine.affine = affine_model(spec, fine.am);
    CompanionStepper coarse = fine;
    for (auto* st : {&fine, &coarse}) {
        st->dt = st == &fine ? cfg.dt : 2.0 * cfg.dt;
        st->sqdt = std::sqrt(st->dt);
        const Shifts sh = absorbing_shifts(spec, b_star, st->dt, cfg);
        st->lo = sh.lo;
        st->hi = b_star - sh.hi;
    }
    SimEstimate e = run_stopping(cfg, kStoppingStream, n_steps, fine, coarse);
    const double payoff_max = std::max(std::abs(reward.kappa), std::abs(reward.eta(b_star)));
    e.tail_bound = payoff_max * std::exp(-r_o * e.horizon_T);
    return e;
}

SimEstimate estimate_hitting_laplace(const DiffusionSpec& spec, double r, double x, double n,
                                     const SimConfig& cfg) {
    check_config(cfg);
    if (!(r > 0.0)) throw InputError("r must be positive");
    if (!(n > 0.0) || !std::isfinite(n)) throw InputError("level n must be positive and finite");
    if (!(x >= 0.0 && x <= n)) throw InputError("x must lie in [0, n]");
    const double T = cfg.horizon_T > 0.0 ? cfg.horizon_T : std::log(1.0 / cfg.tail_rel_tol) / r;
    const std::size_t n_steps = (steps_for(T, cfg.dt) + 1) / 2 * 2;

    HittingStepper fine{&spec, {}, false, r, x, n, 0, 0, 0, 0};
    fine.affine = affine_model(spec, fine.am);
    HittingStepper coarse = fine;
    for (auto* st : {&fine, &coarse}) {
        st->dt = st == &fine ? cfg.dt : 2.0 * cfg.dt;
        st->sqdt = std::sqrt(st->dt);
        const Shifts sh = absorbing_shifts(spec, n, st->dt, cfg);
        st->lo = sh.lo;
        st->hi = n - sh.hi;
    }
    SimEstimate e = run_stopping(cfg, kHittingStream, n_steps, fine, coarse);
    e.tail_bound = std::exp(-r * e.horizon_T);
    return e;
}

}  // namespace refctl
