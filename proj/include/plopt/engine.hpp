#pragma once

// Optimization engine: runs gradient descent, heavy ball (constant, polynomial
// and multi-block schedules), steepest descent, conjugate gradients and its
// re-orthogonalized variant, in two representations:
//   spectral  - residual amplitudes u_k = p_n(lambda_k) c_k per atom,
//   dense     - explicit parameter iterates against an OperatorProblem.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "plopt/measure.hpp"
#include "plopt/specfun.hpp"
#include "plopt/util.hpp"

namespace plopt::engine {

// --- schedules ---------------------------------------------------------------

enum class ScheduleKind {
    constant,
    jacobi_hb,
    scheduled_gd,
    steepest_descent,
    conjugate_gradients,
    stable_conjugate_gradients,
};

struct Schedule {
    ScheduleKind kind = ScheduleKind::constant;
    double alpha = 1.0, beta = 0.0; // constant
    double a = 0.0, b = 0.0;        // jacobi_hb, scheduled_gd
    int depth = 0;                  // scheduled_gd: levels 0..depth available

    static Schedule Constant(double alpha, double beta = 0.0) {
        if (!(beta >= 0.0 && beta < 1.0)) throw parameter_error("schedule: 0 <= beta < 1");
        if (!(alpha > 0.0)) throw parameter_error("schedule: alpha > 0");
        Schedule s;
        s.kind = ScheduleKind::constant;
        s.alpha = alpha;
        s.beta = beta;
        return s;
    }
    static Schedule JacobiHB(double a, double b) {
        if (!(a > -1.0) || !(b > -1.0)) throw parameter_error("schedule: requires a > -1, b > -1");
        Schedule s;
        s.kind = ScheduleKind::jacobi_hb;
        s.a = a;
        s.b = b;
        return s;
    }
    static Schedule ScheduledGD(double a, double b, int depth) {
        if (!(a > -1.0) || !(b > -1.0)) throw parameter_error("schedule: requires a > -1, b > -1");
        if (depth < 0 || depth > 30) throw parameter_error("schedule: depth in [0, 30]");
        Schedule s;
        s.kind = ScheduleKind::scheduled_gd;
        s.a = a;
        s.b = b;
        s.depth = depth;
        return s;
    }
    static Schedule SteepestDescent() { return Schedule{ScheduleKind::steepest_descent}; }
    static Schedule ConjugateGradients() { return Schedule{ScheduleKind::conjugate_gradients}; }
    static Schedule StableConjugateGradients() {
        return Schedule{ScheduleKind::stable_conjugate_gradients};
    }

    const char* name() const {
        switch (kind) {
            case ScheduleKind::constant: return beta == 0.0 ? "gd-constant" : "hb-constant";
            case ScheduleKind::jacobi_hb: return "hb-jacobi";
            case ScheduleKind::scheduled_gd: return "gd-scheduled";
            case ScheduleKind::steepest_descent: return "sd";
            case ScheduleKind::conjugate_gradients: return "cg";
            case ScheduleKind::stable_conjugate_gradients: return "stable-cg";
        }
        return "?";
    }
};

// Polynomial-ansatz heavy-ball rates:
//   alpha_n = (2n+a+b+1)(2n+a+b+2) / (2(n+a+1)(n+a+b+1))
//   beta_n  = n(n+b)(2n+a+b+2) / ((n+a+1)(n+a+b+1)(2n+a+b)),  beta_0 = 0.
inline std::pair<double, double> jacobi_schedule(long long n, double a, double b) {
    if (n < 0) throw parameter_error("jacobi_schedule: n >= 0");
    const double s = a + b;
    const double nn = static_cast<double>(n);
    const double da = 2.0 * (nn + a + 1.0) * (nn + s + 1.0);
    if (da == 0.0) throw parameter_error("jacobi_schedule: degenerate parameters");
    const double alpha = (2.0 * nn + s + 1.0) * (2.0 * nn + s + 2.0) / da;
    if (n == 0) return {alpha, 0.0};
    const double db = (nn + a + 1.0) * (nn + s + 1.0) * (2.0 * nn + s);
    if (db == 0.0) throw parameter_error("jacobi_schedule: degenerate parameters");
    const double beta = nn * (nn + b) * (2.0 * nn + s + 2.0) / db;
    return {alpha, beta};
}

// Multi-block schedule: step i (1-based) belongs to block l = floor(log2 i) of
// polynomial degree 2^l, and uses the inverse of the (i - 2^l + 1)-th largest
// root of the degree-2^l residual polynomial, roots consumed in decreasing
// order within each block.
inline std::vector<double> scheduled_gd_rates(long long total, double a, double b) {
    if (total < 1) throw parameter_error("scheduled_gd_rates: total >= 1");
    const specfun::JacobiParams jp{a, b};
    std::vector<double> rates;
    rates.reserve(static_cast<std::size_t>(total));
    for (long long block = 1; static_cast<long long>(rates.size()) < total; block *= 2) {
        auto roots = specfun::jacobi_roots(static_cast<int>(block), jp);
        std::sort(roots.begin(), roots.end(), std::greater<double>());
        for (double x : roots) {
            rates.push_back(1.0 / x);
            if (static_cast<long long>(rates.size()) == total) break;
        }
    }
    return rates;
}

// --- trajectories ------------------------------------------------------------

struct StepRecord {
    long long n = 0;
    double loss = 0.0;
    // Rates applied in the transition away from this state; zero on the final
    // record and after convergence.
    double alpha = 0.0;
    double beta = 0.0;
};

struct Trajectory {
    std::vector<StepRecord> records;
    std::vector<double> probe_lambdas;
    std::vector<std::vector<double>> probe_values; // parallel to records
    double loss0 = 0.0;
    bool diverged = false;
    long long diverged_at = -1;
    std::vector<std::string> notes;
    std::string schedule_name;

    double final_loss() const { return records.empty() ? 0.0 : records.back().loss; }
};

enum class StableCgMode { target_space, parameter_space };

struct RunOptions {
    std::vector<double> probes;
    bool allow_unstable = false;
    // 0 records everything; otherwise at most ~max_records geometrically
    // spaced steps (0, 1 and n_steps always kept).
    std::size_t max_records = 0;
    bool fast_closed_form = true; // constant schedules: evaluate q_n directly
    StableCgMode stable_cg_mode = StableCgMode::target_space;
    std::size_t history_cap = 5000;
    bool capture_directions = false; // test hook: expose stored unit directions
    Eigen::Index dense_dim_cap = 5000;
};

// Stored unit directions from the last stable-CG run when capture_directions
// is set (spectral: target-space coordinates; dense: parameter space).
struct DirectionCapture {
    std::vector<std::vector<double>> dirs;
};

namespace detail {

inline std::vector<long long> record_steps(long long n_steps, std::size_t max_records) {
    std::vector<long long> out;
    if (max_records == 0 || static_cast<long long>(max_records) >= n_steps + 1) {
        out.resize(static_cast<std::size_t>(n_steps) + 1);
        for (long long i = 0; i <= n_steps; ++i) out[static_cast<std::size_t>(i)] = i;
        return out;
    }
    out.push_back(0);
    if (n_steps >= 1) out.push_back(1);
    const double hi = static_cast<double>(n_steps);
    const std::size_t m = max_records;
    for (std::size_t i = 1; i + 1 < m; ++i) {
        const auto v = static_cast<long long>(
            std::llround(std::exp(std::log(hi) * static_cast<double>(i) / (m - 1))));
        if (v > out.back() && v < n_steps) out.push_back(v);
    }
    if (out.back() != n_steps) out.push_back(n_steps);
    return out;
}

} // namespace detail

// --- spectral rate formulas (public: they are part of the module contract) ---

// Exact line-search rate along the gradient: alpha = sum lam u^2 / sum lam^2 u^2.
// Empty optional signals a zero gradient on the support (converged).
inline std::optional<double> sd_rate(const std::vector<double>& u, const std::vector<double>& atoms) {
    const double s1 = pairwise_map_sum(u.size(), [&](std::size_t k) { return atoms[k] * u[k] * u[k]; });
    const double s2 =
        pairwise_map_sum(u.size(), [&](std::size_t k) { return atoms[k] * atoms[k] * u[k] * u[k]; });
    if (s2 <= 0.0) return std::nullopt;
    return s1 / s2;
}

struct CgRates {
    double alpha = 0.0;
    double beta = 0.0;
    bool sd_fallback = false;
};

// Joint minimization over the gradient and momentum directions. The five
// inner products of the parameter-space normal equations reduce to atom sums
// through r_n = J'(f_n - f*) and J p_n = delta f_n - delta f_{n-1}:
//   <r,r> = sum lam u^2        <Ar,r> = sum lam^2 u^2   <Ap,p> = sum (u-u')^2
//   <r,p> = sum u(u-u')        <Ar,p> = sum lam u(u-u')
// Empty optional signals convergence; a singular 2x2 system falls back to the
// plain line-search step.
inline std::optional<CgRates> cg_rates(const std::vector<double>& u, const std::vector<double>& u_prev,
                                       const std::vector<double>& atoms) {
    const std::size_t K = u.size();
    const double s1 = pairwise_map_sum(K, [&](std::size_t k) { return atoms[k] * u[k] * u[k]; });
    const double s2 =
        pairwise_map_sum(K, [&](std::size_t k) { return atoms[k] * atoms[k] * u[k] * u[k]; });
    if (s2 <= 0.0) return std::nullopt;
    const double s3 = pairwise_map_sum(K, [&](std::size_t k) {
        const double d = u[k] - u_prev[k];
        return d * d;
    });
    const double s4 =
        pairwise_map_sum(K, [&](std::size_t k) { return u[k] * (u[k] - u_prev[k]); });
    const double s5 =
        pairwise_map_sum(K, [&](std::size_t k) { return atoms[k] * u[k] * (u[k] - u_prev[k]); });
    const double det = s2 * s3 - s5 * s5;
    if (!(s3 > 0.0) || !(det > 1e-24 * s2 * s3)) {
        return CgRates{s1 / s2, 0.0, true};
    }
    return CgRates{(s1 * s3 - s4 * s5) / det, (s1 * s5 - s2 * s4) / det, false};
}

// --- spectral runner ----------------------------------------------------------

namespace detail {

struct SpectralStepper {
    const spectrum::DiscreteMeasure& m;
    const Schedule& sched;
    const RunOptions& opt;
    std::vector<double> u, u_prev;
    std::vector<double> pu, pu_prev; // probe amplitudes (unit pseudo-mass)
    std::vector<double> scheduled;   // precomputed multi-block rates
    // stable-CG history: unit directions over atoms (and their probe extension)
    std::vector<std::vector<double>> dirs, pdirs;
    bool converged = false;
    bool history_note = false;
    long long cg_fallbacks = 0;
    long long cg_first_fallback = -1;

    SpectralStepper(const spectrum::DiscreteMeasure& mm, const Schedule& s, const RunOptions& o,
                    long long n_steps)
        : m(mm), sched(s), opt(o) {
        u.resize(m.size());
        for (std::size_t k = 0; k < m.size(); ++k) u[k] = std::sqrt(m.masses[k]);
        u_prev = u;
        pu.assign(opt.probes.size(), 1.0);
        pu_prev = pu;
        if (sched.kind == ScheduleKind::scheduled_gd)
            scheduled = scheduled_gd_rates(n_steps, sched.a, sched.b);
    }

    double loss() const {
        return 0.5 * pairwise_map_sum(u.size(), [&](std::size_t k) { return u[k] * u[k]; });
    }

    void linear_update(double alpha, double beta) {
        const std::size_t K = u.size();
        for (std::size_t k = 0; k < K; ++k) {
            const double next = (1.0 - alpha * m.atoms[k]) * u[k] + beta * (u[k] - u_prev[k]);
            u_prev[k] = u[k];
            u[k] = next;
        }
        for (std::size_t j = 0; j < pu.size(); ++j) {
            const double next = (1.0 - alpha * opt.probes[j]) * pu[j] + beta * (pu[j] - pu_prev[j]);
            pu_prev[j] = pu[j];
            pu[j] = next;
        }
    }

    // One stable-CG step: gradient-image candidate, modified Gram-Schmidt
    // against the stored history (twice), exact line search.
    // target_space mode orthogonalizes step images (A-conjugate steps);
    // parameter_space mode uses the 1/lambda-weighted products instead.
    std::pair<double, bool> stable_step(Trajectory& out) {
        const std::size_t K = u.size();
        const bool param = opt.stable_cg_mode == StableCgMode::parameter_space;
        std::vector<double> cand(K), pcand(pu.size());
        for (std::size_t k = 0; k < K; ++k) cand[k] = -m.atoms[k] * u[k];
        for (std::size_t j = 0; j < pu.size(); ++j) pcand[j] = -opt.probes[j] * pu[j];

        auto weighted = [&](const std::vector<double>& x, const std::vector<double>& y) {
            if (param)
                return pairwise_map_sum(K, [&](std::size_t k) { return x[k] * y[k] / m.atoms[k]; });
            return pairwise_map_sum(K, [&](std::size_t k) { return x[k] * y[k]; });
        };
        const double n2_orig = pairwise_map_sum(K, [&](std::size_t k) { return cand[k] * cand[k]; });
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t d = 0; d < dirs.size(); ++d) {
                const double c = weighted(cand, dirs[d]);
                for (std::size_t k = 0; k < K; ++k) cand[k] -= c * dirs[d][k];
                for (std::size_t j = 0; j < pcand.size(); ++j) pcand[j] -= c * pdirs[d][j];
            }
        }
        const double n2 = pairwise_map_sum(K, [&](std::size_t k) { return cand[k] * cand[k]; });
        // Orthogonalization annihilating the candidate means the Krylov space is
        // exhausted (up to roundoff); stepping against the noise that survives
        // would inject gigantic rates, so stop instead.
        if (!(n2 > 1e-24 * n2_orig) || !std::isfinite(n2)) {
            converged = true;
            return {0.0, false};
        }
        const double t = -pairwise_map_sum(K, [&](std::size_t k) { return u[k] * cand[k]; }) / n2;
        for (std::size_t k = 0; k < K; ++k) {
            u_prev[k] = u[k];
            u[k] += t * cand[k];
        }
        for (std::size_t j = 0; j < pcand.size(); ++j) {
            pu_prev[j] = pu[j];
            pu[j] += t * pcand[j];
        }
        if (opt.history_cap > 0 && dirs.size() >= opt.history_cap) {
            dirs.erase(dirs.begin());
            pdirs.erase(pdirs.begin());
            if (!history_note) {
                out.notes.push_back("stable-cg: history cap " + std::to_string(opt.history_cap) +
                                    " reached; oldest direction dropped");
                history_note = true;
            }
        }
        const double nrm = std::sqrt(param ? weighted(cand, cand) : n2);
        for (auto& v : cand) v /= nrm;
        for (auto& v : pcand) v /= nrm;
        dirs.push_back(std::move(cand));
        pdirs.push_back(std::move(pcand));
        return {t, true};
    }

    // Returns the (alpha, beta) recorded for this transition.
    std::pair<double, double> step(long long n, Trajectory& out) {
        if (converged) return {0.0, 0.0};
        switch (sched.kind) {
            case ScheduleKind::constant: {
                linear_update(sched.alpha, n == 0 ? 0.0 : sched.beta);
                return {sched.alpha, sched.beta};
            }
            case ScheduleKind::jacobi_hb: {
                const auto [al, be] = jacobi_schedule(n, sched.a, sched.b);
                linear_update(al, be);
                return {al, be};
            }
            case ScheduleKind::scheduled_gd: {
                const double al = scheduled[static_cast<std::size_t>(n)];
                linear_update(al, 0.0);
                return {al, 0.0};
            }
            case ScheduleKind::steepest_descent: {
                const auto al = sd_rate(u, m.atoms);
                if (!al) {
                    converged = true;
                    out.notes.push_back("sd: converged at step " + std::to_string(n));
                    return {0.0, 0.0};
                }
                linear_update(*al, 0.0);
                return {*al, 0.0};
            }
            case ScheduleKind::conjugate_gradients: {
                const auto r = n == 0 ? [&]() -> std::optional<CgRates> {
                    const auto al = sd_rate(u, m.atoms);
                    if (!al) return std::nullopt;
                    return CgRates{*al, 0.0, false};
                }()
                                      : cg_rates(u, u_prev, m.atoms);
                if (!r) {
                    converged = true;
                    out.notes.push_back("cg: converged at step " + std::to_string(n));
                    return {0.0, 0.0};
                }
                if (r->sd_fallback) {
                    if (cg_fallbacks++ == 0) cg_first_fallback = n;
                }
                linear_update(r->alpha, r->beta);
                return {r->alpha, r->beta};
            }
            case ScheduleKind::stable_conjugate_gradients: {
                const auto [t, ok] = stable_step(out);
                if (!ok) out.notes.push_back("stable-cg: converged at step " + std::to_string(n));
                return {t, 0.0};
            }
        }
        return {0.0, 0.0};
    }
};

// Constant schedules admit direct evaluation of the residual polynomial, so
// sparse recording does not require stepping through every n.
inline Trajectory run_constant_closed_form(const spectrum::DiscreteMeasure& m, const Schedule& s,
                                           long long n_steps, const RunOptions& opt) {
    Trajectory out;
    out.schedule_name = s.name();
    out.probe_lambdas = opt.probes;
    const auto steps = detail::record_steps(n_steps, opt.max_records);
    for (long long n : steps) {
        StepRecord rec;
        rec.n = n;
        rec.alpha = s.alpha;
        rec.beta = s.beta;
        rec.loss = 0.5 * pairwise_map_sum(m.size(), [&](std::size_t k) {
            const double q = specfun::hb_constant_residual(n, s.alpha, s.beta, m.atoms[k]);
            return m.masses[k] * q * q;
        });
        out.records.push_back(rec);
        if (!opt.probes.empty()) {
            std::vector<double> pv(opt.probes.size());
            for (std::size_t j = 0; j < pv.size(); ++j)
                pv[j] = specfun::hb_constant_residual(n, s.alpha, s.beta, opt.probes[j]);
            out.probe_values.push_back(std::move(pv));
        }
        if (!std::isfinite(rec.loss) || rec.loss > 1e12 * out.records.front().loss) {
            out.diverged = true;
            out.diverged_at = n;
            break;
        }
    }
    out.loss0 = out.records.front().loss;
    return out;
}

} // namespace detail

inline Trajectory run(const spectrum::DiscreteMeasure& m, const Schedule& s, long long n_steps,
                      const RunOptions& opt = {}, DirectionCapture* capture = nullptr) {
    if (n_steps < 0) throw parameter_error("run: n_steps >= 0");
    if (s.kind == ScheduleKind::constant && !opt.allow_unstable &&
        !(s.alpha * m.lambda_max() < 2.0 * (1.0 + s.beta)))
        throw parameter_error("run: alpha*lambda_max >= 2(1+beta) diverges; "
                              "set allow_unstable to run anyway");
    if (s.kind == ScheduleKind::scheduled_gd) {
        const long long capacity = (1LL << (s.depth + 1)) - 1;
        if (n_steps > capacity)
            throw parameter_error("run: schedule depth " + std::to_string(s.depth) +
                                  " provides only " + std::to_string(capacity) + " steps");
    }
    if (s.kind == ScheduleKind::constant && opt.fast_closed_form && n_steps > 0)
        return detail::run_constant_closed_form(m, s, n_steps, opt);

    Trajectory out;
    out.schedule_name = s.name();
    out.probe_lambdas = opt.probes;
    detail::SpectralStepper st(m, s, opt, n_steps);
    const auto steps = detail::record_steps(n_steps, opt.max_records);
    std::size_t next_record = 0;
    for (long long n = 0; n <= n_steps; ++n) {
        const bool record_now = next_record < steps.size() && steps[next_record] == n;
        double loss = 0.0;
        std::vector<double> probe_snapshot;
        if (record_now) {
            loss = st.loss();
            probe_snapshot = st.pu; // p_n at the probe points, before stepping
        }
        // A constant schedule's rates are well defined at every index, so the
        // final record keeps them; varying and adaptive schedules leave zeros
        // where no transition was taken.
        std::pair<double, double> rates{0.0, 0.0};
        if (s.kind == ScheduleKind::constant) rates = {s.alpha, s.beta};
        if (n < n_steps) rates = st.step(n, out);
        if (record_now) {
            out.records.push_back({n, loss, rates.first, rates.second});
            if (!opt.probes.empty()) out.probe_values.push_back(std::move(probe_snapshot));
            ++next_record;
            if (!std::isfinite(loss) || loss > 1e12 * out.records.front().loss) {
                out.diverged = true;
                out.diverged_at = n;
                break;
            }
        }
    }
    out.loss0 = out.records.front().loss;
    if (st.cg_fallbacks > 0)
        out.notes.push_back("cg: singular normal equations at " + std::to_string(st.cg_fallbacks) +
                            " step(s), first at step " + std::to_string(st.cg_first_fallback) +
                            "; used steepest-descent steps");
    if (capture) capture->dirs = st.dirs;
    return out;
}

// --- dense runner -------------------------------------------------------------

namespace detail {

struct DenseStepper {
    const spectrum::OperatorProblem& op;
    const Schedule& sched;
    const RunOptions& opt;
    Eigen::VectorXd w, w_prev, df; // df = J w - f*
    std::vector<double> scheduled;
    std::vector<Eigen::VectorXd> dirs, imgs; // stable-CG history (unit image norm)
    bool converged = false;
    bool history_note = false;
    long long cg_fallbacks = 0;
    long long cg_first_fallback = -1;

    DenseStepper(const spectrum::OperatorProblem& p, const Schedule& s, const RunOptions& o,
                 long long n_steps)
        : op(p), sched(s), opt(o) {
        w = Eigen::VectorXd::Zero(op.dim());
        w_prev = w;
        df = -op.target;
        if (sched.kind == ScheduleKind::scheduled_gd)
            scheduled = scheduled_gd_rates(n_steps, sched.a, sched.b);
    }

    double loss() const { return 0.5 * df.squaredNorm(); }

    void move_to(const Eigen::VectorXd& next) {
        w_prev = w;
        w = next;
        df = op.apply(w) - op.target;
    }

    std::pair<double, double> linear_step(double alpha, double beta) {
        const Eigen::VectorXd r = op.apply_transpose(df);
        move_to(w - alpha * r + beta * (w - w_prev));
        return {alpha, beta};
    }

    std::pair<double, double> sd_step(long long n, Trajectory& out) {
        const Eigen::VectorXd r = op.apply_transpose(df);
        const double s2 = op.apply(r).squaredNorm();
        if (!(s2 > 0.0)) {
            converged = true;
            out.notes.push_back("sd: converged at step " + std::to_string(n));
            return {0.0, 0.0};
        }
        const double alpha = r.squaredNorm() / s2;
        move_to(w - alpha * r);
        return {alpha, 0.0};
    }

    std::pair<double, double> cg_step(long long n, Trajectory& out) {
        if (n == 0) return sd_step(n, out);
        const Eigen::VectorXd r = op.apply_transpose(df);
        const Eigen::VectorXd p = w - w_prev;
        const Eigen::VectorXd jr = op.apply(r);
        const Eigen::VectorXd jp = op.apply(p);
        const double s1 = r.squaredNorm(), s2 = jr.squaredNorm();
        if (!(s2 > 0.0)) {
            converged = true;
            out.notes.push_back("cg: converged at step " + std::to_string(n));
            return {0.0, 0.0};
        }
        const double s3 = jp.squaredNorm(), s4 = r.dot(p), s5 = jr.dot(jp);
        const double det = s2 * s3 - s5 * s5;
        if (!(s3 > 0.0) || !(det > 1e-24 * s2 * s3)) {
            if (cg_fallbacks++ == 0) cg_first_fallback = n;
            move_to(w - (s1 / s2) * r);
            return {s1 / s2, 0.0};
        }
        const double alpha = (s1 * s3 - s4 * s5) / det;
        const double beta = (s1 * s5 - s2 * s4) / det;
        move_to(w - alpha * r + beta * p);
        return {alpha, beta};
    }

    std::pair<double, double> stable_step(long long n, Trajectory& out) {
        const bool param = opt.stable_cg_mode == StableCgMode::parameter_space;
        Eigen::VectorXd s = -op.apply_transpose(df);
        Eigen::VectorXd simg = op.apply(s);
        const double n2_orig = simg.squaredNorm();
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t d = 0; d < dirs.size(); ++d) {
                const double c = param ? s.dot(dirs[d]) / dirs[d].squaredNorm()
                                       : simg.dot(imgs[d]);
                s -= c * dirs[d];
                simg -= c * imgs[d];
            }
        }
        const double n2 = simg.squaredNorm();
        // Candidate absorbed by the history means the reachable space is spanned;
        // see the spectral stepper for why stepping on the remainder is unsafe.
        if (!(n2 > 1e-24 * n2_orig) || !std::isfinite(n2)) {
            converged = true;
            out.notes.push_back("stable-cg: converged at step " + std::to_string(n));
            return {0.0, 0.0};
        }
        const double t = -df.dot(simg) / n2;
        move_to(w + t * s);
        if (opt.history_cap > 0 && dirs.size() >= opt.history_cap) {
            dirs.erase(dirs.begin());
            imgs.erase(imgs.begin());
            if (!history_note) {
                out.notes.push_back("stable-cg: history cap " + std::to_string(opt.history_cap) +
                                    " reached; oldest direction dropped");
                history_note = true;
            }
        }
        // store with unit image norm (target mode) or unit parameter norm
        const double nrm = param ? s.norm() : std::sqrt(n2);
        dirs.push_back(s / nrm);
        imgs.push_back(simg / nrm);
        return {t, 0.0};
    }

    std::pair<double, double> step(long long n, Trajectory& out) {
        if (converged) return {0.0, 0.0};
        switch (sched.kind) {
            case ScheduleKind::constant:
                return linear_step(sched.alpha, n == 0 ? 0.0 : sched.beta);
            case ScheduleKind::jacobi_hb: {
                const auto [al, be] = jacobi_schedule(n, sched.a, sched.b);
                return linear_step(al, be);
            }
            case ScheduleKind::scheduled_gd:
                return linear_step(scheduled[static_cast<std::size_t>(n)], 0.0);
            case ScheduleKind::steepest_descent: return sd_step(n, out);
            case ScheduleKind::conjugate_gradients: return cg_step(n, out);
            case ScheduleKind::stable_conjugate_gradients: return stable_step(n, out);
        }
        return {0.0, 0.0};
    }
};

inline double lambda_max_estimate(const spectrum::OperatorProblem& op) {
    Eigen::VectorXd v = Eigen::VectorXd::Ones(op.dim()).normalized();
    double lam = 0.0;
    for (int it = 0; it < 40; ++it) {
        Eigen::VectorXd next = op.apply(op.apply_transpose(v));
        const double nn = next.norm();
        if (!(nn > 0.0)) return 0.0;
        lam = v.dot(next);
        v = next / nn;
    }
    return lam;
}

} // namespace detail

inline Trajectory dense_run(const spectrum::OperatorProblem& op, const Schedule& s,
                            long long n_steps, const RunOptions& opt = {},
                            DirectionCapture* capture = nullptr) {
    if (n_steps < 0) throw parameter_error("dense_run: n_steps >= 0");
    if (op.dim() > opt.dense_dim_cap)
        throw parameter_error("dense_run: dimension " + std::to_string(op.dim()) +
                              " exceeds cap " + std::to_string(opt.dense_dim_cap));
    if (s.kind == ScheduleKind::constant && !opt.allow_unstable) {
        const double lam = detail::lambda_max_estimate(op);
        if (!(s.alpha * lam < 2.0 * (1.0 + s.beta)))
            throw parameter_error("dense_run: alpha*lambda_max >= 2(1+beta) diverges; "
                                  "set allow_unstable to run anyway");
    }
    if (s.kind == ScheduleKind::scheduled_gd) {
        const long long capacity = (1LL << (s.depth + 1)) - 1;
        if (n_steps > capacity)
            throw parameter_error("dense_run: schedule depth " + std::to_string(s.depth) +
                                  " provides only " + std::to_string(capacity) + " steps");
    }
    Trajectory out;
    out.schedule_name = s.name();
    detail::DenseStepper st(op, s, opt, n_steps);
    const auto steps = detail::record_steps(n_steps, opt.max_records);
    std::size_t next_record = 0;
    for (long long n = 0; n <= n_steps; ++n) {
        const bool record_now = next_record < steps.size() && steps[next_record] == n;
        double loss = 0.0;
        if (record_now) loss = st.loss();
        // A constant schedule's rates are well defined at every index, so the
        // final record keeps them; varying and adaptive schedules leave zeros
        // where no transition was taken.
        std::pair<double, double> rates{0.0, 0.0};
        if (s.kind == ScheduleKind::constant) rates = {s.alpha, s.beta};
        if (n < n_steps) rates = st.step(n, out);
        if (record_now) {
            out.records.push_back({n, loss, rates.first, rates.second});
            ++next_record;
            if (!std::isfinite(loss) || loss > 1e12 * out.records.front().loss) {
                out.diverged = true;
                out.diverged_at = n;
                break;
            }
        }
    }
    out.loss0 = out.records.front().loss;
    if (st.cg_fallbacks > 0)
        out.notes.push_back("cg: singular normal equations at " + std::to_string(st.cg_fallbacks) +
                            " step(s), first at step " + std::to_string(st.cg_first_fallback) +
                            "; used steepest-descent steps");
    if (capture) {
        capture->dirs.clear();
        for (const auto& d : st.dirs)
            capture->dirs.emplace_back(d.data(), d.data() + d.size());
    }
    return out;
}

} // namespace plopt::engine
