#pragma once

// Validation suites: oracle-equivalence checks against the closed forms in
// oracle.hpp and behavioral invariants of the algorithms, shared by the CLI
// `validate` command and the standalone acceptance runner. Each check carries
// the measured value and the bound it is held to, so reports need no rerun.

#include <chrono>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "plopt/analysis.hpp"
#include "plopt/engine.hpp"
#include "plopt/measure.hpp"
#include "plopt/oracle.hpp"
#include "plopt/specfun.hpp"

namespace plopt::validate {

enum class Relation { le, ge };

struct Check {
    std::string name;
    double value = 0.0;
    double bound = 0.0;
    Relation rel = Relation::le;
    bool pass = false;
    std::string detail;
};

struct SuiteResult {
    std::string suite;
    std::vector<Check> checks;
    double seconds = 0.0;

    bool passed() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

namespace detail {

inline Check check_le(std::string name, double value, double bound, std::string detail = {}) {
    Check c;
    c.name = std::move(name);
    c.value = value;
    c.bound = bound;
    c.rel = Relation::le;
    c.pass = std::isfinite(value) && value <= bound;
    c.detail = std::move(detail);
    return c;
}

inline Check check_ge(std::string name, double value, double bound, std::string detail = {}) {
    Check c = check_le(std::move(name), value, bound, std::move(detail));
    c.rel = Relation::ge;
    c.pass = std::isfinite(value) && value >= bound;
    return c;
}

// |measured - target| <= tol, with the operands recorded for the report.
inline Check check_near(std::string name, double measured, double target, double tol,
                        std::string extra = {}) {
    std::ostringstream d;
    d << "measured " << format_short(measured) << " target " << format_short(target);
    if (!extra.empty()) d << "; " << extra;
    return check_le(std::move(name), std::abs(measured - target), tol, d.str());
}

inline std::string window_detail(const analysis::FitReport& rep) {
    std::ostringstream d;
    d << "window [" << rep.n_lo << ", " << rep.n_hi << "], " << rep.points_used
      << " points, R^2 " << format_short(rep.r2);
    return d.str();
}

inline spectrum::OperatorProblem diagonal_problem(const spectrum::DiscreteMeasure& m) {
    const auto K = static_cast<Eigen::Index>(m.size());
    spectrum::OperatorProblem op;
    op.J = Eigen::MatrixXd::Zero(K, K);
    op.target.resize(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        op.J(k, k) = std::sqrt(m.atoms[static_cast<std::size_t>(k)]);
        op.target[k] = std::sqrt(m.masses[static_cast<std::size_t>(k)]);
    }
    return op;
}

inline spectrum::DiscreteMeasure log_spaced_measure(std::size_t K, double lo, double hi) {
    std::vector<double> atoms(K), masses(K);
    for (std::size_t k = 0; k < K; ++k) {
        const double f = K == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(K - 1);
        atoms[k] = hi * std::pow(lo / hi, f);
        masses[k] = (1.0 + 0.3 * std::sin(static_cast<double>(k + 1))) / static_cast<double>(K);
    }
    return spectrum::make_measure(std::move(atoms), std::move(masses));
}

// --- suite: theorem3 (CG on the equal-mass power-law measure) -------------------

// Exact minimum of sum m_k p(lambda_k)^2 over degree-n polynomials with
// p(0) = 1, via the reciprocal of the Christoffel sum 1/sum_k phi_k(0)^2.
// The orthonormal phi_k come from a Stieltjes recurrence carried at the
// atoms in long double, a route entirely independent of the cg iteration.
inline std::vector<double> measure_optimal_losses(const spectrum::DiscreteMeasure& m, int nmax) {
    const std::size_t M = m.size();
    std::vector<long double> prev(M, 0.0L), cur(M);
    long double total = 0.0L;
    for (std::size_t i = 0; i < M; ++i) total += static_cast<long double>(m.masses[i]);
    const long double phi0 = 1.0L / sqrtl(total);
    for (std::size_t i = 0; i < M; ++i) cur[i] = phi0;
    long double v_prev = 0.0L, v_cur = phi0;  // values at lambda = 0
    long double b_prev = 0.0L;
    long double sum = phi0 * phi0;
    std::vector<double> out{static_cast<double>(0.5L / sum)};
    for (int k = 0; k < nmax; ++k) {
        long double a = 0.0L;
        for (std::size_t i = 0; i < M; ++i)
            a += static_cast<long double>(m.masses[i]) * static_cast<long double>(m.atoms[i]) *
                 cur[i] * cur[i];
        long double b2 = 0.0L;
        for (std::size_t i = 0; i < M; ++i) {
            const long double t =
                (static_cast<long double>(m.atoms[i]) - a) * cur[i] - b_prev * prev[i];
            prev[i] = cur[i];
            cur[i] = t;
            b2 += static_cast<long double>(m.masses[i]) * t * t;
        }
        const long double b = sqrtl(b2);
        for (std::size_t i = 0; i < M; ++i) cur[i] /= b;
        const long double v_next = ((0.0L - a) * v_cur - b_prev * v_prev) / b;
        v_prev = v_cur;
        v_cur = v_next;
        b_prev = b;
        sum += v_cur * v_cur;
        out.push_back(static_cast<double>(0.5L / sum));
    }
    return out;
}

inline SuiteResult suite_theorem3() {
    SuiteResult out;
    out.suite = "theorem3";
    double worst_opt = 0.0;
    for (double zeta : {0.5, 1.0, 2.0}) {
        auto m = spectrum::equal_mass_discretization({zeta}, 100000);
        auto t = engine::run(m, engine::Schedule::ConjugateGradients(), 25);
        const auto opt = measure_optimal_losses(m, 25);
        double worst = 0.0;
        long long worst_n = 0;
        for (long long n = 1; n <= 25; ++n) {
            const double got = t.records[static_cast<std::size_t>(n)].loss;
            const double ref = oracle::cg_exact_powerlaw_loss(n, zeta);
            const double rel = std::abs(got - ref) / ref;
            if (rel > worst) {
                worst = rel;
                worst_n = n;
            }
            worst_opt = std::max(
                worst_opt, std::abs(got - opt[static_cast<std::size_t>(n)]) / got);
        }
        out.checks.push_back(check_le("cg vs closed form, zeta=" + format_short(zeta), worst, 0.01,
                                      "worst relative error at n=" + std::to_string(worst_n)));
    }
    // Separates engine error from quantization error: cg should sit on the
    // exact optimum of the discretized measure whether or not that optimum
    // still tracks the continuum formula at this atom count.
    out.checks.push_back(check_le("cg attains each measure's exact optimum", worst_opt, 1e-10,
                                  "vs an extended-precision orthogonal-polynomial recomputation"));
    return out;
}

// --- suite: theorem11 (stable CG on the bidiagonal chain) -----------------------

inline SuiteResult suite_theorem11() {
    SuiteResult out;
    out.suite = "theorem11";
    const double zeta = 0.5, nu = 1.0;

    auto op = spectrum::cg_lowerbound_operator(zeta, nu, 200);
    auto t = engine::dense_run(op, engine::Schedule::StableConjugateGradients(), 50);
    double worst = 0.0;
    for (long long n = 1; n <= 50; ++n) {
        const double ref = oracle::cg_chain_loss(n, zeta, nu);
        worst = std::max(worst, std::abs(t.records[static_cast<std::size_t>(n)].loss - ref) / ref);
    }
    out.checks.push_back(check_le("stable cg vs chain formula", worst, 1e-6,
                                  "max relative error over n <= 50, N=200"));

    // The finite section distorts the smallest eigenvalues (near-kernel
    // directions at the truncation edge), so the first 200 eigenvalues are
    // computed from a doubled section and their stability is checked against
    // a quadrupled one.
    auto e400 = spectrum::gram_eigenvalues(spectrum::cg_lowerbound_operator(zeta, nu, 400));
    auto e800 = spectrum::gram_eigenvalues(spectrum::cg_lowerbound_operator(zeta, nu, 800));
    double lower = 1e300, upper = 0.0, drift = 0.0;
    for (std::size_t k = 1; k <= 200; ++k) {
        const double lam = e400[k - 1];
        lower = std::min(lower, lam / std::pow(2.0 * static_cast<double>(k), -nu));
        upper = std::max(upper, lam / (9.0 * std::pow(static_cast<double>(k), -nu)));
        drift = std::max(drift, std::abs(lam - e800[k - 1]) / e800[k - 1]);
    }
    out.checks.push_back(check_ge("eigenvalues above (2k)^-nu", lower, 1.0,
                                  "min ratio lambda_k / (2k)^-nu over k <= 200"));
    out.checks.push_back(check_le("eigenvalues below 9 k^-nu", upper, 1.0,
                                  "max ratio lambda_k / 9k^-nu over k <= 200"));
    out.checks.push_back(check_le("finite-section stability", drift, 1e-2,
                                  "top-200 eigenvalue drift between N=400 and N=800"));
    return out;
}

// --- suite: figure2a (fitted exponents for all six algorithms) ------------------

inline SuiteResult suite_figure2a() {
    SuiteResult out;
    out.suite = "figure2a";
    const double zeta = 1.0, nu = 1.5;
    auto m = spectrum::synthetic_diagonal(100000, nu, zeta);
    const double lam_low = analysis::lambda_low(m);

    auto fitted = [&](const engine::Trajectory& t, const analysis::FitOptions& fo,
                      oracle::AlgorithmKind kind, oracle::Assumptions assume, double tol,
                      const std::string& label) {
        auto rep = analysis::fit_power_law(t, fo);
        const auto pred = oracle::theoretical_exponent(kind, zeta, nu, assume);
        out.checks.push_back(check_near("exponent " + label, rep.exponent, pred.exponent, tol,
                                        window_detail(rep)));
    };

    // Constant-rate methods resolve the spectrum at rate 1/n, so their fits
    // use the reduced top fraction (see FitOptions::top_fraction).
    {
        const double nth =
            analysis::threshold_step(analysis::ThresholdKind::constant_rate, zeta, nu, 1.0, 0.0, lam_low);
        engine::RunOptions ro;
        ro.max_records = 800;
        analysis::FitOptions fo;
        fo.n_th = nth;
        fo.top_fraction = 1.0 / 25.0;
        auto t = engine::run(m, engine::Schedule::Constant(1.0), static_cast<long long>(nth / 25.0) + 1, ro);
        fitted(t, fo, oracle::AlgorithmKind::gd_constant, oracle::Assumptions::cdf_only, 0.05, "gd");
    }
    {
        const double nth =
            analysis::threshold_step(analysis::ThresholdKind::constant_rate, zeta, nu, 1.0, 0.9, lam_low);
        engine::RunOptions ro;
        ro.max_records = 800;
        analysis::FitOptions fo;
        fo.n_th = nth;
        fo.top_fraction = 1.0 / 25.0;
        auto t = engine::run(m, engine::Schedule::Constant(1.0, 0.9), static_cast<long long>(nth / 25.0) + 1, ro);
        fitted(t, fo, oracle::AlgorithmKind::hb_constant, oracle::Assumptions::cdf_only, 0.05, "hb");
    }
    {
        // SD costs a full sweep per step; 4.5e5 steps keeps the suite within
        // its budget and still leaves >100 recorded points inside the window.
        const double nth =
            analysis::threshold_step(analysis::ThresholdKind::constant_rate, zeta, nu, 1.0, 0.0, lam_low);
        engine::RunOptions ro;
        ro.max_records = 2000;
        analysis::FitOptions fo;
        fo.n_th = nth;
        fo.top_fraction = 1.0 / 25.0;
        auto t = engine::run(m, engine::Schedule::SteepestDescent(), 450000, ro);
        fitted(t, fo, oracle::AlgorithmKind::steepest_descent, oracle::Assumptions::cdf_only, 0.1, "sd");
    }
    const double nth_jac =
        analysis::threshold_step(analysis::ThresholdKind::jacobi_scheduled, zeta, nu, 0.0, 0.0, lam_low);
    const long long n_jac = static_cast<long long>(nth_jac / 3.0) + 5;
    {
        analysis::FitOptions fo;
        fo.n_th = nth_jac;
        auto t = engine::run(m, engine::Schedule::JacobiHB(1.0, 0.0), n_jac);
        fitted(t, fo, oracle::AlgorithmKind::hb_jacobi, oracle::Assumptions::cdf_only, 0.1, "jacobi-hb");
    }
    {
        analysis::FitOptions fo;
        fo.n_th = nth_jac;
        fo.block_ends_only = true;
        auto t = engine::run(m, engine::Schedule::ScheduledGD(1.0, 0.0, 11), n_jac);
        fitted(t, fo, oracle::AlgorithmKind::gd_scheduled, oracle::Assumptions::cdf_only, 0.15,
               "scheduled-gd");
    }
    {
        // Krylov methods settle onto the asymptotic slope late; estimate the
        // outer end of the power law (r0 -> 0) and fit its upper reach.
        const double nth = analysis::threshold_step(analysis::ThresholdKind::stable_cg, zeta, nu, 0.0,
                                                    0.0, lam_low, 0.01);
        analysis::FitOptions fo;
        fo.n_th = nth;
        fo.bottom_fraction = 1.0 / 5.0;
        auto t = engine::run(m, engine::Schedule::StableConjugateGradients(),
                             static_cast<long long>(nth / 3.0) + 2);
        fitted(t, fo, oracle::AlgorithmKind::stable_conjugate_gradients,
               oracle::Assumptions::cdf_and_eigendecay, 0.2, "stable-cg");
    }
    return out;
}

// --- suite: theorem1 (constant-rate prefactor) -----------------------------------

inline SuiteResult suite_theorem1() {
    SuiteResult out;
    out.suite = "theorem1";
    const double zeta = 1.0;
    auto m = spectrum::discrete_powerlaw(zeta, 1.5, 1000000);
    engine::RunOptions ro;
    ro.max_records = 32;
    const long long n = 10000;
    const double ref = std::tgamma(zeta + 1.0) / 2.0;
    for (double beta : {0.0, 0.9}) {
        auto t = engine::run(m, engine::Schedule::Constant(1.0, beta), n, ro);
        const double ratio =
            t.final_loss() * std::pow(2.0 * static_cast<double>(n) / (1.0 - beta), zeta) / ref;
        out.checks.push_back(check_near("loss prefactor, beta=" + format_short(beta), ratio, 1.0,
                                        0.05, "L_n (2 alpha n / (1-beta))^zeta vs Gamma(zeta+1)/2"));
    }
    return out;
}

// --- suite: theorem4 (Jacobi-HB upper bound) -------------------------------------

inline SuiteResult suite_theorem4() {
    SuiteResult out;
    out.suite = "theorem4";
    const double S = oracle::jacobi_bound_constant(1.0, 1.0);
    out.checks.push_back(check_near("bound constant S(1,1)", S, 41.07, 0.01));

    auto m = spectrum::synthetic_diagonal(100000, 1.5, 1.0);
    auto t = engine::run(m, engine::Schedule::JacobiHB(1.0, 0.0), 10000);
    double worst = 0.0;
    long long worst_n = 0;
    for (long long n = 100; n <= 10000; ++n) {
        const double bound = 0.5 * S * std::pow(static_cast<double>(n), -2.0) * 1.1;
        const double q = t.records[static_cast<std::size_t>(n)].loss / bound;
        if (q > worst) {
            worst = q;
            worst_n = n;
        }
    }
    out.checks.push_back(check_le("loss under 1.1x theoretical bound", worst, 1.0,
                                  "max loss/bound over n in [100, 10^4], worst at n=" +
                                      std::to_string(worst_n)));
    return out;
}

// --- suite: theorem8 (steepest descent: rates, exponent, oscillation) ------------

inline SuiteResult suite_theorem8() {
    SuiteResult out;
    out.suite = "theorem8";
    {
        auto m = spectrum::sd_lowerbound_measure(1.0, 2.0, 10000);
        auto t = engine::run(m, engine::Schedule::SteepestDescent(), 10000);
        double amax = 0.0;
        for (const auto& r : t.records) amax = std::max(amax, r.alpha);
        out.checks.push_back(check_le("adaptive rates bounded", amax, 50.0,
                                      "max alpha_n over n <= 10^4"));
        // The measure's power law reaches lambda ~ 10^-8, far below what 10^4
        // steps resolve, so the asymptotic window is set explicitly.
        analysis::FitOptions fo;
        fo.window = {{100.0, 10000.0}};
        auto rep = analysis::fit_power_law(t, fo);
        out.checks.push_back(check_near("sd exponent", rep.exponent, 1.0, 0.1, window_detail(rep)));
    }
    {
        auto uniform = spectrum::equal_mass_discretization({1.0}, 1000);
        auto t = engine::run(uniform, engine::Schedule::SteepestDescent(), 400);
        auto osc = analysis::oscillation_diagnostics(t);
        const double amp = osc ? osc->amplitude : std::nan("");
        out.checks.push_back(check_le("period-2 rate oscillation", amp, 1e-3,
                                      "trailing sup |alpha_{n+2} - alpha_n| on the uniform measure"));
    }
    return out;
}

// --- suite: properties (oracle-free invariants) ----------------------------------

inline SuiteResult suite_properties() {
    SuiteResult out;
    out.suite = "properties";
    using engine::Schedule;

    const std::vector<std::pair<std::string, Schedule>> schedules = {
        {"gd", Schedule::Constant(1.0)},
        {"hb", Schedule::Constant(0.8, 0.5)},
        {"jacobi-hb", Schedule::JacobiHB(1.0, 0.0)},
        {"scheduled-gd", Schedule::ScheduledGD(1.0, 0.0, 7)},
        {"sd", Schedule::SteepestDescent()},
        {"cg", Schedule::ConjugateGradients()},
        {"stable-cg", Schedule::StableConjugateGradients()},
    };

    auto m30 = log_spaced_measure(30, 1e-4, 1.0);

    {
        // p_n(0) = 1: the residual polynomial of every method is normalized.
        engine::RunOptions ro;
        ro.probes = {0.0};
        double worst = 0.0;
        for (const auto& [label, s] : schedules) {
            auto t = engine::run(m30, s, 60, ro);
            for (const auto& pv : t.probe_values) worst = std::max(worst, std::abs(pv[0] - 1.0));
        }
        out.checks.push_back(check_le("residual normalization p_n(0)=1", worst, 1e-12,
                                      "all schedules, 60 steps"));
    }
    {
        // exact line search implies per-step monotonicity
        double worst = -1.0;
        for (const char* which : {"sd", "cg", "stable-cg"}) {
            const Schedule s = which == std::string("sd")   ? Schedule::SteepestDescent()
                               : which == std::string("cg") ? Schedule::ConjugateGradients()
                                                            : Schedule::StableConjugateGradients();
            auto t = engine::run(m30, s, 120);
            for (std::size_t i = 0; i + 1 < t.records.size(); ++i)
                worst = std::max(worst, (t.records[i + 1].loss - t.records[i].loss) / t.loss0);
        }
        out.checks.push_back(check_le("sd/cg losses never increase", worst, 0.0,
                                      "max forward loss difference / loss_0"));
    }
    {
        // CG terminates on the Krylov dimension: K atoms mean exact
        // convergence at step K (moderate conditioning keeps this visible
        // in floating point).
        auto m = log_spaced_measure(25, 0.25, 1.0);
        auto t = engine::run(m, Schedule::ConjugateGradients(), 25);
        out.checks.push_back(check_le("cg exact termination at step K", t.final_loss() / t.loss0,
                                      1e-20, "25 atoms, loss at n=25 relative to loss_0"));
    }
    {
        // Krylov optimality: no other schedule is ever ahead of CG.
        auto cg = engine::run(m30, Schedule::ConjugateGradients(), 60);
        double worst = -1.0;
        for (const auto& [label, s] : schedules) {
            if (s.kind == engine::ScheduleKind::conjugate_gradients ||
                s.kind == engine::ScheduleKind::stable_conjugate_gradients)
                continue;
            auto t = engine::run(m30, s, 60);
            for (std::size_t i = 0; i < t.records.size(); ++i)
                worst = std::max(worst, (cg.records[i].loss - t.records[i].loss) / cg.loss0);
        }
        out.checks.push_back(check_le("cg dominates step-wise", worst, 1e-12,
                                      "max (L_cg - L_other) / loss_0 over 60 steps"));
    }
    {
        // CG is also below the Chebyshev trial-polynomial upper bound.
        auto m = spectrum::discrete_powerlaw(1.0, 1.5, 2000);
        auto t = engine::run(m, Schedule::ConjugateGradients(), 60);
        double worst = 0.0;
        for (long long n : {2, 5, 10, 20, 40, 60}) {
            const double bound = oracle::chebyshev_trial_loss(n, m, 0.5);
            worst = std::max(worst, t.records[static_cast<std::size_t>(n)].loss / bound);
        }
        out.checks.push_back(
            check_le("cg under chebyshev trial bound", worst, 1.0, "max L_cg(n)/bound(n)"));
    }
    {
        // Three-term recurrences match direct residual-polynomial evaluation.
        std::vector<double> grid;
        for (int i = 0; i <= 40; ++i) grid.push_back(2.0 * i / 40.0);
        engine::RunOptions ro;
        ro.probes = grid;
        double worst = 0.0;
        auto jac = engine::run(m30, Schedule::JacobiHB(1.0, 0.0), 30, ro);
        auto hb = engine::run(m30, Schedule::Constant(0.9, 0.6), 30, ro);
        for (std::size_t i = 0; i < jac.records.size(); ++i) {
            const auto n = static_cast<int>(jac.records[i].n);
            for (std::size_t j = 0; j < grid.size(); ++j) {
                worst = std::max(worst, std::abs(jac.probe_values[i][j] -
                                                 specfun::jacobi_residual_eval(n, {1.0, 0.0}, grid[j])));
                worst = std::max(worst, std::abs(hb.probe_values[i][j] -
                                                 specfun::hb_constant_residual(n, 0.9, 0.6, grid[j])));
            }
        }
        out.checks.push_back(check_le("recurrence matches polynomial", worst, 1e-9,
                                      "jacobi and constant-hb residuals on [0, 2], n <= 30"));
    }
    {
        // Scheduled-GD prefix products stay bounded by 1 on the spectrum.
        double worst = 0.0;
        for (auto [a, b] : {std::pair{1.0, 0.0}, {2.0, 0.5}}) {
            const auto rates = engine::scheduled_gd_rates(127, a, b);
            for (int i = 0; i <= 400; ++i) {
                const double lam = static_cast<double>(i) / 400.0;
                double prod = 1.0;
                for (double alpha : rates) {
                    prod *= 1.0 - alpha * lam;
                    worst = std::max(worst, std::abs(prod));
                }
            }
        }
        out.checks.push_back(check_le("scheduled-gd prefix boundedness", worst, 1.0 + 1e-12,
                                      "max |partial product| on [0, 1], 127-step plans"));
    }
    {
        // Spectral and dense runners implement the same iteration.  Compared
        // while the loss is resolvable in double precision: the conjugate
        // gradient rates feed rounding error back into the iterate, so once
        // the residual nears its fp plateau (~1e-9 of the start here) two
        // equivalent summation orders stop agreeing in relative terms.
        auto m = log_spaced_measure(50, 2e-2, 1.0);
        auto op = diagonal_problem(m);
        double worst = 0.0;
        for (const auto& [label, s] : schedules) {
            auto ts = engine::run(m, s, 100);
            auto td = engine::dense_run(op, s, 100);
            for (std::size_t i = 0; i < ts.records.size(); ++i) {
                const double a = ts.records[i].loss, b = td.records[i].loss;
                if (a < 1e-6 * ts.loss0 || b < 1e-6 * ts.loss0) continue;
                worst = std::max(worst, std::abs(a - b) / std::max(a, b));
            }
        }
        out.checks.push_back(check_le("spectral matches dense", worst, 1e-8,
                                      "all schedules, 100 steps, 50 atoms, loss above 1e-6 of start"));
    }
    {
        // Eigendecomposition ingestion inverts measure -> gram assembly.
        auto m = log_spaced_measure(40, 1e-3, 1.0);
        const int K = static_cast<int>(m.size());
        spectrum::detail::NormalSampler rng(223);
        Eigen::MatrixXd R(K, K);
        for (int i = 0; i < K; ++i)
            for (int j = 0; j < K; ++j) R(i, j) = rng();
        const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(R).householderQ();
        Eigen::VectorXd lam(K), c(K);
        for (int i = 0; i < K; ++i) {
            lam[i] = m.atoms[static_cast<std::size_t>(i)];
            c[i] = std::sqrt(m.masses[static_cast<std::size_t>(i)]);
        }
        Eigen::MatrixXd G = Q * lam.asDiagonal() * Q.transpose();
        G = 0.5 * (G + G.transpose());
        auto back = spectrum::spectral_measure_from_gram(G, Q * c);
        double worst = 0.0;
        if (back.size() != m.size()) {
            worst = 1.0;
        } else {
            for (std::size_t k = 0; k < m.size(); ++k) {
                worst = std::max(worst, std::abs(back.atoms[k] * back.meta.lambda_scale - m.atoms[k]) /
                                            m.atoms[k]);
                worst = std::max(worst, std::abs(back.masses[k] - m.masses[k]) / m.masses[k]);
            }
        }
        out.checks.push_back(check_le("gram ingestion round-trip", worst, 1e-8,
                                      "40-atom measure through assemble + eigendecompose"));
    }
    {
        // The fitter is exact on exact power laws.
        engine::Trajectory t;
        t.schedule_name = "synthetic";
        for (long long n = 0; n <= 2000; ++n)
            t.records.push_back({n, 0.5 * std::pow(static_cast<double>(std::max(n, 1LL)), -2.0), 0, 0});
        t.loss0 = 0.5;
        analysis::FitOptions fo;
        fo.window = {{10.0, 2000.0}};
        auto rep = analysis::fit_power_law(t, fo);
        out.checks.push_back(check_le("fit recovers exact power law", 1.0 - rep.r2, 1e-12,
                                      "1 - R^2 on L = n^-2 / 2; exponent " +
                                          format_short(rep.exponent)));
    }
    return out;
}

// --- suite: figure5 (tightness of the Jacobi parameter condition) ----------------

inline SuiteResult suite_figure5() {
    SuiteResult out;
    out.suite = "figure5";
    const double zeta = 1.0, nu = 1.5;
    auto m = spectrum::synthetic_diagonal(100000, nu, zeta);
    const double nth = analysis::threshold_step(analysis::ThresholdKind::jacobi_scheduled, zeta, nu,
                                                0.0, 0.0, analysis::lambda_low(m));
    const long long n_run = static_cast<long long>(nth / 3.0) + 5;
    analysis::FitOptions fo;
    fo.n_th = nth;
    auto exponent = [&](double a, double b) {
        auto t = engine::run(m, engine::Schedule::JacobiHB(a, b), n_run);
        return analysis::fit_power_law(t, fo).exponent;
    };

    // a > zeta - 1/2 is required for the 2*zeta rate; a = zeta - 0.75 sits
    // outside and must visibly degrade, the two admissible values must not.
    out.checks.push_back(check_le("degraded exponent at a=zeta-0.75", exponent(zeta - 0.75, 0.0),
                                  1.9, "fitted exponent, 2.0 expected only for admissible a"));
    out.checks.push_back(
        check_near("exponent at a=zeta-0.25", exponent(zeta - 0.25, 0.0), 2.0, 0.15));
    out.checks.push_back(check_near("exponent at a=zeta+1", exponent(zeta + 1.0, 0.0), 2.0, 0.15));

    const double x0 = exponent(1.0, 0.0);
    out.checks.push_back(check_near("b=-0.5 leaves exponent unchanged", exponent(1.0, -0.5), x0,
                                    0.05, "baseline a=1, b=0"));
    out.checks.push_back(check_near("b=+0.5 leaves exponent unchanged", exponent(1.0, 0.5), x0,
                                    0.05, "baseline a=1, b=0"));
    return out;
}

// --- suite: representation (spectral vs dense, reported per schedule) -------------

inline SuiteResult suite_representation() {
    SuiteResult out;
    out.suite = "representation";
    // Same protocol as the equivalence check in the property suite: compare
    // while the loss stays resolvable above the double-precision plateau.
    auto m = log_spaced_measure(50, 2e-2, 1.0);
    auto op = diagonal_problem(m);
    const std::vector<std::pair<std::string, engine::Schedule>> schedules = {
        {"gd", engine::Schedule::Constant(1.0)},
        {"hb", engine::Schedule::Constant(0.8, 0.5)},
        {"jacobi-hb", engine::Schedule::JacobiHB(1.0, 0.0)},
        {"scheduled-gd", engine::Schedule::ScheduledGD(1.0, 0.0, 7)},
        {"sd", engine::Schedule::SteepestDescent()},
        {"cg", engine::Schedule::ConjugateGradients()},
        {"stable-cg", engine::Schedule::StableConjugateGradients()},
    };
    for (const auto& [label, s] : schedules) {
        auto ts = engine::run(m, s, 100);
        auto td = engine::dense_run(op, s, 100);
        double worst = 0.0;
        for (std::size_t i = 0; i < ts.records.size(); ++i) {
            const double a = ts.records[i].loss, b = td.records[i].loss;
            if (a < 1e-6 * ts.loss0 || b < 1e-6 * ts.loss0) continue;
            worst = std::max(worst, std::abs(a - b) / std::max(a, b));
        }
        out.checks.push_back(check_le("spectral vs dense: " + label, worst, 1e-8,
                                      "100 steps, 50 atoms, loss above 1e-6 of start"));
    }
    return out;
}

} // namespace detail

inline std::vector<std::string> suite_names() {
    return {"theorem3", "theorem11", "figure2a", "theorem1",
            "theorem4", "theorem8",  "properties", "figure5", "representation"};
}

inline SuiteResult run_suite(const std::string& name) {
    using Clock = std::chrono::steady_clock;
    const auto t0 = Clock::now();
    SuiteResult out;
    if (name == "theorem3") out = detail::suite_theorem3();
    else if (name == "theorem11") out = detail::suite_theorem11();
    else if (name == "figure2a") out = detail::suite_figure2a();
    else if (name == "theorem1") out = detail::suite_theorem1();
    else if (name == "theorem4") out = detail::suite_theorem4();
    else if (name == "theorem8") out = detail::suite_theorem8();
    else if (name == "properties") out = detail::suite_properties();
    else if (name == "figure5") out = detail::suite_figure5();
    else if (name == "representation") out = detail::suite_representation();
    else throw parameter_error("unknown validation suite '" + name + "'");
    out.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return out;
}

} // namespace plopt::validate
