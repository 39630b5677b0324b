#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "plopt/analysis.hpp"
#include "plopt/engine.hpp"
#include "plopt/oracle.hpp"

using Catch::Approx;
using namespace plopt;
using namespace plopt::analysis;

namespace {

// Trajectory with prescribed losses at steps 1..N (plus the conventional
// zeroth record), for feeding the fitter synthetic curves.
engine::Trajectory synthetic_trajectory(long long n_max,
                                        const std::function<double(double)>& loss_of_n) {
    engine::Trajectory t;
    t.schedule_name = "synthetic";
    t.loss0 = loss_of_n(1.0) * 2.0;
    t.records.push_back({0, t.loss0, 0.0, 0.0});
    for (long long n = 1; n <= n_max; ++n)
        t.records.push_back({n, loss_of_n(static_cast<double>(n)), 0.0, 0.0});
    return t;
}

// Least squares done by hand: slope and intercept from the textbook formulas,
// no shared code with the implementation.
std::pair<double, double> hand_ols(const double* x, const double* y, int n) {
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < n; ++i) {
        mx += x[i] / n;
        my += y[i] / n;
    }
    double num = 0.0, den = 0.0;
    for (int i = 0; i < n; ++i) {
        num += (x[i] - mx) * (y[i] - my);
        den += (x[i] - mx) * (x[i] - mx);
    }
    const double slope = num / den;
    return {slope, my - slope * mx};
}

} // namespace

TEST_CASE("threshold step formulas") {
    CHECK(threshold_step(ThresholdKind::constant_rate, 1.0, 0.0, 1.0, 0.9, 1e-6, 0.5) ==
          Approx(5e4).epsilon(1e-12));
    CHECK(threshold_step(ThresholdKind::jacobi_scheduled, 1.0, 0.0, 0.0, 0.0, 1e-6, 0.5) ==
          Approx(500.0).epsilon(1e-12));
    // stable cg: (1-r0)^{1/zeta} lambda^{-1/(nu+2)}
    CHECK(threshold_step(ThresholdKind::stable_cg, 1.0, 1.5, 0.0, 0.0, 1e-7, 0.5) ==
          Approx(0.5 * std::pow(1e-7, -1.0 / 3.5)).epsilon(1e-12));

    // The controlled-loss fraction bounds the front position: demanding that
    // nearly all loss stays controlled (r0 -> 1) collapses the window to the
    // start of training, while r0 -> 0 waits for the front to reach
    // lambda_low itself.
    CHECK(threshold_step(ThresholdKind::constant_rate, 1.0, 0.0, 1.0, 0.0, 1e-4, 1.0 - 1e-12) <
          1e-7);
    CHECK(threshold_step(ThresholdKind::constant_rate, 1.0, 0.0, 1.0, 0.0, 1e-4, 1e-12) ==
          Approx(1e4).epsilon(1e-9));

    // Monotone: smaller lambda_low pushes the breakdown later, for each kind.
    for (auto kind :
         {ThresholdKind::constant_rate, ThresholdKind::jacobi_scheduled, ThresholdKind::stable_cg}) {
        double prev = 0.0;
        for (double lam : {1e-2, 1e-4, 1e-6, 1e-8}) {
            const double v = threshold_step(kind, 0.75, 1.2, 0.8, 0.1, lam, 0.5);
            CHECK(v > prev);
            prev = v;
        }
    }

    CHECK_THROWS_AS(threshold_step(ThresholdKind::constant_rate, 1.0, 0.0, 1.0, 0.0, 1e-6, 0.0),
                    parameter_error);
    CHECK_THROWS_AS(threshold_step(ThresholdKind::constant_rate, 1.0, 0.0, 1.0, 0.0, 1e-6, 1.0),
                    parameter_error);
    CHECK_THROWS_AS(threshold_step(ThresholdKind::constant_rate, 1.0, 0.0, 1.0, 0.0, 0.0, 0.5),
                    parameter_error);
    CHECK_THROWS_AS(threshold_step(ThresholdKind::stable_cg, 1.0, 0.0, 1.0, 0.0, 1e-6, 0.5),
                    parameter_error);
}

TEST_CASE("lambda low") {
    auto m = spectrum::synthetic_diagonal(1000000, 1.5, 1.0);
    CHECK(lambda_low(m) == Approx(1e-9).epsilon(1e-12));
    CHECK(lambda_low(m, 5e-5) == 5e-5);
    auto single = spectrum::make_measure({0.37}, {1.0});
    CHECK(lambda_low(single) == 0.37);
    spectrum::DiscreteMeasure empty;
    CHECK_THROWS_AS(lambda_low(empty), data_error);
    CHECK_THROWS_AS(lambda_low(m, -1.0), parameter_error);
}

TEST_CASE("power law fit recovers exact laws to machine precision") {
    auto t = synthetic_trajectory(1000, [](double n) { return 0.5 * std::pow(n, -2.0); });
    FitOptions opt;
    opt.window = {{10.0, 1000.0}};
    auto rep = fit_power_law(t, opt);
    CHECK(rep.exponent == Approx(2.0).epsilon(1e-12));
    CHECK(rep.prefactor == Approx(1.0).epsilon(1e-11));
    CHECK(rep.r2 >= 1.0 - 1e-12);
    CHECK(rep.n_lo == 10);
    CHECK(rep.n_hi == 1000);
    CHECK(rep.points_used <= 200);

    // Rescaling all losses moves the prefactor and nothing else.
    auto ts = synthetic_trajectory(1000, [](double n) { return 3.7 * 0.5 * std::pow(n, -2.0); });
    auto reps = fit_power_law(ts, opt);
    CHECK(reps.exponent == Approx(rep.exponent).epsilon(1e-12));
    CHECK(reps.prefactor == Approx(3.7 * rep.prefactor).epsilon(1e-11));
    CHECK(reps.r2 >= 1.0 - 1e-12);
}

TEST_CASE("power law fit matches a hand-computed least squares") {
    // Ten noisy (non-power-law) points; the fit must equal the textbook
    // normal-equation solution over exactly these points.
    const long long ns[10] = {10, 14, 20, 28, 40, 52, 64, 78, 90, 96};
    engine::Trajectory t;
    t.schedule_name = "synthetic";
    t.records.push_back({0, 1.0, 0.0, 0.0});
    double xs[10], ys[10];
    for (int i = 0; i < 10; ++i) {
        const double n = static_cast<double>(ns[i]);
        const double loss = 0.4 * std::pow(n, -1.3) * (1.0 + 0.2 * std::cos(n));
        t.records.push_back({ns[i], loss, 0.0, 0.0});
        xs[i] = std::log(n);
        ys[i] = std::log(loss);
    }
    auto [slope, intercept] = hand_ols(xs, ys, 10);

    FitOptions opt;
    opt.window = {{5.0, 100.0}};
    auto rep = fit_power_law(t, opt);
    CHECK(rep.points_used == 10);
    CHECK(rep.exponent == Approx(-slope).epsilon(1e-13));
    CHECK(rep.prefactor == Approx(2.0 * std::exp(intercept)).epsilon(1e-12));
}

TEST_CASE("power law fit tolerates bounded multiplicative perturbations") {
    auto t = synthetic_trajectory(1000, [](double n) {
        return 0.5 * std::pow(n, -2.0) * (1.0 + 0.3 * std::sin(std::log(n)));
    });
    FitOptions opt;
    opt.window = {{10.0, 1000.0}};
    auto rep = fit_power_law(t, opt);
    CHECK(rep.exponent > 1.9);
    CHECK(rep.exponent < 2.1);
    CHECK(rep.r2 > 0.9);
}

TEST_CASE("auto window follows the threshold estimate") {
    auto t = synthetic_trajectory(40000, [](double n) { return 0.5 * std::pow(n, -1.0); });
    FitOptions opt;
    opt.n_th = 30000.0;
    auto rep = fit_power_law(t, opt);
    CHECK(rep.n_lo == 300);
    CHECK(rep.n_hi == 10000);
    CHECK(rep.n_th.has_value());
    CHECK(static_cast<double>(rep.n_hi) <= *rep.n_th / 3.0);
    CHECK(rep.exponent == Approx(1.0).epsilon(1e-12));

    FitOptions small;
    small.n_th = 500.0; // lower edge max(10, 5)=10, upper 166
    auto rs = fit_power_law(t, small);
    CHECK(rs.n_lo == 10);
    CHECK(rs.n_hi == 166);

    FitOptions raised;
    raised.n_th = 30000.0;
    raised.bottom_fraction = 1.0 / 10.0;
    auto rr = fit_power_law(t, raised);
    CHECK(rr.n_lo == 3000);
    CHECK(rr.n_hi == 10000);

    FitOptions bad;
    bad.n_th = 30000.0;
    bad.bottom_fraction = 0.5; // would invert the window
    CHECK_THROWS_AS(fit_power_law(t, bad), parameter_error);

    CHECK_THROWS_AS(fit_power_law(t, FitOptions{}), parameter_error);
}

TEST_CASE("fit rejects unusable windows") {
    auto t = synthetic_trajectory(100, [](double n) { return 0.5 * std::pow(n, -1.5); });
    FitOptions narrow;
    narrow.window = {{10.0, 15.0}}; // six points, below the floor
    CHECK_THROWS_AS(fit_power_law(t, narrow), data_error);

    FitOptions inverted;
    inverted.window = {{50.0, 20.0}};
    CHECK_THROWS_AS(fit_power_law(t, inverted), parameter_error);

    auto dead = synthetic_trajectory(100, [](double n) { return n < 50 ? 0.25 : 0.0; });
    FitOptions w;
    w.window = {{10.0, 100.0}};
    CHECK_THROWS_AS(fit_power_law(dead, w), data_error);

    auto flat = synthetic_trajectory(100, [](double) { return 0.125; });
    CHECK_THROWS_AS(fit_power_law(flat, w), numerical_error);
}

TEST_CASE("scheduled gd fits use block-end records only") {
    // Intra-block losses carry a deliberate staircase; poison them to verify
    // they are excluded.
    engine::Trajectory t;
    t.schedule_name = "gd-scheduled";
    t.records.push_back({0, 1.0, 0.0, 0.0});
    for (long long n = 1; n <= 600; ++n) {
        const bool end = ((n + 1) & n) == 0; // 2^l - 1
        const double loss = end ? 0.5 * std::pow(static_cast<double>(n), -2.0)
                                : 17.0 / static_cast<double>(n);
        t.records.push_back({n, loss, 0.0, 0.0});
    }
    FitOptions opt;
    opt.window = {{10.0, 600.0}};
    opt.block_ends_only = true;
    auto rep = fit_power_law(t, opt); // 15, 31, 63, 127, 255, 511
    CHECK(rep.points_used == 6);
    CHECK(rep.exponent == Approx(2.0).epsilon(1e-12));
    CHECK(rep.r2 >= 1.0 - 1e-12);
}

TEST_CASE("gd run on a synthetic power-law spectrum fits its predicted exponent") {
    auto m = spectrum::synthetic_diagonal(10000, 1.5, 1.0);
    const double lam_low = lambda_low(m); // 1e-6
    const double nth =
        threshold_step(ThresholdKind::constant_rate, 1.0, 1.5, 1.0, 0.0, lam_low, 0.5);
    CHECK(nth == Approx(5e5).epsilon(1e-12));

    engine::RunOptions ro;
    ro.max_records = 400;
    auto traj = engine::run(m, engine::Schedule::Constant(1.0), 200000, ro);
    FitOptions opt;
    opt.n_th = nth;
    // 1/n front: keep the window clear of the unresolved-spectrum regime
    opt.top_fraction = 1.0 / 25.0;
    auto rep = fit_power_law(traj, opt);
    CHECK(rep.exponent > 0.95);
    CHECK(rep.exponent < 1.05);

    auto pred = oracle::theoretical_exponent(oracle::AlgorithmKind::gd_constant, 1.0, 1.5);
    auto cmp = compare(rep, pred);
    CHECK(cmp.pass);
    CHECK(cmp.tolerance == Approx(0.05 * 1.0 + 0.05));
    CHECK(cmp.delta < 0.05);
    CHECK(cmp.fit.theoretical.has_value());
}

TEST_CASE("oscillation diagnostics") {
    // Exact alternating rates settle immediately.
    engine::Trajectory t;
    t.schedule_name = "sd";
    for (long long n = 0; n <= 40; ++n)
        t.records.push_back({n, 1.0, n % 2 == 0 ? 1.25 : 0.75, 0.0});
    t.records.back().alpha = 0.0;
    auto s = oscillation_diagnostics(t);
    REQUIRE(s.has_value());
    CHECK(s->amplitude == 0.0);
    CHECK(s->period2);
    CHECK(s->settled_at == 0);

    // Constant rates are a degenerate period-2 pattern.
    engine::Trajectory tc = t;
    for (auto& r : tc.records) r.alpha = 1.1;
    auto sc = oscillation_diagnostics(tc);
    REQUIRE(sc.has_value());
    CHECK(sc->amplitude == 0.0);

    // Non-adaptive schedules: not applicable.
    engine::Trajectory tg = t;
    tg.schedule_name = "gd-constant";
    CHECK_FALSE(oscillation_diagnostics(tg).has_value());

    // An excursion in the last observable gap means the pattern never settles
    // within the recording.
    engine::Trajectory tl = t;
    tl.records[tl.records.size() - 2].alpha = 9.0;
    auto sl = oscillation_diagnostics(tl);
    REQUIRE(sl.has_value());
    CHECK(sl->settled_at == -1);
    CHECK(sl->amplitude > 1.0);

    // Steepest descent on a near-uniform spectrum really does lock into the
    // alternating pattern.
    auto em = spectrum::equal_mass_discretization(spectrum::PowerLawSpec{1.0}, 1000);
    auto traj = engine::run(em, engine::Schedule::SteepestDescent(), 400);
    auto sd = oscillation_diagnostics(traj, 1e-3);
    REQUIRE(sd.has_value());
    CHECK(sd->amplitude < 1e-3);
    CHECK(sd->period2);

    // Subsampled trajectories cannot support the n+2 comparison.
    engine::RunOptions ro;
    ro.max_records = 50;
    auto sparse = engine::run(em, engine::Schedule::SteepestDescent(), 400, ro);
    CHECK_THROWS_AS(oscillation_diagnostics(sparse), parameter_error);
}

TEST_CASE("compare verdicts") {
    FitReport fit;
    fit.exponent = 1.02;
    oracle::TheoryPrediction pred;
    pred.exponent = 1.0;
    auto rec = compare(fit, pred, 0.05);
    CHECK(rec.pass);
    CHECK(rec.delta == Approx(0.02));

    fit.exponent = 2.0;
    pred.exponent = 3.5;
    auto rec2 = compare(fit, pred, 0.15);
    CHECK_FALSE(rec2.pass);
    CHECK(rec2.delta == Approx(1.5));
}
