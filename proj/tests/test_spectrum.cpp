#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "plopt/measure.hpp"

using namespace plopt;
using namespace plopt::spectrum;

// ---------------------------------------------------------------------------
// Reference oracles, written against the definitions rather than the library.

namespace {

// O(K) scan, no cached sums.
double brute_cdf(const DiscreteMeasure& m, double lambda) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i)
        if (m.atoms[i] <= lambda) s += m.masses[i];
    return s;
}

// sum_{k>k0} (k^{-s} - (k+1)^{-s}) k^{-nu} by brute force up to k = 10^7,
// with the remainder bounded by s/(s+nu) * K^{-(s+nu)}.
double brute_tail_first_moment(double s, double nu, std::size_t k0, double* remainder_bound) {
    const std::size_t K = 10000000;
    double acc = 0.0;
    for (std::size_t k = K; k > k0; --k) { // ascending magnitude
        const double kk = static_cast<double>(k);
        acc += (std::pow(kk, -s) - std::pow(kk + 1.0, -s)) * std::pow(kk, -nu);
    }
    *remainder_bound = s / (s + nu) * std::pow(static_cast<double>(K), -(s + nu));
    return acc;
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i)
        g[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
    return g;
}

Eigen::MatrixXd dense_from_operator(const OperatorProblem& op) {
    const Eigen::Index N = op.dim();
    Eigen::MatrixXd J(N, N);
    for (Eigen::Index j = 0; j < N; ++j)
        J.col(j) = op.apply(Eigen::VectorXd::Unit(N, j));
    return J;
}

} // namespace

// ---------------------------------------------------------------------------

TEST_CASE("measure construction and cdf queries") {
    SECTION("validation") {
        CHECK_THROWS_AS(make_measure({1.0, 0.5}, {1.0}), parameter_error);
        CHECK_THROWS_AS(make_measure({}, {}), parameter_error);
        CHECK_THROWS_AS(make_measure({1.0, 1.0}, {1.0, 1.0}), data_error);   // not strict
        CHECK_THROWS_AS(make_measure({0.5, 1.0}, {1.0, 1.0}), data_error);   // increasing
        CHECK_THROWS_AS(make_measure({1.0, -0.5}, {1.0, 1.0}), data_error);  // negative atom
        CHECK_THROWS_AS(make_measure({1.0, 0.5}, {1.0, -1.0}), data_error);  // negative mass
    }

    SECTION("cdf convention: right-continuous, atom included") {
        auto m = make_measure({1.0, 0.5, 0.25}, {0.1, 0.2, 0.4});
        CHECK(measure_cdf(m, 0.0) == 0.0);
        CHECK(measure_cdf(m, 0.2) == 0.0);
        CHECK(measure_cdf(m, 0.25) == Catch::Approx(0.4).epsilon(1e-15));
        CHECK(measure_cdf(m, 0.5) == Catch::Approx(0.6).epsilon(1e-15));
        CHECK(measure_cdf(m, 0.9) == Catch::Approx(0.6).epsilon(1e-15));
        CHECK(measure_cdf(m, 1.0) == Catch::Approx(0.7).epsilon(1e-15));
        CHECK(measure_cdf(m, 7.0) == Catch::Approx(m.total_mass()).epsilon(1e-15));
        CHECK_THROWS_AS(measure_cdf(m, -0.1), parameter_error);
    }

    SECTION("cached cdf equals brute-force scan") {
        spectrum::detail::NormalSampler rng(11);
        std::vector<double> atoms, masses;
        double a = 2.0;
        for (int i = 0; i < 500; ++i) {
            a *= 0.99;
            atoms.push_back(a);
            const double g = rng();
            masses.push_back(g * g);
        }
        auto m = make_measure(atoms, masses);
        for (double q : log_grid(1e-3, 3.0, 200))
            CHECK(measure_cdf(m, q) == Catch::Approx(brute_cdf(m, q)).margin(1e-14));
    }

    SECTION("ingestion sorts, coalesces, and drops nonpositive atoms") {
        auto m = measure_from_unsorted({0.5, 1.0, 0.5, -0.25, 0.0}, {1.0, 2.0, 3.0, 4.0, 5.0});
        REQUIRE(m.size() == 2);
        CHECK(m.atoms[0] == 1.0);
        CHECK(m.atoms[1] == 0.5);
        CHECK(m.masses[1] == 4.0);
        CHECK(m.meta.dropped_zero_mass == 9.0);
        CHECK_THROWS_AS(measure_from_unsorted({-1.0}, {1.0}), data_error);
    }

    SECTION("rescale to unit top atom") {
        auto m = make_measure({4.0, 1.0}, {1.0, 1.0});
        auto r = rescale_to_unit_max(m);
        CHECK(r.atoms[0] == 1.0);
        CHECK(r.atoms[1] == 0.25);
        CHECK(r.masses[0] == 1.0);
        CHECK(r.meta.lambda_scale == 4.0);
        CHECK(fit_lambda_bound(r, 1.0) == Catch::Approx(1.0));
    }
}

TEST_CASE("synthetic diagonal family") {
    SECTION("single atom") {
        auto m = synthetic_diagonal(1, 0.7, 2.3);
        REQUIRE(m.size() == 1);
        CHECK(m.atoms[0] == 1.0);
        CHECK(m.masses[0] == Catch::Approx(2.3 * 0.7).epsilon(1e-15));
    }

    SECTION("small case, quantile-weight masses") {
        // nu=1, zeta=2: atoms k^{-1}, masses 2 k^{-3}
        auto m = synthetic_diagonal(3, 1.0, 2.0);
        REQUIRE(m.size() == 3);
        CHECK(m.atoms[0] == 1.0);
        CHECK(m.atoms[1] == 0.5);
        CHECK(m.atoms[2] == Catch::Approx(1.0 / 3.0).epsilon(1e-15));
        CHECK(m.masses[0] == Catch::Approx(2.0).epsilon(1e-15));
        CHECK(m.masses[1] == Catch::Approx(0.25).epsilon(1e-15));
        CHECK(m.masses[2] == Catch::Approx(2.0 / 27.0).epsilon(1e-15));
    }

    SECTION("large instance tracks the exact power law") {
        auto m = synthetic_diagonal(1000000, 1.5, 1.0);
        const double cdf = measure_cdf(m, 1e-3);
        CHECK(cdf >= 0.99e-3);
        CHECK(cdf <= 1.01e-3);
        // same ratio across the small-lambda bulk (the inter-atom dip is
        // ~ zeta*nu*lambda^{1/nu}, so below 1e-3 it stays within 1.5%)
        for (double q : log_grid(1e-6, 1e-3, 40)) {
            const double ratio = measure_cdf(m, q) / std::pow(q, 1.0);
            CHECK(ratio >= 0.98);
            CHECK(ratio <= 1.01);
        }
    }

    SECTION("atom bound and metadata envelope") {
        auto m = synthetic_diagonal(2000, 1.5, 1.0);
        REQUIRE(m.meta.Q.has_value());
        for (std::size_t k = 1; k <= m.size(); ++k)
            CHECK(m.atoms[k - 1] <= std::pow(static_cast<double>(k), -1.5));
        const double Q = *m.meta.Q;
        CHECK(Q == Catch::Approx(m.total_mass()));
        for (double q : log_grid(m.lambda_min(), 1.0, 1000))
            CHECK(measure_cdf(m, q) <= Q * std::pow(q, 1.0) * (1.0 + 1e-9));
    }
}

TEST_CASE("discrete power-law family") {
    SECTION("small case") {
        auto m = discrete_powerlaw(1.0, 1.0, 2);
        REQUIRE(m.size() == 2);
        CHECK(m.atoms[0] == 1.0);
        CHECK(m.atoms[1] == 0.5);
        CHECK(m.masses[0] == Catch::Approx(0.5).epsilon(1e-15));
        CHECK(m.masses[1] == Catch::Approx(1.0 / 6.0).epsilon(1e-15));
        CHECK(m.meta.zeta == 1.0);
        CHECK(m.meta.nu == 1.0);
    }

    SECTION("telescoping total mass") {
        for (auto [zeta, nu, K] : {std::tuple{1.0, 1.0, 100}, {0.5, 2.0, 1000}, {2.0, 0.8, 37}}) {
            auto m = discrete_powerlaw(zeta, nu, static_cast<std::size_t>(K));
            const double expect = -std::expm1(-zeta * nu * std::log(K + 1.0));
            CHECK(m.total_mass() == Catch::Approx(expect).epsilon(1e-13));
        }
    }

    SECTION("cdf at an interior threshold") {
        auto m = discrete_powerlaw(1.0, 1.0, 1000000);
        // atoms <= 0.6 telescope to 1/2 minus the truncated tail
        const double tail = 1.0 / 1000001.0;
        CHECK(measure_cdf(m, 0.6) == Catch::Approx(0.5 - tail).epsilon(1e-12));
        CHECK(std::abs(measure_cdf(m, 0.6) - 0.5) < 1.1e-6);
    }

    SECTION("cdf equals the power law exactly at atoms") {
        auto m = discrete_powerlaw(0.75, 1.5, 5000);
        const double s = 0.75 * 1.5;
        const double tail = std::pow(5001.0, -s);
        for (std::size_t k : {std::size_t{1}, std::size_t{2}, std::size_t{17}, std::size_t{4999}}) {
            const double lam = m.atoms[k - 1];
            CHECK(measure_cdf(m, lam) + tail ==
                  Catch::Approx(std::pow(lam, 0.75)).epsilon(1e-12));
        }
    }

    SECTION("relative cdf correction is O(lambda^{1/nu}) with constant zeta*nu") {
        for (auto [zeta, nu] : {std::pair{1.0, 1.0}, {1.0, 1.5}, {0.5, 2.0}, {2.0, 0.8}}) {
            const std::size_t K = 10000;
            auto m = discrete_powerlaw(zeta, nu, K);
            const double s = zeta * nu;
            const double tail = std::pow(K + 1.0, -s); // truncated-away mass
            for (double q : log_grid(m.lambda_min(), 1.0, 1000)) {
                const double omega = (measure_cdf(m, q) + tail) / std::pow(q, zeta) - 1.0;
                CHECK(std::abs(omega) <= s * std::pow(q, 1.0 / nu) * (1.0 + 1e-9));
            }
        }
    }

    SECTION("atom bound and metadata envelope") {
        auto m = discrete_powerlaw(1.0, 1.5, 3000);
        for (std::size_t k = 1; k <= m.size(); ++k)
            CHECK(m.atoms[k - 1] <= std::pow(static_cast<double>(k), -1.5));
        REQUIRE(m.meta.Q.has_value());
        CHECK(*m.meta.Q == 1.0);
        for (double q : log_grid(m.lambda_min(), 1.0, 1000))
            CHECK(measure_cdf(m, q) <= std::pow(q, 1.0) * (1.0 + 1e-9));
    }
}

TEST_CASE("steepest-descent lower-bound measure") {
    SECTION("support and cutoff") {
        auto m = sd_lowerbound_measure(1.0, 2.0, 10000);
        // k0 = ceil(10^{2/nu}) = 10: tail starts at k = 11
        CHECK(m.atoms[0] == 1.0);
        CHECK(m.atoms[1] == Catch::Approx(std::pow(11.0, -2.0)).epsilon(1e-15));
        CHECK(m.atoms.back() == Catch::Approx(1e-8).epsilon(1e-12));
        REQUIRE(m.size() == 10000 - 10 + 1);
        for (std::size_t i = 1; i < m.size(); ++i) CHECK(m.atoms[i] <= std::pow(11.0, -2.0));
        CHECK_THROWS_WITH(sd_lowerbound_measure(1.0, 2.0, 10),
                          Catch::Matchers::ContainsSubstring("10"));
    }

    SECTION("series constant agrees with brute-force summation") {
        for (auto [zeta, nu] : {std::pair{1.0, 2.0}, {0.5, 1.5}}) {
            const double s = zeta * nu;
            const auto k0 = static_cast<std::size_t>(std::ceil(std::pow(10.0, 2.0 / nu)));
            double rem = 0.0;
            const double ref = brute_tail_first_moment(s, nu, k0, &rem);
            const double got = spectrum::detail::sd_tail_first_moment(s, nu, k0);
            CHECK(std::abs(got - ref) <= 1e-9 * ref + rem);
        }
    }

    SECTION("sigma-balance: the atom at 1 carries the tail's first moment") {
        auto m = sd_lowerbound_measure(1.0, 2.0, 10000);
        double tail_moment = 0.0;
        for (std::size_t i = m.size(); i-- > 1;) tail_moment += m.masses[i] * m.atoms[i];
        // equality up to the K-truncation of the tail and the 1e-10 series target
        const double trunc = 0.5 * std::pow(10001.0, -4.0);
        CHECK(std::abs(tail_moment - m.masses[0]) <= 1e-9 * m.masses[0] + trunc);
    }

    SECTION("cdf stays under the power law") {
        auto m = sd_lowerbound_measure(1.0, 2.0, 10000);
        for (double q : log_grid(m.lambda_min(), 1.0, 1000))
            CHECK(measure_cdf(m, q) <= std::pow(q, 1.0) * (1.0 + 1e-9));
        CHECK(measure_cdf(m, 1.0) <= 1.0);
    }
}

TEST_CASE("conjugate-gradients lower-bound operator") {
    SECTION("validation and warnings") {
        CHECK_THROWS_AS(cg_lowerbound_operator(0.5, 1.0, 1), parameter_error);
        CHECK(cg_lowerbound_operator(0.5, 1.0, 2).notes.empty());
        CHECK_FALSE(cg_lowerbound_operator(1.5, 1.0, 2).notes.empty());
    }

    SECTION("two-dimensional instance") {
        // g = (1 - (2+nu) zeta)/2 = -1/4 at zeta=1/2, nu=1
        auto op = cg_lowerbound_operator(0.5, 1.0, 2);
        const Eigen::MatrixXd J = dense_from_operator(op);
        CHECK(J(0, 0) == 1.0);
        CHECK(J(0, 1) == 0.0);
        CHECK(J(1, 0) == Catch::Approx(-std::pow(2.0, -0.25)).epsilon(1e-15));
        CHECK(J(1, 1) == Catch::Approx(std::pow(2.0, -0.5)).epsilon(1e-15));
        CHECK(op.target[0] == 1.0);
        CHECK(op.target[1] == 0.0);
        // L(0) = 1/2 ||f*||^2
        CHECK(0.5 * op.target.squaredNorm() == 0.5);
    }

    SECTION("transpose application matches the dense matrix") {
        auto op = cg_lowerbound_operator(0.4, 1.3, 40);
        const Eigen::MatrixXd J = dense_from_operator(op);
        spectrum::detail::NormalSampler rng(3);
        Eigen::VectorXd y(40);
        for (int i = 0; i < 40; ++i) y[i] = rng();
        const Eigen::VectorXd a = op.apply_transpose(y);
        const Eigen::VectorXd b = J.transpose() * y;
        CHECK((a - b).cwiseAbs().maxCoeff() < 1e-14);
    }

    SECTION("tridiagonal and dense eigenvalue paths agree") {
        auto op = cg_lowerbound_operator(0.5, 1.0, 30);
        auto tri = gram_eigenvalues(op);
        OperatorProblem dense;
        dense.J = dense_from_operator(op);
        dense.target = op.target;
        auto dn = gram_eigenvalues(dense);
        for (std::size_t i = 0; i < tri.size(); ++i)
            CHECK(tri[i] == Catch::Approx(dn[i]).epsilon(1e-10).margin(1e-14));
    }

    SECTION("eigenvalue sandwich") {
        // Upper bound 9 k^{-nu} for all k; the infinite-operator lower bound
        // (2k)^{-nu} survives truncation for k <= N/2.
        for (auto [zeta, nu, N] : {std::tuple{0.5, 1.0, 400}, {0.3, 2.0, 400}, {0.9, 0.5, 300}}) {
            auto ev = gram_eigenvalues(cg_lowerbound_operator(zeta, nu, N));
            for (int k = 1; k <= N; ++k)
                CHECK(ev[k - 1] <= 9.0 * std::pow(static_cast<double>(k), -nu));
            for (int k = 1; k <= N / 2; ++k)
                CHECK(ev[k - 1] >= std::pow(2.0 * k, -nu));
        }
    }
}

TEST_CASE("equal-mass discretization") {
    SECTION("two atoms") {
        auto m = equal_mass_discretization(PowerLawSpec{1.0}, 2);
        REQUIRE(m.size() == 2);
        CHECK(m.atoms[0] == 0.75);
        CHECK(m.atoms[1] == 0.25);
        CHECK(m.masses[0] == 0.5);
        CHECK(m.masses[1] == 0.5);
        CHECK(m.total_mass() == Catch::Approx(1.0).epsilon(1e-15));
    }

    SECTION("uniform cdf error is half a mass quantum") {
        for (std::size_t M : {std::size_t{10}, std::size_t{1000}, std::size_t{100000}}) {
            auto m = equal_mass_discretization(PowerLawSpec{0.8}, M);
            CHECK(m.total_mass() == Catch::Approx(1.0).epsilon(1e-12));
            double sup = 0.0;
            // the sup over lambda is attained at an atom or its left limit
            for (std::size_t i = 0; i < m.size(); ++i) {
                const double law = std::pow(m.atoms[i], 0.8);
                const double at = m.cum_upto[i];
                sup = std::max(sup, std::abs(at - law));
                sup = std::max(sup, std::abs((at - m.masses[i]) - law));
            }
            CHECK(sup <= 0.5 / static_cast<double>(M) + 1e-12);
        }
    }

    SECTION("metadata envelope") {
        auto m = equal_mass_discretization(PowerLawSpec{1.3}, 500);
        REQUIRE(m.meta.Q.has_value());
        for (double q : log_grid(m.lambda_min(), 1.0, 1000))
            CHECK(measure_cdf(m, q) <= *m.meta.Q * std::pow(q, 1.3) * (1.0 + 1e-9));
    }
}

TEST_CASE("ntk gram matrix") {
    SECTION("kernel values at aligned, orthogonal, and single inputs") {
        Dataset d;
        d.rows = 2;
        d.cols = 2;
        d.x = {3.0, 0.0, 0.0, 2.0}; // orthogonal pair
        const Eigen::MatrixXd G = ntk_gram(d);
        CHECK(G(0, 0) == Catch::Approx(9.0).epsilon(1e-14));        // phi = 0
        CHECK(G(1, 1) == Catch::Approx(4.0).epsilon(1e-14));
        CHECK(G(0, 1) == Catch::Approx(6.0 / (2.0 * M_PI)).epsilon(1e-14)); // phi = pi/2
        CHECK(G(1, 0) == G(0, 1));

        Dataset one;
        one.rows = 1;
        one.cols = 3;
        one.x = {1.0, 2.0, 2.0};
        const Eigen::MatrixXd G1 = ntk_gram(one);
        REQUIRE(G1.rows() == 1);
        CHECK(G1(0, 0) == Catch::Approx(9.0).epsilon(1e-14));
    }

    SECTION("antipodal inputs stay finite (clamped angle)") {
        Dataset d;
        d.rows = 2;
        d.cols = 1;
        d.x = {1.0, -1.0};
        const Eigen::MatrixXd G = ntk_gram(d);
        CHECK(std::isfinite(G(0, 1)));
        CHECK(G(0, 1) == Catch::Approx(0.0).margin(1e-14)); // sin(pi) - 2(pi - pi)
    }

    SECTION("zero-norm vector is rejected with its index") {
        Dataset d;
        d.rows = 3;
        d.cols = 2;
        d.x = {1.0, 0.0, 0.0, 0.0, 0.0, 1.0};
        CHECK_THROWS_WITH(ntk_gram(d), Catch::Matchers::ContainsSubstring("index 1"));
    }

    SECTION("positive semidefinite over random datasets") {
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            const std::size_t dim = 2 + seed % 7;
            auto data = gaussian_mix_dataset(dim, 2 + seed % 3, 12, 2.0, seed);
            normalize_dataset(data);
            const Eigen::MatrixXd G = ntk_gram(data);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
            const double lmax = es.eigenvalues().maxCoeff();
            CHECK(es.eigenvalues().minCoeff() >= -1e-8 * lmax);
        }
    }
}

TEST_CASE("spectral measure from a gram matrix") {
    SECTION("identity gram: repeated eigenvalue coalesces into one atom") {
        const Eigen::MatrixXd G = Eigen::MatrixXd::Identity(3, 3);
        Eigen::VectorXd t(3);
        t << 1.0, 2.0, 3.0;
        auto m = spectral_measure_from_gram(G, t);
        REQUIRE(m.size() == 1);
        CHECK(m.atoms[0] == 1.0);
        CHECK(m.masses[0] == Catch::Approx(14.0).epsilon(1e-12));
        CHECK(m.meta.lambda_scale == Catch::Approx(1.0).epsilon(1e-12));
    }

    SECTION("diagonal gram rescaled to unit top eigenvalue") {
        Eigen::MatrixXd G = Eigen::MatrixXd::Zero(2, 2);
        G(0, 0) = 4.0;
        G(1, 1) = 1.0;
        Eigen::VectorXd t(2);
        t << 1.0, 1.0;
        auto m = spectral_measure_from_gram(G, t);
        REQUIRE(m.size() == 2);
        CHECK(m.atoms[0] == 1.0);
        CHECK(m.atoms[1] == Catch::Approx(0.25).epsilon(1e-13));
        CHECK(m.masses[0] == Catch::Approx(1.0).epsilon(1e-12));
        CHECK(m.masses[1] == Catch::Approx(1.0).epsilon(1e-12));
        CHECK(m.meta.lambda_scale == Catch::Approx(4.0).epsilon(1e-13));
    }

    SECTION("round-trips a known measure") {
        std::vector<double> atoms = {1.0, 0.6, 0.3, 0.1, 0.02};
        std::vector<double> masses = {0.5, 0.1, 0.9, 0.3, 0.05};
        const int n = 5;
        spectrum::detail::NormalSampler rng(17);
        Eigen::MatrixXd R(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) R(i, j) = rng();
        const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(R).householderQ();
        Eigen::VectorXd lam(n), c(n);
        for (int i = 0; i < n; ++i) {
            lam[i] = atoms[i];
            c[i] = std::sqrt(masses[i]);
        }
        Eigen::MatrixXd G = Q * lam.asDiagonal() * Q.transpose();
        G = 0.5 * (G + G.transpose());
        const Eigen::VectorXd t = Q * c;
        auto m = spectral_measure_from_gram(G, t);
        REQUIRE(m.size() == 5);
        const double scale = m.meta.lambda_scale;
        CHECK(scale == Catch::Approx(1.0).epsilon(1e-10));
        for (int i = 0; i < n; ++i) {
            CHECK(m.atoms[i] * scale == Catch::Approx(atoms[i]).epsilon(1e-8));
            CHECK(m.masses[i] == Catch::Approx(masses[i]).epsilon(1e-8));
        }
        // Parseval
        CHECK(m.total_mass() == Catch::Approx(t.squaredNorm()).epsilon(1e-12));
    }

    SECTION("mass on a kernel direction is dropped but accounted") {
        Eigen::MatrixXd G = Eigen::MatrixXd::Zero(2, 2);
        G(0, 0) = 2.0;
        Eigen::VectorXd t(2);
        t << 3.0, 4.0;
        auto m = spectral_measure_from_gram(G, t);
        REQUIRE(m.size() == 1);
        CHECK(m.atoms[0] == 1.0);
        CHECK(m.meta.lambda_scale == Catch::Approx(2.0).epsilon(1e-13));
        CHECK(m.masses[0] == Catch::Approx(9.0).epsilon(1e-12));
        CHECK(m.meta.dropped_zero_mass == Catch::Approx(16.0).epsilon(1e-12));
        CHECK(m.total_mass() + m.meta.dropped_zero_mass ==
              Catch::Approx(t.squaredNorm()).epsilon(1e-12));
    }

    SECTION("asymmetric input is rejected") {
        Eigen::MatrixXd G(2, 2);
        G << 1.0, 0.5, 0.2, 1.0;
        Eigen::VectorXd t = Eigen::VectorXd::Ones(2);
        CHECK_THROWS_AS(spectral_measure_from_gram(G, t), data_error);
        Eigen::VectorXd t3 = Eigen::VectorXd::Ones(3);
        CHECK_THROWS_AS(spectral_measure_from_gram(Eigen::MatrixXd::Identity(2, 2), t3), data_error);
    }
}

TEST_CASE("gaussian mix datasets") {
    SECTION("deterministic given the seed") {
        auto a = gaussian_mix_dataset(6, 3, 20, 1.5, 42);
        auto b = gaussian_mix_dataset(6, 3, 20, 1.5, 42);
        CHECK(a.x == b.x);
        CHECK(a.y == b.y);
        auto c = gaussian_mix_dataset(6, 3, 20, 1.5, 43);
        CHECK(a.x != c.x);
    }

    SECTION("shapes and binary labels") {
        auto d = gaussian_mix_dataset(4, 2, 1, 3.0, 5);
        REQUIRE(d.rows == 2);
        REQUIRE(d.cols == 4);
        CHECK(d.y[0] == 0.0);
        CHECK(d.y[1] == 1.0);
        auto e = gaussian_mix_dataset(3, 4, 10, 1.0, 9);
        std::size_t zeros = 0;
        for (double v : e.y) zeros += (v == 0.0);
        CHECK(zeros == 20);
    }

    SECTION("normalization removes the mean and fixes the scale") {
        auto d = gaussian_mix_dataset(5, 4, 50, 2.0, 77);
        auto [mean, r] = normalize_dataset(d);
        REQUIRE(mean.size() == 5);
        CHECK(r > 0.0);
        double m0 = 0.0, msq = 0.0;
        for (std::size_t i = 0; i < d.rows; ++i) {
            double sq = 0.0;
            for (std::size_t j = 0; j < d.cols; ++j) sq += d.row(i)[j] * d.row(i)[j];
            msq += sq;
            m0 += d.row(i)[0];
        }
        CHECK(std::abs(m0 / static_cast<double>(d.rows)) < 1e-12);
        CHECK(msq / static_cast<double>(d.rows) == Catch::Approx(1.0).epsilon(1e-12));

        Dataset flat;
        flat.rows = 3;
        flat.cols = 2;
        flat.x = {1.0, 2.0, 1.0, 2.0, 1.0, 2.0};
        CHECK_THROWS_AS(normalize_dataset(flat), data_error);
    }
}
