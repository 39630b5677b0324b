#pragma once

// Closed-form reference values: asymptotic and exact loss formulas, bound
// constants, and the table of theoretical convergence exponents.

#include <cmath>
#include <optional>
#include <string>

#include "plopt/measure.hpp"
#include "plopt/specfun.hpp"
#include "plopt/util.hpp"

namespace plopt::oracle {

// Leading term of the heavy-ball (beta = 0: gradient descent) loss under the
// exact power law: (Gamma(zeta+1)/2) (2 alpha n / (1-beta))^{-zeta}.
inline double hb_asymptotic_loss(long long n, double alpha, double beta, double zeta) {
    if (n < 1) throw parameter_error("hb_asymptotic_loss: n >= 1");
    if (!(beta >= 0.0 && beta < 1.0)) throw parameter_error("hb_asymptotic_loss: 0 <= beta < 1");
    if (!(alpha > 0.0 && alpha < 2.0 * (1.0 + beta)))
        throw parameter_error("hb_asymptotic_loss: need 0 < alpha < 2(1+beta)");
    if (!(zeta > 0.0)) throw parameter_error("hb_asymptotic_loss: zeta > 0");
    return std::exp(specfun::log_gamma(zeta + 1.0) - std::log(2.0) -
                    zeta * std::log(2.0 * alpha * static_cast<double>(n) / (1.0 - beta)));
}

// Exact conjugate-gradients loss on the exact power law:
// Gamma(zeta+1)^2 (n!)^2 / (2 Gamma(zeta+n+1)^2), evaluated in the log domain.
inline double cg_exact_powerlaw_loss(long long n, double zeta) {
    if (n < 0) throw parameter_error("cg_exact_powerlaw_loss: n >= 0");
    if (!(zeta > 0.0)) throw parameter_error("cg_exact_powerlaw_loss: zeta > 0");
    const double nn = static_cast<double>(n);
    return std::exp(2.0 * specfun::log_gamma(zeta + 1.0) + 2.0 * specfun::log_gamma(nn + 1.0) -
                    std::log(2.0) - 2.0 * specfun::log_gamma(zeta + nn + 1.0));
}

// Exact conjugate-gradients loss on the bidiagonal chain problem:
// 1 / (2 sum_{m=1}^{n+1} m^{(2+nu) zeta - 1}).
inline double cg_chain_loss(long long n, double zeta, double nu) {
    if (n < 0) throw parameter_error("cg_chain_loss: n >= 0");
    if (!(zeta > 0.0) || !(nu > 0.0)) throw parameter_error("cg_chain_loss: zeta, nu > 0");
    const double p = (2.0 + nu) * zeta;
    const double sum = pairwise_map_sum(static_cast<std::size_t>(n) + 1, [&](std::size_t i) {
        return std::pow(static_cast<double>(i + 1), p - 1.0);
    });
    return 1.0 / (2.0 * sum);
}

// Companion leading-order form of cg_chain_loss.
inline double cg_chain_loss_asymptotic(long long n, double zeta, double nu) {
    if (n < 1) throw parameter_error("cg_chain_loss_asymptotic: n >= 1");
    const double p = (2.0 + nu) * zeta;
    return 0.5 * p * std::pow(static_cast<double>(n), -p);
}

// Constant S(zeta, a) in the Jacobi-schedule loss bound L_n <= (S/2) n^{-2 zeta}:
//   ((4a+5)^2/2)^zeta [1 + (zeta/(a+1/2-zeta)) 2^{2a+2} Gamma(a+1)^2 / (pi (4a+5)^{2a+1})].
inline double jacobi_bound_constant(double zeta, double a) {
    if (!(zeta > 0.0)) throw parameter_error("jacobi_bound_constant: zeta > 0");
    if (!(a > std::max(0.0, zeta - 0.5)))
        throw parameter_error("jacobi_bound_constant: bound requires a > max(0, zeta - 1/2)");
    const double q = 4.0 * a + 5.0;
    const double bracket =
        1.0 + zeta / (a + 0.5 - zeta) *
                  std::exp((2.0 * a + 2.0) * std::log(2.0) + 2.0 * specfun::log_gamma(a + 1.0) -
                           std::log(M_PI) - (2.0 * a + 1.0) * std::log(q));
    return std::pow(q * q / 2.0, zeta) * bracket;
}

// Steepest-descent upper bound, valid for any -zeta < s < 0:
//   L_n <= (L_0^{1/s} + (1/|s|)(zeta/(2(s+zeta)))^{1/s} n)^s.
inline double sd_upper_bound(long long n, double s, double zeta, double loss0) {
    if (!(zeta > 0.0)) throw parameter_error("sd_upper_bound: zeta > 0");
    if (!(s > -zeta && s < 0.0)) throw parameter_error("sd_upper_bound: need -zeta < s < 0");
    if (!(loss0 > 0.0)) throw parameter_error("sd_upper_bound: loss0 > 0");
    if (n < 0) throw parameter_error("sd_upper_bound: n >= 0");
    const double base = std::pow(loss0, 1.0 / s) +
                        std::pow(zeta / (2.0 * (s + zeta)), 1.0 / s) / std::abs(s) *
                            static_cast<double>(n);
    return std::pow(base, s);
}

// Explicit residual-polynomial upper bound on the CG loss: the trial
// polynomial T_n(l(lambda))/T_n(l(0)) with l affine from
// [c^2 ln^2 n / n^2, 1] onto [-1, 1]. Evaluated in log magnitude where the
// argument leaves [-1, 1], so large n cannot overflow.
inline double chebyshev_trial_loss(long long n, const spectrum::DiscreteMeasure& m, double c) {
    if (n < 2) throw parameter_error("chebyshev_trial_loss: n >= 2");
    const double ln_n = std::log(static_cast<double>(n));
    const double lo = c * c * ln_n * ln_n / (static_cast<double>(n) * static_cast<double>(n));
    if (!(lo < 1.0)) throw parameter_error("chebyshev_trial_loss: window [c^2 ln^2 n/n^2, 1] empty");
    const auto l = [&](double lambda) { return (2.0 * lambda - (lo + 1.0)) / (1.0 - lo); };
    const int ni = static_cast<int>(n);
    const double log_t0 = specfun::chebyshev_log_abs_t1(ni, l(0.0));
    const double sum = pairwise_map_sum(m.size(), [&](std::size_t i) {
        const double z = l(m.atoms[i]);
        double log_ratio;
        if (std::abs(z) <= 1.0) {
            const double t = specfun::chebyshev_eval(specfun::ChebKind::first, ni, z);
            if (t == 0.0) return 0.0;
            log_ratio = std::log(std::abs(t)) - log_t0;
        } else {
            log_ratio = specfun::chebyshev_log_abs_t1(ni, z) - log_t0;
        }
        return m.masses[i] * std::exp(2.0 * log_ratio);
    });
    return 0.5 * sum;
}

// --- Table of theoretical exponents -----------------------------------------

enum class AlgorithmKind {
    gd_constant,
    gd_scheduled,
    steepest_descent,
    hb_constant,
    hb_jacobi,
    conjugate_gradients,
    stable_conjugate_gradients,
};

enum class Assumptions { cdf_only, cdf_and_eigendecay };

enum class Validity { exact, asymptotic, upper_bound };

struct TheoryPrediction {
    double exponent = 0.0;
    std::optional<double> prefactor;
    Validity validity = Validity::asymptotic;
};

inline TheoryPrediction theoretical_exponent(AlgorithmKind kind, double zeta, double nu,
                                             Assumptions assume = Assumptions::cdf_only) {
    if (!(zeta > 0.0)) throw parameter_error("theoretical_exponent: zeta > 0");
    TheoryPrediction p;
    switch (kind) {
        case AlgorithmKind::gd_constant:
        case AlgorithmKind::hb_constant:
            p.exponent = zeta;
            p.validity = Validity::asymptotic;
            break;
        case AlgorithmKind::steepest_descent:
            p.exponent = zeta;
            p.validity = Validity::upper_bound;
            break;
        case AlgorithmKind::gd_scheduled:
        case AlgorithmKind::hb_jacobi:
            p.exponent = 2.0 * zeta;
            p.validity = Validity::upper_bound;
            break;
        case AlgorithmKind::conjugate_gradients:
            p.exponent = 2.0 * zeta;
            p.validity = Validity::asymptotic;
            break;
        case AlgorithmKind::stable_conjugate_gradients:
            if (assume == Assumptions::cdf_and_eigendecay) {
                if (!(nu > 0.0)) throw parameter_error("theoretical_exponent: nu > 0");
                p.exponent = (2.0 + nu) * zeta;
            } else {
                p.exponent = 2.0 * zeta;
            }
            p.validity = Validity::asymptotic;
            break;
    }
    return p;
}

} // namespace plopt::oracle
