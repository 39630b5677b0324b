#pragma once

// Orthogonal-polynomial kernel: Jacobi evaluation/roots, Chebyshev branches,
// the heavy-ball constant-rate residual in closed form, and log-gamma.

#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "plopt/util.hpp"

namespace plopt::specfun {

struct JacobiParams {
    double a = 0.0;
    double b = 0.0;
};

inline void validate(const JacobiParams& p) {
    if (!(p.a > -1.0) || !(p.b > -1.0))
        throw parameter_error("jacobi indices must satisfy a > -1 and b > -1");
}

// P_n^{(a,b)}(x), normalized so that P_n(1) = binom(n+a, n).
// Forward three-term recurrence seeded with degrees 0 and 1; the k>=1
// recurrence coefficients never vanish for a, b > -1.
inline double jacobi_eval(int n, const JacobiParams& p, double x) {
    validate(p);
    if (n < 0) throw parameter_error("jacobi_eval: degree must be >= 0");
    const double a = p.a, b = p.b;
    if (n == 0) return 1.0;
    double pk_1 = 1.0;
    double pk = (a + 1.0) + (a + b + 2.0) * (x - 1.0) / 2.0;
    for (int k = 1; k < n; ++k) {
        const double s = 2.0 * k + a + b;
        const double c_next = 2.0 * (k + 1.0) * (k + a + b + 1.0) * s;
        const double c_mid = (s + 1.0) * (a * a - b * b) + s * (s + 1.0) * (s + 2.0) * x;
        const double c_prev = 2.0 * (k + a) * (k + b) * (s + 2.0);
        const double pk1 = (c_mid * pk - c_prev * pk_1) / c_next;
        pk_1 = pk;
        pk = pk1;
    }
    return pk;
}

// d/dx P_n^{(a,b)}(x) = (n+a+b+1)/2 * P_{n-1}^{(a+1,b+1)}(x).
inline double jacobi_eval_derivative(int n, const JacobiParams& p, double x) {
    if (n == 0) return 0.0;
    return 0.5 * (n + p.a + p.b + 1.0) * jacobi_eval(n - 1, {p.a + 1.0, p.b + 1.0}, x);
}

// Residual polynomial q_n(lambda) = P_n(1-lambda) / P_n(1); q_n(0) == 1 exactly.
inline double jacobi_residual_eval(int n, const JacobiParams& p, double lambda) {
    return jacobi_eval(n, p, 1.0 - lambda) / jacobi_eval(n, p, 1.0);
}

inline double jacobi_residual_derivative(int n, const JacobiParams& p, double lambda) {
    return -jacobi_eval_derivative(n, p, 1.0 - lambda) / jacobi_eval(n, p, 1.0);
}

// Roots of q_n in the lambda domain, strictly decreasing, each in (0, 2).
// Golub-Welsch: eigenvalues of the symmetric tridiagonal matrix built from the
// monic recurrence coefficients of the Jacobi weight, then one Newton polish.
inline std::vector<double> jacobi_roots(int n, const JacobiParams& p) {
    validate(p);
    if (n < 1) throw parameter_error("jacobi_roots: degree must be >= 1");
    const double a = p.a, b = p.b;
    Eigen::VectorXd diag(n), sub(std::max(n - 1, 1));
    diag[0] = (b - a) / (a + b + 2.0);
    for (int k = 1; k < n; ++k) {
        const double s = 2.0 * k + a + b;
        diag[k] = (b * b - a * a) / (s * (s + 2.0));
        double bk;
        if (k == 1) {
            // The (k+a+b)/(2k+a+b-1) pair cancels at k=1; the cancelled form
            // stays finite for a+b -> -1.
            bk = 4.0 * (1.0 + a) * (1.0 + b) / ((a + b + 2.0) * (a + b + 2.0) * (a + b + 3.0));
        } else {
            bk = 4.0 * k * (k + a) * (k + b) * (k + a + b) /
                 (s * s * (s + 1.0) * (s - 1.0));
        }
        if (!(bk > 0.0)) throw numerical_error("jacobi_roots: recurrence breakdown at degree " + std::to_string(n));
        sub[k - 1] = std::sqrt(bk);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub.head(std::max(n - 1, 0)), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw numerical_error("jacobi_roots: eigensolver failed at degree " + std::to_string(n));

    std::vector<double> roots(n);
    for (int i = 0; i < n; ++i) {
        double lam = 1.0 - es.eigenvalues()[i]; // x ascending -> lambda descending
        for (int it = 0; it < 2; ++it) {
            const double q = jacobi_residual_eval(n, p, lam);
            const double dq = jacobi_residual_derivative(n, p, lam);
            if (dq == 0.0) break;
            const double step = q / dq;
            if (!std::isfinite(step) || std::abs(step) > 1e-3) break;
            lam -= step;
        }
        roots[i] = lam;
    }
    return roots;
}

enum class ChebKind { first, second };

namespace detail {

// O(n) fallback for arguments too close to |z|=1 for either explicit branch.
inline double cheb_recurrence(ChebKind kind, int n, double z) {
    double prev = (kind == ChebKind::first) ? z : 0.0; // degree -1 seed
    double cur = 1.0;                                  // degree 0
    if (n == -1) return prev;
    for (int k = 0; k < n; ++k) {
        const double next = 2.0 * z * cur - prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

} // namespace detail

// T_n(z) (kind=first) or U_n(z) (kind=second); trigonometric branch inside
// [-1,1], hyperbolic branch outside, recurrence in a narrow band around the
// branch point where both explicit forms lose accuracy. n >= -1.
inline double chebyshev_eval(ChebKind kind, int n, double z) {
    if (n < -1) throw parameter_error("chebyshev_eval: degree must be >= -1");
    if (n == -1) return kind == ChebKind::first ? z : 0.0;
    if (n == 0) return 1.0;
    const double az = std::abs(z);
    const double sign = (z < 0.0 && (n % 2 != 0)) ? -1.0 : 1.0; // parity of T_n/U_n
    if (az <= 1.0 - 1e-9) {
        // Evaluate at |z| and restore parity: acos/sin near the z = -1 end
        // would cost ~eps*pi/(pi-phi) in relative accuracy.
        const double phi = std::acos(az);
        if (kind == ChebKind::first) return sign * std::cos(n * phi);
        return sign * std::sin((n + 1) * phi) / std::sin(phi);
    }
    if (az >= 1.0 + 1e-9) {
        const double w = std::acosh(az);
        if (kind == ChebKind::first) return sign * std::cosh(n * w);
        return sign * std::sinh((n + 1) * w) / std::sinh(w);
    }
    return detail::cheb_recurrence(kind, n, z);
}

// log |T_n(z)| for |z| >= 1, safe where cosh(n w) would overflow.
inline double chebyshev_log_abs_t1(int n, double z) {
    const double az = std::abs(z);
    if (az < 1.0) throw parameter_error("chebyshev_log_abs_t1: requires |z| >= 1");
    const double w = std::acosh(az);
    const double nw = n * w;
    if (nw < 350.0) return std::log(std::cosh(nw));
    return nw + std::log1p(std::exp(-2.0 * nw)) - std::log(2.0);
}

// Heavy-ball residual polynomial at constant rates,
//   q_{k+1} = (1 - alpha lambda) q_k + beta (q_k - q_{k-1}),  q_0 = q_{-1} = 1,
// in closed form through Chebyshev polynomials of z = (1+beta-alpha*lambda)/(2 sqrt(beta)):
//   q_n = beta^{n/2} U_n(z) - beta^{(n+1)/2} U_{n+1}(z) + 2 beta^{(n+1)/2} T_{n+1}(z).
// beta = 0 degenerates to the GD branch (1 - alpha lambda)^n.
inline double hb_constant_residual(long long n, double alpha, double beta, double lambda) {
    if (!(beta >= 0.0) || !(beta < 1.0))
        throw parameter_error("hb_constant_residual: requires 0 <= beta < 1");
    if (n < 0) throw parameter_error("hb_constant_residual: step must be >= 0");
    if (n == 0) return 1.0;
    if (beta == 0.0) return std::pow(1.0 - alpha * lambda, static_cast<double>(n));

    const double r = std::sqrt(beta);
    const double z = (1.0 + beta - alpha * lambda) / (2.0 * r);
    const double az = std::abs(z);

    if (az <= 1.0 - 1e-9) {
        // Oscillatory region: bracket is O(n/r), the beta^{n/2} envelope does
        // the decay; underflow of the envelope is the correct limit here.
        // For z < 0 reflect to the small-angle side (sin near pi is the one
        // ill-conditioned spot): with psi = pi - phi,
        //   sin(m phi) = (-1)^{m+1} sin(m psi),  cos(m phi) = (-1)^m cos(m psi).
        double bracket;
        if (z >= 0.0) {
            const double phi = std::acos(z);
            bracket = (std::sin((n + 1) * phi) - r * std::sin((n + 2) * phi)) / std::sin(phi) +
                      2.0 * r * std::cos((n + 1) * phi);
        } else {
            const double psi = std::acos(-z);
            const double parity = (n % 2 == 0) ? 1.0 : -1.0;
            bracket = parity * ((std::sin((n + 1) * psi) + r * std::sin((n + 2) * psi)) / std::sin(psi) -
                                2.0 * r * std::cos((n + 1) * psi));
        }
        return std::exp(0.5 * n * std::log(beta)) * bracket;
    }
    if (az >= 1.0 + 1e-9) {
        // Monotone region: q_n = A lp^n + B lm^n with lp lm = beta.
        const double sq = std::sqrt((z - 1.0) * (z + 1.0));
        const double lp = r * (z + sq);
        const double lm = r * (z - sq);
        const double t = (z - r) / (2.0 * sq);
        const double A = 0.5 + t;
        const double B = 0.5 - t;
        return std::pow(lp, static_cast<double>(n)) * A + std::pow(lm, static_cast<double>(n)) * B;
    }
    // Confluent sliver around |z| = 1: the exact recurrence is cheap and continuous.
    double qprev = 1.0, q = 1.0;
    const double anl = 1.0 - alpha * lambda;
    for (long long k = 0; k < n; ++k) {
        const double next = anl * q + beta * (q - qprev);
        qprev = q;
        q = next;
    }
    return q;
}

// ln Gamma(x) for x > 0; thin domain-checked wrapper, accurate to ~1 ulp.
inline double log_gamma(double x) {
    if (!(x > 0.0)) throw parameter_error("log_gamma: requires x > 0");
    return std::lgamma(x);
}

} // namespace plopt::specfun
