#pragma once

// Spectral measures and quadratic problems: generator families, NTK Gram
// construction, eigendecomposition ingestion, CDF and scaling utilities.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "plopt/util.hpp"

namespace plopt::spectrum {

struct MeasureMeta {
    std::optional<double> zeta;
    std::optional<double> nu;
    std::optional<double> Lambda;
    std::optional<double> Q;
    // Factor the atoms were divided by at ingestion (original lambda_max).
    double lambda_scale = 1.0;
    // Mass sitting on nonpositive eigenvalues, dropped at ingestion.
    double dropped_zero_mass = 0.0;
};

// Finite discrete measure sum_k m_k delta_{lambda_k}; atoms strictly
// decreasing and positive. cum_upto[i] caches the total mass of atoms with
// index >= i (i.e. of all atoms <= atoms[i]), so CDF queries are O(log K).
struct DiscreteMeasure {
    std::vector<double> atoms;
    std::vector<double> masses;
    std::vector<double> cum_upto;
    MeasureMeta meta;

    std::size_t size() const { return atoms.size(); }
    double total_mass() const { return cum_upto.empty() ? 0.0 : cum_upto.front(); }
    double lambda_max() const { return atoms.front(); }
    double lambda_min() const { return atoms.back(); }
};

inline DiscreteMeasure make_measure(std::vector<double> atoms, std::vector<double> masses,
                                    MeasureMeta meta = {}) {
    if (atoms.size() != masses.size())
        throw parameter_error("measure: atoms and masses must have equal length");
    if (atoms.empty()) throw parameter_error("measure: needs at least one atom");
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        if (!(atoms[i] > 0.0) || !std::isfinite(atoms[i]))
            throw data_error("measure: atom " + std::to_string(i) + " must be positive and finite");
        if (i > 0 && !(atoms[i] < atoms[i - 1]))
            throw data_error("measure: atoms must be strictly decreasing");
        if (!(masses[i] >= 0.0) || !std::isfinite(masses[i]))
            throw data_error("measure: mass " + std::to_string(i) + " must be nonnegative and finite");
    }
    DiscreteMeasure m;
    m.atoms = std::move(atoms);
    m.masses = std::move(masses);
    m.meta = meta;
    m.cum_upto.resize(m.masses.size());
    double acc = 0.0, comp = 0.0; // compensated running sum
    for (std::size_t i = m.masses.size(); i-- > 0;) {
        const double y = m.masses[i] - comp;
        const double t = acc + y;
        comp = (t - acc) - y;
        acc = t;
        m.cum_upto[i] = acc;
    }
    return m;
}

// Ingestion path: sorts, drops nonpositive atoms (mass recorded), coalesces
// duplicates so the strict-decrease invariant holds; the measure itself is
// unchanged by coalescing.
inline DiscreteMeasure measure_from_unsorted(std::vector<double> atoms, std::vector<double> masses,
                                             MeasureMeta meta = {}) {
    if (atoms.size() != masses.size())
        throw parameter_error("measure: atoms and masses must have equal length");
    std::vector<std::size_t> idx(atoms.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return atoms[a] > atoms[b]; });
    std::vector<double> sa, sm;
    sa.reserve(atoms.size());
    sm.reserve(atoms.size());
    double dropped = 0.0;
    for (std::size_t j : idx) {
        const double lam = atoms[j], mass = masses[j];
        if (!(lam > 0.0)) {
            dropped += mass;
            continue;
        }
        if (!sa.empty() && lam >= sa.back() * (1.0 - 1e-12)) {
            sm.back() += mass; // same atom up to roundoff
        } else {
            sa.push_back(lam);
            sm.push_back(mass);
        }
    }
    if (sa.empty()) throw data_error("measure: no positive atoms after ingestion");
    meta.dropped_zero_mass += dropped;
    return make_measure(std::move(sa), std::move(sm), meta);
}

// rho((0, lambda]) with the right-continuous convention: an atom exactly at
// lambda is included.
inline double measure_cdf(const DiscreteMeasure& m, double lambda) {
    if (!(lambda >= 0.0)) throw parameter_error("measure_cdf: lambda must be >= 0");
    auto it = std::lower_bound(m.atoms.begin(), m.atoms.end(), lambda, std::greater<double>());
    const std::size_t i = static_cast<std::size_t>(it - m.atoms.begin());
    return i == m.atoms.size() ? 0.0 : m.cum_upto[i];
}

struct PowerLawSpec {
    double zeta = 1.0; // rho((0,lambda]) = lambda^zeta on [0,1], Q = 1, lambda_max = 1
};

// --- generator families ----------------------------------------------------

// Diagonal benchmark problem: lambda_k = k^{-nu} with masses matching the
// exact power law rho((0,lambda]) ~ lambda^zeta, i.e. m_k = zeta*nu *
// k^{-(zeta nu + 1)} (the local quantile weight of lambda^zeta at k^{-nu}).
inline DiscreteMeasure synthetic_diagonal(std::size_t M, double nu, double zeta) {
    if (M < 1) throw parameter_error("synthetic_diagonal: M >= 1");
    if (!(nu > 0.0) || !(zeta > 0.0)) throw parameter_error("synthetic_diagonal: nu, zeta > 0");
    std::vector<double> atoms(M), masses(M);
    const double s = zeta * nu;
    for (std::size_t k = 1; k <= M; ++k) {
        atoms[k - 1] = std::pow(static_cast<double>(k), -nu);
        masses[k - 1] = s * std::pow(static_cast<double>(k), -(s + 1.0));
    }
    MeasureMeta meta;
    meta.zeta = zeta;
    meta.nu = nu;
    meta.Lambda = 1.0;
    auto m = make_measure(std::move(atoms), std::move(masses), meta);
    m.meta.Q = m.total_mass(); // CDF/lambda^zeta peaks at lambda = 1
    return m;
}

// Telescoping power-law measure: masses k^{-zeta nu} - (k+1)^{-zeta nu} at
// atoms k^{-nu}; its CDF at every atom equals lambda^zeta exactly.
inline DiscreteMeasure discrete_powerlaw(double zeta, double nu, std::size_t K) {
    if (K < 1) throw parameter_error("discrete_powerlaw: K >= 1");
    if (!(nu > 0.0) || !(zeta > 0.0)) throw parameter_error("discrete_powerlaw: nu, zeta > 0");
    std::vector<double> atoms(K), masses(K);
    const double s = zeta * nu;
    for (std::size_t k = 1; k <= K; ++k) {
        atoms[k - 1] = std::pow(static_cast<double>(k), -nu);
        // k^{-s} - (k+1)^{-s} without cancellation
        masses[k - 1] = -std::pow(static_cast<double>(k), -s) * std::expm1(-s * std::log1p(1.0 / k));
    }
    MeasureMeta meta;
    meta.zeta = zeta;
    meta.nu = nu;
    meta.Lambda = 1.0;
    meta.Q = 1.0;
    return make_measure(std::move(atoms), std::move(masses), meta);
}

namespace detail {

// sum_{k > k0} (k^{-s} - (k+1)^{-s}) k^{-nu}, summed until the integral tail
// bound guarantees relative error <= 1e-10.
inline double sd_tail_first_moment(double s, double nu, std::size_t k0) {
    double acc = 0.0;
    for (std::size_t k = k0 + 1;; ++k) {
        const double kk = static_cast<double>(k);
        const double mass = -std::pow(kk, -s) * std::expm1(-s * std::log1p(1.0 / kk));
        acc += mass * std::pow(kk, -nu);
        const double tail = s / (s + nu) * std::pow(kk, -(s + nu));
        if (tail <= 1e-10 * acc) return acc;
        if (k > 100000000) throw numerical_error("sd_lowerbound_measure: series failed to converge");
    }
}

} // namespace detail

// Steepest-descent lower-bound measure: power-law tail below epsilon = 1e-2
// plus a balancing atom at 1 carrying the tail's first moment, so that
// sigma((0,eps]) = sigma({1}) for sigma(dl) = lambda rho(dl).
inline DiscreteMeasure sd_lowerbound_measure(double zeta, double nu, std::size_t K) {
    if (!(nu > 0.0) || !(zeta > 0.0)) throw parameter_error("sd_lowerbound_measure: nu, zeta > 0");
    const auto k0 = static_cast<std::size_t>(std::ceil(std::pow(10.0, 2.0 / nu)));
    if (K <= k0)
        throw parameter_error("sd_lowerbound_measure: K must exceed k0 = " + std::to_string(k0));
    const double s = zeta * nu;
    std::vector<double> atoms, masses;
    atoms.reserve(K - k0 + 1);
    masses.reserve(K - k0 + 1);
    atoms.push_back(1.0);
    masses.push_back(detail::sd_tail_first_moment(s, nu, k0));
    for (std::size_t k = k0 + 1; k <= K; ++k) {
        const double kk = static_cast<double>(k);
        atoms.push_back(std::pow(kk, -nu));
        masses.push_back(-std::pow(kk, -s) * std::expm1(-s * std::log1p(1.0 / kk)));
    }
    MeasureMeta meta;
    meta.zeta = zeta;
    meta.nu = nu;
    meta.Lambda = 1.0;
    meta.Q = 1.0;
    return make_measure(std::move(atoms), std::move(masses), meta);
}

// Equal-mass midpoint discretization of the exact law rho((0,lambda]) =
// lambda^zeta: M atoms of mass 1/M at the quantile midpoints.
inline DiscreteMeasure equal_mass_discretization(const PowerLawSpec& spec, std::size_t M) {
    if (M < 1) throw parameter_error("equal_mass_discretization: M >= 1");
    if (!(spec.zeta > 0.0)) throw parameter_error("equal_mass_discretization: zeta > 0");
    std::vector<double> atoms(M), masses(M, 1.0 / static_cast<double>(M));
    for (std::size_t k = 1; k <= M; ++k)
        atoms[k - 1] = std::pow((M - k + 0.5) / static_cast<double>(M), 1.0 / spec.zeta);
    MeasureMeta meta;
    meta.zeta = spec.zeta;
    meta.Q = 2.0; // CDF/lambda^zeta touches 2 at the bottom atom
    return make_measure(std::move(atoms), std::move(masses), meta);
}

// Smallest Lambda with lambda_k <= Lambda k^{-nu}, for ingested measures whose
// decay constant is not known a priori.
inline double fit_lambda_bound(const DiscreteMeasure& m, double nu) {
    if (!(nu > 0.0)) throw parameter_error("fit_lambda_bound: nu > 0");
    double best = 0.0;
    for (std::size_t k = 1; k <= m.size(); ++k)
        best = std::max(best, m.atoms[k - 1] * std::pow(static_cast<double>(k), nu));
    return best;
}

// Divide atoms by lambda_max (J -> c J scaling); masses are untouched and the
// factor is recorded so the original problem can be recovered.
inline DiscreteMeasure rescale_to_unit_max(const DiscreteMeasure& m) {
    DiscreteMeasure out = m;
    const double scale = m.lambda_max();
    for (auto& a : out.atoms) a /= scale;
    out.atoms.front() = 1.0;
    out.meta.lambda_scale = m.meta.lambda_scale * scale;
    return out;
}

// --- dense quadratic problems ----------------------------------------------

// L(w) = 1/2 ||J w - target||^2 with J either dense or lower-bidiagonal
// (diag[i] on the diagonal, sub[i-1] couples row i to column i-1).
struct OperatorProblem {
    Eigen::MatrixXd J;
    bool bidiagonal = false;
    Eigen::VectorXd diag, sub;
    Eigen::VectorXd target;
    std::optional<double> zeta, nu;
    std::vector<std::string> notes;

    Eigen::Index dim() const { return target.size(); }

    Eigen::VectorXd apply(const Eigen::VectorXd& w) const {
        if (!bidiagonal) return J * w;
        Eigen::VectorXd y = diag.cwiseProduct(w);
        for (Eigen::Index i = 1; i < w.size(); ++i) y[i] += sub[i - 1] * w[i - 1];
        return y;
    }
    Eigen::VectorXd apply_transpose(const Eigen::VectorXd& y) const {
        if (!bidiagonal) return J.transpose() * y;
        Eigen::VectorXd w = diag.cwiseProduct(y);
        for (Eigen::Index i = 0; i + 1 < y.size(); ++i) w[i] += sub[i] * y[i + 1];
        return w;
    }
};

// Bidiagonal chain operator whose conjugate-gradients losses have an exact
// closed form: diagonal n^{-nu/2}, subdiagonal -(n/(n-1))^g (n-1)^{-nu/2}
// with g = (1 - (2+nu) zeta)/2, target e_1.
inline OperatorProblem cg_lowerbound_operator(double zeta, double nu, Eigen::Index N) {
    if (N < 2) throw parameter_error("cg_lowerbound_operator: N >= 2");
    if (!(nu > 0.0) || !(zeta > 0.0)) throw parameter_error("cg_lowerbound_operator: nu, zeta > 0");
    OperatorProblem op;
    op.bidiagonal = true;
    op.zeta = zeta;
    op.nu = nu;
    if (!(zeta < 1.0))
        op.notes.push_back("cg_lowerbound_operator: spectral-measure guarantee requires 0 < zeta < 1");
    const double g = (1.0 - (2.0 + nu) * zeta) / 2.0;
    op.diag.resize(N);
    op.sub.resize(N - 1);
    for (Eigen::Index i = 0; i < N; ++i) {
        const double n = static_cast<double>(i + 1);
        op.diag[i] = std::pow(n, -nu / 2.0);
        if (i >= 1) op.sub[i - 1] = -std::pow(n / (n - 1.0), g) * std::pow(n - 1.0, -nu / 2.0);
    }
    op.target = Eigen::VectorXd::Zero(N);
    op.target[0] = 1.0;
    return op;
}

// Eigenvalues of J J^T for a bidiagonal problem, sorted decreasing.
// J J^T is symmetric tridiagonal: diagonal d_i^2 + s_i^2, offdiagonal d_i s_{i+1}.
inline std::vector<double> gram_eigenvalues(const OperatorProblem& op) {
    const Eigen::Index N = op.dim();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    if (op.bidiagonal) {
        Eigen::VectorXd d(N), e(N - 1);
        for (Eigen::Index i = 0; i < N; ++i) {
            const double si = (i >= 1) ? op.sub[i - 1] : 0.0;
            d[i] = op.diag[i] * op.diag[i] + si * si;
            if (i + 1 < N) e[i] = op.diag[i] * op.sub[i];
        }
        es.computeFromTridiagonal(d, e, Eigen::EigenvaluesOnly);
    } else {
        const Eigen::MatrixXd G = op.J * op.J.transpose();
        es.compute(G, Eigen::EigenvaluesOnly);
    }
    if (es.info() != Eigen::Success) throw numerical_error("gram_eigenvalues: eigensolver failed");
    std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + N);
    std::sort(ev.begin(), ev.end(), std::greater<double>());
    return ev;
}

// --- datasets and the NTK Gram ---------------------------------------------

struct Dataset {
    std::size_t rows = 0, cols = 0;
    std::vector<double> x; // row-major
    std::vector<double> y; // optional targets, size rows or 0
    double* row(std::size_t i) { return x.data() + i * cols; }
    const double* row(std::size_t i) const { return x.data() + i * cols; }
};

// Dataset mean/variance normalization: x -> (x - m)/r with
// r^2 = mean_i ||x_i - m||^2. Returns {mean, r}.
inline std::pair<std::vector<double>, double> normalize_dataset(Dataset& data) {
    if (data.rows == 0) throw data_error("normalize_dataset: empty dataset");
    std::vector<double> mean(data.cols, 0.0);
    for (std::size_t i = 0; i < data.rows; ++i)
        for (std::size_t j = 0; j < data.cols; ++j) mean[j] += data.row(i)[j];
    for (auto& v : mean) v /= static_cast<double>(data.rows);
    double r2 = 0.0;
    for (std::size_t i = 0; i < data.rows; ++i)
        for (std::size_t j = 0; j < data.cols; ++j) {
            const double d = data.row(i)[j] - mean[j];
            r2 += d * d;
        }
    r2 /= static_cast<double>(data.rows);
    if (!(r2 > 0.0)) throw data_error("normalize_dataset: zero variance");
    const double r = std::sqrt(r2);
    for (std::size_t i = 0; i < data.rows; ++i)
        for (std::size_t j = 0; j < data.cols; ++j) data.row(i)[j] = (data.row(i)[j] - mean[j]) / r;
    return {std::move(mean), r};
}

// NTK of an infinitely wide shallow ReLU network:
//   K(x, x') = ||x|| ||x'|| (sin phi + 2 cos phi (pi - phi)) / (2 pi),
// cos phi clamped to [-1, 1] before acos.
inline Eigen::MatrixXd ntk_gram(const Dataset& data) {
    const std::size_t M = data.rows;
    if (M == 0) throw data_error("ntk_gram: empty dataset");
    std::vector<double> norms(M);
    for (std::size_t i = 0; i < M; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < data.cols; ++j) s += data.row(i)[j] * data.row(i)[j];
        norms[i] = std::sqrt(s);
        if (!(norms[i] > 0.0)) throw data_error("ntk_gram: zero-norm vector at index " + std::to_string(i));
    }
    Eigen::MatrixXd G(M, M);
    for (std::size_t i = 0; i < M; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < data.cols; ++k) dot += data.row(i)[k] * data.row(j)[k];
            const double c = std::clamp(dot / (norms[i] * norms[j]), -1.0, 1.0);
            const double phi = std::acos(c);
            const double kij = norms[i] * norms[j] *
                               (std::sin(phi) + 2.0 * c * (M_PI - phi)) / (2.0 * M_PI);
            G(i, j) = kij;
            G(j, i) = kij;
        }
    }
    return G;
}

// Eigendecompose a Gram matrix and project the targets: atoms are the positive
// eigenvalues, masses the squared target coefficients; the result is rescaled
// to lambda_max = 1 with the original scale recorded in metadata.
inline DiscreteMeasure spectral_measure_from_gram(const Eigen::MatrixXd& gram,
                                                  const Eigen::VectorXd& targets) {
    if (gram.rows() != gram.cols()) throw data_error("spectral_measure_from_gram: matrix not square");
    if (gram.rows() != targets.size())
        throw data_error("spectral_measure_from_gram: targets length mismatch");
    const double scale = gram.cwiseAbs().maxCoeff();
    const double asym = (gram - gram.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-8 * std::max(scale, 1e-300))
        throw data_error("spectral_measure_from_gram: matrix not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    if (es.info() != Eigen::Success)
        throw numerical_error("spectral_measure_from_gram: eigensolver failed");
    std::vector<double> atoms(gram.rows()), masses(gram.rows());
    for (Eigen::Index i = 0; i < gram.rows(); ++i) {
        atoms[i] = es.eigenvalues()[i];
        const double c = es.eigenvectors().col(i).dot(targets);
        masses[i] = c * c;
    }
    auto m = measure_from_unsorted(std::move(atoms), std::move(masses));
    return rescale_to_unit_max(m);
}

// --- synthetic Gaussian-mix data -------------------------------------------

namespace detail {

// Self-contained normal sampler (Box-Muller over mt19937_64 output) so that
// generated datasets are bit-identical across standard libraries.
class NormalSampler {
  public:
    explicit NormalSampler(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}
    double operator()() {
        if (have_) {
            have_ = false;
            return cached_;
        }
        const double u1 = next_unit_();
        const double u2 = next_unit_();
        const double r = std::sqrt(-2.0 * std::log(u1));
        cached_ = r * std::sin(2.0 * M_PI * u2);
        have_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

  private:
    double next_unit_() {
        // in (0, 1]: never feeds log(0)
        return 1.0 - static_cast<double>(next_() >> 11) * 0x1.0p-53;
    }
    std::uint64_t next_() {
        // splitmix64; a full PRNG is not warranted for test data
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    std::uint64_t state_;
    double cached_ = 0.0;
    bool have_ = false;
};

} // namespace detail

// Isotropic Gaussian clusters with centers at the given separation scale;
// the first half of the clusters is labeled 0, the rest 1.
inline Dataset gaussian_mix_dataset(std::size_t d, std::size_t n_clusters, std::size_t per_cluster,
                                    double separation, std::uint64_t seed) {
    if (d < 1 || n_clusters < 1 || per_cluster < 1)
        throw parameter_error("gaussian_mix_dataset: all counts >= 1");
    detail::NormalSampler normal(seed);
    Dataset out;
    out.rows = n_clusters * per_cluster;
    out.cols = d;
    out.x.resize(out.rows * d);
    out.y.resize(out.rows);
    std::vector<double> center(d);
    std::size_t row = 0;
    for (std::size_t c = 0; c < n_clusters; ++c) {
        for (std::size_t j = 0; j < d; ++j) center[j] = separation * normal();
        const double label = (c < n_clusters / 2 + n_clusters % 2) ? 0.0 : 1.0;
        for (std::size_t p = 0; p < per_cluster; ++p, ++row) {
            for (std::size_t j = 0; j < d; ++j) out.row(row)[j] = center[j] + normal();
            out.y[row] = label;
        }
    }
    return out;
}

} // namespace plopt::spectrum
