#pragma once

#include <cstddef>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace plopt {

// Error classes map 1:1 onto CLI exit codes (see tools/).
struct parameter_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

template <class F>
double pairwise_map_sum_rec(std::size_t lo, std::size_t hi, F&& term) {
    if (hi - lo <= 64) {
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += term(i);
        return s;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    return pairwise_map_sum_rec(lo, mid, term) + pairwise_map_sum_rec(mid, hi, term);
}

} // namespace detail

// Fixed-tree (pairwise) reduction: deterministic and ~O(log n) error growth,
// used for every atom-wise accumulation in the engine.
template <class F>
double pairwise_map_sum(std::size_t n, F&& term) {
    return n == 0 ? 0.0 : detail::pairwise_map_sum_rec(0, n, term);
}

inline double pairwise_sum(const std::vector<double>& v) {
    return pairwise_map_sum(v.size(), [&](std::size_t i) { return v[i]; });
}

// 17 significant digits: enough to round-trip any IEEE double through text.
inline std::string format_g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.16e", x);
    return buf;
}

inline std::string format_short(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

} // namespace plopt
