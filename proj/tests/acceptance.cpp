// Acceptance gate: runs the eight release criteria and prints one PASS/FAIL
// line per criterion, with per-check values and bounds underneath. Criteria
// with a stated time budget also fail when they run over it.

#include <cstdio>
#include <string>

#include "plopt/validate.hpp"

namespace {

struct Criterion {
    int id;
    const char* suite;
    const char* what;
    double time_budget; // seconds; 0 means no budget
};

constexpr Criterion criteria[] = {
    {1, "theorem3", "conjugate gradients matches the equal-mass closed form", 30.0},
    {2, "theorem11", "stable CG matches the chain formula; eigenvalue sandwich", 60.0},
    {3, "figure2a", "fitted exponents for all six algorithms", 300.0},
    {4, "theorem1", "constant-rate loss prefactor", 120.0},
    {5, "theorem4", "Jacobi-HB loss under its theoretical bound", 0.0},
    {6, "theorem8", "steepest-descent rates, exponent, and oscillation", 0.0},
    {7, "properties", "oracle-free invariant suite", 180.0},
    {8, "figure5", "tightness of the Jacobi parameter condition", 0.0},
};

} // namespace

int main() {
    int failures = 0;
    for (const auto& c : criteria) {
        plopt::validate::SuiteResult res;
        try {
            res = plopt::validate::run_suite(c.suite);
        } catch (const std::exception& e) {
            std::printf("[FAIL] criterion %d: %s -- suite '%s' threw: %s\n", c.id, c.what, c.suite,
                        e.what());
            ++failures;
            continue;
        }
        const bool on_time = c.time_budget <= 0.0 || res.seconds <= c.time_budget;
        const bool pass = res.passed() && on_time;
        std::printf("[%s] criterion %d: %s (%zu checks, %.1fs)\n", pass ? "PASS" : "FAIL", c.id,
                    c.what, res.checks.size(), res.seconds);
        for (const auto& chk : res.checks) {
            std::printf("       %-42s %12.5g %s %-10.5g %s\n", chk.name.c_str(), chk.value,
                        chk.rel == plopt::validate::Relation::le ? "<=" : ">=", chk.bound,
                        chk.pass ? "ok" : "FAILED");
            if (!chk.pass && !chk.detail.empty()) std::printf("         (%s)\n", chk.detail.c_str());
        }
        if (!on_time)
            std::printf("       over time budget: %.1fs > %.0fs\n", res.seconds, c.time_budget);
        if (!pass) ++failures;
    }
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    else std::printf("all criteria passed\n");
    return failures ? 1 : 0;
}
