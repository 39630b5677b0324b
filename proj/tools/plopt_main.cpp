// plopt: problem generation, optimizer runs, parameter sweeps, validation
// suites, and power-law fit reports on top of the plopt headers.
//
// Exit codes: 0 success, 64 usage/parameters, 65 malformed data,
// 66 numerical failure (including diverged runs), 67 failed validation,
// 74 file I/O.
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "plopt/analysis.hpp"
#include "plopt/engine.hpp"
#include "plopt/io.hpp"
#include "plopt/measure.hpp"
#include "plopt/oracle.hpp"
#include "plopt/svg.hpp"
#include "plopt/util.hpp"
#include "plopt/validate.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace plopt;

constexpr int exit_usage = 64;
constexpr int exit_data = 65;
constexpr int exit_numerical = 66;
constexpr int exit_validation = 67;
constexpr int exit_io = 74;

// ---------------------------------------------------------------------------
// option bundles

struct ProblemOpts {
    std::string file;
    std::string kind;
    double M = std::nan("");
    double K = std::nan("");
    double N = std::nan("");
    double zeta = std::nan("");
    double nu = std::nan("");
};

struct ScheduleOpts {
    std::string name;
    double alpha = 1.0;
    std::optional<double> beta;
    double a = 1.0;
    double b = 0.0;
    int depth = -1; // < 0: smallest depth covering the run
    std::string stable_cg_mode = "target";
};

using Problem = std::variant<spectrum::DiscreteMeasure, spectrum::OperatorProblem>;

void add_problem_flags(CLI::App* cmd, ProblemOpts& p) {
    cmd->add_option("--problem", p.file, "measure or operator file to load");
    cmd->add_option("--kind", p.kind, "generator kind")
        ->check(CLI::IsMember({"diagonal", "powerlaw", "equal-mass", "sd-lowerbound", "chain"}));
    cmd->add_option("--M", p.M, "atom count (diagonal, equal-mass)");
    cmd->add_option("--K", p.K, "atom count (powerlaw, sd-lowerbound)");
    cmd->add_option("--N", p.N, "operator dimension (chain)");
    cmd->add_option("--zeta", p.zeta, "spectral CDF exponent");
    cmd->add_option("--nu", p.nu, "eigenvalue decay exponent");
}

void add_schedule_flags(CLI::App* cmd, ScheduleOpts& s) {
    cmd->add_option("--schedule", s.name, "optimizer schedule")
        ->required()
        ->check(CLI::IsMember({"gd", "hb", "jacobi-hb", "scheduled-gd", "sd", "cg", "stable-cg"}));
    cmd->add_option("--alpha", s.alpha, "learning rate (gd, hb); default 1");
    cmd->add_option("--beta", s.beta, "momentum (hb); default 0.9 for hb, 0 for gd");
    cmd->add_option("--a", s.a, "first schedule parameter (jacobi-hb, scheduled-gd); default 1");
    cmd->add_option("--b", s.b, "second schedule parameter (jacobi-hb, scheduled-gd); default 0");
    cmd->add_option("--depth", s.depth,
                    "scheduled-gd block levels; default: smallest depth covering the run");
    cmd->add_option("--stable-cg-mode", s.stable_cg_mode, "stable-cg direction space")
        ->check(CLI::IsMember({"target", "parameter"}));
}

// ---------------------------------------------------------------------------
// small helpers

std::size_t to_count(double v, const std::string& flag) {
    if (std::isnan(v)) throw parameter_error(flag + " is required for this generator");
    if (!(v >= 1.0) || v != std::floor(v) || v > 9e15)
        throw parameter_error(flag + " must be a positive integer");
    return static_cast<std::size_t>(v);
}

double need(double v, const std::string& flag) {
    if (std::isnan(v)) throw parameter_error(flag + " is required for this generator");
    return v;
}

std::string fmt(double v) { return std::isfinite(v) ? format_short(v) : "na"; }

std::string fmt_opt(const std::optional<double>& v) { return v ? format_short(*v) : "na"; }

// Output paths resolve inside --output-dir unless absolute.
std::string resolve_out(const std::string& outdir, const std::string& name) {
    fs::path p(name);
    if (!p.is_absolute() && !outdir.empty() && outdir != ".") p = fs::path(outdir) / p;
    std::error_code ec;
    if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
    if (ec) throw io_error("cannot create directory " + p.parent_path().string());
    return p.string();
}

Problem generate_problem(const ProblemOpts& p) {
    if (p.kind == "diagonal")
        return spectrum::synthetic_diagonal(to_count(p.M, "--M"), need(p.nu, "--nu"),
                                            need(p.zeta, "--zeta"));
    if (p.kind == "powerlaw")
        return spectrum::discrete_powerlaw(need(p.zeta, "--zeta"), need(p.nu, "--nu"),
                                           to_count(p.K, "--K"));
    if (p.kind == "equal-mass")
        return spectrum::equal_mass_discretization({need(p.zeta, "--zeta")},
                                                   to_count(p.M, "--M"));
    if (p.kind == "sd-lowerbound")
        return spectrum::sd_lowerbound_measure(need(p.zeta, "--zeta"), need(p.nu, "--nu"),
                                               to_count(p.K, "--K"));
    if (p.kind == "chain")
        return spectrum::cg_lowerbound_operator(need(p.zeta, "--zeta"), need(p.nu, "--nu"),
                                                static_cast<Eigen::Index>(to_count(p.N, "--N")));
    throw parameter_error("unknown generator kind '" + p.kind + "'");
}

Problem load_problem_file(const std::string& path) {
    std::ifstream peek(path);
    if (!peek) throw io_error("cannot open " + path);
    std::string first;
    std::getline(peek, first);
    peek.close();
    if (first.rfind("atoms=", 0) == 0) return io::read_measure_file(path);
    if (first.rfind("band ", 0) == 0) return io::read_operator_file(path);
    throw data_error(path + ": neither a measure file nor an operator band file");
}

Problem resolve_problem(const ProblemOpts& p) {
    if (!p.file.empty() && !p.kind.empty())
        throw parameter_error("give either --problem or --kind, not both");
    if (!p.file.empty()) return load_problem_file(p.file);
    if (!p.kind.empty()) return generate_problem(p);
    throw parameter_error("need a problem: --problem FILE or --kind GENERATOR");
}

int auto_depth(long long steps) {
    int d = 0;
    while (d < 30 && ((1LL << (d + 1)) - 1) < steps) ++d;
    return d;
}

engine::Schedule make_schedule(const ScheduleOpts& s, long long steps) {
    if (s.name == "gd") return engine::Schedule::Constant(s.alpha, s.beta.value_or(0.0));
    if (s.name == "hb") return engine::Schedule::Constant(s.alpha, s.beta.value_or(0.9));
    if (s.name == "jacobi-hb") return engine::Schedule::JacobiHB(s.a, s.b);
    if (s.name == "scheduled-gd")
        return engine::Schedule::ScheduledGD(s.a, s.b, s.depth < 0 ? auto_depth(steps) : s.depth);
    if (s.name == "sd") return engine::Schedule::SteepestDescent();
    if (s.name == "cg") return engine::Schedule::ConjugateGradients();
    if (s.name == "stable-cg") return engine::Schedule::StableConjugateGradients();
    throw parameter_error("unknown schedule '" + s.name + "'");
}

engine::Trajectory run_problem(const Problem& prob, const engine::Schedule& s, long long steps,
                               const engine::RunOptions& opt) {
    if (std::holds_alternative<spectrum::DiscreteMeasure>(prob))
        return engine::run(std::get<spectrum::DiscreteMeasure>(prob), s, steps, opt);
    if (!opt.probes.empty())
        throw parameter_error("--probes needs a spectral (measure) problem");
    return engine::dense_run(std::get<spectrum::OperatorProblem>(prob), s, steps, opt);
}

void print_problem_summary(const Problem& prob) {
    if (std::holds_alternative<spectrum::DiscreteMeasure>(prob)) {
        const auto& m = std::get<spectrum::DiscreteMeasure>(prob);
        std::cout << "measure atoms=" << m.size() << " zeta=" << fmt_opt(m.meta.zeta)
                  << " nu=" << fmt_opt(m.meta.nu) << " total_mass=" << format_short(m.total_mass())
                  << "\n";
    } else {
        const auto& op = std::get<spectrum::OperatorProblem>(prob);
        std::cout << "operator dim=" << op.dim() << " zeta=" << fmt_opt(op.zeta)
                  << " nu=" << fmt_opt(op.nu) << "\n";
    }
}

// ---------------------------------------------------------------------------
// generate

struct GenerateOpts {
    ProblemOpts prob; // kind comes from the positional argument
    std::string out;
    // gaussian-mix (writes a raw dataset; the only randomized generator)
    double dim = 8, clusters = 2, per_cluster = 50, separation = 4.0;
    std::optional<std::uint64_t> seed;
};

int cmd_generate(const GenerateOpts& g, const std::string& outdir) {
    const std::string path = resolve_out(outdir, g.out);
    if (g.prob.kind == "gaussian-mix") {
        if (!g.seed) throw parameter_error("generate gaussian-mix: --seed is required");
        auto data = spectrum::gaussian_mix_dataset(
            to_count(g.dim, "--dim"), to_count(g.clusters, "--clusters"),
            to_count(g.per_cluster, "--per-cluster"), g.separation, *g.seed);
        auto out = io::open_output(path, true);
        io::write_dataset_raw(out, data);
        std::cout << "dataset rows=" << data.rows << " cols=" << data.cols
                  << " targets=" << (data.y.empty() ? "no" : "yes") << " seed=" << *g.seed << "\n";
        std::cout << "wrote " << path << "\n";
        return 0;
    }
    auto prob = generate_problem(g.prob);
    if (std::holds_alternative<spectrum::DiscreteMeasure>(prob))
        io::write_measure_file(path, std::get<spectrum::DiscreteMeasure>(prob));
    else
        io::write_operator_file(path, std::get<spectrum::OperatorProblem>(prob));
    print_problem_summary(prob);
    std::cout << "wrote " << path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// run

struct RunOpts {
    ProblemOpts prob;
    ScheduleOpts sched;
    long long steps = 0;
    std::vector<double> probes;
    double max_records = 0;
    bool allow_unstable = false;
    std::string out;
};

engine::RunOptions to_engine_options(const RunOpts& r) {
    engine::RunOptions opt;
    opt.probes = r.probes;
    opt.allow_unstable = r.allow_unstable;
    if (!(r.max_records >= 0.0) || r.max_records != std::floor(r.max_records))
        throw parameter_error("--max-records must be a nonnegative integer");
    opt.max_records = static_cast<std::size_t>(r.max_records);
    opt.stable_cg_mode = r.sched.stable_cg_mode == "parameter"
                             ? engine::StableCgMode::parameter_space
                             : engine::StableCgMode::target_space;
    return opt;
}

int cmd_run(const RunOpts& r, const std::string& outdir) {
    auto prob = resolve_problem(r.prob);
    auto sched = make_schedule(r.sched, r.steps);
    auto traj = run_problem(prob, sched, r.steps, to_engine_options(r));
    const std::string path = resolve_out(outdir, r.out);
    io::write_trajectory_file(path, traj);
    std::cout << "wrote " << path << " (" << traj.records.size()
              << " records, final loss " << format_short(traj.final_loss()) << ")\n";
    if (traj.diverged) {
        std::cerr << "run diverged at step " << traj.diverged_at
                  << "; partial trajectory kept\n";
        return exit_numerical;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepOpts {
    ProblemOpts prob;
    ScheduleOpts sched;
    long long steps = 0;
    double max_records = 0;
    bool allow_unstable = false;
    std::vector<double> a_grid, b_grid, zeta_grid, nu_grid;
    unsigned jobs = 1;
    std::string out_dir;
};

struct SweepPoint {
    std::size_t index = 0;
    double a, b, zeta, nu;
    std::string file;
    bool ok = false;
    bool diverged = false;
    double final_loss = std::nan("");
    std::string error;
};

int cmd_sweep(const SweepOpts& sw, const std::string& outdir) {
    auto one = [](std::vector<double> g, double base) {
        return g.empty() ? std::vector<double>{base} : g;
    };
    // For gd/hb the (a, b) axes are the learning rate and momentum; the other
    // schedules read them as their own (a, b) parameters.
    const bool rate_axes = sw.sched.name == "gd" || sw.sched.name == "hb";
    const double base_a = rate_axes ? sw.sched.alpha : sw.sched.a;
    const double base_b =
        rate_axes ? sw.sched.beta.value_or(sw.sched.name == "hb" ? 0.9 : 0.0) : sw.sched.b;
    const auto as = one(sw.a_grid, base_a);
    const auto bs = one(sw.b_grid, base_b);
    const auto zetas = one(sw.zeta_grid, sw.prob.zeta);
    const auto nus = one(sw.nu_grid, sw.prob.nu);
    if ((!sw.zeta_grid.empty() || !sw.nu_grid.empty()) && sw.prob.kind.empty())
        throw parameter_error("sweep: zeta/nu grids need a generator problem (--kind)");

    std::vector<SweepPoint> points;
    for (double a : as)
        for (double b : bs)
            for (double zeta : zetas)
                for (double nu : nus) {
                    SweepPoint p;
                    p.index = points.size();
                    p.a = a;
                    p.b = b;
                    p.zeta = zeta;
                    p.nu = nu;
                    points.push_back(p);
                }
    if (points.empty()) throw parameter_error("sweep: empty parameter grid");

    const std::string dir = resolve_out(outdir, sw.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io_error("cannot create directory " + dir);

    const int width = static_cast<int>(std::to_string(points.size() - 1).size());
    for (auto& p : points) {
        char name[64];
        std::snprintf(name, sizeof name, "point_%0*zu.csv", width, p.index);
        p.file = name;
    }

    // Grid points are independent; workers pull indices off a shared counter
    // and the index file is assembled afterwards in grid order.
    std::atomic<std::size_t> cursor{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= points.size()) return;
            auto& p = points[i];
            try {
                ProblemOpts po = sw.prob;
                po.zeta = p.zeta;
                po.nu = p.nu;
                ScheduleOpts so = sw.sched;
                so.alpha = p.a;
                so.beta = p.b;
                so.a = p.a;
                so.b = p.b;
                RunOpts ro;
                ro.max_records = sw.max_records;
                ro.allow_unstable = sw.allow_unstable;
                ro.sched = so;
                auto prob = resolve_problem(po);
                auto traj = run_problem(prob, make_schedule(so, sw.steps), sw.steps,
                                        to_engine_options(ro));
                io::write_trajectory_file((fs::path(dir) / p.file).string(), traj);
                p.ok = true;
                p.diverged = traj.diverged;
                p.final_loss = traj.final_loss();
            } catch (const std::exception& e) {
                p.ok = false;
                p.error = e.what();
            }
        }
    };
    const unsigned jobs = std::clamp<unsigned>(sw.jobs, 1u, 64u);
    std::vector<std::thread> pool;
    for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    const std::string index_path = (fs::path(dir) / "index.txt").string();
    auto out = io::open_output(index_path);
    out << "sweep schedule=" << sw.sched.name << " steps=" << sw.steps
        << " points=" << points.size() << "\n";
    std::size_t failed = 0;
    for (const auto& p : points) {
        out << "index=" << p.index << " a=" << fmt(p.a) << " b=" << fmt(p.b)
            << " zeta=" << fmt(p.zeta) << " nu=" << fmt(p.nu) << " file=" << p.file;
        if (p.ok) {
            out << " status=" << (p.diverged ? "diverged" : "ok")
                << " final_loss=" << format_g17(p.final_loss);
        } else {
            ++failed;
            out << " status=failed error=" << p.error;
        }
        out << "\n";
    }
    out.close();
    std::cout << "sweep: " << points.size() << " points, " << failed << " failed, index "
              << index_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// validate

void print_check(std::ostream& os, const validate::Check& c) {
    char line[256];
    std::snprintf(line, sizeof line, "  %-44s %14.6g %s %-12.6g %s\n", c.name.c_str(), c.value,
                  c.rel == validate::Relation::le ? "<=" : ">=", c.bound,
                  c.pass ? "ok" : "FAILED");
    os << line;
    if (!c.pass && !c.detail.empty()) os << "    (" << c.detail << ")\n";
}

int cmd_validate(std::vector<std::string> names, unsigned jobs, const std::string& sidecar,
                 const std::string& outdir) {
    const auto known = validate::suite_names();
    if (names.empty() || (names.size() == 1 && names[0] == "all"))
        names.assign(known.begin(), known.end());
    for (const auto& n : names)
        if (std::find(known.begin(), known.end(), n) == known.end())
            throw parameter_error("unknown validation suite '" + n + "'");

    // Suites fan out to a small pool; results are printed in request order.
    std::vector<validate::SuiteResult> results(names.size());
    std::atomic<std::size_t> cursor{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= names.size()) return;
            results[i] = validate::run_suite(names[i]);
        }
    };
    const unsigned eff = std::clamp<unsigned>(jobs, 1u, 16u);
    std::vector<std::thread> pool;
    for (unsigned j = 1; j < eff && j < names.size(); ++j) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    const std::string sidecar_path = resolve_out(outdir, sidecar);
    auto side = io::open_output(sidecar_path);
    std::size_t checks = 0, failed = 0;
    for (const auto& res : results) {
        std::cout << "suite " << res.suite << "\n";
        for (const auto& c : res.checks) {
            print_check(std::cout, c);
            ++checks;
            if (!c.pass) ++failed;
            json j;
            j["suite"] = res.suite;
            j["check"] = c.name;
            j["value"] = c.value;
            j["bound"] = c.bound;
            j["relation"] = c.rel == validate::Relation::le ? "le" : "ge";
            j["pass"] = c.pass;
            if (!c.detail.empty()) j["detail"] = c.detail;
            side << j.dump() << "\n";
        }
        std::cout << "suite " << res.suite << ": " << (res.passed() ? "pass" : "FAIL") << " ("
                  << res.checks.size() << " checks)\n";
    }
    side.close();
    std::cout << "validate: " << results.size() << " suites, " << checks << " checks, " << failed
              << " failed (" << sidecar_path << ")\n";
    return failed == 0 ? 0 : exit_validation;
}

// ---------------------------------------------------------------------------
// report

struct ReportOpts {
    std::vector<std::string> trajectories;
    std::string problem;
    std::string out, svg, sidecar;
    std::vector<double> window;   // explicit fit window, 2 values
    std::optional<double> r0;
    std::optional<double> tolerance;
    std::optional<double> lam_low;
    std::optional<double> top_fraction, bottom_fraction;
    bool cdf_only = false;
    // ntk mode
    bool ntk = false;
    std::string dataset;
    bool targets_last = false;
    bool normalize = false;
    std::vector<double> k_window;
};

struct KindDefaults {
    oracle::AlgorithmKind alg;
    analysis::ThresholdKind th;
    bool block_ends = false;
    double top = 1.0 / 3.0;
    double bottom = 1.0 / 100.0;
    double r0 = 0.5;
    bool rates_from_records = false;
};

// Auto-window conventions per schedule family: constant-rate methods fit well
// below n_th (the top of the window contaminates), Krylov methods settle onto
// the asymptote late (the bottom contaminates), so their windows hug the top
// of the resolved region estimated with r0 -> 0.
KindDefaults kind_defaults(const std::string& schedule_name) {
    using AK = oracle::AlgorithmKind;
    using TK = analysis::ThresholdKind;
    if (schedule_name == "gd-constant")
        return {AK::gd_constant, TK::constant_rate, false, 1.0 / 25.0, 1.0 / 100.0, 0.5, true};
    if (schedule_name == "hb-constant")
        return {AK::hb_constant, TK::constant_rate, false, 1.0 / 25.0, 1.0 / 100.0, 0.5, true};
    if (schedule_name == "sd")
        return {AK::steepest_descent, TK::constant_rate, false, 1.0 / 25.0, 1.0 / 100.0, 0.5,
                false};
    if (schedule_name == "hb-jacobi") return {AK::hb_jacobi, TK::jacobi_scheduled};
    if (schedule_name == "gd-scheduled")
        return {AK::gd_scheduled, TK::jacobi_scheduled, true};
    if (schedule_name == "cg")
        return {AK::conjugate_gradients, TK::stable_cg, false, 1.0 / 3.0, 1.0 / 5.0, 0.01, false};
    if (schedule_name == "stable-cg")
        return {AK::stable_conjugate_gradients, TK::stable_cg, false, 1.0 / 3.0, 1.0 / 5.0, 0.01,
                false};
    throw data_error("trajectory has unknown schedule '" + schedule_name + "'");
}

// Geometric thinning for plot polylines; fits use analysis::fit_power_law.
std::pair<std::vector<double>, std::vector<double>> plot_points(const engine::Trajectory& t,
                                                                std::size_t cap = 600) {
    std::vector<double> xs, ys;
    const auto& rec = t.records;
    if (rec.size() <= cap) {
        for (const auto& r : rec)
            if (r.n >= 1) {
                xs.push_back(static_cast<double>(r.n));
                ys.push_back(r.loss);
            }
        return {xs, ys};
    }
    double last = 0.0;
    for (const auto& r : rec) {
        if (r.n < 1) continue;
        if (static_cast<double>(r.n) >= last * 1.01 || &r == &rec.back()) {
            xs.push_back(static_cast<double>(r.n));
            ys.push_back(r.loss);
            last = static_cast<double>(r.n);
        }
    }
    return {xs, ys};
}

int report_trajectories(const ReportOpts& ro, const std::string& outdir) {
    if (ro.trajectories.empty())
        throw parameter_error("report: no trajectory files given");
    if (ro.problem.empty())
        throw parameter_error("report: --problem is required to locate the spectrum");
    auto prob = load_problem_file(ro.problem);

    std::optional<double> zeta, nu;
    double lam_low = 0.0;
    std::size_t atom_count = 0;
    if (std::holds_alternative<spectrum::DiscreteMeasure>(prob)) {
        const auto& m = std::get<spectrum::DiscreteMeasure>(prob);
        zeta = m.meta.zeta;
        nu = m.meta.nu;
        lam_low = analysis::lambda_low(m, ro.lam_low);
        atom_count = m.size();
    } else {
        const auto& op = std::get<spectrum::OperatorProblem>(prob);
        zeta = op.zeta;
        nu = op.nu;
        atom_count = static_cast<std::size_t>(op.dim());
        if (ro.lam_low) lam_low = *ro.lam_low;
        else {
            auto ev = spectrum::gram_eigenvalues(op);
            lam_low = ev.empty() ? 0.0 : ev.back();
        }
    }

    std::ostringstream rep;
    rep << "problem " << ro.problem << ": atoms=" << atom_count << " zeta=" << fmt_opt(zeta)
        << " nu=" << fmt_opt(nu) << " lambda_low=" << format_short(lam_low) << "\n";
    rep << "auto window: [max(10, bottom*n_th), top*n_th]; fractions per schedule family, "
           "overridable\n";

    std::vector<json> side_records;
    svg::LogLogPlot plot("loss against step", "step n", "loss");

    for (const auto& path : ro.trajectories) {
        auto t = io::read_trajectory_file(path);
        const std::string name = fs::path(path).filename().string();
        const auto kd = kind_defaults(t.schedule_name);

        double alpha = 1.0, beta = 0.0;
        if (kd.rates_from_records && !t.records.empty()) {
            alpha = t.records.front().alpha;
            beta = t.records.front().beta;
        }

        std::optional<double> n_th;
        if (zeta && lam_low > 0.0) {
            try {
                n_th = analysis::threshold_step(kd.th, *zeta, nu.value_or(0.0), alpha, beta,
                                                lam_low, ro.r0.value_or(kd.r0));
            } catch (const std::exception&) {
                // e.g. stable-cg threshold without nu; explicit window still works
            }
        }

        analysis::FitOptions fo;
        fo.block_ends_only = kd.block_ends;
        fo.top_fraction = ro.top_fraction.value_or(kd.top);
        fo.bottom_fraction = ro.bottom_fraction.value_or(kd.bottom);
        if (!ro.window.empty()) fo.window = std::make_pair(ro.window[0], ro.window[1]);
        else if (n_th) fo.n_th = n_th;
        else
            throw parameter_error("report: " + name +
                                  " has no threshold estimate; pass an explicit --window");

        json j;
        j["file"] = name;
        j["schedule"] = t.schedule_name;
        char line[320];
        try {
            auto fit = analysis::fit_power_law(t, fo);
            std::string status = "-";
            double theory = std::nan("");
            if (zeta) {
                const auto assume = (nu && !ro.cdf_only) ? oracle::Assumptions::cdf_and_eigendecay
                                                         : oracle::Assumptions::cdf_only;
                const auto pred = oracle::theoretical_exponent(kd.alg, *zeta, nu.value_or(0.0), assume);
                const auto cmp = analysis::compare(fit, pred, ro.tolerance);
                theory = pred.exponent;
                status = cmp.pass ? "pass" : "MISMATCH";
                j["tolerance"] = cmp.tolerance;
            }
            std::snprintf(line, sizeof line,
                          "%-28s %-13s xi=%8.4f (theory %s)  window=[%lld, %lld]  n_th=%s  "
                          "r2=%8.6f  pts=%zu  %s\n",
                          name.c_str(), t.schedule_name.c_str(), fit.exponent,
                          fmt(theory).c_str(), fit.n_lo, fit.n_hi,
                          n_th ? format_short(*n_th).c_str() : "na", fit.r2, fit.points_used,
                          status.c_str());
            rep << line;
            j["xi"] = fit.exponent;
            j["prefactor"] = fit.prefactor;
            j["r2"] = fit.r2;
            j["window_lo"] = fit.n_lo;
            j["window_hi"] = fit.n_hi;
            j["points"] = fit.points_used;
            if (std::isfinite(theory)) j["theory"] = theory;
            if (n_th) j["n_th"] = *n_th;
            j["status"] = status;

            auto [xs, ys] = plot_points(t);
            plot.add_series({name, xs, ys, "", false});
            const double c = fit.prefactor / 2.0;
            std::vector<double> fx = {static_cast<double>(fit.n_lo),
                                      static_cast<double>(fit.n_hi)};
            std::vector<double> fy = {c * std::pow(fx[0], -fit.exponent),
                                      c * std::pow(fx[1], -fit.exponent)};
            plot.add_series({name + " fit", fx, fy, "#555555", true});
            if (n_th) plot.add_vline(*n_th, "n_th " + name);
        } catch (const std::exception& e) {
            std::snprintf(line, sizeof line, "%-28s %-13s fit failed: %s\n", name.c_str(),
                          t.schedule_name.c_str(), e.what());
            rep << line;
            j["status"] = "error";
            j["error"] = e.what();
        }
        side_records.push_back(std::move(j));
    }

    std::cout << rep.str();
    if (!ro.out.empty()) {
        auto f = io::open_output(resolve_out(outdir, ro.out));
        f << rep.str();
    }
    if (!ro.sidecar.empty()) {
        auto f = io::open_output(resolve_out(outdir, ro.sidecar));
        for (const auto& j : side_records) f << j.dump() << "\n";
    }
    if (!ro.svg.empty()) {
        auto f = io::open_output(resolve_out(outdir, ro.svg));
        plot.write(f);
    }
    return 0;
}

spectrum::Dataset load_dataset(const std::string& path, bool targets_last) {
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0) {
        auto in = io::open_input(path);
        return io::read_dataset_csv(in, targets_last);
    }
    auto in = io::open_input(path, true);
    return io::read_dataset_raw(in);
}

int report_ntk(const ReportOpts& ro, const std::string& outdir) {
    if (ro.dataset.empty()) throw parameter_error("report --ntk: --dataset is required");
    auto data = load_dataset(ro.dataset, ro.targets_last);
    if (data.y.size() != data.rows)
        throw data_error("report --ntk: dataset has no targets");
    if (ro.normalize) spectrum::normalize_dataset(data);

    auto gram = spectrum::ntk_gram(data);
    Eigen::VectorXd targets =
        Eigen::Map<const Eigen::VectorXd>(data.y.data(), static_cast<Eigen::Index>(data.y.size()));
    auto m = spectrum::spectral_measure_from_gram(gram, targets);

    const std::size_t K = m.size();
    double k_lo = 2.0, k_hi = std::max(10.0, static_cast<double>(K) / 4.0);
    if (!ro.k_window.empty()) {
        k_lo = ro.k_window[0];
        k_hi = ro.k_window[1];
    }
    analysis::FitOptions fo;
    fo.window = std::make_pair(k_lo, k_hi);

    // Eigenvalues against rank: lambda_k ~ k^-nu.
    std::vector<std::pair<double, double>> ev;
    for (std::size_t k = 0; k < K; ++k)
        ev.emplace_back(static_cast<double>(k + 1), m.atoms[k] * m.meta.lambda_scale);
    auto fit_nu = analysis::fit_power_law(ev, fo);

    // Coefficient partial sums against rank: sum_{s>=k} c_s^2 ~ k^-kappa.
    std::vector<std::pair<double, double>> ps(K);
    double tail = 0.0;
    for (std::size_t k = K; k-- > 0;) {
        tail += m.masses[k];
        ps[k] = {static_cast<double>(k + 1), tail};
    }
    auto fit_kappa = analysis::fit_power_law(ps, fo);

    const double zeta = fit_kappa.exponent / fit_nu.exponent;
    std::ostringstream rep;
    rep << "ntk dataset " << ro.dataset << ": rows=" << data.rows << " cols=" << data.cols
        << " eigenvalues=" << K << "\n";
    char line[160];
    std::snprintf(line, sizeof line,
                  "nu    = %8.4f  (eigenvalue decay, window [%lld, %lld], r2 %.6f)\n",
                  fit_nu.exponent, fit_nu.n_lo, fit_nu.n_hi, fit_nu.r2);
    rep << line;
    std::snprintf(line, sizeof line,
                  "kappa = %8.4f  (coefficient partial sums, window [%lld, %lld], r2 %.6f)\n",
                  fit_kappa.exponent, fit_kappa.n_lo, fit_kappa.n_hi, fit_kappa.r2);
    rep << line;
    std::snprintf(line, sizeof line, "zeta  = kappa/nu = %8.4f\n", zeta);
    rep << line;

    std::cout << rep.str();
    if (!ro.out.empty()) {
        auto f = io::open_output(resolve_out(outdir, ro.out));
        f << rep.str();
    }
    if (!ro.sidecar.empty()) {
        json j;
        j["dataset"] = ro.dataset;
        j["rows"] = data.rows;
        j["cols"] = data.cols;
        j["nu"] = fit_nu.exponent;
        j["nu_r2"] = fit_nu.r2;
        j["kappa"] = fit_kappa.exponent;
        j["kappa_r2"] = fit_kappa.r2;
        j["zeta"] = zeta;
        j["window_lo"] = fit_nu.n_lo;
        j["window_hi"] = fit_nu.n_hi;
        auto f = io::open_output(resolve_out(outdir, ro.sidecar));
        f << j.dump() << "\n";
    }
    if (!ro.svg.empty()) {
        svg::LogLogPlot plot("ntk spectrum", "rank k", "value");
        std::vector<double> xs, ys, xs2, ys2;
        for (const auto& [x, y] : ev)
            if (y > 0.0) {
                xs.push_back(x);
                ys.push_back(y);
            }
        for (const auto& [x, y] : ps)
            if (y > 0.0) {
                xs2.push_back(x);
                ys2.push_back(y);
            }
        plot.add_series({"eigenvalues", xs, ys, "", false});
        plot.add_series({"coefficient partial sums", xs2, ys2, "", false});
        auto f = io::open_output(resolve_out(outdir, ro.svg));
        plot.write(f);
    }
    return 0;
}

int cmd_report(const ReportOpts& ro, const std::string& outdir) {
    if (!ro.window.empty() && ro.window.size() != 2)
        throw parameter_error("--window takes two values: lo,hi");
    if (!ro.k_window.empty() && ro.k_window.size() != 2)
        throw parameter_error("--k-window takes two values: lo,hi");
    return ro.ntk ? report_ntk(ro, outdir) : report_trajectories(ro, outdir);
}

// ---------------------------------------------------------------------------
// convert-dataset

struct ConvertOpts {
    std::string csv, images, labels, out;
    bool targets_last = false;
    bool normalize = false;
};

int cmd_convert(const ConvertOpts& c, const std::string& outdir) {
    if (c.csv.empty() == c.images.empty())
        throw parameter_error("convert-dataset: give exactly one of --csv or --images");
    spectrum::Dataset data;
    if (!c.csv.empty()) {
        auto in = io::open_input(c.csv);
        data = io::read_dataset_csv(in, c.targets_last);
    } else {
        auto im = io::open_input(c.images, true);
        if (c.labels.empty()) {
            data = io::read_dataset_idx(im);
        } else {
            auto lb = io::open_input(c.labels, true);
            data = io::read_dataset_idx(im, &lb);
        }
    }
    double scale = 1.0;
    if (c.normalize) scale = spectrum::normalize_dataset(data).second;
    const std::string path = resolve_out(outdir, c.out);
    auto out = io::open_output(path, true);
    io::write_dataset_raw(out, data);
    std::cout << "dataset rows=" << data.rows << " cols=" << data.cols
              << " targets=" << (data.y.empty() ? "no" : "yes");
    if (c.normalize) std::cout << " normalized_scale=" << format_short(scale);
    std::cout << "\nwrote " << path << "\n";
    return 0;
}

} // namespace

// ---------------------------------------------------------------------------

int main(int argc, char** argv) {
    CLI::App app{"power-law quadratic optimization workbench"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string outdir = ".";
    app.add_option("--output-dir", outdir, "directory for relative output paths")
        ->envname("PLOPT_OUTPUT_DIR");
    app.set_config("--config", "", "key = value config file with [subcommand] sections");

    GenerateOpts gen;
    auto* cg = app.add_subcommand("generate", "write a measure, operator, or dataset file");
    cg->configurable();
    cg->add_option("kind", gen.prob.kind, "generator")
        ->required()
        ->check(CLI::IsMember(
            {"diagonal", "powerlaw", "equal-mass", "sd-lowerbound", "chain", "gaussian-mix"}));
    cg->add_option("--M", gen.prob.M, "atom count (diagonal, equal-mass)");
    cg->add_option("--K", gen.prob.K, "atom count (powerlaw, sd-lowerbound)");
    cg->add_option("--N", gen.prob.N, "operator dimension (chain)");
    cg->add_option("--zeta", gen.prob.zeta, "spectral CDF exponent");
    cg->add_option("--nu", gen.prob.nu, "eigenvalue decay exponent");
    cg->add_option("--dim", gen.dim, "gaussian-mix: ambient dimension");
    cg->add_option("--clusters", gen.clusters, "gaussian-mix: cluster count");
    cg->add_option("--per-cluster", gen.per_cluster, "gaussian-mix: samples per cluster");
    cg->add_option("--separation", gen.separation, "gaussian-mix: center separation");
    cg->add_option("--seed", gen.seed, "gaussian-mix: RNG seed (required)");
    cg->add_option("--out", gen.out, "output file")->required();

    RunOpts run;
    auto* cr = app.add_subcommand("run", "run one schedule and write a trajectory CSV");
    cr->configurable();
    add_problem_flags(cr, run.prob);
    add_schedule_flags(cr, run.sched);
    cr->add_option("--steps", run.steps, "number of optimization steps")
        ->required()
        ->check(CLI::NonNegativeNumber);
    cr->add_option("--probes", run.probes, "spectral points whose residual value is recorded")
        ->delimiter(',')->check(CLI::Number);
    cr->add_option("--max-records", run.max_records,
                   "cap recorded steps (geometric subsample); 0 records all");
    cr->add_flag("--allow-unstable", run.allow_unstable, "run outside the stability region");
    cr->add_option("--out", run.out, "output trajectory CSV")->required();

    SweepOpts sweep;
    auto* cs = app.add_subcommand("sweep", "grid of runs with an index file");
    cs->configurable();
    add_problem_flags(cs, sweep.prob);
    add_schedule_flags(cs, sweep.sched);
    cs->add_option("--steps", sweep.steps, "number of optimization steps")
        ->required()
        ->check(CLI::NonNegativeNumber);
    cs->add_option("--max-records", sweep.max_records, "cap recorded steps per trajectory");
    cs->add_flag("--allow-unstable", sweep.allow_unstable, "run outside the stability region");
    cs->add_option("--a-grid", sweep.a_grid, "grid over the first schedule parameter")
        ->delimiter(',')->check(CLI::Number);
    cs->add_option("--b-grid", sweep.b_grid, "grid over the second schedule parameter")
        ->delimiter(',')->check(CLI::Number);
    cs->add_option("--zeta-grid", sweep.zeta_grid, "grid over zeta (generator problems)")
        ->delimiter(',')->check(CLI::Number);
    cs->add_option("--nu-grid", sweep.nu_grid, "grid over nu (generator problems)")
        ->delimiter(',')->check(CLI::Number);
    cs->add_option("--jobs", sweep.jobs, "worker threads");
    cs->add_option("--out-dir", sweep.out_dir, "directory for trajectories and index")
        ->required();

    std::vector<std::string> suites;
    unsigned validate_jobs = 1;
    std::string validate_sidecar = "validate_checks.jsonl";
    auto* cv = app.add_subcommand("validate", "run oracle and invariant suites");
    cv->configurable();
    cv->add_option("suites", suites, "suite names, or 'all'");
    cv->add_option("--jobs", validate_jobs, "suites run in parallel");
    cv->add_option("--sidecar", validate_sidecar, "machine-readable check records (jsonl)");

    ReportOpts rep;
    auto* cp = app.add_subcommand("report", "fit trajectories or an ntk spectrum");
    cp->configurable();
    cp->add_option("trajectories", rep.trajectories, "trajectory CSV files");
    cp->add_option("--problem", rep.problem, "measure or operator file the runs used");
    cp->add_option("--out", rep.out, "write the text report here too");
    cp->add_option("--svg", rep.svg, "write a log-log plot");
    cp->add_option("--sidecar", rep.sidecar, "machine-readable fit records (jsonl)");
    cp->add_option("--window", rep.window, "explicit fit window lo,hi")->delimiter(',')->check(CLI::Number);
    cp->add_option("--r0", rep.r0, "remaining-mass fraction for the threshold estimate");
    cp->add_option("--tolerance", rep.tolerance, "exponent comparison tolerance");
    cp->add_option("--lambda-low", rep.lam_low, "override the resolved spectral edge");
    cp->add_option("--top-fraction", rep.top_fraction, "auto window top edge as fraction of n_th");
    cp->add_option("--bottom-fraction", rep.bottom_fraction,
                   "auto window bottom edge as fraction of n_th");
    cp->add_flag("--cdf-only", rep.cdf_only, "ignore nu when picking the theoretical exponent");
    cp->add_flag("--ntk", rep.ntk, "dataset mode: fit nu and kappa from the ntk gram");
    cp->add_option("--dataset", rep.dataset, "dataset file (.csv or raw) for --ntk");
    cp->add_flag("--targets-last", rep.targets_last, "csv datasets: last column is the target");
    cp->add_flag("--normalize", rep.normalize, "normalize the dataset before the gram");
    cp->add_option("--k-window", rep.k_window, "rank window lo,hi for the ntk fits")
        ->delimiter(',')->check(CLI::Number);

    ConvertOpts conv;
    auto* cc = app.add_subcommand("convert-dataset", "convert csv/idx datasets to raw binary");
    cc->configurable();
    cc->add_option("--csv", conv.csv, "csv dataset input");
    cc->add_flag("--targets-last", conv.targets_last, "csv: last column is the target");
    cc->add_option("--images", conv.images, "idx image input");
    cc->add_option("--labels", conv.labels, "idx label input");
    cc->add_flag("--normalize", conv.normalize, "mean/variance normalize before writing");
    cc->add_option("--out", conv.out, "output raw dataset")->required();

    try {
        app.parse(argc, argv);
        if (app.got_subcommand(cg)) return cmd_generate(gen, outdir);
        if (app.got_subcommand(cr)) return cmd_run(run, outdir);
        if (app.got_subcommand(cs)) return cmd_sweep(sweep, outdir);
        if (app.got_subcommand(cv))
            return cmd_validate(suites, validate_jobs, validate_sidecar, outdir);
        if (app.got_subcommand(cp)) return cmd_report(rep, outdir);
        if (app.got_subcommand(cc)) return cmd_convert(conv, outdir);
        return exit_usage;
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_usage;
    } catch (const parameter_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const data_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_data;
    } catch (const numerical_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_numerical;
    } catch (const io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_io;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
