// Timing harness: repeated-measurement benchmark cases, the synthetic
// Hankel SVD benchmark, and the one-at-a-time configuration sensitivity
// sweep over the realisation pipeline.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#ifdef __linux__
#include <sched.h>
#include <sys/resource.h>
#endif

#include "cidra/errors.hpp"
#include "cidra/realisation.hpp"
#include "cidra/svd.hpp"

namespace cidra {

// ---------------------------------------------------------------------------
// Measurement plumbing.
// ---------------------------------------------------------------------------

// Best-effort: pin the process to the CPU it is currently on, so repeated
// measurements do not migrate between cores.  Failure is silently ignored.
inline void pin_to_current_core() {
#ifdef __linux__
    const int cpu = sched_getcpu();
    if (cpu < 0) return;
    cpu_set_t set;
    CPU_ZERO(&set);
    CPU_SET(cpu, &set);
    (void)sched_setaffinity(0, sizeof set, &set);
#endif
}

inline long peak_rss_bytes() {
#ifdef __linux__
    rusage ru{};
    if (getrusage(RUSAGE_SELF, &ru) == 0) return ru.ru_maxrss * 1024L;
#endif
    return 0;
}

struct BenchCase {
    std::string name;      // e.g. "H_m@50%" or "svd_iterative_1000"
    std::string variable;  // swept variable ("baseline" for the reference case)
    std::string bound;     // "50%", "150%", "100%", or a size
    double warmup_s = 0;   // recorded but excluded from the statistics
    std::vector<double> times_s;
    long peak_mem_bytes = 0;

    int reps() const { return static_cast<int>(times_s.size()); }
    double min_s() const { return *std::min_element(times_s.begin(), times_s.end()); }
    double mean_s() const {
        double s = 0;
        for (double t : times_s) s += t;
        return s / times_s.size();
    }
    double median_s() const {
        std::vector<double> v = times_s;
        std::sort(v.begin(), v.end());
        const size_t n = v.size();
        return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    }
};

// Runs fn (reps + 1) times: one recorded warm-up, then reps timed
// repetitions.  At least 6 timed repetitions are always taken.
inline BenchCase run_bench_case(const std::string& name, const std::string& variable,
                                const std::string& bound, int reps,
                                const std::function<void()>& fn) {
    BenchCase c;
    c.name = name;
    c.variable = variable;
    c.bound = bound;
    reps = std::max(reps, 6);
    using clock = std::chrono::steady_clock;
    const auto w0 = clock::now();
    fn();
    c.warmup_s = std::chrono::duration<double>(clock::now() - w0).count();
    c.times_s.reserve(static_cast<size_t>(reps));
    for (int r = 0; r < reps; ++r) {
        const auto t0 = clock::now();
        fn();
        c.times_s.push_back(std::chrono::duration<double>(clock::now() - t0).count());
    }
    c.peak_mem_bytes = peak_rss_bytes();
    return c;
}

struct BenchReport {
    std::string context;  // free-form description line
    std::vector<BenchCase> cases;

    void write_csv(std::ostream& os) const {
        os << "case,variable,bound,reps,min_s,median_s,mean_s,peak_mem_bytes\n";
        char buf[160];
        for (const auto& c : cases) {
            std::snprintf(buf, sizeof buf, ",%d,%.9g,%.9g,%.9g,%ld\n", c.reps(), c.min_s(),
                          c.median_s(), c.mean_s(), c.peak_mem_bytes);
            os << c.name << ',' << c.variable << ',' << c.bound << buf;
        }
    }
    void write_text(std::ostream& os) const {
        if (!context.empty()) os << "# " << context << "\n";
        char buf[200];
        std::snprintf(buf, sizeof buf, "%-22s %-12s %-6s %4s %12s %12s %12s %14s\n", "case",
                      "variable", "bound", "reps", "min_s", "median_s", "mean_s", "peak_mem_B");
        os << buf;
        for (const auto& c : cases) {
            std::snprintf(buf, sizeof buf, "%-22s %-12s %-6s %4d %12.6f %12.6f %12.6f %14ld\n",
                          c.name.c_str(), c.variable.c_str(), c.bound.c_str(), c.reps(),
                          c.min_s(), c.median_s(), c.mean_s(), c.peak_mem_bytes);
            os << buf;
        }
    }
};

// ---------------------------------------------------------------------------
// Synthetic Hankel SVD benchmark.
// ---------------------------------------------------------------------------

// Markov sequence of a seeded random stable discrete system (order 24),
// long enough for a size x size Hankel.  Deterministic for a given seed.
inline Eigen::MatrixXd synthetic_markov(long count, std::uint64_t seed) {
    constexpr int order = 24;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Eigen::MatrixXd A(order, order);
    for (long i = 0; i < order; ++i)
        for (long j = 0; j < order; ++j) A(i, j) = uni(rng);
    const double rho = A.eigenvalues().cwiseAbs().maxCoeff();
    A *= 0.95 / rho;
    Eigen::VectorXd B(order), C(order);
    for (long i = 0; i < order; ++i) B(i) = uni(rng);
    for (long i = 0; i < order; ++i) C(i) = uni(rng);

    Eigen::MatrixXd g(1, count);
    Eigen::VectorXd x = B;
    g(0, 0) = 1.0;  // feedthrough, unused by the Hankel
    for (long t = 1; t < count; ++t) {
        g(0, t) = C.dot(x);
        x = A * x;
    }
    return g;
}

// Times truncated_svd at rank `order` on size x size synthetic Hankels for
// every (size, strategy) pair.
inline BenchReport bench_svd(const std::vector<long>& sizes,
                             const std::vector<SvdStrategy>& strategies, int order, int reps,
                             std::uint64_t seed) {
    if (sizes.empty() || strategies.empty())
        throw validation_error("bench_svd needs at least one size and one strategy");
    pin_to_current_core();
    BenchReport rep;
    rep.context = "truncated SVD on synthetic stable-system Hankels, rank " +
                  std::to_string(order) + ", seed " + std::to_string(seed);
    for (long size : sizes) {
        if (size < order)
            throw validation_error("bench size smaller than the requested rank");
        const Eigen::MatrixXd g = synthetic_markov(2 * size + 1, seed);
        const Eigen::MatrixXd H = build_hankel_matrix(g, size, size, 1);
        for (SvdStrategy strat : strategies) {
            const std::string sname = to_string(strat);
            rep.cases.push_back(run_bench_case("svd_" + sname + "_" + std::to_string(size),
                                               sname, std::to_string(size), reps, [&] {
                                                   volatile double sink =
                                                       truncated_svd(H, order, strat).S(0);
                                                   (void)sink;
                                               }));
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Configuration sensitivity sweep.
// ---------------------------------------------------------------------------

namespace detail {

inline long scaled_count(long base, double f) { return std::max<long>(1, std::lround(base * f)); }

inline RealisationConfig sensitivity_case(const RealisationConfig& base, const std::string& var,
                                          double f) {
    RealisationConfig c = base;
    if (var == "S_e") c.s_e = static_cast<int>(scaled_count(base.s_e, f));
    else if (var == "S_s") c.s_s = static_cast<int>(scaled_count(base.s_s, f));
    else if (var == "H_m") c.hankel_cols = scaled_count(base.hankel_cols, f);
    else if (var == "H_n") c.hankel_rows = scaled_count(base.hankel_rows, f);
    else if (var == "T_len") c.tlen_hours = base.tlen_hours * f;
    else if (var == "Fs_Ts") {
        // Coupled so q = F_s T_s stays integral: faster sampling, shorter step.
        c.fs_hz = base.fs_hz * f;
        c.ts_s = base.ts_s / f;
    } else if (var == "M") c.order = static_cast<int>(scaled_count(base.order, f));
    else throw validation_error("unknown sensitivity variable: " + var);
    return c;
}

}  // namespace detail

inline const std::vector<std::string>& sensitivity_variables() {
    static const std::vector<std::string> vars = {"S_e", "S_s", "H_m", "H_n",
                                                  "T_len", "Fs_Ts", "M"};
    return vars;
}

// One-at-a-time sweep: every variable at 50% and 150% of its base value,
// plus the baseline, each timed over `reps` full realisations at (soc, temp).
// 7 variables x 2 bounds + baseline = 15 cases.
//
// Repetitions are interleaved round-robin across the cases (one warm-up lap,
// then `reps` timed laps) so slow machine drift -- thermal throttling, a
// noisy neighbour -- lands on every case alike and cancels out of the
// median-vs-baseline scores instead of biasing whichever case ran last.
inline BenchReport sensitivity_sweep(const CellParams& params, const RealisationConfig& base,
                                     double soc, double temp, int reps) {
    base.validate();
    // Fail fast if any case is infeasible before spending time on the sweep.
    for (const auto& var : sensitivity_variables())
        for (double f : {0.5, 1.5}) detail::sensitivity_case(base, var, f).validate();

    pin_to_current_core();
    BenchReport rep;
    rep.context = "realisation wall-time sensitivity, one variable at a time at 50%/150%";

    std::vector<RealisationConfig> cfgs;
    auto add_case = [&](const std::string& name, const std::string& var,
                        const std::string& bound, const RealisationConfig& cfg) {
        BenchCase c;
        c.name = name;
        c.variable = var;
        c.bound = bound;
        rep.cases.push_back(std::move(c));
        cfgs.push_back(cfg);
    };
    add_case("baseline", "baseline", "100%", base);
    for (const auto& var : sensitivity_variables())
        for (double f : {0.5, 1.5}) {
            const std::string bound = f < 1.0 ? "50%" : "150%";
            add_case(var + "@" + bound, var, bound, detail::sensitivity_case(base, var, f));
        }

    reps = std::max(reps, 6);
    using clock = std::chrono::steady_clock;
    auto time_once = [&](const RealisationConfig& cfg) {
        const auto t0 = clock::now();
        volatile double sink = realise_setpoint(params, soc, temp, cfg, 1).recon_error;
        (void)sink;
        return std::chrono::duration<double>(clock::now() - t0).count();
    };
    for (size_t i = 0; i < cfgs.size(); ++i) {
        rep.cases[i].warmup_s = time_once(cfgs[i]);
        rep.cases[i].times_s.reserve(static_cast<size_t>(reps));
    }
    for (int r = 0; r < reps; ++r)
        for (size_t i = 0; i < cfgs.size(); ++i)
            rep.cases[i].times_s.push_back(time_once(cfgs[i]));
    for (auto& c : rep.cases) c.peak_mem_bytes = peak_rss_bytes();
    return rep;
}

// Variables ordered most-sensitive first.  The score for a variable is the
// largest absolute deviation of a bound's median from the baseline median.
inline std::vector<std::pair<std::string, double>> sensitivity_ranking(const BenchReport& rep) {
    double base_median = -1;
    for (const auto& c : rep.cases)
        if (c.variable == "baseline") base_median = c.median_s();
    if (base_median < 0)
        throw validation_error("sensitivity report holds no baseline case");
    std::vector<std::pair<std::string, double>> scores;
    for (const auto& var : sensitivity_variables()) {
        double score = 0;
        bool seen = false;
        for (const auto& c : rep.cases)
            if (c.variable == var) {
                score = std::max(score, std::abs(c.median_s() - base_median));
                seen = true;
            }
        if (seen) scores.emplace_back(var, score);
    }
    std::stable_sort(scores.begin(), scores.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    return scores;
}

}  // namespace cidra
