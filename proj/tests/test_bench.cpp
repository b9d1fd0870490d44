#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <sstream>
#include <string>

#include "cidra/bench.hpp"
#include "cidra/params.hpp"

using namespace cidra;

namespace {

const CellParams& example_params() {
    static const CellParams p =
        load_cell_params(std::string(CIDRA_DATA_DIR) + "/example_cell.params");
    return p;
}

BenchCase fixed_case(const std::string& name, const std::string& variable,
                     const std::string& bound, double median) {
    BenchCase c;
    c.name = name;
    c.variable = variable;
    c.bound = bound;
    c.times_s.assign(6, median);
    c.peak_mem_bytes = 1;
    return c;
}

}  // namespace

TEST_CASE("run_bench_case repetition accounting") {
    std::atomic<int> calls{0};
    const BenchCase c = run_bench_case("spin", "var", "b", 2, [&] {
        ++calls;
        volatile double s = 0;
        for (int i = 0; i < 20000; ++i) s = s + i * 1e-9;
        (void)s;
    });
    // 2 requested repetitions are clamped up to 6, plus one warm-up call.
    CHECK(calls.load() == 7);
    CHECK(c.reps() == 6);
    CHECK(c.times_s.size() == 6);
    CHECK(c.warmup_s > 0.0);
    for (double t : c.times_s) CHECK(t > 0.0);
    CHECK(c.name == "spin");
    CHECK(c.variable == "var");
    CHECK(c.bound == "b");
    CHECK(c.peak_mem_bytes > 0);
}

TEST_CASE("bench statistics") {
    BenchCase c;
    c.times_s = {3.0, 1.0, 2.0};
    CHECK(c.reps() == 3);
    CHECK(c.min_s() == 1.0);
    CHECK(c.mean_s() == Catch::Approx(2.0).epsilon(1e-15));
    CHECK(c.median_s() == 2.0);

    c.times_s = {4.0, 1.0, 3.0, 2.0};
    CHECK(c.median_s() == Catch::Approx(2.5).epsilon(1e-15));
    CHECK(c.min_s() == 1.0);
    CHECK(c.mean_s() == Catch::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("CSV report layout") {
    BenchReport rep;
    BenchCase c = fixed_case("H_m@50%", "H_m", "50%", 0.5);
    c.times_s = {0.25, 0.5, 1.0, 0.5, 0.5, 0.5};
    c.peak_mem_bytes = 4096;
    rep.cases.push_back(c);

    std::ostringstream os;
    rep.write_csv(os);
    std::istringstream is(os.str());
    std::string header, row;
    std::getline(is, header);
    std::getline(is, row);
    CHECK(header == "case,variable,bound,reps,min_s,median_s,mean_s,peak_mem_bytes");
    CHECK(row.rfind("H_m@50%,H_m,50%,6,0.25,0.5,", 0) == 0);
    CHECK(row.find(",4096") != std::string::npos);

    long commas = 0;
    for (char ch : row)
        if (ch == ',') ++commas;
    CHECK(commas == 7);  // 8 fields

    std::ostringstream text;
    rep.write_text(text);
    CHECK(text.str().find("H_m@50%") != std::string::npos);
}

TEST_CASE("synthetic Markov sequences are deterministic") {
    const Eigen::MatrixXd a = synthetic_markov(64, 11);
    const Eigen::MatrixXd b = synthetic_markov(64, 11);
    const Eigen::MatrixXd c = synthetic_markov(64, 12);
    REQUIRE(a.rows() == 1);
    REQUIRE(a.cols() == 64);
    CHECK(a(0, 0) == 1.0);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
    // Stable system: the tail must have decayed noticeably from the front.
    CHECK(a.rightCols(8).cwiseAbs().maxCoeff() < a.leftCols(8).cwiseAbs().maxCoeff());
}

TEST_CASE("SVD benchmark cases") {
    const BenchReport rep =
        bench_svd({40}, {SvdStrategy::iterative, SvdStrategy::dense}, 8, 6, 3);
    REQUIRE(rep.cases.size() == 2);
    CHECK(rep.cases[0].name == "svd_iterative_40");
    CHECK(rep.cases[0].variable == "iterative");
    CHECK(rep.cases[0].bound == "40");
    CHECK(rep.cases[0].reps() == 6);
    CHECK(rep.cases[0].min_s() > 0.0);
    CHECK(rep.cases[1].name == "svd_dense_40");
    CHECK(rep.cases[1].variable == "dense");

    CHECK_THROWS_AS(bench_svd({4}, {SvdStrategy::dense}, 8, 6, 3), validation_error);
    CHECK_THROWS_AS(bench_svd({}, {SvdStrategy::dense}, 8, 6, 3), validation_error);
    CHECK_THROWS_AS(bench_svd({40}, {}, 8, 6, 3), validation_error);
}

TEST_CASE("sensitivity case construction") {
    RealisationConfig base;  // defaults: H 2500x2500, 4.5 h, 4 Hz, 0.25 s, order 8
    CHECK(detail::sensitivity_case(base, "S_e", 0.5).s_e == 3);
    CHECK(detail::sensitivity_case(base, "S_s", 1.5).s_s == 6);
    CHECK(detail::sensitivity_case(base, "H_m", 0.5).hankel_cols == 1250);
    CHECK(detail::sensitivity_case(base, "H_m", 0.5).hankel_rows == 2500);
    CHECK(detail::sensitivity_case(base, "H_n", 1.5).hankel_rows == 3750);
    CHECK(detail::sensitivity_case(base, "T_len", 1.5).tlen_hours ==
          Catch::Approx(6.75).epsilon(1e-15));
    CHECK(detail::sensitivity_case(base, "M", 1.5).order == 12);

    const RealisationConfig fast = detail::sensitivity_case(base, "Fs_Ts", 1.5);
    CHECK(fast.fs_hz == Catch::Approx(6.0).epsilon(1e-15));
    CHECK(fast.ts_s == Catch::Approx(0.25 / 1.5).epsilon(1e-15));
    CHECK(fast.subsample() == 1);  // q stays integral by construction

    CHECK(detail::scaled_count(1, 0.3) == 1);  // never collapses to zero
    CHECK_THROWS_AS(detail::sensitivity_case(base, "bogus", 0.5), validation_error);
}

TEST_CASE("sensitivity variable list") {
    const std::vector<std::string> want = {"S_e", "S_s", "H_m", "H_n", "T_len", "Fs_Ts", "M"};
    CHECK(sensitivity_variables() == want);
}

TEST_CASE("sensitivity ranking orders variables by median deviation") {
    BenchReport rep;
    rep.cases.push_back(fixed_case("baseline", "baseline", "100%", 1.0));
    rep.cases.push_back(fixed_case("H_m@50%", "H_m", "50%", 0.6));
    rep.cases.push_back(fixed_case("H_m@150%", "H_m", "150%", 3.0));
    rep.cases.push_back(fixed_case("H_n@150%", "H_n", "150%", 1.8));
    rep.cases.push_back(fixed_case("T_len@150%", "T_len", "150%", 1.1));
    rep.cases.push_back(fixed_case("S_e@50%", "S_e", "50%", 0.95));

    const auto ranking = sensitivity_ranking(rep);
    REQUIRE(ranking.size() == 4);  // only variables present in the report
    CHECK(ranking[0].first == "H_m");
    CHECK(ranking[0].second == Catch::Approx(2.0).epsilon(1e-12));
    CHECK(ranking[1].first == "H_n");
    CHECK(ranking[1].second == Catch::Approx(0.8).epsilon(1e-12));
    CHECK(ranking[2].first == "T_len");
    CHECK(ranking[3].first == "S_e");

    BenchReport no_base;
    no_base.cases.push_back(fixed_case("H_m@50%", "H_m", "50%", 0.6));
    CHECK_THROWS_AS(sensitivity_ranking(no_base), validation_error);
}

TEST_CASE("measurement plumbing is harmless") {
    CHECK_NOTHROW(pin_to_current_core());
    CHECK(peak_rss_bytes() > 0);
}

TEST_CASE("sensitivity sweep smoke run", "[slow]") {
    RealisationConfig base;
    base.hankel_rows = 30;
    base.hankel_cols = 30;
    base.tlen_hours = 0.02;
    base.order = 3;
    base.s_s = 1;
    base.s_e = 1;
    base.n_lambda = 2;

    const BenchReport rep = sensitivity_sweep(example_params(), base, 0.5, 298.15, 6);
    REQUIRE(rep.cases.size() == 15);  // baseline + 7 variables x 2 bounds
    CHECK(rep.cases[0].name == "baseline");
    CHECK(rep.cases[0].variable == "baseline");
    CHECK(rep.cases[0].bound == "100%");
    CHECK(rep.cases[1].name == "S_e@50%");
    CHECK(rep.cases[2].name == "S_e@150%");
    for (const auto& c : rep.cases) {
        CHECK(c.reps() == 6);
        CHECK(c.min_s() > 0.0);
    }
    const auto ranking = sensitivity_ranking(rep);
    CHECK(ranking.size() == 7);
}
