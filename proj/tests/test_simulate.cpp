#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cidra/params.hpp"
#include "cidra/simulate.hpp"

using namespace cidra;
namespace fs = std::filesystem;

namespace {

const CellParams& example_params() {
    static const CellParams p =
        load_cell_params(std::string(CIDRA_DATA_DIR) + "/example_cell.params");
    return p;
}

// Hand-built order-2 model exposing exactly the outputs the voltage map
// needs.  `gain` scales C, D and res0 so grids with known blend ratios are
// easy to construct.
StateSpaceModel crafted_model(double soc, double temp, double gain) {
    const double L = example_params().L_tot();
    StateSpaceModel m;
    m.T_s = 1.0;
    m.soc = soc;
    m.temp = temp;
    m.labels = {
        {OutputLabel::Kind::ce, Electrode::neg, 0.0},
        {OutputLabel::Kind::ce, Electrode::neg, L},
        {OutputLabel::Kind::phie, Electrode::neg, L},
        {OutputLabel::Kind::cse, Electrode::neg, 0.0},
        {OutputLabel::Kind::cse, Electrode::pos, 0.0},
        {OutputLabel::Kind::flux, Electrode::neg, 0.0},
        {OutputLabel::Kind::flux, Electrode::pos, 0.0},
    };
    const long p = 7;
    m.A.resize(2, 2);
    m.A << 0.5, 0.1, 0.0, 0.3;
    m.B.resize(2, 1);
    m.B << 1.0, 0.5;
    m.C.resize(p, 2);
    for (long r = 0; r < p; ++r) {
        m.C(r, 0) = gain * 1e-3 * static_cast<double>(r + 1);
        m.C(r, 1) = gain * 5e-4 * static_cast<double>(p - r);
    }
    m.D = Eigen::VectorXd::Zero(p);
    for (long r = 0; r < p; ++r) m.D(r) = gain * 1e-4 * static_cast<double>(r + 1);
    m.res0 = Eigen::VectorXd::Zero(p);
    m.res0(3) = -gain * 1e-3;  // cse[neg]
    m.res0(4) = gain * 1e-3;   // cse[pos]
    return m;
}

ModelGrid crafted_grid(const std::vector<double>& socs, const std::vector<double>& temps,
                       double gain = 1.0) {
    ModelGrid g;
    g.socs = socs;
    g.temps = temps;
    for (double s : socs)
        for (double t : temps) g.models.push_back(crafted_model(s, t, gain));
    return g;
}

DriveCycle uniform_cycle(const std::vector<double>& values, double T_s) {
    DriveCycle c;
    c.mode = DriveCycle::Mode::current;
    const long n = static_cast<long>(values.size());
    c.time.resize(n);
    c.value.resize(n);
    for (long k = 0; k < n; ++k) {
        c.time(k) = k * T_s;
        c.value(k) = values[static_cast<size_t>(k)];
    }
    return c;
}

fs::path scratch_file(const std::string& name) {
    return fs::temp_directory_path() / name;
}

}  // namespace

// ---------------------------------------------------------------------------
// Drive-cycle file handling.
// ---------------------------------------------------------------------------

TEST_CASE("drive cycles round-trip through CSV") {
    DriveCycle c;
    c.mode = DriveCycle::Mode::current;
    c.time.resize(3);
    c.time << 0.0, 0.5, 1.0;
    c.value.resize(3);
    c.value << 1.5, -2.0, 3.0;

    const std::string path = scratch_file("cidra_cycle_rt.csv").string();
    save_drive_cycle(c, path);
    const DriveCycle back = load_drive_cycle(path);
    CHECK(back.mode == DriveCycle::Mode::current);
    CHECK((back.time - c.time).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.value - c.value).cwiseAbs().maxCoeff() == 0.0);

    c.mode = DriveCycle::Mode::power;
    save_drive_cycle(c, path);
    CHECK(load_drive_cycle(path).mode == DriveCycle::Mode::power);
}

TEST_CASE("drive cycle parser diagnostics") {
    auto write_and_load = [](const std::string& text) {
        const std::string path = scratch_file("cidra_cycle_bad.csv").string();
        std::ofstream(path) << text;
        return load_drive_cycle(path);
    };
    SECTION("wrong header") {
        CHECK_THROWS_AS(write_and_load("time,current\n0,1\n1,2\n"), validation_error);
    }
    SECTION("whitespace and CRLF tolerated") {
        const DriveCycle c = write_and_load("time_s , current_a\r\n0,1\r\n\r\n1,2\r\n");
        CHECK(c.time.size() == 2);
        CHECK(c.value(1) == 2.0);
    }
    SECTION("non-increasing time names the line") {
        try {
            write_and_load("time_s,current_a\n0,1\n2,1\n2,1\n");
            FAIL("expected validation_error");
        } catch (const validation_error& e) {
            CHECK(std::string(e.what()).find("line 4") != std::string::npos);
        }
    }
    SECTION("too few samples") {
        CHECK_THROWS_AS(write_and_load("time_s,current_a\n0,1\n"), validation_error);
    }
    SECTION("unparseable number names the line") {
        try {
            write_and_load("time_s,current_a\n0,1\nx,2\n");
            FAIL("expected validation_error");
        } catch (const validation_error& e) {
            CHECK(std::string(e.what()).find("line 3") != std::string::npos);
        }
    }
    SECTION("missing file") {
        CHECK_THROWS_AS(load_drive_cycle("/nonexistent/cycle.csv"), validation_error);
    }
}

TEST_CASE("resampling") {
    SECTION("linear interpolation onto the uniform grid") {
        DriveCycle c;
        c.time.resize(3);
        c.time << 0.0, 1.0, 3.0;
        c.value.resize(3);
        c.value << 0.0, 2.0, 6.0;
        const DriveCycle r = resample_cycle(c, 1.0);
        REQUIRE(r.time.size() == 4);
        CHECK(r.time(2) == 2.0);
        CHECK(r.value(0) == 0.0);
        CHECK(r.value(1) == 2.0);
        CHECK(r.value(2) == Catch::Approx(4.0));  // midpoint of the 1..3 segment
        CHECK(r.value(3) == Catch::Approx(6.0));
    }
    SECTION("already-uniform cycles pass through unchanged") {
        const DriveCycle c = uniform_cycle({1.0, 2.0, 3.0}, 0.25);
        const DriveCycle r = resample_cycle(c, 0.25);
        CHECK(r.time.size() == 3);
        CHECK((r.value - c.value).cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("validation") {
        const DriveCycle c = uniform_cycle({1.0, 2.0}, 1.0);
        CHECK_THROWS_AS(resample_cycle(c, 0.0), validation_error);
    }
}

TEST_CASE("synthetic cycle shape") {
    const DriveCycle c = make_synthetic_cycle(3600.0, 4.0);
    REQUIRE(c.time.size() == 3600 * 4 + 1);
    CHECK(c.mode == DriveCycle::Mode::current);

    auto value_at = [&](double t) { return c.value(static_cast<long>(std::lround(t * 4.0))); };
    SECTION("rest windows are exactly zero") {
        for (double t : {0.0, 10.0, 19.75, 610.0, 1775.0, 1799.75, 1805.0, 1810.0})
            CHECK(value_at(t) == 0.0);
    }
    SECTION("drive windows are active and the cycle wraps every 1800 s") {
        CHECK(value_at(100.0) != 0.0);
        CHECK(value_at(900.0) != 0.0);
        CHECK(value_at(1500.0) != 0.0);
        CHECK(value_at(100.0) == value_at(1900.0));
        CHECK(value_at(1500.0) == value_at(3300.0));
    }
    SECTION("amplitudes stay below 2C for a ~5 Ah cell") {
        CHECK(c.value.cwiseAbs().maxCoeff() < 10.0);
    }
    SECTION("deterministic") {
        const DriveCycle d = make_synthetic_cycle(3600.0, 4.0);
        CHECK((c.value - d.value).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK_THROWS_AS(make_synthetic_cycle(0.0, 4.0), validation_error);
}

// ---------------------------------------------------------------------------
// Grid blending.
// ---------------------------------------------------------------------------

TEST_CASE("bilinear blending of the model operators") {
    // Four corner models whose D vectors are constant 1, 2, 3, 4.
    ModelGrid g = crafted_grid({0.2, 0.8}, {290.0, 310.0});
    g.models[0].D.setConstant(1.0);
    g.models[1].D.setConstant(2.0);
    g.models[2].D.setConstant(3.0);
    g.models[3].D.setConstant(4.0);

    SECTION("corner queries return the corner model exactly") {
        CHECK(blend(g, 0.2, 290.0).D(0) == 1.0);
        CHECK(blend(g, 0.2, 310.0).D(0) == 2.0);
        CHECK(blend(g, 0.8, 290.0).D(0) == 3.0);
        CHECK(blend(g, 0.8, 310.0).D(0) == 4.0);
    }
    SECTION("centre query averages all four corners") {
        const BlendedModel b = blend(g, 0.5, 300.0);
        CHECK(b.D(0) == Catch::Approx(2.5).epsilon(1e-14));
        CHECK(b.A(0, 0) == Catch::Approx(0.5).epsilon(1e-14));  // identical A at corners
    }
    SECTION("edge query interpolates along one axis only") {
        CHECK(blend(g, 0.2, 300.0).D(0) == Catch::Approx(1.5).epsilon(1e-14));
        CHECK(blend(g, 0.65, 290.0).D(0) == Catch::Approx(2.5).epsilon(1e-14));
    }
    SECTION("hull violations name the axis") {
        try {
            blend(g, 0.1, 300.0);
            FAIL("expected hull_error");
        } catch (const hull_error& e) {
            CHECK(std::string(e.what()).find("soc") != std::string::npos);
        }
        try {
            blend(g, 0.5, 400.0);
            FAIL("expected hull_error");
        } catch (const hull_error& e) {
            CHECK(std::string(e.what()).find("temperature") != std::string::npos);
        }
    }
    SECTION("roundoff-level excursions are clamped, not rejected") {
        CHECK_NOTHROW(blend(g, 0.2 - 1e-12, 300.0));
        CHECK_NOTHROW(blend(g, 0.8 + 1e-12, 300.0));
    }
    SECTION("single-node axes accept only their node") {
        const ModelGrid single = crafted_grid({0.5}, {298.15});
        CHECK_NOTHROW(blend(single, 0.5, 298.15));
        CHECK_THROWS_AS(blend(single, 0.6, 298.15), hull_error);
    }
}

// ---------------------------------------------------------------------------
// Voltage reconstruction.
// ---------------------------------------------------------------------------

TEST_CASE("voltage reconstruction matches a direct evaluation") {
    const CellParams& p = example_params();
    const StateSpaceModel m = crafted_model(0.5, 298.15, 1.0);
    const VoltageOutputs idx(m.labels, p.L_tot());

    Eigen::VectorXd y = Eigen::VectorXd::Zero(7);
    y(0) = 40.0;    // ce at x=0
    y(1) = -35.0;   // ce at x=L
    y(2) = -0.012;  // phie at x=L
    y(3) = 25.0;    // cse[neg] deviation
    y(4) = -30.0;   // cse[pos] deviation
    y(5) = 4e-6;    // flux[neg]
    y(6) = -3.5e-6; // flux[pos]

    const double soc = 0.42;
    const VoltageSample vs = reconstruct_voltage(p, idx, y, soc);
    CHECK(vs.flags == 0);

    const double T = p.temperature, F = p.faraday, R = p.gas_constant;
    const double ce0 = p.electrolyte_conc + y(0), ceL = p.electrolyte_conc + y(1);
    auto side = [&](const DomainParams& d, const OcpCurve& ocp, double theta, double dev,
                    double j, double ce) {
        const double cse = theta * d.max_concentration + dev;
        const double j0 = d.reaction_rate * std::sqrt(ce * cse * (d.max_concentration - cse));
        return ocp.value(cse / d.max_concentration) + (2 * R * T / F) * std::asinh(j / j0) +
               F * d.film_resistance * j;
    };
    const double neg = side(p.neg, p.ocp_neg, stoich_of_soc(p.neg, soc, true), y(3), y(5), ce0);
    const double pos = side(p.pos, p.ocp_pos, stoich_of_soc(p.pos, soc, false), y(4), y(6), ceL);
    const double phie = y(2) + (2 * R * T * (1 - p.transference) / F) * std::log(ceL / ce0);
    CHECK(vs.voltage == Catch::Approx(pos + phie - neg).epsilon(1e-13));
}

TEST_CASE("voltage reconstruction raises clamp flags") {
    const CellParams& p = example_params();
    const StateSpaceModel m = crafted_model(0.5, 298.15, 1.0);
    const VoltageOutputs idx(m.labels, p.L_tot());

    Eigen::VectorXd y = Eigen::VectorXd::Zero(7);
    SECTION("surface concentration outside [0, cmax]") {
        y(3) = 2.0 * p.neg.max_concentration;
        const VoltageSample vs = reconstruct_voltage(p, idx, y, 0.5);
        CHECK((vs.flags & flag_cse_clamped) != 0);
        CHECK(std::isfinite(vs.voltage));
    }
    SECTION("electrolyte depletion") {
        y(1) = -2.0 * p.electrolyte_conc;
        const VoltageSample vs = reconstruct_voltage(p, idx, y, 0.5);
        CHECK((vs.flags & flag_ce_clamped) != 0);
        CHECK(std::isfinite(vs.voltage));
    }
}

TEST_CASE("voltage reconstruction requires the full output set") {
    const CellParams& p = example_params();
    StateSpaceModel m = crafted_model(0.5, 298.15, 1.0);
    m.labels.erase(m.labels.begin() + 2);  // drop phie[x=L]
    CHECK_THROWS_AS(VoltageOutputs(m.labels, p.L_tot()), validation_error);
}

TEST_CASE("open-circuit voltage spans a plausible lithium-ion window") {
    const CellParams& p = example_params();
    CHECK(open_circuit_voltage(p, 0.0) < open_circuit_voltage(p, 1.0));
    CHECK(open_circuit_voltage(p, 0.0) > 2.0);
    CHECK(open_circuit_voltage(p, 1.0) < 4.5);
}

// ---------------------------------------------------------------------------
// Power-mode conversion.
// ---------------------------------------------------------------------------

TEST_CASE("pack power to cell current") {
    const PackConfig pack{96, 47, 0.827};
    // 4512 W across 96 x 47 cells is exactly 1 W per cell.
    CHECK(power_to_current(4512.0, 4.0, pack) ==
          Catch::Approx((1.0 / 0.827) / 4.0).epsilon(1e-14));
    CHECK(power_to_current(-4512.0, 4.0, pack) ==
          Catch::Approx((-1.0 * 0.827) / 4.0).epsilon(1e-14));
    CHECK(power_to_current(0.0, 3.7, pack) == 0.0);

    CHECK_THROWS_AS(power_to_current(100.0, 0.0, pack), numeric_error);
    CHECK_THROWS_AS(power_to_current(100.0, -1.0, pack), numeric_error);
    CHECK_THROWS_AS(power_to_current(100.0, 4.0, PackConfig{0, 47, 0.8}), validation_error);
    CHECK_THROWS_AS(power_to_current(100.0, 4.0, PackConfig{96, 47, 1.3}), validation_error);
}

// ---------------------------------------------------------------------------
// Drive-cycle runs.
// ---------------------------------------------------------------------------

TEST_CASE("rest current reproduces the open-circuit voltage exactly") {
    const CellParams& p = example_params();
    const ModelGrid g = crafted_grid({0.0, 1.0}, {298.15});
    const DriveCycle c = uniform_cycle(std::vector<double>(16, 0.0), 1.0);
    SimOptions opt;
    opt.soc0 = 0.37;

    const SimulationTrace tr = run_drive_cycle(p, g, c, opt);
    REQUIRE(tr.time.size() == 16);
    const double ocv = open_circuit_voltage(p, 0.37);
    for (long k = 0; k < 16; ++k) {
        CHECK(tr.voltage(k) == Catch::Approx(ocv).margin(1e-12));
        CHECK(tr.flags[static_cast<size_t>(k)] == 0u);
        CHECK(tr.soc(k) == 0.37);
        CHECK(tr.current(k) == 0.0);
    }
}

TEST_CASE("impulse response of the simulated outputs includes the integrator") {
    const CellParams& p = example_params();
    const ModelGrid g = crafted_grid({0.0, 1.0}, {298.15});
    const StateSpaceModel& m = g.models[0];
    std::vector<double> u(10, 0.0);
    u[0] = 1.0;
    const DriveCycle c = uniform_cycle(u, 1.0);
    SimOptions opt;
    opt.soc0 = 0.5;

    const SimulationTrace tr = run_drive_cycle(p, g, c, opt);
    // k = 0: y = D.  k >= 1: y = C A^{k-1} B + res0 * T_s (q holds one pulse).
    CHECK((tr.outputs.col(0) - m.D).cwiseAbs().maxCoeff() < 1e-14);
    Eigen::VectorXd x = m.B.col(0);
    for (long k = 1; k < 10; ++k) {
        const Eigen::VectorXd want = m.C * x + m.res0 * 1.0;
        CHECK((tr.outputs.col(k) - want).cwiseAbs().maxCoeff() < 1e-13);
        x = m.A * x;
    }
}

TEST_CASE("coulomb counting is exact for constant current") {
    const CellParams& p = example_params();
    const ModelGrid g = crafted_grid({0.0, 1.0}, {298.15});
    const double I = 7.2, T_s = 1.0;
    const long n = 100;
    const DriveCycle c = uniform_cycle(std::vector<double>(n, I), T_s);
    SimOptions opt;
    opt.soc0 = 0.9;

    const SimulationTrace tr = run_drive_cycle(p, g, c, opt);
    const double cap_as = cell_capacity_ah(p) * 3600.0;
    for (long k = 0; k < n; ++k)
        CHECK(tr.soc(k) == Catch::Approx(0.9 - k * I * T_s / cap_as).margin(1e-12));
}

TEST_CASE("simulation leaves the grid hull when soc drifts past a node") {
    const CellParams& p = example_params();
    const ModelGrid g = crafted_grid({0.5}, {298.15});  // single-soc grid
    const DriveCycle c = uniform_cycle(std::vector<double>(5, 3.0), 1.0);
    SimOptions opt;
    opt.soc0 = 0.5;
    CHECK_THROWS_AS(run_drive_cycle(p, g, c, opt), hull_error);
}

TEST_CASE("voltage limit flags do not abort the run") {
    const CellParams& p = example_params();
    const ModelGrid g = crafted_grid({0.0, 1.0}, {298.15});
    const DriveCycle c = uniform_cycle(std::vector<double>(6, 0.0), 1.0);
    SimOptions opt;
    opt.soc0 = 0.5;
    opt.vmax = open_circuit_voltage(p, 0.5) - 0.1;  // guaranteed violation

    const SimulationTrace tr = run_drive_cycle(p, g, c, opt);
    REQUIRE(tr.time.size() == 6);
    for (unsigned f : tr.flags) CHECK((f & flag_voltage_limit) != 0);
}

TEST_CASE("input validation of the run loop") {
    const CellParams& p = example_params();
    const ModelGrid g = crafted_grid({0.0, 1.0}, {298.15});
    SimOptions opt;

    DriveCycle bad;
    bad.time.resize(3);
    bad.time << 0.0, 1.0, 3.0;  // non-uniform vs T_s = 1
    bad.value = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(run_drive_cycle(p, g, bad, opt), validation_error);

    const DriveCycle ok = uniform_cycle({0.0, 0.0}, 1.0);
    opt.soc0 = 1.5;
    CHECK_THROWS_AS(run_drive_cycle(p, g, ok, opt), validation_error);
}

TEST_CASE("power mode uses the one-step-lagged voltage") {
    const CellParams& p = example_params();
    const ModelGrid g = crafted_grid({0.0, 1.0}, {298.15});
    DriveCycle c = uniform_cycle({500.0, 500.0, 500.0}, 1.0);
    c.mode = DriveCycle::Mode::power;
    SimOptions opt;
    opt.soc0 = 0.5;
    opt.pack = PackConfig{96, 47, 0.827};

    const SimulationTrace tr = run_drive_cycle(p, g, c, opt);
    const double per_cell = 500.0 / (96.0 * 47.0) / 0.827;
    CHECK(tr.current(0) ==
          Catch::Approx(per_cell / open_circuit_voltage(p, 0.5)).epsilon(1e-13));
    CHECK(tr.current(1) == Catch::Approx(per_cell / tr.voltage(0)).epsilon(1e-13));
    CHECK(tr.current(2) == Catch::Approx(per_cell / tr.voltage(1)).epsilon(1e-13));
}

TEST_CASE("linear outputs superpose on a uniform grid") {
    const CellParams& p = example_params();
    const ModelGrid g = crafted_grid({0.0, 1.0}, {290.0, 310.0});
    const std::vector<double> u{0.5, -1.0, 2.0, 0.0, 1.5, -0.5};
    std::vector<double> u2(u);
    for (double& v : u2) v *= 2.0;
    SimOptions opt;
    opt.soc0 = 0.6;
    opt.temp = 296.0;

    const SimulationTrace a = run_drive_cycle(p, g, uniform_cycle(u, 1.0), opt);
    const SimulationTrace b = run_drive_cycle(p, g, uniform_cycle(u2, 1.0), opt);
    const double scale = a.outputs.cwiseAbs().maxCoeff();
    CHECK((b.outputs - 2.0 * a.outputs).cwiseAbs().maxCoeff() < 1e-10 * std::max(scale, 1.0));
}

TEST_CASE("trace CSV layout") {
    const CellParams& p = example_params();
    const ModelGrid g = crafted_grid({0.0, 1.0}, {298.15});
    const DriveCycle c = uniform_cycle({1.0, 0.0, 0.0}, 1.0);
    SimOptions opt;
    const SimulationTrace tr = run_drive_cycle(p, g, c, opt);

    const std::string path = scratch_file("cidra_trace.csv").string();
    write_trace_csv(tr, path);

    std::ifstream is(path);
    REQUIRE(is);
    std::string header;
    std::getline(is, header);
    std::string want = "time_s,current_a,voltage_v,soc,flags";
    for (const auto& lab : tr.labels) want += "," + lab.str();
    CHECK(header == want);

    long rows = 0;
    std::string line;
    while (std::getline(is, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 3);
}
