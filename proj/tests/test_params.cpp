#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cidra/params.hpp"

using namespace cidra;
namespace fs = std::filesystem;

namespace {

const std::string example_path = std::string(CIDRA_DATA_DIR) + "/example_cell.params";

std::string slurp(const std::string& path) {
    std::ifstream is(path);
    REQUIRE(is);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string write_temp(const std::string& text, const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("cidra_params_" + tag + ".params");
    std::ofstream os(p);
    os << text;
    os.close();
    return p.string();
}

}  // namespace

TEST_CASE("example file loads and is self-consistent") {
    const CellParams p = load_cell_params(example_path);
    CHECK(p.L_tot() == Catch::Approx(172.8e-6).epsilon(1e-12));
    CHECK(p.neg.thickness + p.sep.thickness + p.pos.thickness == Catch::Approx(p.L_tot()));
    CHECK(p.plate_area > 0);
    CHECK(p.transference > 0);
    CHECK(p.transference < 1);
    const auto b = p.boundaries();
    CHECK(b[0] == 0.0);
    CHECK(b[3] == Catch::Approx(p.L_tot()));
    CHECK(b[1] < b[2]);
    CHECK(b[2] < b[3]);
}

TEST_CASE("validation rejects out-of-range porosity with the field name") {
    std::string text = slurp(example_path);
    const auto pos = text.find("porosity = 0.25");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 15, "porosity = 1.2 ");
    const std::string bad = write_temp(text, "porosity");
    try {
        load_cell_params(bad);
        FAIL("expected validation_error");
    } catch (const validation_error& e) {
        CHECK(std::string(e.what()).find("porosity") != std::string::npos);
    }
}

TEST_CASE("validation rejects schema and thickness mismatches") {
    std::string text = slurp(example_path);
    SECTION("missing schema") {
        const auto pos = text.find("schema = 1");
        text.replace(pos, 10, "          ");
        CHECK_THROWS_AS(load_cell_params(write_temp(text, "schema")), validation_error);
    }
    SECTION("total thickness disagreement") {
        const auto pos = text.find("total_thickness = 172.8e-6");
        REQUIRE(pos != std::string::npos);
        text.replace(pos, 26, "total_thickness = 170.0e-6");
        try {
            load_cell_params(write_temp(text, "thick"));
            FAIL("expected validation_error");
        } catch (const validation_error& e) {
            CHECK(std::string(e.what()).find("total_thickness") != std::string::npos);
        }
    }
    SECTION("missing required field") {
        const auto pos = text.find("transference = 0.2594");
        REQUIRE(pos != std::string::npos);
        text.replace(pos, 21, "# removed            ");
        try {
            load_cell_params(write_temp(text, "missing"));
            FAIL("expected validation_error");
        } catch (const validation_error& e) {
            CHECK(std::string(e.what()).find("transference") != std::string::npos);
        }
    }
    SECTION("malformed table row") {
        const auto pos = text.find("[ocp_neg]");
        REQUIRE(pos != std::string::npos);
        text.insert(text.find('\n', text.find("interpolation", pos)) + 1, "0.5 abc\n");
        CHECK_THROWS_AS(load_cell_params(write_temp(text, "row")), validation_error);
    }
}

TEST_CASE("save/load round trip preserves every numeric field bit-for-bit") {
    const CellParams a = load_cell_params(example_path);
    const std::string tmp =
        (fs::temp_directory_path() / "cidra_params_roundtrip.params").string();
    save_cell_params(a, tmp);
    const CellParams b = load_cell_params(tmp);

    CHECK(a.plate_area == b.plate_area);
    CHECK(a.temperature == b.temperature);
    CHECK(a.electrolyte_diffusivity == b.electrolyte_diffusivity);
    CHECK(a.electrolyte_conductivity == b.electrolyte_conductivity);
    CHECK(a.transference == b.transference);
    CHECK(a.electrolyte_conc == b.electrolyte_conc);
    CHECK(a.faraday == b.faraday);
    CHECK(a.gas_constant == b.gas_constant);
    auto domains_equal = [](const DomainParams& x, const DomainParams& y) {
        CHECK(x.thickness == y.thickness);
        CHECK(x.porosity == y.porosity);
        CHECK(x.bruggeman == y.bruggeman);
        CHECK(x.filler_fraction == y.filler_fraction);
        CHECK(x.solid_conductivity == y.solid_conductivity);
        CHECK(x.particle_radius == y.particle_radius);
        CHECK(x.solid_diffusivity == y.solid_diffusivity);
        CHECK(x.surface_area_density == y.surface_area_density);
        CHECK(x.max_concentration == y.max_concentration);
        CHECK(x.reaction_rate == y.reaction_rate);
        CHECK(x.stoich_0 == y.stoich_0);
        CHECK(x.stoich_100 == y.stoich_100);
        CHECK(x.film_resistance == y.film_resistance);
    };
    domains_equal(a.neg, b.neg);
    domains_equal(a.sep, b.sep);
    domains_equal(a.pos, b.pos);
    REQUIRE(a.ocp_neg.size() == b.ocp_neg.size());
    for (size_t i = 0; i < a.ocp_neg.size(); ++i) {
        CHECK(a.ocp_neg.theta()[i] == b.ocp_neg.theta()[i]);
        CHECK(a.ocp_neg.volts()[i] == b.ocp_neg.volts()[i]);
        CHECK(a.ocp_pos.theta()[i] == b.ocp_pos.theta()[i]);
        CHECK(a.ocp_pos.volts()[i] == b.ocp_pos.volts()[i]);
    }
}

TEST_CASE("ocp curve interpolation") {
    // Strictly decreasing synthetic data.
    std::vector<double> th{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    std::vector<double> v{4.2, 4.0, 3.8, 3.5, 3.4, 3.0};
    OcpCurve c(th, v);

    SECTION("interpolates nodes exactly and preserves monotonicity") {
        for (size_t i = 0; i < th.size(); ++i) CHECK(c.value(th[i]) == Catch::Approx(v[i]));
        double prev = c.value(0.0);
        for (double x = 0.005; x <= 1.0; x += 0.005) {
            const double cur = c.value(x);
            CHECK(cur <= prev + 1e-14);
            prev = cur;
        }
    }
    SECTION("derivative matches central differences at interior midpoints") {
        for (size_t i = 0; i + 1 < th.size(); ++i) {
            const double x = 0.5 * (th[i] + th[i + 1]);
            const double h = 1e-7;
            const double fd = (c.value(x + h) - c.value(x - h)) / (2 * h);
            CHECK(c.derivative(x) == Catch::Approx(fd).epsilon(1e-6));
        }
    }
    SECTION("clamps outside the tabulated range") {
        CHECK(c.value(-0.5) == Catch::Approx(v.front()));
        CHECK(c.value(1.5) == Catch::Approx(v.back()));
    }
    SECTION("linear interpolation") {
        OcpCurve lin(th, v, OcpCurve::Interp::linear);
        CHECK(lin.value(0.1) == Catch::Approx(4.1));
        CHECK(lin.derivative(0.1) == Catch::Approx(-1.0));
    }
    SECTION("rejects short or non-increasing tables") {
        CHECK_THROWS_AS(OcpCurve({0, 1, 2}, {3, 2, 1}), validation_error);
        CHECK_THROWS_AS(OcpCurve({0, 0.5, 0.5, 1}, {4, 3, 2, 1}), validation_error);
    }
}

TEST_CASE("effective transport") {
    DomainParams d;
    d.porosity = 0.25;
    d.bruggeman = 1.5;
    d.solid_conductivity = 100.0;
    d.filler_fraction = 0.0;

    SECTION("kappa_eff closed forms") {
        CHECK(effective_transport(d, 1.0).kappa_eff == Catch::Approx(0.125).epsilon(1e-14));
        DomainParams unity = d;
        unity.porosity = 1.0;
        unity.bruggeman = 3.7;
        CHECK(effective_transport(unity, 0.83).kappa_eff == Catch::Approx(0.83).epsilon(1e-14));
    }
    SECTION("sigma_eff equals the documented active-volume correction") {
        DomainParams e = d;
        e.porosity = 0.3;
        e.filler_fraction = 0.05;
        CHECK(effective_transport(e, 1.0).sigma_eff ==
              Catch::Approx(100.0 * (1.0 - 0.3 - 0.05)).epsilon(1e-14));
    }
    SECTION("homogeneous of degree 1 in kappa_e") {
        const double k1 = effective_transport(d, 0.7).kappa_eff;
        const double k2 = effective_transport(d, 1.4).kappa_eff;
        CHECK(k2 == Catch::Approx(2.0 * k1).epsilon(1e-14));
    }
    SECTION("diffusivity uses the same Bruggeman factor") {
        CHECK(effective_electrolyte_diffusivity(d, 2.0) ==
              Catch::Approx(2.0 * std::pow(0.25, 1.5)).epsilon(1e-14));
    }
}

TEST_CASE("setpoint construction") {
    const CellParams p = load_cell_params(example_path);

    SECTION("soc endpoints map to the stoichiometry window") {
        CHECK(make_setpoint(p, 1.0, 298.15).neg.theta == Catch::Approx(p.neg.stoich_100));
        CHECK(make_setpoint(p, 0.0, 298.15).neg.theta == Catch::Approx(p.neg.stoich_0));
        CHECK(make_setpoint(p, 1.0, 298.15).pos.theta == Catch::Approx(p.pos.stoich_0));
        CHECK(make_setpoint(p, 0.0, 298.15).pos.theta == Catch::Approx(p.pos.stoich_100));
    }
    SECTION("stoichiometry is monotone in soc") {
        const Setpoint a = make_setpoint(p, 0.2, 298.15);
        const Setpoint b = make_setpoint(p, 0.4, 298.15);
        CHECK(b.neg.theta > a.neg.theta);
        CHECK(b.pos.theta < a.pos.theta);
    }
    SECTION("exchange flux at half stoichiometry matches the closed form") {
        // Choose soc so the negative electrode sits exactly at theta = 1/2.
        const double soc = (0.5 - p.neg.stoich_0) / (p.neg.stoich_100 - p.neg.stoich_0);
        const Setpoint sp = make_setpoint(p, soc, 298.15);
        const double expected = p.neg.reaction_rate * (p.neg.max_concentration / 2.0) *
                                std::sqrt(p.electrolyte_conc);
        CHECK(sp.neg.j0 == Catch::Approx(expected).epsilon(1e-12));
    }
    SECTION("charge-transfer resistance from the Butler-Volmer slope") {
        const Setpoint sp = make_setpoint(p, 0.5, 298.15);
        const double expected =
            2.0 * p.gas_constant * 298.15 / (p.faraday * p.faraday * sp.neg.j0);
        CHECK(sp.neg.R_ct == Catch::Approx(expected).epsilon(1e-14));
        CHECK(sp.neg.R_tot == Catch::Approx(expected + p.neg.film_resistance).epsilon(1e-14));
    }
    SECTION("OCP slopes are negative at the setpoint") {
        const Setpoint sp = make_setpoint(p, 0.5, 298.15);
        CHECK(sp.neg.dUdtheta < 0);
        CHECK(sp.pos.dUdtheta < 0);
        CHECK(sp.neg.dUdc == Catch::Approx(sp.neg.dUdtheta / p.neg.max_concentration));
    }
    SECTION("soc bounds enforced") {
        CHECK_THROWS_AS(make_setpoint(p, -0.01, 298.15), validation_error);
        CHECK_THROWS_AS(make_setpoint(p, 1.01, 298.15), validation_error);
        CHECK_THROWS_AS(make_setpoint(p, 0.5, -1.0), validation_error);
    }
}

TEST_CASE("cell capacity comes from the limiting electrode") {
    const CellParams p = load_cell_params(example_path);
    auto electrode_ah = [&](const DomainParams& d) {
        return p.faraday * p.plate_area * d.thickness *
               (d.surface_area_density * d.particle_radius / 3.0) *
               (d.stoich_100 - d.stoich_0) * d.max_concentration / 3600.0;
    };
    const double expected = std::min(electrode_ah(p.neg), electrode_ah(p.pos));
    CHECK(cell_capacity_ah(p) == Catch::Approx(expected).epsilon(1e-14));
    CHECK(cell_capacity_ah(p) == Catch::Approx(5.04).epsilon(0.01));
}
