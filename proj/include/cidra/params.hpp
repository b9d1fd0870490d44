// Cell parameterisation: file grammar, validation, derived transport and
// linearisation setpoints.
//
// Parameter files are flat key/value text with sections:
//
//   schema = 1
//   [cell]   plate_area, temperature, electrolyte_diffusivity,
//            electrolyte_conductivity, transference, electrolyte_conc,
//            total_thickness, faraday?, gas_constant?
//   [neg]    thickness, porosity, bruggeman, filler_fraction?,
//   [pos]    solid_conductivity, particle_radius, solid_diffusivity,
//            surface_area_density, max_concentration, reaction_rate,
//            stoich_0, stoich_100, film_resistance
//   [sep]    thickness, porosity, bruggeman
//   [ocp_neg]  interpolation = cubic|linear, then two-column rows
//   [ocp_pos]  "<stoichiometry>  <volts>"
//
// All quantities are SI.  '#' starts a comment.  stoich_0/stoich_100 store
// the electrode utilisation window ordered low..high; the negative electrode
// maps SOC increasing across it, the positive electrode decreasing.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cidra/errors.hpp"

namespace cidra {

// ---------------------------------------------------------------------------
// Open-circuit potential curve.
//
// Monotone cubic Hermite interpolation (Fritsch-Carlson).  A natural spline
// can overshoot on voltage plateaus and flip the sign of dU/dtheta, which
// would break the sign conventions the transfer functions rely on; the
// monotone interpolant preserves the sign of the data's slope.
// ---------------------------------------------------------------------------
class OcpCurve {
  public:
    enum class Interp { linear, cubic };

    OcpCurve() = default;
    OcpCurve(std::vector<double> theta, std::vector<double> volts,
             Interp interp = Interp::cubic)
        : theta_(std::move(theta)), volts_(std::move(volts)), interp_(interp) {
        if (theta_.size() < 4 || theta_.size() != volts_.size())
            throw validation_error("ocp table needs at least 4 (theta, volts) rows");
        for (size_t i = 1; i < theta_.size(); ++i)
            if (!(theta_[i] > theta_[i - 1]))
                throw validation_error("ocp table stoichiometry must be strictly increasing");
        if (interp_ == Interp::cubic) build_slopes();
    }

    double theta_min() const { return theta_.front(); }
    double theta_max() const { return theta_.back(); }
    size_t size() const { return theta_.size(); }
    const std::vector<double>& theta() const { return theta_; }
    const std::vector<double>& volts() const { return volts_; }
    Interp interp() const { return interp_; }

    // Potential at stoichiometry x.  x is clamped to the tabulated range.
    double value(double x) const { return eval(x).first; }
    // dU/dtheta at x (clamped as above).
    double derivative(double x) const { return eval(x).second; }

  private:
    std::pair<double, double> eval(double x) const {
        x = std::clamp(x, theta_.front(), theta_.back());
        size_t i = segment(x);
        const double h = theta_[i + 1] - theta_[i];
        const double t = (x - theta_[i]) / h;
        if (interp_ == Interp::linear) {
            const double s = (volts_[i + 1] - volts_[i]) / h;
            return {volts_[i] + s * (x - theta_[i]), s};
        }
        // Hermite basis on [0,1].
        const double y0 = volts_[i], y1 = volts_[i + 1];
        const double m0 = slope_[i] * h, m1 = slope_[i + 1] * h;
        const double t2 = t * t, t3 = t2 * t;
        const double v = (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * m0 +
                         (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * m1;
        const double d = ((6 * t2 - 6 * t) * y0 + (3 * t2 - 4 * t + 1) * m0 +
                          (-6 * t2 + 6 * t) * y1 + (3 * t2 - 2 * t) * m1) / h;
        return {v, d};
    }

    size_t segment(double x) const {
        auto it = std::upper_bound(theta_.begin(), theta_.end(), x);
        size_t i = static_cast<size_t>(std::distance(theta_.begin(), it));
        if (i > 0) --i;
        return std::min(i, theta_.size() - 2);
    }

    void build_slopes() {
        const size_t n = theta_.size();
        std::vector<double> h(n - 1), sec(n - 1);
        for (size_t i = 0; i + 1 < n; ++i) {
            h[i] = theta_[i + 1] - theta_[i];
            sec[i] = (volts_[i + 1] - volts_[i]) / h[i];
        }
        slope_.assign(n, 0.0);
        for (size_t i = 1; i + 1 < n; ++i) {
            if (sec[i - 1] * sec[i] <= 0.0) {
                slope_[i] = 0.0;  // local extremum or plateau
            } else {
                const double w1 = 2 * h[i] + h[i - 1];
                const double w2 = h[i] + 2 * h[i - 1];
                slope_[i] = (w1 + w2) / (w1 / sec[i - 1] + w2 / sec[i]);
            }
        }
        slope_[0] = endpoint(h[0], h[1], sec[0], sec[1]);
        slope_[n - 1] = endpoint(h[n - 2], h[n - 3], sec[n - 2], sec[n - 3]);
    }

    // One-sided three-point estimate, clamped per Fritsch-Carlson.
    static double endpoint(double h0, double h1, double s0, double s1) {
        double d = ((2 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
        if (d * s0 <= 0.0) return 0.0;
        if (s0 * s1 <= 0.0 && std::abs(d) > 3 * std::abs(s0)) return 3 * s0;
        return d;
    }

    std::vector<double> theta_, volts_, slope_;
    Interp interp_ = Interp::cubic;
};

// ---------------------------------------------------------------------------
// Raw parameter structs.
// ---------------------------------------------------------------------------

// One porous domain.  Separators carry only thickness/porosity/bruggeman.
struct DomainParams {
    double thickness = 0;             // L [m]
    double porosity = 0;              // eps_e
    double bruggeman = 1.5;           // b
    double filler_fraction = 0;       // inert volume fraction (electrodes)
    double solid_conductivity = 0;    // sigma [S/m]
    double particle_radius = 0;       // R_s [m]
    double solid_diffusivity = 0;     // D_s [m^2/s]
    double surface_area_density = 0;  // a_s [1/m]
    double max_concentration = 0;     // c_s,max [mol/m^3]
    double reaction_rate = 0;         // m [m^2.5 mol^-0.5 s^-1]
    double stoich_0 = 0;              // utilisation window, low end
    double stoich_100 = 0;            // utilisation window, high end
    double film_resistance = 0;       // R_film [ohm m^2]
};

struct CellParams {
    double plate_area = 0;               // A [m^2]
    double temperature = 298.15;         // reference T [K]
    double electrolyte_diffusivity = 0;  // D_e [m^2/s]
    double electrolyte_conductivity = 0; // kappa [S/m]
    double transference = 0;             // t_+
    double electrolyte_conc = 0;         // c_e,0 [mol/m^3]
    double faraday = 96485.33212;        // F [C/mol]
    double gas_constant = 8.314462618;   // R [J/mol/K]
    DomainParams neg, sep, pos;
    OcpCurve ocp_neg, ocp_pos;

    double L_tot() const { return neg.thickness + sep.thickness + pos.thickness; }
    // Region boundaries along x: [0, L_n, L_n+L_s, L_tot].
    std::array<double, 4> boundaries() const {
        return {0.0, neg.thickness, neg.thickness + sep.thickness, L_tot()};
    }
};

// Bruggeman-corrected electrolyte conductivity and solid conductivity net of
// pore and filler volume.  For separators sigma_eff is zero.
struct EffectiveTransport {
    double sigma_eff;
    double kappa_eff;
};

inline EffectiveTransport effective_transport(const DomainParams& d, double kappa_e) {
    EffectiveTransport out;
    out.kappa_eff = std::pow(d.porosity, d.bruggeman) * kappa_e;
    out.sigma_eff = d.solid_conductivity * (1.0 - d.porosity - d.filler_fraction);
    return out;
}

inline double effective_electrolyte_diffusivity(const DomainParams& d, double De) {
    return std::pow(d.porosity, d.bruggeman) * De;
}

// ---------------------------------------------------------------------------
// Validation.
// ---------------------------------------------------------------------------
namespace detail {

inline void require_pos(double v, const std::string& field) {
    if (!(v > 0) || !std::isfinite(v))
        throw validation_error("field '" + field + "' must be positive and finite");
}

inline void validate_electrode(const DomainParams& d, const std::string& sec) {
    require_pos(d.thickness, sec + " thickness");
    require_pos(d.porosity, sec + " porosity");
    if (d.porosity >= 1.0) throw validation_error("field '" + sec + " porosity' must be < 1");
    require_pos(d.bruggeman, sec + " bruggeman");
    if (d.filler_fraction < 0 || d.filler_fraction + d.porosity >= 1.0)
        throw validation_error("field '" + sec + " filler_fraction' out of range");
    require_pos(d.solid_conductivity, sec + " solid_conductivity");
    require_pos(d.particle_radius, sec + " particle_radius");
    require_pos(d.solid_diffusivity, sec + " solid_diffusivity");
    require_pos(d.surface_area_density, sec + " surface_area_density");
    require_pos(d.max_concentration, sec + " max_concentration");
    require_pos(d.reaction_rate, sec + " reaction_rate");
    if (!(0.0 <= d.stoich_0 && d.stoich_0 < d.stoich_100 && d.stoich_100 <= 1.0))
        throw validation_error("fields '" + sec + " stoich_0/stoich_100' must satisfy 0 <= lo < hi <= 1");
    if (d.film_resistance < 0)
        throw validation_error("field '" + sec + " film_resistance' must be >= 0");
}

}  // namespace detail

inline void validate(const CellParams& p) {
    detail::require_pos(p.plate_area, "cell plate_area");
    detail::require_pos(p.temperature, "cell temperature");
    detail::require_pos(p.electrolyte_diffusivity, "cell electrolyte_diffusivity");
    detail::require_pos(p.electrolyte_conductivity, "cell electrolyte_conductivity");
    if (!(p.transference > 0 && p.transference < 1))
        throw validation_error("field 'cell transference' must lie in (0,1)");
    detail::require_pos(p.electrolyte_conc, "cell electrolyte_conc");
    detail::require_pos(p.faraday, "cell faraday");
    detail::require_pos(p.gas_constant, "cell gas_constant");
    detail::validate_electrode(p.neg, "neg");
    detail::validate_electrode(p.pos, "pos");
    detail::require_pos(p.sep.thickness, "sep thickness");
    detail::require_pos(p.sep.porosity, "sep porosity");
    if (p.sep.porosity >= 1.0) throw validation_error("field 'sep porosity' must be < 1");
    detail::require_pos(p.sep.bruggeman, "sep bruggeman");
    // Electrode utilisation windows must sit inside the tabulated OCP range.
    if (p.ocp_neg.theta_min() > p.neg.stoich_0 || p.ocp_neg.theta_max() < p.neg.stoich_100)
        throw validation_error("[ocp_neg] table does not cover the neg stoichiometry window");
    if (p.ocp_pos.theta_min() > p.pos.stoich_0 || p.ocp_pos.theta_max() < p.pos.stoich_100)
        throw validation_error("[ocp_pos] table does not cover the pos stoichiometry window");
}

// ---------------------------------------------------------------------------
// File I/O.
// ---------------------------------------------------------------------------
namespace detail {

struct RawSection {
    std::map<std::string, double> kv;
    std::vector<std::pair<double, double>> table;
    std::map<std::string, std::string> sv;  // string-valued keys
};

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline double take(const RawSection& sec, const std::string& name, const std::string& field) {
    auto it = sec.kv.find(name);
    if (it == sec.kv.end()) throw validation_error("missing field '" + field + "'");
    return it->second;
}

inline double take_or(const RawSection& sec, const std::string& name, double fallback) {
    auto it = sec.kv.find(name);
    return it == sec.kv.end() ? fallback : it->second;
}

inline DomainParams parse_electrode(const RawSection& sec, const std::string& name) {
    DomainParams d;
    d.thickness = take(sec, "thickness", name + " thickness");
    d.porosity = take(sec, "porosity", name + " porosity");
    d.bruggeman = take(sec, "bruggeman", name + " bruggeman");
    d.filler_fraction = take_or(sec, "filler_fraction", 0.0);
    d.solid_conductivity = take(sec, "solid_conductivity", name + " solid_conductivity");
    d.particle_radius = take(sec, "particle_radius", name + " particle_radius");
    d.solid_diffusivity = take(sec, "solid_diffusivity", name + " solid_diffusivity");
    d.surface_area_density = take(sec, "surface_area_density", name + " surface_area_density");
    d.max_concentration = take(sec, "max_concentration", name + " max_concentration");
    d.reaction_rate = take(sec, "reaction_rate", name + " reaction_rate");
    d.stoich_0 = take(sec, "stoich_0", name + " stoich_0");
    d.stoich_100 = take(sec, "stoich_100", name + " stoich_100");
    d.film_resistance = take(sec, "film_resistance", name + " film_resistance");
    return d;
}

inline OcpCurve parse_ocp(const RawSection& sec, const std::string& name) {
    if (sec.table.size() < 4)
        throw validation_error("section '" + name + "' needs at least 4 table rows");
    OcpCurve::Interp interp = OcpCurve::Interp::cubic;
    auto it = sec.sv.find("interpolation");
    if (it != sec.sv.end()) {
        if (it->second == "linear") interp = OcpCurve::Interp::linear;
        else if (it->second == "cubic") interp = OcpCurve::Interp::cubic;
        else throw validation_error("field '" + name + " interpolation' must be linear or cubic");
    }
    std::vector<double> th, v;
    th.reserve(sec.table.size());
    v.reserve(sec.table.size());
    for (auto& [a, b] : sec.table) { th.push_back(a); v.push_back(b); }
    try {
        return OcpCurve(std::move(th), std::move(v), interp);
    } catch (const validation_error& e) {
        throw validation_error("section '" + name + "': " + e.what());
    }
}

}  // namespace detail

inline CellParams load_cell_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("cannot open parameter file: " + path);

    std::map<std::string, detail::RawSection> sections;
    std::string current;  // "" == file prologue (schema key)
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw validation_error(path + ":" + std::to_string(lineno) + ": malformed section header");
            current = detail::trim(line.substr(1, line.size() - 2));
            sections[current];
            continue;
        }
        auto& sec = sections[current];
        if (auto eq = line.find('='); eq != std::string::npos) {
            std::string key = detail::trim(line.substr(0, eq));
            std::string val = detail::trim(line.substr(eq + 1));
            if (key.empty() || val.empty())
                throw validation_error(path + ":" + std::to_string(lineno) + ": malformed key/value");
            char* endp = nullptr;
            double num = std::strtod(val.c_str(), &endp);
            if (endp && *endp == '\0') sec.kv[key] = num;
            else sec.sv[key] = val;
            continue;
        }
        // Two-column table row.
        std::istringstream row(line);
        double a, b;
        if (!(row >> a >> b))
            throw validation_error(path + ":" + std::to_string(lineno) +
                                   ": malformed ocp table row (expected two numbers)");
        std::string extra;
        if (row >> extra)
            throw validation_error(path + ":" + std::to_string(lineno) + ": trailing data on table row");
        sec.table.emplace_back(a, b);
    }

    auto schema_sec = sections.find("");
    if (schema_sec == sections.end() || !schema_sec->second.kv.count("schema"))
        throw validation_error("missing field 'schema'");
    if (schema_sec->second.kv.at("schema") != 1.0)
        throw validation_error("unsupported schema version (expected 1)");

    auto need = [&](const char* name) -> detail::RawSection& {
        auto it = sections.find(name);
        if (it == sections.end())
            throw validation_error(std::string("missing section '[") + name + "]'");
        return it->second;
    };

    CellParams p;
    auto& cell = need("cell");
    p.plate_area = detail::take(cell, "plate_area", "cell plate_area");
    p.temperature = detail::take(cell, "temperature", "cell temperature");
    p.electrolyte_diffusivity = detail::take(cell, "electrolyte_diffusivity", "cell electrolyte_diffusivity");
    p.electrolyte_conductivity = detail::take(cell, "electrolyte_conductivity", "cell electrolyte_conductivity");
    p.transference = detail::take(cell, "transference", "cell transference");
    p.electrolyte_conc = detail::take(cell, "electrolyte_conc", "cell electrolyte_conc");
    p.faraday = detail::take_or(cell, "faraday", p.faraday);
    p.gas_constant = detail::take_or(cell, "gas_constant", p.gas_constant);

    p.neg = detail::parse_electrode(need("neg"), "neg");
    p.pos = detail::parse_electrode(need("pos"), "pos");
    auto& sep = need("sep");
    p.sep.thickness = detail::take(sep, "thickness", "sep thickness");
    p.sep.porosity = detail::take(sep, "porosity", "sep porosity");
    p.sep.bruggeman = detail::take(sep, "bruggeman", "sep bruggeman");

    p.ocp_neg = detail::parse_ocp(need("ocp_neg"), "ocp_neg");
    p.ocp_pos = detail::parse_ocp(need("ocp_pos"), "ocp_pos");

    // Declared total thickness must agree with the per-domain sum.
    const double declared = detail::take(cell, "total_thickness", "cell total_thickness");
    if (std::abs(declared - p.L_tot()) > 1e-9 * p.L_tot())
        throw validation_error("field 'cell total_thickness' disagrees with thickness sum");

    validate(p);
    return p;
}

inline void save_cell_params(const CellParams& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw validation_error("cannot write parameter file: " + path);
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    out << "schema = 1\n\n[cell]\n";
    out << "plate_area = " << num(p.plate_area) << "\n";
    out << "temperature = " << num(p.temperature) << "\n";
    out << "electrolyte_diffusivity = " << num(p.electrolyte_diffusivity) << "\n";
    out << "electrolyte_conductivity = " << num(p.electrolyte_conductivity) << "\n";
    out << "transference = " << num(p.transference) << "\n";
    out << "electrolyte_conc = " << num(p.electrolyte_conc) << "\n";
    out << "total_thickness = " << num(p.L_tot()) << "\n";
    out << "faraday = " << num(p.faraday) << "\n";
    out << "gas_constant = " << num(p.gas_constant) << "\n";
    auto electrode = [&](const char* name, const DomainParams& d) {
        out << "\n[" << name << "]\n";
        out << "thickness = " << num(d.thickness) << "\n";
        out << "porosity = " << num(d.porosity) << "\n";
        out << "bruggeman = " << num(d.bruggeman) << "\n";
        out << "filler_fraction = " << num(d.filler_fraction) << "\n";
        out << "solid_conductivity = " << num(d.solid_conductivity) << "\n";
        out << "particle_radius = " << num(d.particle_radius) << "\n";
        out << "solid_diffusivity = " << num(d.solid_diffusivity) << "\n";
        out << "surface_area_density = " << num(d.surface_area_density) << "\n";
        out << "max_concentration = " << num(d.max_concentration) << "\n";
        out << "reaction_rate = " << num(d.reaction_rate) << "\n";
        out << "stoich_0 = " << num(d.stoich_0) << "\n";
        out << "stoich_100 = " << num(d.stoich_100) << "\n";
        out << "film_resistance = " << num(d.film_resistance) << "\n";
    };
    electrode("neg", p.neg);
    out << "\n[sep]\n";
    out << "thickness = " << num(p.sep.thickness) << "\n";
    out << "porosity = " << num(p.sep.porosity) << "\n";
    out << "bruggeman = " << num(p.sep.bruggeman) << "\n";
    electrode("pos", p.pos);
    auto ocp = [&](const char* name, const OcpCurve& c) {
        out << "\n[" << name << "]\n";
        out << "interpolation = " << (c.interp() == OcpCurve::Interp::cubic ? "cubic" : "linear") << "\n";
        for (size_t i = 0; i < c.size(); ++i)
            out << num(c.theta()[i]) << "  " << num(c.volts()[i]) << "\n";
    };
    ocp("ocp_neg", p.ocp_neg);
    ocp("ocp_pos", p.ocp_pos);
}

// ---------------------------------------------------------------------------
// Setpoints: everything the transfer functions need at one (SOC, T).
// ---------------------------------------------------------------------------

struct ElectrodeSetpoint {
    // Linearisation point
    double theta = 0;     // surface stoichiometry
    double cs0 = 0;       // c_s at the setpoint [mol/m^3]
    double j0 = 0;        // exchange flux density [mol m^-2 s^-1]
    double dUdtheta = 0;  // OCP slope [V]
    double dUdc = 0;      // dU/dc_s,e [V m^3/mol]
    double U0 = 0;        // OCP value [V]
    double R_ct = 0;      // charge-transfer resistance [ohm m^2]
    double R_tot = 0;     // R_film + R_ct [ohm m^2]
    // Geometry / transport copies
    double L = 0, Rs = 0, Ds = 0, a_s = 0;
    double sigma_eff = 0, kappa_eff = 0;
    double cs_max = 0, R_film = 0;
};

struct Setpoint {
    double soc = 0, temp = 0;
    ElectrodeSetpoint neg, pos;
    double kappa_eff_sep = 0;
    double L_n = 0, L_s = 0, L_p = 0, L_tot = 0;
    double area = 0, c_e0 = 0, t_plus = 0, F = 0, R_gas = 0;
};

// Map bulk SOC to electrode stoichiometry.  The negative electrode fills as
// SOC rises; the positive electrode empties (mirrored window).
inline double stoich_of_soc(const DomainParams& d, double soc, bool negative) {
    const double lo = d.stoich_0, hi = d.stoich_100;
    return negative ? lo + soc * (hi - lo) : hi - soc * (hi - lo);
}

inline Setpoint make_setpoint(const CellParams& p, double soc, double temp) {
    if (!(soc >= 0.0 && soc <= 1.0))
        throw validation_error("setpoint soc must lie in [0,1]");
    if (!(temp > 0.0)) throw validation_error("setpoint temperature must be positive");
    Setpoint sp;
    sp.soc = soc;
    sp.temp = temp;
    sp.L_n = p.neg.thickness;
    sp.L_s = p.sep.thickness;
    sp.L_p = p.pos.thickness;
    sp.L_tot = p.L_tot();
    sp.area = p.plate_area;
    sp.c_e0 = p.electrolyte_conc;
    sp.t_plus = p.transference;
    sp.F = p.faraday;
    sp.R_gas = p.gas_constant;
    sp.kappa_eff_sep = effective_transport(p.sep, p.electrolyte_conductivity).kappa_eff;

    auto fill = [&](const DomainParams& d, const OcpCurve& ocp, bool negative) {
        ElectrodeSetpoint e;
        e.theta = stoich_of_soc(d, soc, negative);
        e.cs0 = e.theta * d.max_concentration;
        // Exchange flux density j0 = m * sqrt(cs0 * (cmax - cs0) * ce0).
        e.j0 = d.reaction_rate *
               std::sqrt(e.cs0 * (d.max_concentration - e.cs0) * p.electrolyte_conc);
        if (!(e.j0 > 0))
            throw numeric_error("exchange flux density vanished at the requested setpoint");
        e.dUdtheta = ocp.derivative(e.theta);
        e.dUdc = e.dUdtheta / d.max_concentration;
        e.U0 = ocp.value(e.theta);
        // Slope of j = j0 sinh(F eta / (2 R T)) at eta = 0, expressed per unit
        // of interfacial current density: R_ct = 2 R T / (F^2 j0)  [ohm m^2].
        e.R_ct = 2.0 * p.gas_constant * temp / (p.faraday * p.faraday * e.j0);
        e.R_tot = d.film_resistance + e.R_ct;
        auto tr = effective_transport(d, p.electrolyte_conductivity);
        e.L = d.thickness;
        e.Rs = d.particle_radius;
        e.Ds = d.solid_diffusivity;
        e.a_s = d.surface_area_density;
        e.sigma_eff = tr.sigma_eff;
        e.kappa_eff = tr.kappa_eff;
        e.cs_max = d.max_concentration;
        e.R_film = d.film_resistance;
        return e;
    };
    sp.neg = fill(p.neg, p.ocp_neg, true);
    sp.pos = fill(p.pos, p.ocp_pos, false);
    return sp;
}

// Nominal capacity [Ah] from the limiting electrode's utilisation window.
// Active volume fraction is recovered from the surface area density of
// spherical particles: eps_act = a_s R_s / 3.
inline double cell_capacity_ah(const CellParams& p) {
    auto electrode_ah = [&](const DomainParams& d) {
        const double eps_act = d.surface_area_density * d.particle_radius / 3.0;
        return p.faraday * p.plate_area * d.thickness * eps_act *
               (d.stoich_100 - d.stoich_0) * d.max_concentration / 3600.0;
    };
    return std::min(electrode_ah(p.neg), electrode_ah(p.pos));
}

}  // namespace cidra
