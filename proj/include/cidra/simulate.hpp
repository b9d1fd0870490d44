// Drive-cycle simulation against a realised model grid.
//
// Per step: the four state-space matrices and the integrator gains are
// bilinearly blended at the present (soc, temperature), the shared state is
// advanced, the integrator accumulator adds T_s * u, and the terminal
// voltage is rebuilt from the nonlinear output map (OCP + Butler-Volmer
// overpotential + film drop + electrolyte potential + concentration term).
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cidra/errors.hpp"
#include "cidra/params.hpp"
#include "cidra/realisation.hpp"

namespace cidra {

// ---------------------------------------------------------------------------
// Drive cycles.
// ---------------------------------------------------------------------------

struct DriveCycle {
    enum class Mode { current, power };
    Mode mode = Mode::current;
    Eigen::VectorXd time;   // seconds, strictly increasing
    Eigen::VectorXd value;  // A (cell) or W (pack)
};

inline DriveCycle load_drive_cycle(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw validation_error("cannot open drive cycle: " + path);
    std::string line;
    if (!std::getline(is, line)) throw validation_error("empty drive cycle file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string header = line;
    header.erase(std::remove_if(header.begin(), header.end(),
                                [](unsigned char c) { return std::isspace(c); }),
                 header.end());
    DriveCycle cyc;
    if (header == "time_s,current_a") cyc.mode = DriveCycle::Mode::current;
    else if (header == "time_s,power_w") cyc.mode = DriveCycle::Mode::power;
    else
        throw validation_error(
            "drive cycle header must be 'time_s,current_a' or 'time_s,power_w', got: " + line);

    std::vector<double> t, v;
    long lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string a, b;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b))
            throw validation_error("drive cycle line " + std::to_string(lineno) +
                                   ": expected two comma-separated values");
        try {
            t.push_back(std::stod(a));
            v.push_back(std::stod(b));
        } catch (const std::exception&) {
            throw validation_error("drive cycle line " + std::to_string(lineno) +
                                   ": unparseable number");
        }
        if (t.size() > 1 && !(t[t.size() - 1] > t[t.size() - 2]))
            throw validation_error("drive cycle line " + std::to_string(lineno) +
                                   ": time must increase strictly");
    }
    if (t.size() < 2) throw validation_error("drive cycle needs at least two samples");
    cyc.time = Eigen::Map<Eigen::VectorXd>(t.data(), static_cast<long>(t.size()));
    cyc.value = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<long>(v.size()));
    return cyc;
}

inline void save_drive_cycle(const DriveCycle& cyc, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw validation_error("cannot open drive cycle for writing: " + path);
    os << (cyc.mode == DriveCycle::Mode::current ? "time_s,current_a\n" : "time_s,power_w\n");
    char buf[80];
    for (long k = 0; k < cyc.time.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.12g,%.12g\n", cyc.time(k), cyc.value(k));
        os << buf;
    }
    if (!os) throw validation_error("write failure on drive cycle: " + path);
}

// Linear resample onto a uniform grid with period T_s starting at the first
// sample.  Cycles already uniform at T_s are passed through unchanged.
inline DriveCycle resample_cycle(const DriveCycle& cyc, double T_s) {
    if (!(T_s > 0)) throw validation_error("resample period must be positive");
    const long n_in = cyc.time.size();
    if (n_in < 2) throw validation_error("cycle must hold at least two samples");
    bool uniform = true;
    for (long k = 1; k < n_in && uniform; ++k)
        if (std::abs((cyc.time(k) - cyc.time(k - 1)) - T_s) > 1e-9 * T_s) uniform = false;
    if (uniform) return cyc;

    const double t0 = cyc.time(0);
    const double duration = cyc.time(n_in - 1) - t0;
    const long n = static_cast<long>(std::floor(duration / T_s + 1e-9)) + 1;
    DriveCycle out;
    out.mode = cyc.mode;
    out.time.resize(n);
    out.value.resize(n);
    long j = 0;
    for (long k = 0; k < n; ++k) {
        const double t = t0 + k * T_s;
        while (j + 2 < n_in && cyc.time(j + 1) <= t) ++j;
        const double t1 = cyc.time(j), t2 = cyc.time(j + 1);
        const double w = std::clamp((t - t1) / (t2 - t1), 0.0, 1.0);
        out.time(k) = t;
        out.value(k) = (1.0 - w) * cyc.value(j) + w * cyc.value(j + 1);
    }
    return out;
}

// Synthetic urban/suburban/highway current profile (cell amperes, discharge
// positive).  Deterministic closed form, 1800 s period, rest at both ends of
// each period; amplitudes sized for a ~5 Ah cell (peak < 2C).
inline DriveCycle make_synthetic_cycle(double duration_s, double rate_hz) {
    if (!(duration_s > 0) || !(rate_hz > 0))
        throw validation_error("synthetic cycle needs positive duration and rate");
    const long n = static_cast<long>(std::floor(duration_s * rate_hz + 1e-9)) + 1;
    DriveCycle cyc;
    cyc.mode = DriveCycle::Mode::current;
    cyc.time.resize(n);
    cyc.value.resize(n);
    constexpr double two_pi = 2.0 * M_PI;
    for (long k = 0; k < n; ++k) {
        const double t = k / rate_hz;
        const double u = std::fmod(t, 1800.0);
        double i = 0.0;
        if (u >= 20.0 && u < 600.0)
            i = 1.2 + 1.8 * std::sin(two_pi * u / 45.0) + 0.9 * std::sin(two_pi * u / 13.0 + 1.0);
        else if (u >= 630.0 && u < 1200.0)
            i = 2.2 + 2.6 * std::sin(two_pi * u / 60.0 + 0.4) +
                1.1 * std::sin(two_pi * u / 17.0 + 2.1);
        else if (u >= 1200.0 && u < 1770.0)
            i = 4.2 + 3.2 * std::sin(two_pi * u / 90.0 + 0.8) +
                1.4 * std::sin(two_pi * u / 23.0 + 0.3);
        cyc.time(k) = t;
        cyc.value(k) = i;
    }
    return cyc;
}

// ---------------------------------------------------------------------------
// Grid blending.
// ---------------------------------------------------------------------------

struct BlendedModel {
    Eigen::MatrixXd A, B, C;
    Eigen::VectorXd D, res0;
};

namespace detail {

// Index and weight of the left node for linear interpolation on axis v.
// Throws hull_error outside the grid (tiny tolerance absorbs roundoff; the
// query is then clamped onto the hull).
inline std::pair<size_t, double> axis_weight(const std::vector<double>& axis, double v,
                                             const char* name) {
    const double lo = axis.front(), hi = axis.back();
    const double tol = 1e-9 * std::max({1.0, std::abs(lo), std::abs(hi)});
    if (v < lo - tol || v > hi + tol)
        throw hull_error(std::string(name) + " outside the model grid hull: " +
                         std::to_string(v) + " not in [" + std::to_string(lo) + ", " +
                         std::to_string(hi) + "]");
    if (axis.size() == 1) return {0, 0.0};
    const double vc = std::clamp(v, lo, hi);
    size_t i = static_cast<size_t>(
                   std::upper_bound(axis.begin(), axis.end(), vc) - axis.begin());
    i = std::clamp<size_t>(i, 1, axis.size() - 1) - 1;
    const double w = (vc - axis[i]) / (axis[i + 1] - axis[i]);
    return {i, w};
}

}  // namespace detail

// Bilinear blend of all five model operators at (soc, temp).  Every blended
// quantity shares the single model state.
inline BlendedModel blend(const ModelGrid& grid, double soc, double temp) {
    if (grid.models.empty()) throw validation_error("empty model grid");
    const auto [i, ws] = detail::axis_weight(grid.socs, soc, "soc");
    const auto [j, wt] = detail::axis_weight(grid.temps, temp, "temperature");
    const size_t i2 = std::min(i + 1, grid.socs.size() - 1);
    const size_t j2 = std::min(j + 1, grid.temps.size() - 1);

    const StateSpaceModel& m00 = grid.at(i, j);
    const StateSpaceModel& m01 = grid.at(i, j2);
    const StateSpaceModel& m10 = grid.at(i2, j);
    const StateSpaceModel& m11 = grid.at(i2, j2);
    const double w00 = (1 - ws) * (1 - wt), w01 = (1 - ws) * wt;
    const double w10 = ws * (1 - wt), w11 = ws * wt;

    BlendedModel b;
    b.A = w00 * m00.A + w01 * m01.A + w10 * m10.A + w11 * m11.A;
    b.B = w00 * m00.B + w01 * m01.B + w10 * m10.B + w11 * m11.B;
    b.C = w00 * m00.C + w01 * m01.C + w10 * m10.C + w11 * m11.C;
    b.D = w00 * m00.D + w01 * m01.D + w10 * m10.D + w11 * m11.D;
    b.res0 = w00 * m00.res0 + w01 * m01.res0 + w10 * m10.res0 + w11 * m11.res0;
    return b;
}

// ---------------------------------------------------------------------------
// Voltage reconstruction.
// ---------------------------------------------------------------------------

inline long find_output(const std::vector<OutputLabel>& labels, OutputLabel::Kind kind,
                        Electrode side, double loc, double scale) {
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i].kind != kind) continue;
        const bool sided = kind == OutputLabel::Kind::cse || kind == OutputLabel::Kind::phis ||
                           kind == OutputLabel::Kind::flux;
        if (sided && labels[i].side != side) continue;
        if (std::abs(labels[i].loc - loc) <= 1e-9 * std::max(scale, 1.0) + 1e-15)
            return static_cast<long>(i);
    }
    return -1;
}

// Row indices needed by the voltage map: collector-side surface
// concentration and flux on both electrodes, electrolyte concentration at
// both collectors, electrolyte potential at the positive collector.
struct VoltageOutputs {
    long cse_neg, cse_pos, flux_neg, flux_pos, ce_0, ce_L, phie_L;

    VoltageOutputs(const std::vector<OutputLabel>& labels, double L_tot) {
        cse_neg = find_output(labels, OutputLabel::Kind::cse, Electrode::neg, 0.0, 1.0);
        cse_pos = find_output(labels, OutputLabel::Kind::cse, Electrode::pos, 0.0, 1.0);
        flux_neg = find_output(labels, OutputLabel::Kind::flux, Electrode::neg, 0.0, 1.0);
        flux_pos = find_output(labels, OutputLabel::Kind::flux, Electrode::pos, 0.0, 1.0);
        ce_0 = find_output(labels, OutputLabel::Kind::ce, Electrode::neg, 0.0, L_tot);
        ce_L = find_output(labels, OutputLabel::Kind::ce, Electrode::neg, L_tot, L_tot);
        phie_L = find_output(labels, OutputLabel::Kind::phie, Electrode::neg, L_tot, L_tot);
        for (long idx : {cse_neg, cse_pos, flux_neg, flux_pos, ce_0, ce_L, phie_L})
            if (idx < 0)
                throw validation_error(
                    "model lacks an output required for voltage reconstruction "
                    "(collector-side cse/flux on both electrodes, ce at both collectors, "
                    "phie at the positive collector)");
    }
};

// Sample flags (bitmask).
enum : unsigned {
    flag_voltage_limit = 1u,  // terminal voltage left [vmin, vmax]
    flag_cse_clamped = 2u,    // a surface concentration left [0, c_max]
    flag_ce_clamped = 4u,     // an electrolyte concentration fell to <= 0
};

struct VoltageSample {
    double voltage = 0;
    unsigned flags = 0;
};

// Nonlinear output map at one step.  y holds the linear output deviations
// (integrator contribution already added), soc the present state of charge.
inline VoltageSample reconstruct_voltage(const CellParams& params, const VoltageOutputs& idx,
                                         const Eigen::VectorXd& y, double soc) {
    VoltageSample out;
    const double T = params.temperature;
    const double F = params.faraday, R = params.gas_constant;

    auto electrode_terms = [&](const DomainParams& dom, const OcpCurve& ocp, double theta0,
                               double cse_dev, double j, double ce_coll) {
        const double cmax = dom.max_concentration;
        const double eps_c = 1e-6 * cmax;
        double cse = theta0 * cmax + cse_dev;
        if (cse < 0.0 || cse > cmax) out.flags |= flag_cse_clamped;
        cse = std::clamp(cse, eps_c, cmax - eps_c);
        const double U = ocp.value(cse / cmax);
        const double j0 = dom.reaction_rate * std::sqrt(ce_coll * cse * (cmax - cse));
        const double eta = (2.0 * R * T / F) * std::asinh(j / j0);
        return U + eta + F * dom.film_resistance * j;
    };

    double ce0 = params.electrolyte_conc + y(idx.ce_0);
    double ceL = params.electrolyte_conc + y(idx.ce_L);
    const double eps_e = 1e-6 * params.electrolyte_conc;
    if (ce0 <= 0.0 || ceL <= 0.0) out.flags |= flag_ce_clamped;
    ce0 = std::max(ce0, eps_e);
    ceL = std::max(ceL, eps_e);

    const double th_n = stoich_of_soc(params.neg, soc, true);
    const double th_p = stoich_of_soc(params.pos, soc, false);
    const double neg = electrode_terms(params.neg, params.ocp_neg, th_n, y(idx.cse_neg),
                                       y(idx.flux_neg), ce0);
    const double pos = electrode_terms(params.pos, params.ocp_pos, th_p, y(idx.cse_pos),
                                       y(idx.flux_pos), ceL);
    const double phie = y(idx.phie_L) +
                        (2.0 * R * T * (1.0 - params.transference) / F) * std::log(ceL / ce0);
    out.voltage = pos + phie - neg;
    return out;
}

inline double open_circuit_voltage(const CellParams& params, double soc) {
    return params.ocp_pos.value(stoich_of_soc(params.pos, soc, false)) -
           params.ocp_neg.value(stoich_of_soc(params.neg, soc, true));
}

// ---------------------------------------------------------------------------
// Power-mode conversion.
// ---------------------------------------------------------------------------

struct PackConfig {
    int series = 96;
    int parallel = 47;
    double motor_efficiency = 0.827;
};

// Cell current demanded by a pack power request, given the previous step's
// terminal voltage.  Traction (p > 0) divides by the motor efficiency (the
// cell supplies more than reaches the wheels); regeneration multiplies.
inline double power_to_current(double pack_power_w, double v_prev, const PackConfig& pack) {
    if (pack.series < 1 || pack.parallel < 1 || !(pack.motor_efficiency > 0) ||
        pack.motor_efficiency > 1)
        throw validation_error("pack configuration invalid (series/parallel >= 1, 0 < eta <= 1)");
    if (!(v_prev > 0)) throw numeric_error("power mode requires a positive previous voltage");
    double p_cell = pack_power_w / (static_cast<double>(pack.series) * pack.parallel);
    p_cell = p_cell >= 0 ? p_cell / pack.motor_efficiency : p_cell * pack.motor_efficiency;
    return p_cell / v_prev;
}

// ---------------------------------------------------------------------------
// Drive-cycle run.
// ---------------------------------------------------------------------------

struct SimOptions {
    double soc0 = 0.5;
    double temp = 298.15;
    double vmin = -std::numeric_limits<double>::infinity();
    double vmax = std::numeric_limits<double>::infinity();
    PackConfig pack;  // used in power mode only
};

struct SimulationTrace {
    double T_s = 0;
    Eigen::VectorXd time, current, voltage, soc;
    std::vector<unsigned> flags;
    Eigen::MatrixXd outputs;  // p x n linear output deviations (integrator included)
    std::vector<OutputLabel> labels;
};

inline SimulationTrace run_drive_cycle(const CellParams& params, const ModelGrid& grid,
                                       const DriveCycle& cycle, const SimOptions& opt) {
    if (grid.models.empty()) throw validation_error("empty model grid");
    const StateSpaceModel& ref = grid.models.front();
    const double T_s = ref.T_s;
    const long n = cycle.time.size();
    if (n < 1) throw validation_error("drive cycle holds no samples");
    for (long k = 1; k < n; ++k)
        if (std::abs((cycle.time(k) - cycle.time(k - 1)) - T_s) > 1e-9 * T_s)
            throw validation_error("drive cycle must be resampled to the model period before "
                                   "simulation (see resample_cycle)");
    if (opt.soc0 < 0.0 || opt.soc0 > 1.0)
        throw validation_error("initial soc must lie in [0, 1]");

    const VoltageOutputs idx(ref.labels, params.L_tot());
    const double cap_as = cell_capacity_ah(params) * 3600.0;
    const long p = ref.outputs();
    const long M = ref.order();

    SimulationTrace tr;
    tr.T_s = T_s;
    tr.time = cycle.time;
    tr.current.resize(n);
    tr.voltage.resize(n);
    tr.soc.resize(n);
    tr.flags.assign(static_cast<size_t>(n), 0u);
    tr.outputs.resize(p, n);
    tr.labels = ref.labels;

    Eigen::VectorXd x = Eigen::VectorXd::Zero(M);
    double q_int = 0.0;  // integrator accumulator, sum of T_s * u over past steps
    double soc = opt.soc0;
    double v_prev = open_circuit_voltage(params, soc);

    for (long k = 0; k < n; ++k) {
        double u = cycle.value(k);
        if (cycle.mode == DriveCycle::Mode::power) u = power_to_current(u, v_prev, opt.pack);

        const BlendedModel m = blend(grid, soc, opt.temp);
        Eigen::VectorXd y = m.C * x + m.D * u + m.res0 * q_int;

        VoltageSample vs = reconstruct_voltage(params, idx, y, soc);
        if (vs.voltage < opt.vmin || vs.voltage > opt.vmax) vs.flags |= flag_voltage_limit;

        tr.current(k) = u;
        tr.voltage(k) = vs.voltage;
        tr.soc(k) = soc;
        tr.flags[static_cast<size_t>(k)] = vs.flags;
        tr.outputs.col(k) = y;

        x = m.A * x + m.B * u;
        q_int += T_s * u;
        soc -= u * T_s / cap_as;
        v_prev = vs.voltage;
    }
    return tr;
}

inline void write_trace_csv(const SimulationTrace& tr, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw validation_error("cannot open trace file for writing: " + path);
    os << "time_s,current_a,voltage_v,soc,flags";
    for (const auto& lab : tr.labels) os << ',' << lab.str();
    os << '\n';
    char buf[80];
    for (long k = 0; k < tr.time.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g,%u", tr.time(k), tr.current(k),
                      tr.voltage(k), tr.soc(k), tr.flags[static_cast<size_t>(k)]);
        os << buf;
        for (long r = 0; r < tr.outputs.rows(); ++r) {
            std::snprintf(buf, sizeof buf, ",%.12g", tr.outputs(r, k));
            os << buf;
        }
        os << '\n';
    }
    if (!os) throw validation_error("write failure on trace file: " + path);
}

}  // namespace cidra
