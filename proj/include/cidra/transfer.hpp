// Frequency-domain transfer functions of the linearised porous-electrode
// cell model, evaluated per electrode setpoint.
//
// Conventions:
//  * Input is total applied current I [A]; positive I discharges the cell.
//  * Electrode-local coordinates z in [0, 1] run from each current collector
//    toward the separator.  Electrolyte quantities use the absolute
//    coordinate x in [0, L_tot] measured from the negative collector.
//  * tf_flux / tf_cse / tf_phis evaluate the electrode-local kernel in its
//    positive orientation; rows for the positive electrode acquire a sign
//    flip during SIMO assembly (lithium intercalates there on discharge).
//  * Reaction flux j is molar [mol m^-2 s^-1]; F j is the interfacial
//    current density.
//
// The building blocks:
//   beta(s)      = R_s sqrt(s / D_s)
//   jw_kernel(b) = tanh(b) / (tanh(b) - b)      (spherical diffusion)
//   nu(s)        = L sqrt( a_s (1/sigma_eff + 1/kappa_eff)
//                          / (R_tot + dU/dc * R_s/(F D_s) * jw_kernel) )
//   tf_flux(z)   = nu (sigma cosh(nu z) + kappa cosh(nu (z-1)))
//                  / (a_s F L A (kappa+sigma) sinh(nu))
// from which surface concentration, solid potential, electrolyte potential
// and electrolyte concentration follow analytically (see each function).
#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "cidra/eigenproblem.hpp"
#include "cidra/errors.hpp"
#include "cidra/params.hpp"
#include "cidra/threading.hpp"

namespace cidra {

using cdouble = std::complex<double>;

enum class Electrode { neg, pos };

inline const ElectrodeSetpoint& electrode(const Setpoint& sp, Electrode which) {
    return which == Electrode::neg ? sp.neg : sp.pos;
}

// ---------------------------------------------------------------------------
// Scalar kernels.
// ---------------------------------------------------------------------------

inline cdouble beta(cdouble s, double Rs, double Ds) {
    return Rs * std::sqrt(s / Ds);  // principal branch
}

// tanh(b)/(tanh(b) - b).  The denominator loses all significant digits for
// small |b| (tanh(b)-b ~ -b^3/3), so below |b| = 0.05 we switch to the
// series -3/b^2 - 1/5 + b^2/175 - 2 b^4/7875 whose truncation error there
// is below double round-off; the crossover balances series truncation
// (~|b|^8) against cancellation (~eps/|b|^2).  For large |b| tanh is
// saturated and is replaced by 1 to avoid overflow in complex tanh.
inline cdouble jw_kernel(cdouble b) {
    const double ab = std::abs(b);
    if (ab < 0.05) {
        const cdouble b2 = b * b;
        return -3.0 / b2 - 0.2 + b2 / 175.0 - 2.0 * b2 * b2 / 7875.0;
    }
    const cdouble t = (ab > 25.0) ? cdouble(1.0, 0.0) : std::tanh(b);
    return t / (t - b);
}

// Dimensionless electrode eigenvalue nu(s).
inline cdouble nu(cdouble s, const ElectrodeSetpoint& e, double F) {
    const cdouble kern = jw_kernel(beta(s, e.Rs, e.Ds));
    const cdouble denom = e.R_tot + e.dUdc * (e.Rs / (F * e.Ds)) * kern;
    const cdouble num = e.a_s * (1.0 / e.sigma_eff + 1.0 / e.kappa_eff);
    return e.L * std::sqrt(num / denom);
}

inline cdouble nu(cdouble s, const Setpoint& sp, Electrode which) {
    return nu(s, electrode(sp, which), sp.F);
}

// ---------------------------------------------------------------------------
// Electrode-local transfer functions (positive orientation).
// ---------------------------------------------------------------------------

// Reaction flux density per unit applied current, J(z,s)/I [mol m^-2 s^-1 / A].
// Charge conservation fixes the z-integral to 1/(a_s F L A) at every s.
inline cdouble tf_flux(double z, cdouble s, const Setpoint& sp, Electrode which) {
    const ElectrodeSetpoint& e = electrode(sp, which);
    const cdouble v = nu(s, e, sp.F);
    const double sig = e.sigma_eff, kap = e.kappa_eff;
    const double scale = 1.0 / (e.a_s * sp.F * e.L * sp.area * (kap + sig));
    if (std::abs(v) < 1e-7) {
        // nu -> 0 limit: uniform reaction distribution.
        const cdouble v2 = v * v;
        const cdouble corr = v2 * ((sig * z * z + kap * (z - 1) * (z - 1)) / (2.0 * (kap + sig)) - 1.0 / 6.0);
        return scale * (kap + sig) * (1.0 + corr);
    }
    return scale * v * (sig * std::cosh(v * z) + kap * std::cosh(v * (z - 1.0))) / std::sinh(v);
}

// Surface-concentration deviation per unit current, C~_s,e(z,s)/I.
// Composition of the spherical diffusion kernel with the flux:
//   C~_s,e / J = (R_s / D_s) jw_kernel(beta).
// Carries the 1/s integrator pole; callers must not evaluate at s = 0.
inline cdouble tf_cse(double z, cdouble s, const Setpoint& sp, Electrode which) {
    const ElectrodeSetpoint& e = electrode(sp, which);
    return (e.Rs / e.Ds) * jw_kernel(beta(s, e.Rs, e.Ds)) * tf_flux(z, s, sp, which);
}

// Solid-potential deviation referenced to the local current collector,
// phi~_s(z,s)/I, obtained by integrating Ohm's law in the solid
// (i_s = -sigma_eff dphi_s/dx) against the flux profile.  Vanishes
// identically at z = 0.
inline cdouble tf_phis(double z, cdouble s, const Setpoint& sp, Electrode which) {
    const ElectrodeSetpoint& e = electrode(sp, which);
    const cdouble v = nu(s, e, sp.F);
    const double sig = e.sigma_eff, kap = e.kappa_eff;
    if (std::abs(v) < 1e-6)
        return -e.L * z * (2.0 - z) / (2.0 * sp.area * sig);
    const cdouble sh = std::sinh(v);
    const cdouble num = sig * (1.0 - std::cosh(v * z) + z * v * sh) +
                        kap * (std::cosh(v) - std::cosh(v * (z - 1.0)));
    return -e.L * num / (sp.area * sig * (kap + sig) * v * sh);
}

namespace detail {

// Electrolyte current fraction i_e(z)/I_app inside an electrode (positive
// orientation): 0 at the collector (z=0), 1 at the separator (z=1).
inline cdouble ie_fraction(double z, cdouble v, double sig, double kap) {
    if (std::abs(v) < 1e-7) {
        // Leading order: i_e/I = (sig z^2/2 + kap z(2-z)/2 ... ) -> z at nu=0
        return cdouble(z, 0.0);
    }
    const cdouble sh = std::sinh(v);
    return (sig * std::sinh(v * z) + kap * std::sinh(v * (z - 1.0)) + kap * sh) /
           ((kap + sig) * sh);
}

// Integral of i_e/I_app over [0, z] (dimensionless), used by tf_phie.
inline cdouble ie_integral(double z, cdouble v, double sig, double kap) {
    if (std::abs(v) < 1e-7) return cdouble(0.5 * z * z, 0.0);
    const cdouble sh = std::sinh(v);
    return (sig * (std::cosh(v * z) - 1.0) / v +
            kap * (std::cosh(v * (z - 1.0)) - std::cosh(v)) / v + kap * z * sh) /
           ((kap + sig) * sh);
}

// Integral of i_e/I_app over [z, 1].
inline cdouble ie_integral_tail(double z, cdouble v, double sig, double kap) {
    if (std::abs(v) < 1e-7) return cdouble(0.5 * (1.0 - z * z), 0.0);
    const cdouble sh = std::sinh(v);
    return (sig * (std::cosh(v) - std::cosh(v * z)) / v +
            kap * (1.0 - std::cosh(v * (z - 1.0))) / v + kap * (1.0 - z) * sh) /
           ((kap + sig) * sh);
}

}  // namespace detail

// Ohmic electrolyte-potential deviation phi~_e(x,s)/I referenced to x = 0,
// i.e. the migration term of  dphi_e/dx = -i_e/kappa_eff  integrated across
// the cell.  The concentration-overpotential (log) term is reconstructed at
// simulation time from the realised c_e outputs and is *not* part of this
// transfer function.  x may lie anywhere in [0, L_tot].
inline cdouble tf_phie(double x, cdouble s, const Setpoint& sp) {
    if (x < 0.0 || x > sp.L_tot * (1.0 + 1e-12))
        throw validation_error("tf_phie location outside the cell domain");
    x = std::min(x, sp.L_tot);
    const cdouble vn = nu(s, sp.neg, sp.F);
    const cdouble vp = nu(s, sp.pos, sp.F);
    const double An = sp.area;

    // Negative electrode: phi(x) = -(L_n / (A kap_n)) Int_0^z i_e/I.
    auto phi_neg = [&](double z) {
        return -(sp.neg.L / (An * sp.neg.kappa_eff)) *
               detail::ie_integral(z, vn, sp.neg.sigma_eff, sp.neg.kappa_eff);
    };
    if (x <= sp.L_n) return phi_neg(x / sp.L_n);

    const cdouble at_sep_in = phi_neg(1.0);
    const double x_sep_end = sp.L_n + sp.L_s;
    // Separator: all current is ionic, linear drop.
    if (x <= x_sep_end)
        return at_sep_in - (x - sp.L_n) / (An * sp.kappa_eff_sep);

    const cdouble at_pos_in = at_sep_in - sp.L_s / (An * sp.kappa_eff_sep);
    // Positive electrode: zbar runs from the positive collector; moving from
    // the separator inlet (zbar=1) toward x means integrating i_e over
    // [zbar, 1].
    const double zbar = (sp.L_tot - x) / sp.L_p;
    return at_pos_in - (sp.L_p / (An * sp.pos.kappa_eff)) *
                           detail::ie_integral_tail(zbar, vp, sp.pos.sigma_eff, sp.pos.kappa_eff);
}

// ---------------------------------------------------------------------------
// Electrolyte-concentration transfer function (modal expansion).
// ---------------------------------------------------------------------------
namespace detail {

// Definite integrals over [0,1] of cosh(nu z) / cosh(nu (z-1)) against
// cos(a z) / sin(a z); all four are entire in nu and a.
inline cdouble int_cosh_cos(cdouble v, double a, cdouble shv, cdouble chv) {
    return (v * shv * std::cos(a) + a * chv * std::sin(a)) / (v * v + a * a);
}
inline cdouble int_coshm_cos(cdouble v, double a, cdouble shv) {
    return (a * std::sin(a) + v * shv) / (v * v + a * a);
}
inline cdouble int_cosh_sin(cdouble v, double a, cdouble shv, cdouble chv) {
    return (v * shv * std::sin(a) - a * chv * std::cos(a) + a) / (v * v + a * a);
}
inline cdouble int_coshm_sin(cdouble v, double a, cdouble chv) {
    return (a * chv - a * std::cos(a)) / (v * v + a * a);
}

// Projection of the transference source (1 - t+) a_s j(z, s) of one
// electrode onto eigenmode m, including the discharge sign of the electrode.
inline cdouble ce_source_projection(const EigenMode& m, cdouble s, const Setpoint& sp,
                                    Electrode which) {
    const ElectrodeSetpoint& e = electrode(sp, which);
    const cdouble v = nu(s, e, sp.F);
    const double sig = e.sigma_eff, kap = e.kappa_eff;
    const cdouble shv = std::sinh(v), chv = std::cosh(v);
    const double pref = (1.0 - sp.t_plus) / (sp.F * sp.area * (kap + sig));

    if (which == Electrode::neg) {
        // Psi on [0, L_n] in local z: k1 cos(Lhat_n z).
        const double a = m.Lhat_n;
        cdouble integral = sig * int_cosh_cos(v, a, shv, chv) + kap * int_coshm_cos(v, a, shv);
        if (std::abs(v) < 1e-7)  // uniform-flux limit
            integral = (kap + sig) * (a == 0.0 ? 1.0 : std::sin(a) / a);
        else
            integral *= v / shv;
        return pref * m.k1 * integral;
    }
    // Psi on the positive electrode in local zbar = (L_tot - x)/L_p:
    //   Psi = Pc cos(Lhat_p zbar) + Ps sin(Lhat_p zbar),
    //   Pc = k5 cos(Lhat_t) + k6 sin(Lhat_t),
    //   Ps = k5 sin(Lhat_t) - k6 cos(Lhat_t),  Lhat_p = Lhat_t - Lhat_ns.
    const double a = m.Lhat_t - m.Lhat_ns;
    const double Pc = m.k5 * std::cos(m.Lhat_t) + m.k6 * std::sin(m.Lhat_t);
    const double Ps = m.k5 * std::sin(m.Lhat_t) - m.k6 * std::cos(m.Lhat_t);
    cdouble integral;
    if (std::abs(v) < 1e-7) {
        const cdouble ic = (a == 0.0) ? cdouble(1.0) : cdouble(std::sin(a) / a);
        const cdouble is = (a == 0.0) ? cdouble(0.0) : cdouble((1.0 - std::cos(a)) / a);
        integral = (kap + sig) * (Pc * ic + Ps * is);
    } else {
        integral = sig * (Pc * int_cosh_cos(v, a, shv, chv) + Ps * int_cosh_sin(v, a, shv, chv)) +
                   kap * (Pc * int_coshm_cos(v, a, shv) + Ps * int_coshm_sin(v, a, chv));
        integral *= v / shv;
    }
    // Lithium intercalates into the positive electrode on discharge.
    return -pref * integral;
}

}  // namespace detail

// Per-mode source weight (j_neg + j_pos)/(s + lambda_k); c~_e(x,s)/I is the
// eigenfunction-weighted sum of these.
inline cdouble ce_mode_weight(const EigenMode& m, cdouble s, const Setpoint& sp) {
    const cdouble src = detail::ce_source_projection(m, s, sp, Electrode::neg) +
                        detail::ce_source_projection(m, s, sp, Electrode::pos);
    return src / (s + m.lambda);
}

// Electrolyte-concentration deviation per unit current, c~_e(x,s)/I.
inline cdouble tf_ce(double x, cdouble s, const Setpoint& sp, const EigenSet& eig) {
    if (x < 0.0 || x > sp.L_tot * (1.0 + 1e-12))
        throw validation_error("tf_ce location outside the cell domain");
    cdouble acc(0.0, 0.0);
    for (size_t k = 0; k < eig.modes.size(); ++k)
        acc += eig.psi(k, x) * ce_mode_weight(eig.modes[k], s, sp);
    return acc;
}

// ---------------------------------------------------------------------------
// SIMO assembly.
// ---------------------------------------------------------------------------

struct OutputLabel {
    enum class Kind { ce, phie, cse, phis, flux };
    Kind kind = Kind::ce;
    Electrode side = Electrode::neg;  // meaningful for cse/phis/flux
    double loc = 0.0;                 // x [m] for ce/phie, z (dimensionless) otherwise

    std::string str() const {
        char buf[64];
        switch (kind) {
            case Kind::ce:   std::snprintf(buf, sizeof buf, "ce[x=%.9g]", loc); break;
            case Kind::phie: std::snprintf(buf, sizeof buf, "phie[x=%.9g]", loc); break;
            case Kind::cse:
                std::snprintf(buf, sizeof buf, "cse[%s][z=%.9g]",
                              side == Electrode::neg ? "neg" : "pos", loc);
                break;
            case Kind::phis:
                std::snprintf(buf, sizeof buf, "phis[%s][z=%.9g]",
                              side == Electrode::neg ? "neg" : "pos", loc);
                break;
            case Kind::flux:
                std::snprintf(buf, sizeof buf, "flux[%s][z=%.9g]",
                              side == Electrode::neg ? "neg" : "pos", loc);
                break;
        }
        return buf;
    }
    bool operator==(const OutputLabel& o) const {
        return kind == o.kind && side == o.side && loc == o.loc;
    }
};

// Inverse of OutputLabel::str(), e.g. "cse[pos][z=0.5]" or "ce[x=1.2e-05]".
inline OutputLabel parse_output_label(const std::string& text) {
    OutputLabel lab;
    const auto open = text.find('[');
    if (open == std::string::npos || text.back() != ']')
        throw validation_error("malformed output label: " + text);
    const std::string kind = text.substr(0, open);
    std::string rest = text.substr(open);
    if (kind == "ce") lab.kind = OutputLabel::Kind::ce;
    else if (kind == "phie") lab.kind = OutputLabel::Kind::phie;
    else if (kind == "cse") lab.kind = OutputLabel::Kind::cse;
    else if (kind == "phis") lab.kind = OutputLabel::Kind::phis;
    else if (kind == "flux") lab.kind = OutputLabel::Kind::flux;
    else throw validation_error("unknown output label kind: " + text);
    if (lab.kind == OutputLabel::Kind::cse || lab.kind == OutputLabel::Kind::phis ||
        lab.kind == OutputLabel::Kind::flux) {
        if (rest.rfind("[neg]", 0) == 0) lab.side = Electrode::neg;
        else if (rest.rfind("[pos]", 0) == 0) lab.side = Electrode::pos;
        else throw validation_error("output label lacks electrode side: " + text);
        rest = rest.substr(5);
    }
    const char* want = (lab.kind == OutputLabel::Kind::ce || lab.kind == OutputLabel::Kind::phie)
                           ? "[x="
                           : "[z=";
    if (rest.rfind(want, 0) != 0)
        throw validation_error("malformed output label location: " + text);
    try {
        lab.loc = std::stod(rest.substr(3, rest.size() - 4));
    } catch (const std::exception&) {
        throw validation_error("unparseable output label location: " + text);
    }
    return lab;
}

struct TfRequest {
    Setpoint setpoint;
    std::vector<double> neg_z, pos_z;   // electrode-local sample locations
    std::vector<double> electrolyte_x;  // absolute sample locations
    bool want_ce = true, want_phie = true, want_cse = true, want_phis = true, want_flux = true;
    int n_lambda = 12;

    // Output stack order: c_e, phi_e, c~_s,e, phi_s, j; electrolyte rows by
    // ascending x, electrode rows neg-then-pos by ascending z.
    std::vector<OutputLabel> labels() const {
        std::vector<OutputLabel> out;
        auto lab = [&](OutputLabel::Kind k, Electrode e, double v) {
            out.push_back(OutputLabel{k, e, v});
        };
        if (want_ce)
            for (double x : electrolyte_x) lab(OutputLabel::Kind::ce, Electrode::neg, x);
        if (want_phie)
            for (double x : electrolyte_x) lab(OutputLabel::Kind::phie, Electrode::neg, x);
        if (want_cse) {
            for (double z : neg_z) lab(OutputLabel::Kind::cse, Electrode::neg, z);
            for (double z : pos_z) lab(OutputLabel::Kind::cse, Electrode::pos, z);
        }
        if (want_phis) {
            for (double z : neg_z) lab(OutputLabel::Kind::phis, Electrode::neg, z);
            for (double z : pos_z) lab(OutputLabel::Kind::phis, Electrode::pos, z);
        }
        if (want_flux) {
            for (double z : neg_z) lab(OutputLabel::Kind::flux, Electrode::neg, z);
            for (double z : pos_z) lab(OutputLabel::Kind::flux, Electrode::pos, z);
        }
        return out;
    }
};

// Default spatial sampling: s_s equispaced z per electrode (collector to
// separator), s_e equispaced x across the cell (collector to collector).
inline TfRequest make_tf_request(const CellParams& p, const Setpoint& sp, int s_s, int s_e,
                                 int n_lambda = 12) {
    if (s_s < 1 || s_e < 1) throw validation_error("spatial sample counts must be >= 1");
    TfRequest req;
    req.setpoint = sp;
    req.n_lambda = n_lambda;
    for (int i = 0; i < s_s; ++i)
        req.neg_z.push_back(s_s == 1 ? 0.0 : static_cast<double>(i) / (s_s - 1));
    req.pos_z = req.neg_z;
    for (int i = 0; i < s_e; ++i)
        req.electrolyte_x.push_back(s_e == 1 ? 0.0 : p.L_tot() * i / (s_e - 1));
    return req;
}

struct FrequencyResponse {
    Eigen::VectorXcd s;        // sampled frequencies (may contain the map's
                               // infinite Nyquist pivot; see bilinear_grid)
    Eigen::MatrixXcd G;        // rows = outputs, cols = frequencies
    Eigen::VectorXd res0;      // integrator residues, units of output per A s
    std::vector<OutputLabel> labels;
};

// ---------------------------------------------------------------------------
// Integrator residue extraction.
//
// For rows with a 1/s pole, res0 = lim_{s->0+} s G(s); the corrected row
// G*(s) = G(s) - res0/s is finite at DC with value g0 = lim_{s->0+} G*(s).
// Both limits are computed by Neville extrapolation to s = 0 on a real,
// geometrically decreasing sample sequence.
// ---------------------------------------------------------------------------

struct ResidueResult {
    double res0 = 0.0;  // residue of the 1/s pole (0 when none)
    double g0 = 0.0;    // DC value of the corrected row
};

namespace detail {

// Neville polynomial extrapolation of (x_i, y_i) to x = 0.  Returns the best
// diagonal entry together with its error estimate.
inline std::pair<double, double> neville_to_zero(const std::vector<double>& x,
                                                 const std::vector<double>& y) {
    const size_t n = x.size();
    std::vector<double> t(y);
    double best = t[0], err = std::abs(t[0]);
    for (size_t k = 1; k < n; ++k) {
        for (size_t i = n - 1; i >= k; --i)
            t[i] = (x[i - k] * t[i] - x[i] * t[i - 1]) / (x[i - k] - x[i]);
        const double e = std::abs(t[n - 1] - best);
        best = t[n - 1];
        if (k == 1 || e < err) err = e;
    }
    return {best, err};
}

}  // namespace detail

// `row` evaluates the transfer function at complex s; samples are taken at
// s_ref * 2^-j on the positive real axis (s_ref well below the slowest pole).
inline ResidueResult extract_integrator_residue(const std::function<cdouble(cdouble)>& row,
                                                double s_ref = 1e-4, int n_samples = 10,
                                                const std::string& name = "row") {
    std::vector<double> sv(n_samples), h(n_samples);
    double hmax = 0.0;
    for (int j = 0; j < n_samples; ++j) {
        sv[j] = s_ref * std::pow(0.5, j);
        const cdouble g = row(cdouble(sv[j], 0.0));
        h[j] = sv[j] * g.real();
        hmax = std::max(hmax, std::abs(h[j]));
    }
    auto [res0, err_r] = detail::neville_to_zero(sv, h);
    const double scale = std::max(hmax, 1e-300);
    if (err_r > 1e-6 * std::max(scale, std::abs(res0)))
        throw numeric_error("integrator residue extrapolation did not converge for " + name);
    if (std::abs(res0) <= 1e-9 * scale) res0 = 0.0;  // snap pole-free rows

    std::vector<double> g(n_samples);
    for (int j = 0; j < n_samples; ++j) g[j] = (h[j] - res0) / sv[j];
    auto [g0, err_g] = detail::neville_to_zero(sv, g);
    const double gscale = std::max({std::abs(g0), std::abs(g[0]), 1e-300});
    if (err_g > 1e-5 * gscale)
        throw numeric_error("DC value extrapolation did not converge for " + name);
    return {res0, g0};
}

// ---------------------------------------------------------------------------
// assemble_simo: evaluate every requested row over the frequency grid,
// extract integrator residues, and return residue-corrected samples.
// ---------------------------------------------------------------------------
namespace detail {

// Evaluate all rows of the stack at one frequency.  Shared per-frequency
// work (nu, kernels, modal weights) is done once.
struct RowEvaluator {
    const TfRequest& req;
    const EigenSet* eig;      // nullptr unless c_e rows are requested
    std::vector<OutputLabel> labels;
    Eigen::MatrixXd psi_at_x;  // (modes x electrolyte locations)

    explicit RowEvaluator(const TfRequest& r, const EigenSet* e) : req(r), eig(e) {
        labels = req.labels();
        if (eig) {
            psi_at_x.resize(eig->modes.size(), req.electrolyte_x.size());
            for (size_t k = 0; k < eig->modes.size(); ++k)
                for (size_t i = 0; i < req.electrolyte_x.size(); ++i)
                    psi_at_x(k, i) = eig->psi(k, req.electrolyte_x[i]);
        }
    }

    void eval(cdouble s, Eigen::Ref<Eigen::VectorXcd> out) const {
        const Setpoint& sp = req.setpoint;
        size_t r = 0;
        if (req.want_ce) {
            Eigen::VectorXcd w(eig->modes.size());
            for (size_t k = 0; k < eig->modes.size(); ++k)
                w(k) = ce_mode_weight(eig->modes[k], s, sp);
            for (size_t i = 0; i < req.electrolyte_x.size(); ++i, ++r) {
                cdouble acc(0, 0);
                for (size_t k = 0; k < eig->modes.size(); ++k) acc += psi_at_x(k, i) * w(k);
                out(r) = acc;
            }
        }
        if (req.want_phie)
            for (double x : req.electrolyte_x) out(r++) = tf_phie(x, s, sp);
        if (req.want_cse) {
            for (double z : req.neg_z) out(r++) = tf_cse(z, s, sp, Electrode::neg);
            for (double z : req.pos_z) out(r++) = -tf_cse(z, s, sp, Electrode::pos);
        }
        if (req.want_phis) {
            for (double z : req.neg_z) out(r++) = tf_phis(z, s, sp, Electrode::neg);
            for (double z : req.pos_z) out(r++) = -tf_phis(z, s, sp, Electrode::pos);
        }
        if (req.want_flux) {
            for (double z : req.neg_z) out(r++) = tf_flux(z, s, sp, Electrode::neg);
            for (double z : req.pos_z) out(r++) = -tf_flux(z, s, sp, Electrode::pos);
        }
    }

    cdouble eval_one(cdouble s, size_t row) const {
        Eigen::VectorXcd v(labels.size());
        eval(s, v);
        return v(row);
    }
};

}  // namespace detail

inline FrequencyResponse assemble_simo(const CellParams& params, const TfRequest& req,
                                       const Eigen::VectorXcd& s_grid, int threads = 1) {
    const size_t p = req.labels().size();
    if (p == 0) throw validation_error("transfer-function request selects no outputs");

    EigenSet eig;
    if (req.want_ce) eig = electrolyte_eigenvalues(params, req.n_lambda);
    detail::RowEvaluator rows(req, req.want_ce ? &eig : nullptr);

    FrequencyResponse fr;
    fr.s = s_grid;
    fr.labels = rows.labels;
    const long N = s_grid.size();
    fr.G.resize(p, N);
    fr.res0.resize(p);

    // Residues and corrected DC values.  The whole stack is sampled once
    // along the extraction sequence (modal weights are shared across rows);
    // the generic extractor then replays each row from the cache, relying on
    // its deterministic sampling order s_ref * 2^-j.
    std::vector<double> g0(p);
    {
        const double s_ref = 1e-4;
        const int ns = 10;
        Eigen::VectorXcd tmp(p);
        Eigen::MatrixXcd samples(p, ns);
        for (int j = 0; j < ns; ++j) {
            rows.eval(cdouble(s_ref * std::pow(0.5, j), 0.0), tmp);
            samples.col(j) = tmp;
        }
        for (size_t r = 0; r < p; ++r) {
            int col = -1;
            auto cached_row = [&](cdouble) -> cdouble { return samples(r, ++col); };
            ResidueResult res = extract_integrator_residue(cached_row, s_ref, ns, fr.labels[r].str());
            fr.res0(r) = res.res0;
            g0[r] = res.g0;
        }
    }

    // Detect a conjugate-symmetric grid so only half the points need work.
    bool symmetric = N > 2;
    for (long f = 1; symmetric && f < N; ++f) {
        const cdouble a = s_grid(N - f), b = std::conj(s_grid(f));
        if (std::isfinite(a.real()) && std::isfinite(b.real()) && a != b) symmetric = false;
    }
    const long last = symmetric ? N / 2 : N - 1;

    long infinite_at = -1;
    parallel_for(0, last + 1, threads, [&](long f) {
        const cdouble s = s_grid(f);
        if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) return;  // Nyquist pivot
        Eigen::VectorXcd col(p);
        if (s == cdouble(0.0, 0.0)) {
            for (size_t r = 0; r < p; ++r) col(r) = g0[r];
        } else {
            rows.eval(s, col);
            for (size_t r = 0; r < p; ++r)
                if (fr.res0(r) != 0.0) col(r) -= fr.res0(r) / s;
        }
        fr.G.col(f) = col;
    });
    for (long f = 0; f < N; ++f)
        if (!std::isfinite(s_grid(f).real()) || !std::isfinite(s_grid(f).imag())) infinite_at = f;
    if (symmetric)
        for (long f = last + 1; f < N; ++f) fr.G.col(f) = fr.G.col(N - f).conjugate();

    // The bilinear map sends the Nyquist index to s = inf; use the response
    // at the largest finite |s| on the grid as the high-frequency limit.
    if (infinite_at >= 0) {
        long best = -1;
        double mag = -1.0;
        for (long f = 0; f < N; ++f) {
            const cdouble s = s_grid(f);
            if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) continue;
            if (std::abs(s) > mag) { mag = std::abs(s); best = f; }
        }
        if (best < 0) throw validation_error("frequency grid has no finite samples");
        fr.G.col(infinite_at) = fr.G.col(best).real().cast<cdouble>();
    }
    return fr;
}

}  // namespace cidra
