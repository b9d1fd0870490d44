// Electrolyte diffusion eigenproblem across the three porous regions.
//
// Separation of variables on  eps_r dc/dt = d/dx(Deff_r dc/dx)  with zero
// flux at both current collectors and continuity of value and flux at the
// two internal interfaces gives piecewise-trigonometric eigenfunctions
//
//   Psi(x) = k1 cos(w_n x)                        x in [0, L_n]
//          = k3 cos(w_s x) + k4 sin(w_s x)        x in [L_n, L_n+L_s]
//          = k5 cos(w_p x) + k6 sin(w_p x)        x in [L_n+L_s, L_tot]
//
// with w_r = sqrt(lambda eps_r / Deff_r).  The collector condition at x = 0
// is absorbed by the cosine; the remaining five conditions form a 5x5
// homogeneous system whose determinant vanishes exactly at the eigenvalues.
// Roots are located by a sign-change scan on a geometric lambda grid and
// refined by bisection; eigenfunctions are normalised to unit eps-weighted
// L2 norm with k1 > 0.
#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "cidra/errors.hpp"
#include "cidra/params.hpp"

namespace cidra {

struct ElectrolyteGeom {
    std::array<double, 4> b;     // region boundaries 0, L_n, L_n+L_s, L_tot
    std::array<double, 3> eps;   // porosity per region
    std::array<double, 3> Deff;  // effective electrolyte diffusivity per region
};

inline ElectrolyteGeom electrolyte_geom(const CellParams& p) {
    ElectrolyteGeom g;
    g.b = p.boundaries();
    g.eps = {p.neg.porosity, p.sep.porosity, p.pos.porosity};
    g.Deff = {effective_electrolyte_diffusivity(p.neg, p.electrolyte_diffusivity),
              effective_electrolyte_diffusivity(p.sep, p.electrolyte_diffusivity),
              effective_electrolyte_diffusivity(p.pos, p.electrolyte_diffusivity)};
    return g;
}

struct EigenMode {
    double lambda = 0;                       // decay rate [1/s]
    double k1 = 0, k3 = 0, k4 = 0, k5 = 0, k6 = 0;
    double w_n = 0, w_s = 0, w_p = 0;        // region wavenumbers [1/m]
    double Lhat_n = 0, Lhat_ns = 0, Lhat_t = 0;  // w_n L_n, w_p (L_n+L_s), w_p L_tot
};

struct EigenSet {
    ElectrolyteGeom geom;
    std::vector<EigenMode> modes;  // ascending lambda, lambda_1 > 0

    // Eigenfunction value at x (clamped to the cell domain).
    double psi(size_t k, double x) const {
        const EigenMode& m = modes.at(k);
        x = std::clamp(x, geom.b[0], geom.b[3]);
        if (x <= geom.b[1]) return m.k1 * std::cos(m.w_n * x);
        if (x <= geom.b[2]) return m.k3 * std::cos(m.w_s * x) + m.k4 * std::sin(m.w_s * x);
        return m.k5 * std::cos(m.w_p * x) + m.k6 * std::sin(m.w_p * x);
    }
};

namespace detail {

inline std::array<double, 3> region_wavenumbers(const ElectrolyteGeom& g, double lambda) {
    return {std::sqrt(lambda * g.eps[0] / g.Deff[0]),
            std::sqrt(lambda * g.eps[1] / g.Deff[1]),
            std::sqrt(lambda * g.eps[2] / g.Deff[2])};
}

// Full 5x5 interface/boundary system acting on (k1, k3, k4, k5, k6).
inline Eigen::Matrix<double, 5, 5> interface_matrix(const ElectrolyteGeom& g, double lambda) {
    const auto w = region_wavenumbers(g, lambda);
    const double L1 = g.b[1], L2 = g.b[2], L3 = g.b[3];
    Eigen::Matrix<double, 5, 5> M = Eigen::Matrix<double, 5, 5>::Zero();
    // value continuity at L1
    M(0, 0) = std::cos(w[0] * L1);
    M(0, 1) = -std::cos(w[1] * L1);
    M(0, 2) = -std::sin(w[1] * L1);
    // flux continuity at L1
    M(1, 0) = -g.Deff[0] * w[0] * std::sin(w[0] * L1);
    M(1, 1) = g.Deff[1] * w[1] * std::sin(w[1] * L1);
    M(1, 2) = -g.Deff[1] * w[1] * std::cos(w[1] * L1);
    // value continuity at L2
    M(2, 1) = std::cos(w[1] * L2);
    M(2, 2) = std::sin(w[1] * L2);
    M(2, 3) = -std::cos(w[2] * L2);
    M(2, 4) = -std::sin(w[2] * L2);
    // flux continuity at L2
    M(3, 1) = -g.Deff[1] * w[1] * std::sin(w[1] * L2);
    M(3, 2) = g.Deff[1] * w[1] * std::cos(w[1] * L2);
    M(3, 3) = g.Deff[2] * w[2] * std::sin(w[2] * L2);
    M(3, 4) = -g.Deff[2] * w[2] * std::cos(w[2] * L2);
    // zero flux at L3
    M(4, 3) = -w[2] * std::sin(w[2] * L3);
    M(4, 4) = w[2] * std::cos(w[2] * L3);
    return M;
}

}  // namespace detail

// Determinant of the interface system with rows scaled to unit max-norm.
// Vanishes at the eigenvalues; the scaling keeps magnitudes comparable
// across the lambda decades so a fixed residual threshold is meaningful.
inline double eigen_determinant(const ElectrolyteGeom& g, double lambda) {
    Eigen::Matrix<double, 5, 5> M = detail::interface_matrix(g, lambda);
    for (int r = 0; r < 5; ++r) {
        const double s = M.row(r).cwiseAbs().maxCoeff();
        if (s > 0) M.row(r) /= s;
    }
    return M.determinant();
}

// Residual of the normalised interface system applied to a mode's
// coefficient vector (rows scaled to unit max-norm).
inline double eigen_interface_residual(const ElectrolyteGeom& g, const EigenMode& m) {
    Eigen::Matrix<double, 5, 5> M = detail::interface_matrix(g, m.lambda);
    for (int r = 0; r < 5; ++r) {
        const double s = M.row(r).cwiseAbs().maxCoeff();
        if (s > 0) M.row(r) /= s;
    }
    Eigen::Matrix<double, 5, 1> k;
    k << m.k1, m.k3, m.k4, m.k5, m.k6;
    return (M * k).cwiseAbs().maxCoeff() / k.cwiseAbs().maxCoeff();
}

namespace detail {

// Integral of eps (A cos(w x) + B sin(w x))^2 over [a, b].
inline double weighted_sq_integral(double eps, double A, double B, double w,
                                   double a, double b) {
    if (w == 0.0) return eps * A * A * (b - a);
    const double c2b = std::cos(2 * w * b), c2a = std::cos(2 * w * a);
    const double s2b = std::sin(2 * w * b), s2a = std::sin(2 * w * a);
    double v = 0.5 * (A * A + B * B) * (b - a);
    v += (A * A - B * B) / (4 * w) * (s2b - s2a);
    v -= A * B / (2 * w) * (c2b - c2a);
    return eps * v;
}

// Solve for (k3..k6) with k1 = 1 from the four interface rows, then apply
// the unit eps-weighted L2 normalisation.
inline EigenMode solve_mode(const ElectrolyteGeom& g, double lambda) {
    const auto w = region_wavenumbers(g, lambda);
    Eigen::Matrix<double, 5, 5> M = interface_matrix(g, lambda);
    Eigen::Matrix4d A = M.block<4, 4>(0, 1);
    Eigen::Vector4d rhs = -M.block<4, 1>(0, 0);
    // Rows 1 and 3 carry a Deff*w scale; balance them for the solve.
    for (int r = 0; r < 4; ++r) {
        const double s = A.row(r).cwiseAbs().maxCoeff();
        if (s > 0) { A.row(r) /= s; rhs(r) /= s; }
    }
    Eigen::FullPivLU<Eigen::Matrix4d> lu(A);
    if (!lu.isInvertible())
        throw numeric_error("electrolyte eigenmode coefficient system is singular at lambda=" +
                            std::to_string(lambda));
    Eigen::Vector4d k = lu.solve(rhs);

    EigenMode m;
    m.lambda = lambda;
    m.w_n = w[0]; m.w_s = w[1]; m.w_p = w[2];
    m.k1 = 1.0; m.k3 = k(0); m.k4 = k(1); m.k5 = k(2); m.k6 = k(3);
    const double norm2 =
        weighted_sq_integral(g.eps[0], m.k1, 0.0, m.w_n, g.b[0], g.b[1]) +
        weighted_sq_integral(g.eps[1], m.k3, m.k4, m.w_s, g.b[1], g.b[2]) +
        weighted_sq_integral(g.eps[2], m.k5, m.k6, m.w_p, g.b[2], g.b[3]);
    const double scale = 1.0 / std::sqrt(norm2);  // k1 > 0 fixes the sign
    m.k1 *= scale; m.k3 *= scale; m.k4 *= scale; m.k5 *= scale; m.k6 *= scale;
    m.Lhat_n = m.w_n * g.b[1];
    m.Lhat_ns = m.w_p * g.b[2];
    m.Lhat_t = m.w_p * g.b[3];
    return m;
}

}  // namespace detail

// First n electrolyte eigenmodes (lambda ascending, zero mode excluded).
//
// Scan: geometric grid with 1024 points per decade starting at
// 1e-2 * min(Deff) / (max(eps) * L_tot^2) and reaching well past a uniform-cell
// style bound on the n-th eigenvalue; each sign change of the interface
// determinant is refined by bisection to 1e-12 relative width.
inline EigenSet electrolyte_eigenvalues(const CellParams& p, int n) {
    if (n < 1) throw validation_error("eigenmode count must be >= 1");
    EigenSet set;
    set.geom = electrolyte_geom(p);
    const ElectrolyteGeom& g = set.geom;

    const double Dmin = std::min({g.Deff[0], g.Deff[1], g.Deff[2]});
    const double eps_max = std::max({g.eps[0], g.eps[1], g.eps[2]});
    const double Lt = g.b[3];
    const double lam_lo = 1e-2 * Dmin / (eps_max * Lt * Lt);
    // The n-th eigenvalue sits near (n pi / L)^2 scaled by the largest regional
    // D/eps; a 40x safety factor keeps strongly heterogeneous stacks covered.
    const double rate_max = std::max({g.Deff[0] / g.eps[0], g.Deff[1] / g.eps[1],
                                      g.Deff[2] / g.eps[2]});
    const double lam_hi = 40.0 * std::pow((n + 1) * M_PI / Lt, 2.0) * rate_max;
    const int per_decade = 1024;
    const int decades = std::max(1, static_cast<int>(std::ceil(std::log10(lam_hi / lam_lo))));
    const double ratio = std::pow(10.0, 1.0 / per_decade);

    double lam_a = lam_lo;
    double f_a = eigen_determinant(g, lam_a);
    for (int i = 1; i <= per_decade * decades && static_cast<int>(set.modes.size()) < n; ++i) {
        const double lam_b = lam_lo * std::pow(ratio, i);
        const double f_b = eigen_determinant(g, lam_b);
        if (f_a == 0.0) {
            set.modes.push_back(detail::solve_mode(g, lam_a));
        } else if (f_a * f_b < 0.0) {
            double lo = lam_a, hi = lam_b, flo = f_a;
            for (int it = 0; it < 200 && (hi - lo) > 1e-12 * lo; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double fm = eigen_determinant(g, mid);
                if (fm == 0.0) { lo = hi = mid; break; }
                if (flo * fm < 0.0) hi = mid;
                else { lo = mid; flo = fm; }
            }
            set.modes.push_back(detail::solve_mode(g, 0.5 * (lo + hi)));
        }
        lam_a = lam_b;
        f_a = f_b;
    }

    if (static_cast<int>(set.modes.size()) < n) {
        const double lam_hi = lam_lo * std::pow(10.0, decades);
        throw numeric_error(
            "electrolyte eigenvalue scan found " + std::to_string(set.modes.size()) +
            " of " + std::to_string(n) + " modes in [" + std::to_string(lam_lo) + ", " +
            std::to_string(lam_hi) + "] 1/s; widen the scan or check transport parameters");
    }
    return set;
}

}  // namespace cidra
