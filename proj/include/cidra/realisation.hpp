// Discrete realisation of the sampled transfer functions.
//
// Pipeline per setpoint:
//   1. sample each residue-corrected transfer function on the bilinear
//      frequency grid s_f = (2/T) (e^{j 2 pi f / N} - 1)/(e^{j 2 pi f / N} + 1),
//   2. inverse FFT -> Markov parameters G_t (G_0 is the feedthrough),
//   3. block-Hankel + truncated SVD + Ho-Kalman -> (A, B, C, D),
//   4. reflect unstable poles into the unit disk,
// with the removed 1/s integrators carried alongside as res0 gains.
#pragma once

#include <fftw3.h>

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>
#include <vector>

#include "cidra/errors.hpp"
#include "cidra/svd.hpp"
#include "cidra/threading.hpp"
#include "cidra/transfer.hpp"

namespace cidra {

// ---------------------------------------------------------------------------
// Frequency grid.
// ---------------------------------------------------------------------------

// N-point bilinear grid for sampling period T.  Index 0 is exactly s = 0
// (handled through residue extraction); for even N the map has a pole at
// f = N/2, stored as an infinite pivot that assemble_simo replaces with the
// high-frequency limit.  The grid is exactly conjugate-symmetric:
// s[N-f] = conj(s[f]).
inline Eigen::VectorXcd bilinear_grid(double T, long N) {
    if (!(T > 0)) throw validation_error("bilinear_grid sampling period must be positive");
    if (N < 2) throw validation_error("bilinear_grid needs at least 2 points");
    Eigen::VectorXcd s(N);
    s(0) = cdouble(0.0, 0.0);
    for (long f = 1; f <= N / 2; ++f) {
        // (2/T)(z-1)/(z+1) on the unit circle reduces to j (2/T) tan(pi f/N).
        if (2 * f == N) {
            s(f) = cdouble(std::numeric_limits<double>::infinity(), 0.0);
        } else {
            s(f) = cdouble(0.0, (2.0 / T) * std::tan(M_PI * static_cast<double>(f) / N));
        }
        if (N - f > N / 2) s(N - f) = std::conj(s(f));
    }
    return s;
}

// ---------------------------------------------------------------------------
// Impulse response via inverse FFT.
// ---------------------------------------------------------------------------
namespace detail {
// FFTW's planner is not thread-safe; executions are.
inline std::mutex fftw_planner_mutex;
}  // namespace detail

// Markov parameters from frequency samples.  fr.G must hold N
// conjugate-symmetric columns; the result is the real p x N sequence with
// G_0 = feedthrough.  The inverse transform's imaginary residue must stay
// below 1e-9 of the peak magnitude.
inline Eigen::MatrixXd impulse_response(const FrequencyResponse& fr, long N) {
    const long p = fr.G.rows();
    if (fr.G.cols() != N || fr.s.size() != N)
        throw validation_error("impulse_response: sample count disagrees with N");
    double gmax = 0.0;
    for (long f = 0; f < N; ++f)
        for (long r = 0; r < p; ++r) gmax = std::max(gmax, std::abs(fr.G(r, f)));
    if (!(gmax > 0)) throw validation_error("impulse_response: empty response");
    for (long f = 1; f < N; ++f) {
        const double dev = (fr.G.col(N - f) - fr.G.col(f).conjugate()).cwiseAbs().maxCoeff();
        if (dev > 1e-8 * gmax)
            throw validation_error("impulse_response: frequency samples violate Hermitian symmetry");
    }

    fftw_complex* buf;
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex);
        buf = fftw_alloc_complex(static_cast<size_t>(N));
        plan = fftw_plan_dft_1d(static_cast<int>(N), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    if (!plan) {
        fftw_free(buf);
        throw numeric_error("impulse_response: FFTW plan creation failed");
    }

    Eigen::MatrixXd g(p, N);
    double imag_peak = 0.0, real_peak = 0.0;
    for (long r = 0; r < p; ++r) {
        for (long f = 0; f < N; ++f) {
            buf[f][0] = fr.G(r, f).real();
            buf[f][1] = fr.G(r, f).imag();
        }
        fftw_execute(plan);
        for (long t = 0; t < N; ++t) {
            g(r, t) = buf[t][0] / N;
            imag_peak = std::max(imag_peak, std::abs(buf[t][1] / N));
            real_peak = std::max(real_peak, std::abs(g(r, t)));
        }
    }
    {
        std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex);
        fftw_destroy_plan(plan);
        fftw_free(buf);
    }
    if (imag_peak > 1e-9 * std::max(real_peak, 1e-300))
        throw numeric_error("impulse_response: imaginary residue above tolerance");
    return g;
}

// ---------------------------------------------------------------------------
// Block Hankel.
// ---------------------------------------------------------------------------

// Single block-Hankel matrix with block element (i, j) = G_{i+j+shift};
// markov holds the p x N sequence.  shift=1 gives the plain Hankel,
// shift=2 the time-advanced one used for the A recovery.
inline Eigen::MatrixXd build_hankel_matrix(const Eigen::MatrixXd& markov, long rows, long cols,
                                           long shift) {
    const long p = markov.rows();
    if (rows < 1 || cols < 1) throw validation_error("hankel dimensions must be positive");
    if (markov.cols() < rows + cols - 1 + shift)
        throw validation_error("markov sequence too short for the requested Hankel dimensions");
    Eigen::MatrixXd H(rows * p, cols);
    for (long j = 0; j < cols; ++j)
        for (long i = 0; i < rows; ++i)
            H.block(i * p, j, p, 1) = markov.col(i + j + shift);
    return H;
}

// Convenience pair (H, H_shift); prefer build_hankel_matrix twice when the
// matrices are large and only one is needed at a time.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> build_hankel(const Eigen::MatrixXd& markov,
                                                                long rows, long cols) {
    return {build_hankel_matrix(markov, rows, cols, 1),
            build_hankel_matrix(markov, rows, cols, 2)};
}

// ---------------------------------------------------------------------------
// Ho-Kalman.
// ---------------------------------------------------------------------------

struct RealisedSystem {
    Eigen::MatrixXd A, B, C;
    Eigen::VectorXd D;
};

// Balanced-coordinates realisation from the truncated factors of H and the
// shifted Hankel: observability O = U S^1/2, controllability Ctr = S^1/2 V^T,
// A = S^-1/2 U^T H_shift V S^-1/2, B = first column block of Ctr, C = first
// row block of O, D = G_0.
inline RealisedSystem ho_kalman(const TruncatedSvd& svd, const Eigen::MatrixXd& H_shift,
                                const Eigen::VectorXd& G0, long p) {
    const long M = svd.S.size();
    if (p < 1 || svd.U.rows() % p != 0)
        throw validation_error("ho_kalman: output count does not divide the Hankel row count");
    const double smax = svd.S(0);
    if (!(smax > 0) || svd.S(M - 1) < 1e-14 * smax)
        throw numeric_error("ho_kalman: order deficiency, sigma_M below tolerance of sigma_1");

    const Eigen::VectorXd shalf = svd.S.cwiseSqrt();
    const Eigen::VectorXd sinvh = shalf.cwiseInverse();
    RealisedSystem sys;
    // A = S^-1/2 (U^T H_shift V) S^-1/2 without materialising intermediates
    // larger than M x cols.
    Eigen::MatrixXd T1 = svd.U.transpose() * H_shift;  // M x cols
    Eigen::MatrixXd T2 = T1 * svd.V;                   // M x M
    sys.A = sinvh.asDiagonal() * T2 * sinvh.asDiagonal();
    sys.B = shalf.asDiagonal() * svd.V.row(0).transpose();  // first column block (single input)
    sys.C = svd.U.topRows(p) * shalf.asDiagonal();
    sys.D = G0;
    return sys;
}

// ---------------------------------------------------------------------------
// Pole stabilisation.
// ---------------------------------------------------------------------------

struct StabiliseResult {
    Eigen::MatrixXd A;
    bool changed = false;
    bool schur_fallback = false;
};

namespace detail {

// Margin kept inside the unit circle.  Reflection preserves the pole phase:
// |z| > 1 maps to 1/conj(z) = z/|z|^2.
constexpr double stab_margin = 1e-9;

inline Eigen::MatrixXd schur_stabilise(const Eigen::MatrixXd& A) {
    Eigen::RealSchur<Eigen::MatrixXd> schur(A);
    Eigen::MatrixXd T = schur.matrixT();
    const Eigen::MatrixXd& Q = schur.matrixU();
    const long n = T.rows();
    const double limit = 1.0 - stab_margin;
    // Uniformly scaling a diagonal block scales only its own eigenvalues, so
    // the same reflect-then-clamp rule applies blockwise.
    auto scale_factor = [&](double mod) {
        double f = 1.0;
        if (mod > 1.0) {
            f = 1.0 / (mod * mod);  // reflection |z| -> 1/|z|, phase kept
            mod *= f;
        }
        if (mod > limit) f *= limit / mod;
        return f;
    };
    for (long i = 0; i < n;) {
        const bool pair = (i + 1 < n) && (T(i + 1, i) != 0.0);
        if (pair) {
            const double det = T(i, i) * T(i + 1, i + 1) - T(i, i + 1) * T(i + 1, i);
            T.block(i, i, 2, 2) *= scale_factor(std::sqrt(std::abs(det)));
            i += 2;
        } else {
            T(i, i) *= scale_factor(std::abs(T(i, i)));
            i += 1;
        }
    }
    return Q * T * Q.transpose();
}

}  // namespace detail

// Reflect eigenvalues with |z| > 1 to 1/conj(z) (phase preserved) and clamp
// every modulus to 1 - 1e-9.  Stable inputs are returned unchanged.  When
// the eigenvector basis is too ill-conditioned to rebuild A reliably, a real
// Schur form is used instead, scaling offending diagonal blocks.
inline StabiliseResult stabilise(const Eigen::MatrixXd& A) {
    if (A.rows() != A.cols() || A.rows() == 0)
        throw validation_error("stabilise expects a square matrix");
    Eigen::EigenSolver<Eigen::MatrixXd> es(A);
    if (es.info() != Eigen::Success) throw numeric_error("stabilise: eigendecomposition failed");

    Eigen::VectorXcd lam = es.eigenvalues();
    const double limit = 1.0 - detail::stab_margin;
    bool changed = false;
    for (long i = 0; i < lam.size(); ++i) {
        double mod = std::abs(lam(i));
        if (mod > 1.0) {
            lam(i) = lam(i) / (mod * mod);  // == 1/conj(lambda)
            mod = std::abs(lam(i));
            changed = true;
        }
        if (mod > limit) {
            lam(i) *= limit / mod;
            changed = true;
        }
    }
    StabiliseResult out;
    if (!changed) {
        out.A = A;
        return out;
    }
    out.changed = true;

    const Eigen::MatrixXcd& V = es.eigenvectors();
    Eigen::JacobiSVD<Eigen::MatrixXcd> cond(V);
    const double smin = cond.singularValues()(V.cols() - 1);
    const double smax = cond.singularValues()(0);
    if (smin > 1e-12 * smax) {
        Eigen::MatrixXcd rebuilt = V * lam.asDiagonal() * V.inverse();
        const double imag_resid = rebuilt.imag().cwiseAbs().maxCoeff();
        const double scale = std::max(rebuilt.real().cwiseAbs().maxCoeff(), 1e-300);
        if (imag_resid <= 1e-10 * scale) {
            out.A = rebuilt.real();
            return out;
        }
    }
    out.schur_fallback = true;
    out.A = detail::schur_stabilise(A);
    return out;
}

// ---------------------------------------------------------------------------
// Realised model containers.
// ---------------------------------------------------------------------------

struct StateSpaceModel {
    Eigen::MatrixXd A;    // M x M
    Eigen::MatrixXd B;    // M x 1
    Eigen::MatrixXd C;    // p x M
    Eigen::VectorXd D;    // p
    Eigen::VectorXd res0; // p, integrator gains (output per A s)
    double T_s = 0;
    double soc = 0, temp = 0;
    std::vector<OutputLabel> labels;
    double recon_error = 0;   // relative L2 Markov reconstruction error
    double wall_time_s = 0;   // realisation wall time (not serialised)

    long order() const { return A.rows(); }
    long outputs() const { return C.rows(); }
};

struct ModelGrid {
    std::vector<StateSpaceModel> models;  // soc-major, then temp, both ascending
    std::vector<double> socs, temps;

    const StateSpaceModel& at(size_t i_soc, size_t i_temp) const {
        return models.at(i_soc * temps.size() + i_temp);
    }
};

// ---------------------------------------------------------------------------
// Configuration.
// ---------------------------------------------------------------------------

struct RealisationConfig {
    long hankel_rows = 2500;   // H_n
    long hankel_cols = 2500;   // H_m
    double tlen_hours = 4.5;   // transfer-function sample length
    double fs_hz = 4.0;        // frequency-sampling rate F_s
    double ts_s = 0.25;        // realised system period T_s
    int order = 8;             // M
    int s_s = 4;               // electrode locations per electrode
    int s_e = 6;               // electrolyte locations
    int n_lambda = 12;         // electrolyte eigenmodes
    SvdStrategy svd = SvdStrategy::iterative;
    bool want_ce = true, want_phie = true, want_cse = true, want_phis = true, want_flux = true;

    // Markov sample count: T_len * 3600 * F_s rounded up to even.
    long sample_count() const {
        long N = static_cast<long>(std::ceil(tlen_hours * 3600.0 * fs_hz));
        if (N % 2 != 0) ++N;
        return N;
    }
    // Integer subsampling factor q = F_s T_s.
    long subsample() const {
        const double q = fs_hz * ts_s;
        const double qr = std::round(q);
        if (!(qr >= 1.0) || std::abs(q - qr) > 1e-9)
            throw validation_error(
                "unsupported configuration: F_s * T_s must be a positive integer "
                "(conventional non-integer resampling is out of scope)");
        return static_cast<long>(qr);
    }
    void validate() const {
        if (order < 1) throw validation_error("model order must be >= 1");
        if (hankel_rows < order || hankel_cols < order)
            throw validation_error("hankel dimensions must be >= model order");
        if (!(tlen_hours > 0) || !(fs_hz > 0) || !(ts_s > 0))
            throw validation_error("sample length and rates must be positive");
        if (s_s < 1 || s_e < 1) throw validation_error("spatial sample counts must be >= 1");
        if (n_lambda < 1) throw validation_error("eigenmode count must be >= 1");
        if (!(want_ce || want_phie || want_cse || want_phis || want_flux))
            throw validation_error("configuration selects no outputs");
        const long q = subsample();
        const long n_sub = 1 + (sample_count() - 1) / q;
        if (n_sub < hankel_rows + hankel_cols + 1)
            throw validation_error("not enough Markov samples to fill the shifted Hankel; "
                                   "increase tlen_hours or reduce the Hankel dimensions");
    }
};

// ---------------------------------------------------------------------------
// Per-setpoint realisation.
// ---------------------------------------------------------------------------

inline StateSpaceModel realise_setpoint(const CellParams& params, double soc, double temp,
                                        const RealisationConfig& cfg, int threads = 1) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();

    const Setpoint sp = make_setpoint(params, soc, temp);
    TfRequest req = make_tf_request(params, sp, cfg.s_s, cfg.s_e, cfg.n_lambda);
    req.want_ce = cfg.want_ce;
    req.want_phie = cfg.want_phie;
    req.want_cse = cfg.want_cse;
    req.want_phis = cfg.want_phis;
    req.want_flux = cfg.want_flux;

    const long N = cfg.sample_count();
    const Eigen::VectorXcd grid = bilinear_grid(1.0 / cfg.fs_hz, N);
    FrequencyResponse fr = assemble_simo(params, req, grid, threads);
    Eigen::MatrixXd markov = impulse_response(fr, N);

    const long q = cfg.subsample();
    if (q > 1) {
        const long n_sub = 1 + (N - 1) / q;
        Eigen::MatrixXd sub(markov.rows(), n_sub);
        for (long t = 0; t < n_sub; ++t) sub.col(t) = markov.col(t * q);
        markov.swap(sub);
    }

    const long p = markov.rows();
    TruncatedSvd svd;
    {
        Eigen::MatrixXd H = build_hankel_matrix(markov, cfg.hankel_rows, cfg.hankel_cols, 1);
        svd = truncated_svd(H, cfg.order, cfg.svd);
    }  // H freed before the shifted Hankel is built
    Eigen::MatrixXd Hs = build_hankel_matrix(markov, cfg.hankel_rows, cfg.hankel_cols, 2);
    RealisedSystem sys = ho_kalman(svd, Hs, markov.col(0), p);
    Hs.resize(0, 0);

    // Reconstruction fidelity of the identified (pre-stabilisation) system.
    double num = 0.0, den = 0.0;
    {
        const long horizon = std::min<long>(200, cfg.hankel_rows);
        Eigen::VectorXd x = sys.B.col(0);
        for (long t = 1; t <= horizon; ++t) {
            num += (sys.C * x - markov.col(t)).squaredNorm();
            den += markov.col(t).squaredNorm();
            x = sys.A * x;
        }
    }

    StateSpaceModel model;
    model.A = stabilise(sys.A).A;
    model.B = sys.B;
    model.C = sys.C;
    model.D = sys.D;
    model.res0 = fr.res0;
    model.T_s = cfg.ts_s;
    model.soc = soc;
    model.temp = temp;
    model.labels = fr.labels;
    model.recon_error = den > 0 ? std::sqrt(num / den) : 0.0;
    model.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return model;
}

// Realise the full (soc, temp) tensor grid.  Work is distributed over whole
// setpoints first; leftover threads parallelise the frequency sweep inside
// each realisation.  Results are ordered soc-major regardless of timing.
inline ModelGrid realise_grid(const CellParams& params, std::vector<double> socs,
                              std::vector<double> temps, const RealisationConfig& cfg,
                              int threads = 1) {
    if (socs.empty() || temps.empty())
        throw validation_error("setpoint grid must contain at least one soc and temperature");
    std::sort(socs.begin(), socs.end());
    std::sort(temps.begin(), temps.end());
    if (std::adjacent_find(socs.begin(), socs.end()) != socs.end() ||
        std::adjacent_find(temps.begin(), temps.end()) != temps.end())
        throw validation_error("setpoint grid entries must be unique");

    ModelGrid grid;
    grid.socs = socs;
    grid.temps = temps;
    const long n = static_cast<long>(socs.size() * temps.size());
    grid.models.resize(n);
    threads = std::max(1, threads);
    const int outer = static_cast<int>(std::min<long>(threads, n));
    const int inner = std::max(1, threads / outer);
    parallel_for(0, n, outer, [&](long i) {
        const double soc = socs[static_cast<size_t>(i) / temps.size()];
        const double temp = temps[static_cast<size_t>(i) % temps.size()];
        grid.models[i] = realise_setpoint(params, soc, temp, cfg, inner);
    });
    return grid;
}

}  // namespace cidra
