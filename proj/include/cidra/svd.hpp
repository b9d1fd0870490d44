// Truncated SVD of large dense matrices.
//
// The iterative strategy is Golub-Kahan-Lanczos bidiagonalisation with full
// (twice-repeated classical Gram-Schmidt) reorthogonalisation of both bases,
// run in growing stages until the leading k triplets converge.  Memory is
// O((m+n) K) for K Lanczos steps and the dominant cost is matrix-vector
// products, which is what makes large block-Hankel factorisations cheap
// compared to a dense decomposition.  The dense strategy (and the fallback
// when Lanczos stalls) is Eigen's BDCSVD.
//
// Singular-vector signs are canonicalised (largest-magnitude component of
// each left vector made positive) so both strategies produce identical
// factors and downstream realisations are reproducible bit-for-bit.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <iostream>
#include <string>

#include "cidra/errors.hpp"

namespace cidra {

enum class SvdStrategy { iterative, dense };

inline const char* to_string(SvdStrategy s) {
    return s == SvdStrategy::iterative ? "iterative" : "dense";
}

inline SvdStrategy svd_strategy_from_string(const std::string& s) {
    if (s == "iterative") return SvdStrategy::iterative;
    if (s == "dense") return SvdStrategy::dense;
    throw validation_error("unknown svd strategy '" + s + "' (expected iterative|dense)");
}

struct TruncatedSvd {
    Eigen::MatrixXd U;  // m x k, orthonormal columns
    Eigen::VectorXd S;  // k, descending
    Eigen::MatrixXd V;  // n x k, orthonormal columns
    bool used_fallback = false;
};

namespace detail {

inline void canonical_signs(Eigen::MatrixXd& U, Eigen::MatrixXd& V) {
    for (int i = 0; i < U.cols(); ++i) {
        int idx = 0;
        U.col(i).cwiseAbs().maxCoeff(&idx);
        if (U(idx, i) < 0.0) {
            U.col(i) = -U.col(i);
            V.col(i) = -V.col(i);
        }
    }
}

inline TruncatedSvd dense_truncated_svd(const Eigen::MatrixXd& A, int k) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    TruncatedSvd out;
    out.U = svd.matrixU().leftCols(k);
    out.S = svd.singularValues().head(k);
    out.V = svd.matrixV().leftCols(k);
    canonical_signs(out.U, out.V);
    return out;
}

// Orthogonalise w against the first `cols` columns of Q, twice.
inline void reorthogonalise(Eigen::VectorXd& w, const Eigen::MatrixXd& Q, int cols) {
    if (cols <= 0) return;
    auto block = Q.leftCols(cols);
    w.noalias() -= block * (block.transpose() * w);
    w.noalias() -= block * (block.transpose() * w);
}

// Deterministic replacement direction used after a Lanczos breakdown.
inline Eigen::VectorXd breakdown_direction(long n, int attempt) {
    Eigen::VectorXd v(n);
    for (long i = 0; i < n; ++i)
        v(i) = std::cos(0.7319 * (attempt + 1) * (i + 1) + 0.11 * attempt);
    return v;
}

}  // namespace detail

inline TruncatedSvd truncated_svd(const Eigen::MatrixXd& A, int k,
                                  SvdStrategy strategy = SvdStrategy::iterative,
                                  double tol = 1e-12) {
    const long m = A.rows(), n = A.cols();
    const long minmn = std::min(m, n);
    if (k < 1 || k > minmn)
        throw validation_error("truncated_svd rank must satisfy 1 <= k <= min(rows, cols)");
    if (strategy == SvdStrategy::dense) return detail::dense_truncated_svd(A, k);

    const int K_max = static_cast<int>(std::min<long>(minmn, std::max(6L * k + 40L, 120L)));
    int K_stage = static_cast<int>(std::min<long>(minmn, std::max(2L * k + 10L, 20L)));

    Eigen::MatrixXd U(m, K_max), V(n, K_max + 1);
    Eigen::VectorXd alpha(K_max), beta(K_max);

    // Deterministic start vector.
    {
        Eigen::VectorXd v0 = Eigen::VectorXd::Ones(n);
        for (long i = 0; i < n; ++i) v0(i) += 0.25 * std::cos(1.618 * (i + 1));
        V.col(0) = v0 / v0.norm();
    }

    const double breakdown_tol = 1e-13;
    double matrix_scale = 0.0;
    int K = 0;

    while (true) {
        // Extend the factorisation to K_stage steps.
        for (; K < K_stage; ++K) {
            Eigen::VectorXd u = A * V.col(K);
            if (K > 0) u.noalias() -= beta(K - 1) * U.col(K - 1);
            detail::reorthogonalise(u, U, K);
            alpha(K) = u.norm();
            matrix_scale = std::max(matrix_scale, alpha(K));
            if (alpha(K) <= breakdown_tol * std::max(matrix_scale, 1e-300)) {
                // Invariant subspace hit: restart with a fresh direction.
                bool replaced = false;
                for (int attempt = 0; attempt < 4 && !replaced; ++attempt) {
                    u = detail::breakdown_direction(m, attempt);
                    detail::reorthogonalise(u, U, K);
                    if (u.norm() > 1e-8 * std::sqrt(static_cast<double>(m))) replaced = true;
                }
                alpha(K) = 0.0;
                if (!replaced) { K_stage = K; break; }
                u.normalize();
                U.col(K) = u;
            } else {
                U.col(K) = u / alpha(K);
            }

            Eigen::VectorXd w = A.transpose() * U.col(K);
            w.noalias() -= alpha(K) * V.col(K);
            detail::reorthogonalise(w, V, K + 1);
            beta(K) = w.norm();
            if (beta(K) <= breakdown_tol * std::max(matrix_scale, 1e-300)) {
                bool replaced = false;
                for (int attempt = 0; attempt < 4 && !replaced; ++attempt) {
                    w = detail::breakdown_direction(n, attempt + 7);
                    detail::reorthogonalise(w, V, K + 1);
                    if (w.norm() > 1e-8 * std::sqrt(static_cast<double>(n))) replaced = true;
                }
                beta(K) = 0.0;
                if (!replaced) { K_stage = ++K; break; }
                w.normalize();
                V.col(K + 1) = w;
            } else {
                V.col(K + 1) = w / beta(K);
            }
        }
        if (K < k) break;  // could not even span k directions

        // Small SVD of the upper-bidiagonal projection B (alpha on the
        // diagonal, beta on the superdiagonal).
        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(K, K);
        for (int i = 0; i < K; ++i) {
            B(i, i) = alpha(i);
            if (i + 1 < K) B(i, i + 1) = beta(i);
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> small(B, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const Eigen::VectorXd& sig = small.singularValues();
        const double smax = std::max(sig(0), 1e-300);

        // Residual bound for Ritz triplet i: beta_K * |last row of P_i|.
        bool converged = true;
        const double tail = beta(K - 1);
        for (int i = 0; i < k; ++i)
            if (tail * std::abs(small.matrixU()(K - 1, i)) > tol * smax) { converged = false; break; }

        if (converged || K >= K_max || K >= minmn) {
            if (!converged && K >= K_max && K < minmn) break;  // give up -> dense
            TruncatedSvd out;
            out.U = U.leftCols(K) * small.matrixU().leftCols(k);
            out.S = sig.head(k);
            out.V = V.leftCols(K) * small.matrixV().leftCols(k);
            detail::canonical_signs(out.U, out.V);
            return out;
        }
        K_stage = static_cast<int>(std::min<long>(minmn, 2L * K_stage));
    }

    std::cerr << "truncated_svd: Lanczos did not converge within the step budget; "
                 "falling back to the dense strategy\n";
    TruncatedSvd out = detail::dense_truncated_svd(A, k);
    out.used_fallback = true;
    return out;
}

}  // namespace cidra
