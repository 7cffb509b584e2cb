#pragma once

// Reference computations that avoid the library's SVD code paths.

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "ridgeless/pinv.hpp"
#include "ridgeless/random.hpp"

namespace oracle {

using ridgeless::Index;
using ridgeless::Matrix;
using ridgeless::Vector;

/// Largest singular value by power iteration on MᵀM.
inline double power_iteration_norm(const Matrix& m, int iters = 5000) {
    Vector v = Vector::Ones(m.cols()) / std::sqrt(static_cast<double>(m.cols()));
    double est = 0.0;
    for (int t = 0; t < iters; ++t) {
        Vector w = m.transpose() * (m * v);
        const double nrm = w.norm();
        if (nrm == 0.0) return 0.0;
        const double next = std::sqrt(nrm);
        v = w / nrm;
        if (std::abs(next - est) <= 1e-15 * next) return next;
        est = next;
    }
    return est;
}

/// Pseudoinverse of a full-column-rank matrix via the normal equations
/// (AᵀA)⁻¹Aᵀ, or of a full-row-rank matrix via Aᵀ(AAᵀ)⁻¹.
inline Matrix full_rank_pinv(const Matrix& a) {
    if (a.rows() >= a.cols()) {
        const Matrix g = a.transpose() * a;
        return g.ldlt().solve(a.transpose());
    }
    const Matrix g = a * a.transpose();
    return a.transpose() * g.ldlt().solve(Matrix::Identity(a.rows(), a.rows()));
}

/// Orthogonal projector onto range(A) from a rank-revealing QR.
inline Matrix range_projector(const Matrix& a, double tol = 1e-10) {
    Eigen::ColPivHouseholderQR<Matrix> qr(a);
    qr.setThreshold(tol);
    const Index r = qr.rank();
    const Matrix q = qr.householderQ() * Matrix::Identity(a.rows(), r);
    return q * q.transpose();
}

/// K with row and column i set to zero, entry by entry.
inline Matrix zeroed(const Matrix& k, Index i) {
    Matrix out(k.rows(), k.cols());
    for (Index r = 0; r < k.rows(); ++r) {
        for (Index c = 0; c < k.cols(); ++c) {
            out(r, c) = (r == i || c == i) ? 0.0 : k(r, c);
        }
    }
    return out;
}

/// X with column i set to zero.
inline Matrix zeroed_column(const Matrix& x, Index i) {
    Matrix out = x;
    for (Index r = 0; r < x.rows(); ++r) out(r, i) = 0.0;
    return out;
}

/// max_{i,j} |K(x_i, x_j)| for the linear kernel by brute force.
inline double brute_force_linear_kappa(const Matrix& x) {
    double k = 0.0;
    for (Index i = 0; i < x.cols(); ++i) {
        for (Index j = 0; j < x.cols(); ++j) k = std::max(k, std::abs(x.col(i).dot(x.col(j))));
    }
    return k;
}

inline double rel(const Matrix& a, const Matrix& b) {
    return (a - b).norm() / std::max(b.norm(), 1e-300);
}

/// Random rank-r matrix.
inline Matrix rank_r(ridgeless::Rng& rng, Index rows, Index cols, Index r) {
    if (r == 0) return Matrix::Zero(rows, cols);
    return ridgeless::gaussian_matrix(rng, rows, r) * ridgeless::gaussian_matrix(rng, r, cols);
}

}  // namespace oracle
