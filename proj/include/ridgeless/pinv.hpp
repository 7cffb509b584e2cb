#pragma once

// Truncated-SVD pseudoinverse, operator norm, effective condition number and
// symmetric PSD square root. Matrices are Eigen column-major doubles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "ridgeless/errors.hpp"

namespace ridgeless {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline bool all_finite(const Eigen::Ref<const Matrix>& m) {
    return m.allFinite();
}

inline void require_finite(const Eigen::Ref<const Matrix>& m, const char* what) {
    if (!all_finite(m)) {
        throw InputError(std::string(what) + ": matrix contains NaN or Inf");
    }
}

/// ‖a − b‖_F / ‖b‖_F, falling back to the absolute difference when b is zero.
inline double relative_frobenius(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& b) {
    const double diff = (a - b).norm();
    const double ref = b.norm();
    return ref > 0.0 ? diff / ref : diff;
}

/// FNV-1a over shape and raw entries; identifies the dataset a Gram or
/// solution was built from.
inline std::uint64_t fingerprint(const Eigen::Ref<const Matrix>& m) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* data, std::size_t bytes) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t k = 0; k < bytes; ++k) {
            h ^= p[k];
            h *= 1099511628211ULL;
        }
    };
    const std::int64_t shape[2] = {static_cast<std::int64_t>(m.rows()), static_cast<std::int64_t>(m.cols())};
    mix(shape, sizeof(shape));
    for (Index j = 0; j < m.cols(); ++j) {
        for (Index i = 0; i < m.rows(); ++i) {
            const double v = m(i, j);
            mix(&v, sizeof(v));
        }
    }
    return h;
}

/// Relative truncation rule: singular values ≤ σ_max · factor are discarded.
/// A non-positive factor selects the default max(rows, cols) · ε.
struct TolerancePolicy {
    double relative_factor = -1.0;

    static TolerancePolicy relative(double factor) { return TolerancePolicy{factor}; }

    [[nodiscard]] double factor_for(Index rows, Index cols) const {
        if (relative_factor > 0.0) {
            return relative_factor;
        }
        return static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon();
    }

    [[nodiscard]] double threshold(double sigma_max, Index rows, Index cols) const {
        return std::max(sigma_max * factor_for(rows, cols), std::numeric_limits<double>::min());
    }
};

struct PseudoinverseFactorization {
    Matrix pinv;
    Vector singular_values;  // descending, all of them (retained and discarded)
    Index retained_rank = 0;
    double truncation_threshold = std::numeric_limits<double>::min();

    [[nodiscard]] double sigma_max() const {
        return singular_values.size() > 0 ? singular_values(0) : 0.0;
    }
    [[nodiscard]] double sigma_min_retained() const {
        return retained_rank > 0 ? singular_values(retained_rank - 1) : 0.0;
    }
    [[nodiscard]] bool full_rank() const {
        return retained_rank == singular_values.size();
    }
};

namespace detail {

struct ThinSvd {
    Matrix u;
    Vector s;
    Matrix v;
};

inline ThinSvd thin_svd(const Eigen::Ref<const Matrix>& m) {
    ThinSvd out;
    if (m.rows() == 0 || m.cols() == 0) {
        out.u = Matrix(m.rows(), 0);
        out.s = Vector(0);
        out.v = Matrix(m.cols(), 0);
        return out;
    }
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success || !svd.singularValues().allFinite()) {
        throw NumericalError("SVD did not converge");
    }
    out.u = svd.matrixU();
    out.s = svd.singularValues();
    out.v = svd.matrixV();
    return out;
}

inline Vector singular_values(const Eigen::Ref<const Matrix>& m) {
    if (m.rows() == 0 || m.cols() == 0) {
        return Vector(0);
    }
    Eigen::BDCSVD<Matrix> svd(m);
    if (svd.info() != Eigen::Success || !svd.singularValues().allFinite()) {
        throw NumericalError("SVD did not converge");
    }
    return svd.singularValues();
}

}  // namespace detail

/// Moore-Penrose pseudoinverse by inverting the singular values above the
/// truncation threshold. The zero matrix maps to the zero matrix (rank 0).
inline PseudoinverseFactorization svd_pseudoinverse(const Eigen::Ref<const Matrix>& m,
                                                    const TolerancePolicy& policy = {}) {
    require_finite(m, "svd_pseudoinverse");
    const detail::ThinSvd svd = detail::thin_svd(m);

    PseudoinverseFactorization f;
    f.singular_values = svd.s;
    const double smax = svd.s.size() > 0 ? svd.s(0) : 0.0;
    f.truncation_threshold = policy.threshold(smax, m.rows(), m.cols());

    Index rank = 0;
    while (rank < svd.s.size() && svd.s(rank) > f.truncation_threshold) {
        ++rank;
    }
    f.retained_rank = rank;

    const Vector inv = svd.s.head(rank).cwiseInverse();
    f.pinv = svd.v.leftCols(rank) * inv.asDiagonal() * svd.u.leftCols(rank).transpose();
    if (rank == 0) {
        f.pinv = Matrix::Zero(m.cols(), m.rows());
    }
    return f;
}

/// Largest singular value.
inline double operator_norm(const Eigen::Ref<const Matrix>& m) {
    require_finite(m, "operator_norm");
    const Vector s = detail::singular_values(m);
    return s.size() > 0 ? s(0) : 0.0;
}

/// σ_max / σ_min over the retained singular values.
inline double effective_condition_number(const PseudoinverseFactorization& f) {
    if (f.retained_rank < 1) {
        throw UndefinedConditionError("condition number undefined for a rank-0 matrix");
    }
    return f.sigma_max() / f.sigma_min_retained();
}

/// ‖M†‖_op = 1 / σ_min over the retained singular values (0 for rank 0).
inline double pinv_operator_norm(const PseudoinverseFactorization& f) {
    return f.retained_rank > 0 ? 1.0 / f.sigma_min_retained() : 0.0;
}

/// Symmetric square root of a PSD matrix via eigendecomposition. Eigenvalues in
/// [−tol·λ_max, 0) are rounding noise and are clamped to zero.
inline Matrix psd_sqrt(const Eigen::Ref<const Matrix>& g, double tol = 1e-10) {
    require_finite(g, "psd_sqrt");
    if (g.rows() != g.cols()) {
        throw InputError("psd_sqrt: matrix is not square");
    }
    if (g.size() == 0) {
        return Matrix(0, 0);
    }
    const double scale = std::max(g.norm(), std::numeric_limits<double>::min());
    if ((g - g.transpose()).norm() > 1e-10 * scale) {
        throw InputError("psd_sqrt: matrix is not symmetric");
    }
    const Matrix sym = 0.5 * (g + g.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
    if (eig.info() != Eigen::Success) {
        throw NumericalError("psd_sqrt: eigendecomposition did not converge");
    }
    const Vector& lambda = eig.eigenvalues();
    const double top = std::max(std::abs(lambda.minCoeff()), std::abs(lambda.maxCoeff()));
    if (lambda.minCoeff() < -tol * top) {
        throw NotPsdError("psd_sqrt: eigenvalue " + std::to_string(lambda.minCoeff()) + " is negative");
    }
    const Vector root = lambda.cwiseMax(0.0).cwiseSqrt();
    const Matrix& q = eig.eigenvectors();
    Matrix s = q * root.asDiagonal() * q.transpose();
    return 0.5 * (s + s.transpose());
}

/// Relative Frobenius residuals of the four Penrose conditions for (A, A⁺).
struct PenroseResiduals {
    double aga = 0.0;      // A A⁺ A = A
    double gag = 0.0;      // A⁺ A A⁺ = A⁺
    double ag_sym = 0.0;   // (A A⁺)ᵀ = A A⁺
    double ga_sym = 0.0;   // (A⁺ A)ᵀ = A⁺ A

    [[nodiscard]] double max() const { return std::max({aga, gag, ag_sym, ga_sym}); }
};

inline PenroseResiduals penrose_residuals(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& g) {
    const Matrix ag = a * g;
    const Matrix ga = g * a;
    PenroseResiduals r;
    r.aga = relative_frobenius(ag * a, a);
    r.gag = relative_frobenius(ga * g, g);
    r.ag_sym = relative_frobenius(ag.transpose(), ag);
    r.ga_sym = relative_frobenius(ga.transpose(), ga);
    return r;
}

}  // namespace ridgeless
