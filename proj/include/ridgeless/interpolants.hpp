#pragma once

// Minimum-norm, null-space perturbed, Tikhonov and gradient-descent solutions
// of kernel and linear least squares.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>

#include "ridgeless/kernels.hpp"
#include "ridgeless/pinv.hpp"

namespace ridgeless {

enum class SolutionMode { min_norm, perturbed, tikhonov, gradient_descent };
enum class ModelKind { kernel, linear };

inline std::string to_string(SolutionMode m) {
    switch (m) {
        case SolutionMode::min_norm: return "min_norm";
        case SolutionMode::perturbed: return "perturbed";
        case SolutionMode::tikhonov: return "tikhonov";
        case SolutionMode::gradient_descent: return "gradient_descent";
    }
    return "unknown";
}

/// Kernel solutions hold c (length n); linear solutions hold w (length d).
struct InterpolantSolution {
    SolutionMode mode = SolutionMode::min_norm;
    ModelKind model = ModelKind::kernel;
    Vector coefficients;
    std::optional<Vector> v;
    std::optional<double> lambda;
    std::optional<KernelSpec> kernel;
    std::uint64_t training_fingerprint = 0;
    Index iterations = 0;  // gradient descent only
};

/// Residual threshold for "interpolates": 1e-8 · max(1, ‖y‖).
inline double interpolation_tolerance(const Eigen::Ref<const Vector>& y) {
    return 1e-8 * std::max(1.0, y.norm());
}

namespace detail {

inline void require_size(Index got, Index want, const char* what) {
    if (got != want) {
        throw InputError(std::string(what) + ": expected length " + std::to_string(want) + ", got " +
                         std::to_string(got));
    }
}

}  // namespace detail

// --- kernel ---------------------------------------------------------------

inline InterpolantSolution min_norm_kernel(const GramMatrix& g, const PseudoinverseFactorization& gp,
                                           const Eigen::Ref<const Vector>& y) {
    detail::require_size(y.size(), g.size(), "min_norm_kernel: y");
    InterpolantSolution s;
    s.mode = SolutionMode::min_norm;
    s.model = ModelKind::kernel;
    s.coefficients = gp.pinv * y;
    s.kernel = g.kernel;
    s.training_fingerprint = g.source_fingerprint;
    return s;
}

/// c = K†y.
inline InterpolantSolution min_norm_kernel(const GramMatrix& g, const Eigen::Ref<const Vector>& y,
                                           const TolerancePolicy& policy = {}) {
    return min_norm_kernel(g, svd_pseudoinverse(g.matrix, policy), y);
}

inline InterpolantSolution general_kernel_interpolant(const GramMatrix& g, const PseudoinverseFactorization& gp,
                                                      const Eigen::Ref<const Vector>& y,
                                                      const Eigen::Ref<const Vector>& v) {
    detail::require_size(y.size(), g.size(), "general_kernel_interpolant: y");
    detail::require_size(v.size(), g.size(), "general_kernel_interpolant: v");
    InterpolantSolution s = min_norm_kernel(g, gp, y);
    s.mode = SolutionMode::perturbed;
    // (I − K†K) v
    s.coefficients += v - gp.pinv * (g.matrix * v);
    s.v = v;
    return s;
}

/// c = K†y + (I − K†K) v.
inline InterpolantSolution general_kernel_interpolant(const GramMatrix& g, const Eigen::Ref<const Vector>& y,
                                                      const Eigen::Ref<const Vector>& v,
                                                      const TolerancePolicy& policy = {}) {
    return general_kernel_interpolant(g, svd_pseudoinverse(g.matrix, policy), y, v);
}

/// c = (K + λI)⁻¹ y by Cholesky.
inline InterpolantSolution tikhonov_kernel(const GramMatrix& g, const Eigen::Ref<const Vector>& y, double lambda) {
    detail::require_size(y.size(), g.size(), "tikhonov_kernel: y");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw InputError("tikhonov_kernel: lambda must be positive");
    }
    Matrix a = g.matrix;
    a.diagonal().array() += lambda;
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("tikhonov_kernel: K + lambda I is not positive definite");
    }
    InterpolantSolution s;
    s.mode = SolutionMode::tikhonov;
    s.model = ModelKind::kernel;
    s.coefficients = llt.solve(y);
    s.lambda = lambda;
    s.kernel = g.kernel;
    s.training_fingerprint = g.source_fingerprint;
    return s;
}

// --- linear ---------------------------------------------------------------

inline InterpolantSolution min_norm_linear(const Eigen::Ref<const Matrix>& x, const PseudoinverseFactorization& xp,
                                           const Eigen::Ref<const Vector>& y) {
    detail::require_size(y.size(), x.cols(), "min_norm_linear: y");
    InterpolantSolution s;
    s.mode = SolutionMode::min_norm;
    s.model = ModelKind::linear;
    s.coefficients = xp.pinv.transpose() * y;  // wᵀ = yᵀX†
    s.training_fingerprint = fingerprint(x);
    return s;
}

/// w with wᵀ = yᵀX†.
inline InterpolantSolution min_norm_linear(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Vector>& y,
                                           const TolerancePolicy& policy = {}) {
    return min_norm_linear(x, svd_pseudoinverse(x, policy), y);
}

inline InterpolantSolution general_linear_interpolant(const Eigen::Ref<const Matrix>& x,
                                                      const PseudoinverseFactorization& xp,
                                                      const Eigen::Ref<const Vector>& y,
                                                      const Eigen::Ref<const Vector>& v) {
    detail::require_size(v.size(), x.rows(), "general_linear_interpolant: v");
    InterpolantSolution s = min_norm_linear(x, xp, y);
    s.mode = SolutionMode::perturbed;
    // (I − X X†) v
    s.coefficients += v - x * (xp.pinv * v);
    s.v = v;
    return s;
}

/// ŵᵀ = yᵀX† + vᵀ(I − X X†).
inline InterpolantSolution general_linear_interpolant(const Eigen::Ref<const Matrix>& x,
                                                      const Eigen::Ref<const Vector>& y,
                                                      const Eigen::Ref<const Vector>& v,
                                                      const TolerancePolicy& policy = {}) {
    return general_linear_interpolant(x, svd_pseudoinverse(x, policy), y, v);
}

// --- gradient descent -------------------------------------------------------

struct GdOptions {
    double step = 0.0;
    Index iters = 0;
    /// Consecutive loss increases tolerated before declaring divergence.
    Index divergence_window = 10;
    /// Called with (iteration, iterate) after every update.
    std::function<void(Index, const Vector&)> observer;
};

namespace detail {

/// Full-batch gradient descent on ½‖Aᵀw − y‖² from w = 0.
inline Vector gd_least_squares(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Vector>& y,
                               const GdOptions& opt) {
    if (!(opt.step > 0.0) || !std::isfinite(opt.step)) {
        throw InputError("gradient descent: step must be positive");
    }
    Vector w = Vector::Zero(a.rows());
    Vector r = -y;  // Aᵀw − y at w = 0
    double loss = 0.5 * r.squaredNorm();
    // Increases below this floor are rounding noise near convergence.
    const double floor = 1e-14 * loss + std::numeric_limits<double>::min();
    Index increases = 0;
    for (Index t = 1; t <= opt.iters; ++t) {
        w.noalias() -= opt.step * (a * r);
        r.noalias() = a.transpose() * w;
        r -= y;
        const double next = 0.5 * r.squaredNorm();
        if (!std::isfinite(next)) {
            throw StepSizeError("gradient descent diverged (non-finite loss); reduce the step size");
        }
        increases = next > loss * (1.0 + 1e-12) + floor ? increases + 1 : 0;
        if (increases >= opt.divergence_window) {
            throw StepSizeError("gradient descent diverged (loss increased over " +
                                std::to_string(opt.divergence_window) + " iterations); reduce the step size");
        }
        loss = next;
        if (opt.observer) {
            opt.observer(t, w);
        }
    }
    return w;
}

}  // namespace detail

/// w ← w − step · X (Xᵀw − y), starting at zero. Converges to the minimum-norm
/// solution for step < 2/σ_max(X)².
inline InterpolantSolution gradient_descent_linear(const Eigen::Ref<const Matrix>& x,
                                                   const Eigen::Ref<const Vector>& y, const GdOptions& opt) {
    detail::require_size(y.size(), x.cols(), "gradient_descent_linear: y");
    InterpolantSolution s;
    s.mode = SolutionMode::gradient_descent;
    s.model = ModelKind::linear;
    s.coefficients = detail::gd_least_squares(x, y, opt);
    s.training_fingerprint = fingerprint(x);
    s.iterations = opt.iters;
    return s;
}

/// c ← c − step · K (Kc − y), starting at zero; step < 2/σ_max(K)².
inline InterpolantSolution gradient_descent_kernel(const GramMatrix& g, const Eigen::Ref<const Vector>& y,
                                                   const GdOptions& opt) {
    detail::require_size(y.size(), g.size(), "gradient_descent_kernel: y");
    InterpolantSolution s;
    s.mode = SolutionMode::gradient_descent;
    s.model = ModelKind::kernel;
    s.coefficients = detail::gd_least_squares(g.matrix, y, opt);
    s.kernel = g.kernel;
    s.training_fingerprint = g.source_fingerprint;
    s.iterations = opt.iters;
    return s;
}

// --- evaluation -----------------------------------------------------------

/// Predictions at the columns of `queries`. Kernel: Σ_j c_j K(x_j, q);
/// linear: wᵀq. `training` must be the data the solution was fit on.
inline Vector predict(const InterpolantSolution& sol, const Eigen::Ref<const Matrix>& training,
                      const Eigen::Ref<const Matrix>& queries) {
    if (fingerprint(training) != sol.training_fingerprint) {
        throw InputError("predict: training data does not match the data the solution was fit on");
    }
    if (queries.rows() != training.rows()) {
        throw InputError("predict: query dimension does not match training dimension");
    }
    if (sol.model == ModelKind::linear) {
        detail::require_size(sol.coefficients.size(), training.rows(), "predict: coefficients");
        return queries.transpose() * sol.coefficients;
    }
    detail::require_size(sol.coefficients.size(), training.cols(), "predict: coefficients");
    return cross_kernel(*sol.kernel, queries, training) * sol.coefficients;
}

/// ‖Σ_j p_j K(x_j, ·)‖_H = ‖K^{1/2} p‖ given a precomputed K^{1/2}.
inline double rkhs_norm_from_sqrt(const Eigen::Ref<const Matrix>& sqrt_k, const Eigen::Ref<const Vector>& p) {
    detail::require_size(p.size(), sqrt_k.cols(), "rkhs_norm: p");
    return (sqrt_k * p).norm();
}

inline double rkhs_norm(const GramMatrix& g, const Eigen::Ref<const Vector>& p) {
    detail::require_size(p.size(), g.size(), "rkhs_norm: p");
    return rkhs_norm_from_sqrt(psd_sqrt(g.matrix), p);
}

}  // namespace ridgeless
