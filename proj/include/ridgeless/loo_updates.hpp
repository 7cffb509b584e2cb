#pragma once

// Leave-one-out pseudoinverses by rank-one perturbation.
//
// Kernel case: K_{S_i} (K with row and column i zeroed, kept at full size n×n)
// is written as two rank-one updates,
//     K*      = K  + a bᵀ      a = −K e_i, b = e_i
//     K_{S_i} = K* + b a*ᵀ     a* = a + K_ii b
// The first step uses Meyer's update for c ∈ R(A), d ∈ R(Aᵀ), β = 0; the
// second uses the update for c ∉ R(A), d ∈ R(Aᵀ). For full-rank K the two
// collapse to (K_{S_i})† = K† − hᵀh / K†_ii with h the i-th row of K†.
//
// Linear case: X_i = X + a bᵀ with a = −x_i, b = e_i, one Meyer step.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ridgeless/kernels.hpp"
#include "ridgeless/pinv.hpp"

namespace ridgeless {

enum class LooPath { closed_form, two_step_meyer, svd_fallback };

inline std::string to_string(LooPath p) {
    switch (p) {
        case LooPath::closed_form: return "closed_form";
        case LooPath::two_step_meyer: return "two_step_meyer";
        case LooPath::svd_fallback: return "svd_fallback";
    }
    return "unknown";
}

struct LooVectors {
    Index index = 0;
    Vector a;       // −(i-th column of K)
    Vector b;       // e_i
    Vector a_star;  // a + K_ii b
};

/// Intermediates of the first (β = 0) rank-one step.
struct MeyerStep1 {
    Vector k;  // M†a
    Vector h;  // bᵀM†, stored as a column
    double beta = 0.0;
};

/// Intermediates of the second rank-one step. In the full-rank LOO setting
/// phi = lambda, eta = 1 − lambda and nu = lambda.
struct MeyerStep2 {
    Vector meyer_d;  // K*†b
    Vector meyer_e;  // (K*†)ᵀa*
    Vector meyer_f;  // (I − K*K*†) b
    double meyer_lambda = 0.0;
    double meyer_phi = 0.0;
    double meyer_eta = 0.0;
    double meyer_nu = 0.0;
    /// ‖(general update) − (simplified K*†e(e−f)ᵀ + d(e−f)ᵀ + λ⁻¹dfᵀ form)‖_F,
    /// relative to ‖K*†‖_F.
    double simplified_form_residual = 0.0;
};

struct LooUpdateResult {
    Matrix pinv_loo;
    LooPath path = LooPath::closed_form;
    std::optional<MeyerStep1> step1;
    std::optional<MeyerStep2> step2;
    /// Linear case: ‖(X_i)† − X†‖_op and ‖X†‖_op.
    std::optional<double> diff_op_norm;
    std::optional<double> pinv_op_norm;
    /// Why the update formulas were bypassed, when path = svd_fallback.
    std::string fallback_reason;
};

struct LooOptions {
    /// Fill step1/step2 for auditing. Costs extra O(n²) work per index.
    bool intermediates = false;
    /// Linear case: compute ‖(X_i)† − X†‖_op (an SVD) for the norm bound.
    bool norm_bound = false;
    /// Projector-residual threshold for range membership tests.
    double membership_tol = 1e-8;
    /// |β| allowed for the β = 0 update.
    double beta_tol = 1e-8;
    /// Minimum ν for the second update.
    double nu_tol = 1e-12;
    /// Minimum |K†_ii| relative to ‖K†‖_op for the closed form.
    double diag_tol = 1e-12;
    TolerancePolicy policy{};
};

inline void require_index(Index i, Index n) {
    if (i < 0 || i >= n) {
        throw InputError("leave-one-out index " + std::to_string(i) + " out of range [0, " + std::to_string(n) + ")");
    }
}

/// K with row and column i set to zero.
inline Matrix zero_row_col(const Eigen::Ref<const Matrix>& k, Index i) {
    require_index(i, std::min(k.rows(), k.cols()));
    Matrix out = k;
    out.row(i).setZero();
    out.col(i).setZero();
    return out;
}

/// X with column i set to zero.
inline Matrix zero_col(const Eigen::Ref<const Matrix>& x, Index i) {
    require_index(i, x.cols());
    Matrix out = x;
    out.col(i).setZero();
    return out;
}

inline LooVectors build_loo_vectors(const Eigen::Ref<const Matrix>& k, Index i) {
    if (k.rows() != k.cols()) {
        throw InputError("build_loo_vectors: Gram matrix is not square");
    }
    require_index(i, k.rows());
    LooVectors v;
    v.index = i;
    v.a = -k.col(i);
    v.b = Vector::Unit(k.rows(), i);
    v.a_star = v.a + k(i, i) * v.b;
    return v;
}

inline LooVectors build_loo_vectors(const GramMatrix& g, Index i) {
    return build_loo_vectors(g.matrix, i);
}

namespace detail {

/// ‖(I − P) u‖ ≤ tol ‖u‖ where P u = m * (mp * u) projects onto R(m).
inline bool in_column_space(const Eigen::Ref<const Matrix>& m, const Eigen::Ref<const Matrix>& mp,
                            const Eigen::Ref<const Vector>& u, double tol) {
    return (u - m * (mp * u)).norm() <= tol * u.norm();
}

/// ‖(I − P) u‖ ≤ tol ‖u‖ where P u = mp * (m * u) projects onto R(mᵀ).
inline bool in_row_space(const Eigen::Ref<const Matrix>& m, const Eigen::Ref<const Matrix>& mp,
                         const Eigen::Ref<const Vector>& u, double tol) {
    return (u - mp * (m * u)).norm() <= tol * u.norm();
}

}  // namespace detail

/// (M + abᵀ)† for a ∈ R(M), b ∈ R(Mᵀ), β = 1 + bᵀM†a = 0:
///     M† − k k†M† − M†h†h + (k†M†h†) k h,   k = M†a, h = bᵀM†, u† = uᵀ/‖u‖².
/// Throws PreconditionError when the conditions do not hold.
inline Matrix meyer_t6_update(const Eigen::Ref<const Matrix>& m, const Eigen::Ref<const Matrix>& mp,
                              const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b,
                              const LooOptions& opt = {}, MeyerStep1* out = nullptr) {
    if (a.size() != m.rows() || b.size() != m.cols() || mp.rows() != m.cols() || mp.cols() != m.rows()) {
        throw InputError("meyer_t6_update: dimension mismatch");
    }
    const Vector k = mp * a;
    const Vector h = mp.transpose() * b;
    const double beta = 1.0 + b.dot(k);
    if (out != nullptr) {
        *out = MeyerStep1{k, h, beta};
    }
    if (std::abs(beta) > opt.beta_tol) {
        throw PreconditionError("meyer_t6_update: beta = " + std::to_string(beta) + " is not zero");
    }
    if (a.norm() == 0.0 || k.norm() == 0.0 || h.norm() == 0.0) {
        throw PreconditionError("meyer_t6_update: degenerate k or h");
    }
    if (!detail::in_column_space(m, mp, a, opt.membership_tol)) {
        throw PreconditionError("meyer_t6_update: a is not in the column space");
    }
    if (!detail::in_row_space(m, mp, b, opt.membership_tol)) {
        throw PreconditionError("meyer_t6_update: b is not in the row space");
    }
    const Vector k_dag = k / k.squaredNorm();
    const Vector h_dag = h / h.squaredNorm();
    const Vector mp_h = mp * h_dag;                        // M†h†
    const Vector kt_mp = mp.transpose() * k_dag;           // (k†M†)ᵀ
    const double scale = k_dag.dot(mp_h);                  // k†M†h†
    Matrix out_m = mp;
    out_m.noalias() -= k * kt_mp.transpose();
    out_m.noalias() -= mp_h * h.transpose();
    out_m.noalias() += scale * k * h.transpose();
    return out_m;
}

/// (M + b a*ᵀ)† for a* ∈ R(Mᵀ), b ∉ R(M):
///     M† − ν⁻¹(φ M†e eᵀ + η d fᵀ) + ν⁻¹(λ M†e fᵀ − λ d eᵀ)
/// with d = M†b, e = (M†)ᵀa*, f = (I − M M†) b, λ = 1 + a*ᵀd, φ = fᵀf,
/// η = eᵀe, ν = λ² + ηφ. The simplified LOO form is evaluated as a cross-check.
inline LooUpdateResult meyer_t5_update(const Eigen::Ref<const Matrix>& m, const Eigen::Ref<const Matrix>& mp,
                                       const Eigen::Ref<const Vector>& a_star, const Eigen::Ref<const Vector>& b,
                                       const LooOptions& opt = {}) {
    if (b.size() != m.rows() || a_star.size() != m.cols() || mp.rows() != m.cols() || mp.cols() != m.rows()) {
        throw InputError("meyer_t5_update: dimension mismatch");
    }
    MeyerStep2 s;
    s.meyer_d = mp * b;
    s.meyer_e = mp.transpose() * a_star;
    s.meyer_f = b - m * s.meyer_d;
    s.meyer_lambda = 1.0 + a_star.dot(s.meyer_d);
    s.meyer_phi = s.meyer_f.squaredNorm();
    s.meyer_eta = s.meyer_e.squaredNorm();
    s.meyer_nu = s.meyer_lambda * s.meyer_lambda + s.meyer_eta * s.meyer_phi;

    if (!detail::in_row_space(m, mp, a_star, opt.membership_tol)) {
        throw PreconditionError("meyer_t5_update: a* is not in the row space");
    }
    if (s.meyer_f.norm() <= opt.membership_tol * b.norm()) {
        throw PreconditionError("meyer_t5_update: b lies in the column space");
    }
    if (!(s.meyer_nu > opt.nu_tol)) {
        throw DegenerateUpdateError("meyer_t5_update: nu = " + std::to_string(s.meyer_nu) + " is degenerate");
    }

    const Vector& d = s.meyer_d;
    const Vector& e = s.meyer_e;
    const Vector& f = s.meyer_f;
    const double lambda = s.meyer_lambda;
    const double inv_nu = 1.0 / s.meyer_nu;
    const Vector mp_e = mp * e;

    LooUpdateResult r;
    r.path = LooPath::two_step_meyer;
    r.pinv_loo = mp;
    r.pinv_loo.noalias() -= (inv_nu * s.meyer_phi) * mp_e * e.transpose();
    r.pinv_loo.noalias() -= (inv_nu * s.meyer_eta) * d * f.transpose();
    r.pinv_loo.noalias() += (inv_nu * lambda) * mp_e * f.transpose();
    r.pinv_loo.noalias() -= (inv_nu * lambda) * d * e.transpose();

    if (std::abs(lambda) > opt.nu_tol) {
        const Vector e_minus_f = e - f;
        Matrix simplified = mp;
        simplified.noalias() -= mp_e * e_minus_f.transpose();
        simplified.noalias() -= d * e_minus_f.transpose();
        simplified.noalias() -= (1.0 / lambda) * d * f.transpose();
        const double ref = std::max(mp.norm(), std::numeric_limits<double>::min());
        s.simplified_form_residual = (simplified - r.pinv_loo).norm() / ref;
    } else {
        s.simplified_form_residual = std::numeric_limits<double>::infinity();
    }
    r.step2 = std::move(s);
    return r;
}

namespace detail {

inline LooUpdateResult svd_fallback(const Eigen::Ref<const Matrix>& perturbed, std::string reason,
                                    const TolerancePolicy& policy) {
    LooUpdateResult r;
    r.path = LooPath::svd_fallback;
    r.pinv_loo = svd_pseudoinverse(perturbed, policy).pinv;
    r.fallback_reason = std::move(reason);
    return r;
}

/// Step-1 and step-2 intermediates from K† for the kernel LOO at index i.
inline void fill_kernel_intermediates(const Eigen::Ref<const Matrix>& k, const Eigen::Ref<const Matrix>& kp,
                                      Index i, LooUpdateResult& r) {
    const LooVectors v = build_loo_vectors(k, i);
    MeyerStep1 s1;
    s1.k = kp * v.a;
    s1.h = kp.row(i).transpose();
    s1.beta = 1.0 + v.b.dot(s1.k);

    // K*† = K† − K†h†h
    const Vector kp_hdag = kp * (s1.h / s1.h.squaredNorm());
    Matrix kstar_p = kp;
    kstar_p.noalias() -= kp_hdag * s1.h.transpose();
    Matrix kstar = k;
    kstar.col(i).setZero();

    MeyerStep2 s2;
    s2.meyer_d = kstar_p.col(i);
    s2.meyer_e = kstar_p.transpose() * v.a_star;
    s2.meyer_f = v.b - kstar * s2.meyer_d;
    s2.meyer_lambda = 1.0 + v.a_star.dot(s2.meyer_d);
    s2.meyer_phi = s2.meyer_f.squaredNorm();
    s2.meyer_eta = s2.meyer_e.squaredNorm();
    s2.meyer_nu = s2.meyer_lambda * s2.meyer_lambda + s2.meyer_eta * s2.meyer_phi;
    r.step1 = std::move(s1);
    r.step2 = std::move(s2);
}

}  // namespace detail

/// (K_{S_i})† = K† − hᵀh / K†_ii, O(n²). Falls back to an SVD of the zeroed
/// matrix when K is rank deficient or K†_ii is negligible.
inline LooUpdateResult loo_pinv_kernel(const Eigen::Ref<const Matrix>& k, const PseudoinverseFactorization& kp,
                                       Index i, const LooOptions& opt = {}) {
    if (k.rows() != k.cols() || kp.pinv.rows() != k.rows()) {
        throw InputError("loo_pinv_kernel: dimension mismatch");
    }
    require_index(i, k.rows());
    if (!kp.full_rank()) {
        return detail::svd_fallback(zero_row_col(k, i), "Gram matrix is rank deficient", opt.policy);
    }
    const double pii = kp.pinv(i, i);
    if (!(std::abs(pii) > opt.diag_tol * pinv_operator_norm(kp))) {
        return detail::svd_fallback(zero_row_col(k, i), "K-dagger diagonal entry is negligible", opt.policy);
    }
    LooUpdateResult r;
    r.path = LooPath::closed_form;
    const Vector h = kp.pinv.row(i).transpose();
    r.pinv_loo = kp.pinv;
    r.pinv_loo.noalias() -= (1.0 / pii) * h * h.transpose();
    if (opt.intermediates) {
        detail::fill_kernel_intermediates(k, kp.pinv, i, r);
    }
    return r;
}

inline LooUpdateResult loo_pinv_kernel(const GramMatrix& g, const PseudoinverseFactorization& kp, Index i,
                                       const LooOptions& opt = {}) {
    return loo_pinv_kernel(g.matrix, kp, i, opt);
}

/// The same leave-one-out pseudoinverse by composing the two Meyer steps
/// explicitly. Falls back to SVD when either step's conditions fail.
inline LooUpdateResult loo_pinv_kernel_two_step(const Eigen::Ref<const Matrix>& k,
                                                const PseudoinverseFactorization& kp, Index i,
                                                const LooOptions& opt = {}) {
    const LooVectors v = build_loo_vectors(k, i);
    Matrix kstar = k;
    kstar.col(i).setZero();  // K + a bᵀ
    MeyerStep1 s1;
    Matrix kstar_p;
    try {
        kstar_p = meyer_t6_update(k, kp.pinv, v.a, v.b, opt, &s1);
    } catch (const NumericalError& e) {
        return detail::svd_fallback(zero_row_col(k, i), e.what(), opt.policy);
    }
    try {
        LooUpdateResult r = meyer_t5_update(kstar, kstar_p, v.a_star, v.b, opt);
        r.step1 = std::move(s1);
        return r;
    } catch (const NumericalError& e) {
        return detail::svd_fallback(zero_row_col(k, i), e.what(), opt.policy);
    }
}

inline LooUpdateResult loo_pinv_kernel_two_step(const GramMatrix& g, const PseudoinverseFactorization& kp, Index i,
                                                const LooOptions& opt = {}) {
    return loo_pinv_kernel_two_step(g.matrix, kp, i, opt);
}

/// Direct recompute: SVD pseudoinverse of K with row/column i zeroed.
inline LooUpdateResult loo_pinv_kernel_direct(const Eigen::Ref<const Matrix>& k, Index i,
                                              const TolerancePolicy& policy = {}) {
    return detail::svd_fallback(zero_row_col(k, i), "direct recompute requested", policy);
}

/// (X_i)† = X† − k k†X† − X†h†h + (k†X†h†) k h with a = −x_i, b = e_i. Requires
/// rank(X) = n; otherwise an SVD of X_i is used.
inline LooUpdateResult loo_pinv_linear(const Eigen::Ref<const Matrix>& x, const PseudoinverseFactorization& xp,
                                       Index i, const LooOptions& opt = {}) {
    require_index(i, x.cols());
    if (xp.pinv.rows() != x.cols() || xp.pinv.cols() != x.rows()) {
        throw InputError("loo_pinv_linear: dimension mismatch");
    }
    if (xp.retained_rank != x.cols()) {
        return detail::svd_fallback(zero_col(x, i), "X does not have full column rank", opt.policy);
    }
    const Vector a = -x.col(i);
    const Vector b = Vector::Unit(x.cols(), i);
    LooUpdateResult r;
    r.path = LooPath::closed_form;
    MeyerStep1 s1;
    try {
        r.pinv_loo = meyer_t6_update(x, xp.pinv, a, b, opt, &s1);
    } catch (const NumericalError& e) {
        return detail::svd_fallback(zero_col(x, i), e.what(), opt.policy);
    }
    if (opt.intermediates) {
        r.step1 = std::move(s1);
    }
    if (opt.norm_bound) {
        r.diff_op_norm = operator_norm(r.pinv_loo - xp.pinv);
        r.pinv_op_norm = pinv_operator_norm(xp);
    }
    return r;
}

inline LooUpdateResult loo_pinv_linear_direct(const Eigen::Ref<const Matrix>& x, Index i,
                                              const TolerancePolicy& policy = {}) {
    return detail::svd_fallback(zero_col(x, i), "direct recompute requested", policy);
}

// --- projector identities ------------------------------------------------

struct IdentityResidual {
    std::string name;
    double residual = 0.0;  // Frobenius
    bool passed = false;
};

struct ProjectorReport {
    std::vector<IdentityResidual> identities;
    double tolerance = 1e-8;

    [[nodiscard]] bool passed() const {
        for (const auto& r : identities) {
            if (!r.passed) return false;
        }
        return true;
    }
};

/// Kernel case at index i, using the update-path pseudoinverses:
///   K*†K* = K†K − k k†,   (K_{S_i})†K_{S_i} = K*†K*,   K†K − (K_{S_i})†K_{S_i} = k k†.
inline ProjectorReport projector_identities_kernel(const Eigen::Ref<const Matrix>& k,
                                                   const PseudoinverseFactorization& kp, Index i,
                                                   double tol = 1e-8) {
    const LooVectors v = build_loo_vectors(k, i);
    LooOptions opt;
    Matrix kstar = k;
    kstar.col(i).setZero();
    const Matrix kstar_p = meyer_t6_update(k, kp.pinv, v.a, v.b, opt);
    const Matrix ksi = zero_row_col(k, i);
    const Matrix ksi_p = loo_pinv_kernel(k, kp, i, opt).pinv_loo;

    const Vector kvec = kp.pinv * v.a;
    const Matrix kk_dag = kvec * kvec.transpose() / kvec.squaredNorm();
    const Matrix proj = kp.pinv * k;
    const Matrix proj_star = kstar_p * kstar;
    const Matrix proj_loo = ksi_p * ksi;

    ProjectorReport rep;
    rep.tolerance = tol;
    auto add = [&](std::string name, double res) { rep.identities.push_back({std::move(name), res, res <= tol}); };
    add("Kstar_pinv_Kstar = Kpinv_K - k k_dag", (proj_star - (proj - kk_dag)).norm());
    add("KSi_pinv_KSi = Kstar_pinv_Kstar", (proj_loo - proj_star).norm());
    add("Kpinv_K - KSi_pinv_KSi = k k_dag", ((proj - proj_loo) - kk_dag).norm());
    return rep;
}

/// Linear case at index i: X_i X_i† = X X† − h†h, using the update-path (X_i)†.
inline ProjectorReport projector_identities_linear(const Eigen::Ref<const Matrix>& x,
                                                   const PseudoinverseFactorization& xp, Index i,
                                                   double tol = 1e-8) {
    const Matrix xi = zero_col(x, i);
    const Matrix xi_p = loo_pinv_linear(x, xp, i).pinv_loo;
    const Vector h = xp.pinv.row(i).transpose();
    const Matrix hh = h * h.transpose() / h.squaredNorm();
    ProjectorReport rep;
    rep.tolerance = tol;
    const double res = ((xi * xi_p) - (x * xp.pinv - hh)).norm();
    rep.identities.push_back({"Xi_Xi_pinv = X_Xpinv - h_dag h", res, res <= tol});
    return rep;
}

}  // namespace ridgeless
