#pragma once

// Empirical CVloo / CVro stability of minimum-norm interpolants, the
// per-dataset bound quantities B0, beta1, beta2, the local-Lipschitz (Lemma 2)
// inequality chain and a Monte Carlo check of the excess-risk lemma.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ridgeless/interpolants.hpp"
#include "ridgeless/kernels.hpp"
#include "ridgeless/loo_updates.hpp"
#include "ridgeless/pinv.hpp"
#include "ridgeless/random.hpp"

namespace ridgeless {

/// Training data for a stability audit. For model = linear the kernel is
/// ignored and the hypothesis space is R^d with f(x) = wᵀx.
struct LearningProblem {
    Matrix x;  // d×n, columns are samples
    Vector y;
    ModelKind model = ModelKind::kernel;
    KernelSpec kernel = KernelSpec::rbf(1.0);

    void validate() const {
        if (y.size() != x.cols()) {
            throw InputError("learning problem: label count does not match sample count");
        }
        require_finite(x, "learning problem");
        if (!y.allFinite()) {
            throw InputError("learning problem: labels contain NaN or Inf");
        }
        kernel.validate();
    }
};

struct BoundChecks {
    bool almost_positivity = true;  // every delta ≥ −1e-10
    bool lemma2 = true;             // cvloo_mean ≤ lemma2_rhs_mean
    bool perturbation_bound = true; // ‖f_S − f_{S_i}‖_H ≤ beta1_hat for all i

    [[nodiscard]] bool all() const { return almost_positivity && lemma2 && perturbation_bound; }
};

struct StabilityReport {
    ModelKind model = ModelKind::kernel;
    std::vector<double> per_index_delta;   // V(f_{S_i}, z_i) − V(f_S, z_i)
    double cvloo_mean = 0.0;
    std::vector<double> diff_rkhs_norms;   // ‖f_S − f_{S_i}‖_H
    std::vector<double> lemma2_rhs;        // per-index right-hand side with κ
    double lemma2_rhs_mean = 0.0;
    double lemma2_rhs_sqrt_kappa_mean = 0.0;  // same with √κ in place of κ
    double B0 = 0.0;
    double beta1_hat = 0.0;
    double beta2_hat = 0.0;
    double kappa_used = 0.0;
    double sqrt_kappa = 0.0;
    double M_used = 0.0;
    double cond = 0.0;
    Index fallbacks = 0;  // indices where the update path fell back to SVD
    BoundChecks checks;
};

/// Plug-in bound quantities for one dataset.
struct StabilityBounds {
    double B0 = 0.0;
    double beta1_hat = 0.0;
    double beta2_hat = 0.0;
    double sqrt_op_norm = 1.0;  // ‖K^{1/2}‖_op (1 for the linear case)
    double pinv_op_norm = 0.0;  // ‖K†‖_op or ‖X†‖_op
    double cond = 1.0;
};

/// Kernel: B0 = ‖K†‖·cond(K)·‖y‖, beta1 = ‖K^{1/2}‖·B0, beta2 = beta1².
inline StabilityBounds stability_bounds_kernel(const PseudoinverseFactorization& kp, const Eigen::Ref<const Vector>& y) {
    StabilityBounds b;
    b.cond = effective_condition_number(kp);
    b.pinv_op_norm = pinv_operator_norm(kp);
    b.sqrt_op_norm = std::sqrt(kp.sigma_max());
    b.B0 = b.pinv_op_norm * b.cond * y.norm();
    b.beta1_hat = b.sqrt_op_norm * b.B0;
    b.beta2_hat = b.beta1_hat * b.beta1_hat;
    return b;
}

inline StabilityBounds stability_bounds_kernel(const GramMatrix& g, const Eigen::Ref<const Vector>& y) {
    return stability_bounds_kernel(svd_pseudoinverse(g.matrix), y);
}

/// Linear: B0 = beta1 = ‖X†‖·‖y‖, beta2 = beta1².
inline StabilityBounds stability_bounds_linear(const PseudoinverseFactorization& xp, const Eigen::Ref<const Vector>& y) {
    StabilityBounds b;
    b.cond = effective_condition_number(xp);
    b.pinv_op_norm = pinv_operator_norm(xp);
    b.B0 = b.pinv_op_norm * y.norm();
    b.beta1_hat = b.B0;
    b.beta2_hat = b.beta1_hat * b.beta1_hat;
    return b;
}

inline StabilityBounds stability_bounds_linear(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Vector>& y) {
    return stability_bounds_linear(svd_pseudoinverse(x), y);
}

/// Bound on ‖f̂_S − f̂_{S_i}‖ for a general interpolant with perturbations v, v_i:
/// ‖K^{1/2}‖·(B0 + 2‖v − v_i‖ + ‖v_i‖). Minimised at v = v_i = 0.
inline double interpolant_difference_bound(const StabilityBounds& b, const Eigen::Ref<const Vector>& v,
                                           const Eigen::Ref<const Vector>& v_i) {
    return b.sqrt_op_norm * (b.B0 + 2.0 * (v - v_i).norm() + v_i.norm());
}

/// (2M + κ(‖f_S‖ + ‖f_{S_i}‖)) · κ · ‖f_S − f_{S_i}‖.
inline double lemma2_rhs_term(double m, double kappa, double norm_s, double norm_si, double diff) {
    return (2.0 * m + kappa * (norm_s + norm_si)) * kappa * diff;
}

/// Mean of lemma2_rhs_term over indices. Requires |y_i| ≤ M.
inline double lemma2_rhs(const Eigen::Ref<const Vector>& y, double kappa, double m, double norm_s,
                         const std::vector<double>& norm_si, const std::vector<double>& diffs) {
    if (!(kappa > 0.0) || !(m > 0.0)) {
        throw InputError("lemma2_rhs: kappa and M must be positive");
    }
    if (y.size() > 0 && y.cwiseAbs().maxCoeff() > m) {
        throw InputError("lemma2_rhs: labels exceed the bound M");
    }
    if (norm_si.size() != diffs.size() || diffs.empty()) {
        throw InputError("lemma2_rhs: need one norm and one difference per index");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < diffs.size(); ++i) {
        total += lemma2_rhs_term(m, kappa, norm_s, norm_si[i], diffs[i]);
    }
    return total / static_cast<double>(diffs.size());
}

/// ‖K^{1/2}(c_S − c_{S_i})‖ with a precomputed K^{1/2}.
inline double solution_diff_rkhs_from_sqrt(const Eigen::Ref<const Matrix>& sqrt_k, const Eigen::Ref<const Vector>& c_s,
                                           const Eigen::Ref<const Vector>& c_si) {
    if (c_s.size() != sqrt_k.cols() || c_si.size() != sqrt_k.cols()) {
        throw InputError("solution_diff_rkhs: dimension mismatch");
    }
    return (sqrt_k * (c_s - c_si)).norm();
}

inline double solution_diff_rkhs(const GramMatrix& g, const Eigen::Ref<const Vector>& c_s,
                                 const Eigen::Ref<const Vector>& c_si) {
    return solution_diff_rkhs_from_sqrt(psd_sqrt(g.matrix), c_s, c_si);
}

/// Labels with entry i zeroed (the leave-one-out convention keeps length n).
inline Vector zero_entry(const Eigen::Ref<const Vector>& y, Index i) {
    Vector out = y;
    out(i) = 0.0;
    return out;
}

/// Minimum-norm fit on S and on every S_i, with per-index loss deltas, RKHS
/// distances, Lemma 2 right-hand sides and the bound checks. With
/// use_fast_updates the leave-one-out pseudoinverses come from the rank-one
/// update formulas, otherwise from a fresh SVD per index.
inline StabilityReport cvloo_empirical(const LearningProblem& p, bool use_fast_updates) {
    p.validate();
    const Index n = p.x.cols();
    if (n < 2) {
        throw InputError("cvloo_empirical: need at least two samples");
    }
    StabilityReport rep;
    rep.model = p.model;
    rep.M_used = std::max(p.y.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    rep.kappa_used = kappa_bound(p.model == ModelKind::linear ? KernelSpec::linear() : p.kernel, p.x);
    rep.sqrt_kappa = std::sqrt(rep.kappa_used);

    const bool kernel = p.model == ModelKind::kernel;
    Matrix k;        // Gram (kernel case)
    Matrix sqrt_k;   // K^{1/2}
    PseudoinverseFactorization fp;
    Vector coef;     // c_S or w_S
    Vector fitted;   // f_S(x_j)
    StabilityBounds bounds;
    if (kernel) {
        k = gram(p.kernel, p.x).matrix;
        fp = svd_pseudoinverse(k);
        sqrt_k = psd_sqrt(k);
        coef = fp.pinv * p.y;
        fitted = k * coef;
        bounds = stability_bounds_kernel(fp, p.y);
    } else {
        fp = svd_pseudoinverse(p.x);
        coef = fp.pinv.transpose() * p.y;
        fitted = p.x.transpose() * coef;
        bounds = stability_bounds_linear(fp, p.y);
    }
    rep.B0 = bounds.B0;
    rep.beta1_hat = bounds.beta1_hat;
    rep.beta2_hat = bounds.beta2_hat;
    rep.cond = bounds.cond;
    const double norm_s = kernel ? (sqrt_k * coef).norm() : coef.norm();

    std::vector<double> norm_si(static_cast<std::size_t>(n));
    rep.per_index_delta.resize(static_cast<std::size_t>(n));
    rep.diff_rkhs_norms.resize(static_cast<std::size_t>(n));
    rep.lemma2_rhs.resize(static_cast<std::size_t>(n));
    double rhs_sqrt_total = 0.0;
    for (Index i = 0; i < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        LooUpdateResult loo;
        if (kernel) {
            loo = use_fast_updates ? loo_pinv_kernel(k, fp, i) : loo_pinv_kernel_direct(k, i);
        } else {
            loo = use_fast_updates ? loo_pinv_linear(p.x, fp, i) : loo_pinv_linear_direct(p.x, i);
        }
        if (use_fast_updates && loo.path == LooPath::svd_fallback) {
            ++rep.fallbacks;
        }
        const Vector y_i = zero_entry(p.y, i);
        Vector coef_i;
        double pred_i = 0.0;
        if (kernel) {
            coef_i = loo.pinv_loo * y_i;
            pred_i = k.row(i).dot(coef_i);
            rep.diff_rkhs_norms[u] = solution_diff_rkhs_from_sqrt(sqrt_k, coef, coef_i);
            norm_si[u] = (sqrt_k * coef_i).norm();
        } else {
            coef_i = loo.pinv_loo.transpose() * y_i;
            pred_i = p.x.col(i).dot(coef_i);
            rep.diff_rkhs_norms[u] = (coef - coef_i).norm();
            norm_si[u] = coef_i.norm();
        }
        const double r_loo = p.y(i) - pred_i;
        const double r_full = p.y(i) - fitted(i);
        rep.per_index_delta[u] = r_loo * r_loo - r_full * r_full;
        rep.lemma2_rhs[u] = lemma2_rhs_term(rep.M_used, rep.kappa_used, norm_s, norm_si[u], rep.diff_rkhs_norms[u]);
        rhs_sqrt_total += lemma2_rhs_term(rep.M_used, rep.sqrt_kappa, norm_s, norm_si[u], rep.diff_rkhs_norms[u]);
    }
    const double nn = static_cast<double>(n);
    rep.cvloo_mean = std::accumulate(rep.per_index_delta.begin(), rep.per_index_delta.end(), 0.0) / nn;
    rep.lemma2_rhs_mean = lemma2_rhs(p.y, rep.kappa_used, rep.M_used, norm_s, norm_si, rep.diff_rkhs_norms);
    rep.lemma2_rhs_sqrt_kappa_mean = rhs_sqrt_total / nn;

    for (const double d : rep.per_index_delta) {
        rep.checks.almost_positivity = rep.checks.almost_positivity && d >= -1e-10;
    }
    rep.checks.lemma2 = rep.cvloo_mean <= rep.lemma2_rhs_mean + 1e-10;
    for (const double d : rep.diff_rkhs_norms) {
        rep.checks.perturbation_bound = rep.checks.perturbation_bound && d <= rep.beta1_hat * (1.0 + 1e-10);
    }
    return rep;
}

inline nlohmann::json to_json(const StabilityReport& r) {
    nlohmann::json j;
    j["model"] = r.model == ModelKind::kernel ? "kernel" : "linear";
    j["deltas"] = r.per_index_delta;
    j["cvloo_mean"] = r.cvloo_mean;
    j["diff_rkhs_norms"] = r.diff_rkhs_norms;
    j["B0"] = r.B0;
    j["beta1"] = r.beta1_hat;
    j["beta2"] = r.beta2_hat;
    j["lemma2_rhs"] = r.lemma2_rhs_mean;
    j["lemma2_rhs_sqrt_kappa"] = r.lemma2_rhs_sqrt_kappa_mean;
    j["kappa"] = r.kappa_used;
    j["sqrt_kappa"] = r.sqrt_kappa;
    j["M"] = r.M_used;
    j["cond"] = r.cond;
    j["fallbacks"] = r.fallbacks;
    j["checks"] = {{"almost_positivity", r.checks.almost_positivity},
                   {"lemma2", r.checks.lemma2},
                   {"perturbation_bound", r.checks.perturbation_bound}};
    return j;
}

// --- replace-one stability ------------------------------------------------

/// Draws a fresh sample (x, y) from the data distribution.
using Sampler = std::function<std::pair<Vector, double>(Rng&)>;

struct MonteCarloEstimate {
    double mean = 0.0;
    double standard_error = 0.0;
    Index draws = 0;
};

inline MonteCarloEstimate summarize(const std::vector<double>& v) {
    MonteCarloEstimate e;
    e.draws = static_cast<Index>(v.size());
    if (v.empty()) return e;
    const double n = static_cast<double>(v.size());
    e.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    if (v.size() > 1) {
        double ss = 0.0;
        for (const double x : v) ss += (x - e.mean) * (x - e.mean);
        e.standard_error = std::sqrt(ss / (n - 1.0) / n);
    }
    return e;
}

namespace detail {

/// Minimum-norm predictor fit on (x, y), evaluated at q.
inline double min_norm_predict(const LearningProblem& p, const Eigen::Ref<const Matrix>& x,
                               const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Vector>& q) {
    if (p.model == ModelKind::linear) {
        const Vector w = svd_pseudoinverse(x).pinv.transpose() * y;
        return w.dot(q);
    }
    const Vector c = svd_pseudoinverse(gram(p.kernel, x).matrix).pinv * y;
    return cross_kernel(p.kernel, q, x).row(0).dot(c);
}

}  // namespace detail

/// Monte Carlo estimate of E[V(f_S, z) − V(f_{(S_i, z)}, z)], cycling i over
/// the training indices and drawing z from the sampler.
inline MonteCarloEstimate cvro_empirical(const LearningProblem& p, const Sampler& sampler, Index trials, Rng& rng) {
    p.validate();
    if (trials < 1) {
        throw InputError("cvro_empirical: trials must be positive");
    }
    const Index n = p.x.cols();
    std::vector<double> draws;
    draws.reserve(static_cast<std::size_t>(trials));
    for (Index t = 0; t < trials; ++t) {
        const Index i = t % n;
        auto [zx, zy] = sampler(rng);
        if (zx.size() != p.x.rows()) {
            throw InputError("cvro_empirical: sampler returned a point of the wrong dimension");
        }
        Matrix xr = p.x;
        Vector yr = p.y;
        xr.col(i) = zx;
        yr(i) = zy;
        const double r_full = zy - detail::min_norm_predict(p, p.x, p.y, zx);
        const double r_repl = zy - detail::min_norm_predict(p, xr, yr, zx);
        draws.push_back(r_full * r_full - r_repl * r_repl);
    }
    return summarize(draws);
}

// --- excess risk Monte Carlo ----------------------------------------------

/// y = w*ᵀx + noise, x ~ N(0, I_d), noise ~ N(0, noise_sd²). Expected risk of
/// w is ‖w − w*‖² + noise_sd², so inf I = noise_sd².
struct LinearGaussianModel {
    Index d = 10;
    double noise_sd = 0.0;
};

struct ExcessRiskEstimate {
    MonteCarloEstimate excess_risk;  // E[I[f_{S_i}] − inf I]
    MonteCarloEstimate cvloo;        // E[V(f_{S_i}, z_i) − V(f_S, z_i)]
    MonteCarloEstimate empirical_risk;  // E[I_S[f_S]]
    double inf_risk = 0.0;
    double combined_se = 0.0;       // sqrt(se_lhs² + se_rhs²)
    double rounding_floor = 0.0;    // 1e-12 · (1 + ‖w*‖²); both sides are O(ε²) when noiseless
    bool lemma_holds = false;       // lhs ≤ rhs + 3 combined SE
    bool erm_bias_holds = false;    // E[I_S[f_S]] ≤ inf I + 3 SE
};

inline ExcessRiskEstimate excess_risk_mc(const LinearGaussianModel& model, Index n, Index trials, std::uint64_t seed) {
    if (model.d < 1 || n < 2 || trials < 2 || model.noise_sd < 0.0) {
        throw InputError("excess_risk_mc: need d >= 1, n >= 2, trials >= 2, noise_sd >= 0");
    }
    Rng model_rng = make_rng(seed, {0});
    const Vector w_star = gaussian_vector(model_rng, model.d);
    const double inf_risk = model.noise_sd * model.noise_sd;

    std::vector<double> lhs(static_cast<std::size_t>(trials));
    std::vector<double> rhs(static_cast<std::size_t>(trials));
    std::vector<double> emp(static_cast<std::size_t>(trials));
    for (Index t = 0; t < trials; ++t) {
        Rng rng = make_rng(seed, {1, static_cast<std::uint64_t>(t)});
        const Matrix x = gaussian_matrix(rng, model.d, n);
        Vector y = x.transpose() * w_star;
        if (model.noise_sd > 0.0) {
            y += model.noise_sd * gaussian_vector(rng, n);
        }
        const PseudoinverseFactorization xp = svd_pseudoinverse(x);
        const Vector w = xp.pinv.transpose() * y;
        const Vector resid = y - x.transpose() * w;
        double l = 0.0;
        double r = 0.0;
        for (Index i = 0; i < n; ++i) {
            const LooUpdateResult loo = loo_pinv_linear(x, xp, i);
            const Vector w_i = loo.pinv_loo.transpose() * zero_entry(y, i);
            l += (w_i - w_star).squaredNorm();  // I[f_{S_i}] − inf I
            const double r_loo = y(i) - x.col(i).dot(w_i);
            r += r_loo * r_loo - resid(i) * resid(i);
        }
        lhs[static_cast<std::size_t>(t)] = l / static_cast<double>(n);
        rhs[static_cast<std::size_t>(t)] = r / static_cast<double>(n);
        emp[static_cast<std::size_t>(t)] = resid.squaredNorm() / static_cast<double>(n);
    }
    ExcessRiskEstimate e;
    e.excess_risk = summarize(lhs);
    e.cvloo = summarize(rhs);
    e.empirical_risk = summarize(emp);
    e.inf_risk = inf_risk;
    e.combined_se = std::hypot(e.excess_risk.standard_error, e.cvloo.standard_error);
    e.rounding_floor = 1e-12 * (1.0 + w_star.squaredNorm());
    e.lemma_holds = e.excess_risk.mean <= e.cvloo.mean + 3.0 * e.combined_se + e.rounding_floor;
    e.erm_bias_holds =
        e.empirical_risk.mean <= inf_risk + 3.0 * e.empirical_risk.standard_error + e.rounding_floor;
    return e;
}

}  // namespace ridgeless
