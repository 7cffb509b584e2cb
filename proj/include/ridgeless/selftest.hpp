#pragma once

// Invariant suites run by `ridgeless selftest`: Penrose conditions, agreement
// of the update formulas with direct recomputation, and the stability bound
// inequalities. Sizes are kept small so the whole run takes a few seconds.

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "ridgeless/config.hpp"
#include "ridgeless/experiments.hpp"
#include "ridgeless/loo_updates.hpp"
#include "ridgeless/pinv.hpp"
#include "ridgeless/random.hpp"
#include "ridgeless/stability.hpp"

namespace ridgeless {

struct SelfTestResult {
    std::string name;
    bool passed = false;
    Index cases = 0;
    double worst = 0.0;  // largest residual seen (suite specific)
    std::string detail;
};

namespace detail {

/// Random matrix with requested rank (rank ≤ min(rows, cols)).
inline Matrix random_rank_matrix(Rng& rng, Index rows, Index cols, Index rank) {
    if (rank <= 0) return Matrix::Zero(rows, cols);
    return gaussian_matrix(rng, rows, rank) * gaussian_matrix(rng, rank, cols);
}

inline std::uniform_int_distribution<Index> dims(Index lo, Index hi) {
    return std::uniform_int_distribution<Index>(lo, hi);
}

}  // namespace detail

inline SelfTestResult selftest_penrose(std::uint64_t seed, Index cases) {
    SelfTestResult r{"penrose", true, cases, 0.0, {}};
    for (Index c = 0; c < cases; ++c) {
        Rng rng = make_rng(seed, {101, static_cast<std::uint64_t>(c)});
        const Index rows = detail::dims(1, 40)(rng);
        const Index cols = detail::dims(1, 40)(rng);
        const Index full = std::min(rows, cols);
        const Index rank = c % 2 == 0 ? full : detail::dims(0, full)(rng);
        const Matrix m = detail::random_rank_matrix(rng, rows, cols, rank);
        const double res = penrose_residuals(m, svd_pseudoinverse(m).pinv).max();
        r.worst = std::max(r.worst, res);
    }
    r.passed = r.worst <= 1e-9;
    return r;
}

inline SelfTestResult selftest_loo_equivalence(std::uint64_t seed, Index cases) {
    SelfTestResult r{"loo-oracle-equivalence", true, 2 * cases, 0.0, {}};
    Index fallbacks = 0;
    for (Index c = 0; c < cases; ++c) {
        Rng rng = make_rng(seed, {202, static_cast<std::uint64_t>(c)});
        // rbf Gram on well-separated points: full rank.
        const Index n = detail::dims(2, 25)(rng);
        const Matrix x = gaussian_matrix(rng, 5, n);
        const Matrix k = gram(KernelSpec::rbf(1.0), x).matrix;
        const PseudoinverseFactorization kp = svd_pseudoinverse(k);
        const Index i = detail::dims(0, n - 1)(rng);
        const Matrix direct = loo_pinv_kernel_direct(k, i).pinv_loo;
        const LooUpdateResult fast = loo_pinv_kernel(k, kp, i);
        const LooUpdateResult two = loo_pinv_kernel_two_step(k, kp, i);
        fallbacks += (fast.path == LooPath::svd_fallback) + (two.path == LooPath::svd_fallback);
        r.worst = std::max({r.worst, relative_frobenius(fast.pinv_loo, direct), relative_frobenius(two.pinv_loo, direct)});

        const Index ln = detail::dims(2, 20)(rng);
        const Index ld = detail::dims(ln, 40)(rng);
        const Matrix lx = gaussian_matrix(rng, ld, ln);
        const PseudoinverseFactorization lxp = svd_pseudoinverse(lx);
        const Index li = detail::dims(0, ln - 1)(rng);
        const LooUpdateResult lin = loo_pinv_linear(lx, lxp, li);
        fallbacks += lin.path == LooPath::svd_fallback;
        r.worst = std::max(r.worst, relative_frobenius(lin.pinv_loo, loo_pinv_linear_direct(lx, li).pinv_loo));
    }
    r.passed = r.worst <= 1e-8 && fallbacks == 0;
    if (fallbacks) r.detail = std::to_string(fallbacks) + " unexpected SVD fallbacks";
    return r;
}

inline SelfTestResult selftest_projectors(std::uint64_t seed, Index cases) {
    SelfTestResult r{"projector-identities", true, 2 * cases, 0.0, {}};
    for (Index c = 0; c < cases; ++c) {
        Rng rng = make_rng(seed, {303, static_cast<std::uint64_t>(c)});
        const Index n = detail::dims(2, 25)(rng);
        const Matrix k = gram(KernelSpec::rbf(1.0), gaussian_matrix(rng, 5, n)).matrix;
        const Index i = detail::dims(0, n - 1)(rng);
        for (const auto& id : projector_identities_kernel(k, svd_pseudoinverse(k), i).identities) {
            r.worst = std::max(r.worst, id.residual);
        }
        const Index ln = detail::dims(2, 20)(rng);
        const Matrix x = gaussian_matrix(rng, detail::dims(ln, 40)(rng), ln);
        for (const auto& id : projector_identities_linear(x, svd_pseudoinverse(x), i % ln).identities) {
            r.worst = std::max(r.worst, id.residual);
        }
    }
    r.passed = r.worst <= 1e-8;
    return r;
}

inline SelfTestResult selftest_bounds(std::uint64_t seed, Index cases) {
    SelfTestResult r{"stability-bounds", true, cases, 0.0, {}};
    Index violations = 0;
    for (Index c = 0; c < cases; ++c) {
        Rng rng = make_rng(seed, {404, static_cast<std::uint64_t>(c)});
        LearningProblem p;
        const Index n = detail::dims(3, 20)(rng);
        if (c % 2 == 0) {
            p.model = ModelKind::kernel;
            p.kernel = KernelSpec::rbf(1.0);
            p.x = gaussian_matrix(rng, 5, n);
        } else {
            p.model = ModelKind::linear;
            p.x = gaussian_matrix(rng, detail::dims(n, 30)(rng), n);  // n <= d: interpolating regime
        }
        p.y = gaussian_vector(rng, n);
        const StabilityReport fast = cvloo_empirical(p, true);
        const StabilityReport direct = cvloo_empirical(p, false);
        violations += !fast.checks.all();
        r.worst = std::max(r.worst, report_discrepancy(fast, direct));
    }
    r.passed = violations == 0 && r.worst <= 1e-8;
    if (violations) r.detail = std::to_string(violations) + " datasets violated a bound";
    return r;
}

/// Runs every suite; `cases` scales each one.
inline std::vector<SelfTestResult> run_selftest(std::uint64_t seed = 42, Index cases = 20) {
    return {selftest_penrose(seed, 2 * cases), selftest_loo_equivalence(seed, cases), selftest_projectors(seed, cases),
            selftest_bounds(seed, cases)};
}

inline std::string format_selftest(const SelfTestResult& r) {
    std::ostringstream out;
    out << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << "  cases=" << r.cases << "  worst=" << format_real(r.worst);
    if (!r.detail.empty()) out << "  (" << r.detail << ")";
    return out.str();
}

}  // namespace ridgeless
