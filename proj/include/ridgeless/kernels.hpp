#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "ridgeless/pinv.hpp"

namespace ridgeless {

enum class KernelKind { linear, rbf };

inline std::string to_string(KernelKind k) {
    return k == KernelKind::linear ? "linear" : "rbf";
}

inline KernelKind parse_kernel_kind(std::string_view s) {
    if (s == "linear") return KernelKind::linear;
    if (s == "rbf") return KernelKind::rbf;
    throw InputError("unknown kernel '" + std::string(s) + "' (expected linear or rbf)");
}

struct KernelSpec {
    KernelKind kind = KernelKind::rbf;
    double sigma = 5.0;  // rbf bandwidth; ignored for linear

    static KernelSpec linear() { return {KernelKind::linear, 1.0}; }
    static KernelSpec rbf(double sigma) {
        KernelSpec k{KernelKind::rbf, sigma};
        k.validate();
        return k;
    }

    void validate() const {
        if (kind == KernelKind::rbf && !(sigma > 0.0 && std::isfinite(sigma))) {
            throw InputError("rbf kernel requires sigma > 0");
        }
    }

    friend bool operator==(const KernelSpec& a, const KernelSpec& b) {
        return a.kind == b.kind && (a.kind == KernelKind::linear || a.sigma == b.sigma);
    }
};

/// Linear: ⟨x, x′⟩. RBF: exp(−‖x − x′‖² / (2σ²)).
inline double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const Vector>& x,
                          const Eigen::Ref<const Vector>& xp) {
    if (x.size() != xp.size()) {
        throw InputError("kernel_eval: dimension mismatch");
    }
    if (spec.kind == KernelKind::linear) {
        return x.dot(xp);
    }
    spec.validate();
    return std::exp(-(x - xp).squaredNorm() / (2.0 * spec.sigma * spec.sigma));
}

struct GramMatrix {
    Matrix matrix;
    KernelSpec kernel;
    std::uint64_t source_fingerprint = 0;

    [[nodiscard]] Index size() const { return matrix.rows(); }
};

/// n×n Gram of the columns of X (d×n). One triangle is evaluated and mirrored,
/// so the result is exactly symmetric.
inline GramMatrix gram(const KernelSpec& spec, const Eigen::Ref<const Matrix>& x) {
    spec.validate();
    require_finite(x, "gram");
    const Index n = x.cols();
    if (n < 1) {
        throw InputError("gram: need at least one sample");
    }
    GramMatrix g;
    g.kernel = spec;
    g.source_fingerprint = fingerprint(x);
    g.matrix.resize(n, n);
    for (Index j = 0; j < n; ++j) {
        for (Index i = j; i < n; ++i) {
            const double v = (i == j && spec.kind == KernelKind::rbf) ? 1.0 : kernel_eval(spec, x.col(i), x.col(j));
            g.matrix(i, j) = v;
            g.matrix(j, i) = v;
        }
    }
    return g;
}

/// Rectangular kernel matrix R(i, j) = K(x_i, c_j) for columns of X (d×n) and
/// C (d×m). Used for predictions and for RBF design matrices.
inline Matrix cross_kernel(const KernelSpec& spec, const Eigen::Ref<const Matrix>& x,
                           const Eigen::Ref<const Matrix>& c) {
    spec.validate();
    if (x.rows() != c.rows()) {
        throw InputError("cross_kernel: dimension mismatch");
    }
    Matrix r(x.cols(), c.cols());
    for (Index j = 0; j < c.cols(); ++j) {
        for (Index i = 0; i < x.cols(); ++i) {
            r(i, j) = kernel_eval(spec, x.col(i), c.col(j));
        }
    }
    return r;
}

/// Empirical κ with K(x, x′) ≤ κ: 1 for rbf, max |⟨x_i, x_j⟩| over sample
/// pairs for linear. By Cauchy-Schwarz the maximum sits on the diagonal.
inline double kappa_bound(const KernelSpec& spec, const Eigen::Ref<const Matrix>& x) {
    if (spec.kind == KernelKind::rbf) {
        return 1.0;
    }
    double k = 0.0;
    for (Index i = 0; i < x.cols(); ++i) {
        k = std::max(k, x.col(i).squaredNorm());
    }
    return k;
}

}  // namespace ridgeless
