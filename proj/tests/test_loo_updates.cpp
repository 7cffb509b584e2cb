#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "ridgeless/loo_updates.hpp"
#include "ridgeless/random.hpp"

using namespace ridgeless;

namespace {

Matrix rbf_gram(std::uint64_t seed, Index n, Index d = 5, double sigma = 1.0) {
    Rng rng = make_rng(seed);
    return gram(KernelSpec::rbf(sigma), gaussian_matrix(rng, d, n)).matrix;
}

Matrix identity_without(Index n, Index i) {
    Matrix m = Matrix::Identity(n, n);
    m(i, i) = 0.0;
    return m;
}

}  // namespace

TEST(LooVectors, SingleSampleZeroes) {
    const Matrix k = Matrix::Constant(1, 1, 2.0);
    const LooVectors v = build_loo_vectors(k, 0);
    const Matrix kstar = k + v.a * v.b.transpose();
    const Matrix ksi = kstar + v.b * v.a_star.transpose();
    EXPECT_EQ(ksi, Matrix::Zero(1, 1));
}

TEST(LooVectors, IdentityIndexTwo) {
    const Matrix k = Matrix::Identity(4, 4);
    const LooVectors v = build_loo_vectors(k, 1);
    const Matrix ksi = k + v.a * v.b.transpose() + v.b * v.a_star.transpose();
    EXPECT_EQ(ksi, identity_without(4, 1));
}

TEST(LooVectors, RankTwoReconstructionMatchesZeroing) {
    const Matrix k = rbf_gram(41, 12);
    for (Index i = 0; i < 12; ++i) {
        const LooVectors v = build_loo_vectors(k, i);
        EXPECT_EQ(v.b.sum(), 1.0);
        EXPECT_EQ(v.b(i), 1.0);
        EXPECT_EQ(v.a, -k.col(i));
        const Matrix kstar = k + v.a * v.b.transpose();
        EXPECT_EQ(kstar.col(i).norm(), 0.0);
        const Matrix ksi = kstar + v.b * v.a_star.transpose();
        EXPECT_LE((ksi - oracle::zeroed(k, i)).norm(), 1e-14);
    }
}

TEST(LooVectors, IndexOutOfRange) {
    EXPECT_THROW(build_loo_vectors(Matrix::Identity(3, 3), 3), InputError);
    EXPECT_THROW(build_loo_vectors(Matrix::Identity(3, 3), -1), InputError);
    EXPECT_THROW(build_loo_vectors(Matrix::Zero(2, 3), 0), InputError);
}

TEST(MeyerStep1, IdentityHandAlgebra) {
    const Matrix k = Matrix::Identity(3, 3);
    const LooVectors v = build_loo_vectors(k, 0);
    MeyerStep1 s;
    const Matrix out = meyer_t6_update(k, k, v.a, v.b, {}, &s);
    EXPECT_EQ(s.k, -Vector::Unit(3, 0));
    EXPECT_EQ(s.h, Vector::Unit(3, 0));
    EXPECT_NEAR(s.beta, 0.0, 1e-15);
    EXPECT_TRUE(out.isApprox(identity_without(3, 0), 1e-15));
}

TEST(MeyerStep1, RandomGramMatchesSvdOfPerturbed) {
    Rng rng = make_rng(42);
    const Matrix p = gaussian_matrix(rng, 6, 6);
    const Matrix k = p * p.transpose();
    const Matrix kp = svd_pseudoinverse(k).pinv;
    for (Index i = 0; i < 6; ++i) {
        const LooVectors v = build_loo_vectors(k, i);
        const Matrix out = meyer_t6_update(k, kp, v.a, v.b);
        const Matrix direct = svd_pseudoinverse(k + v.a * v.b.transpose()).pinv;
        EXPECT_LE(oracle::rel(out, direct), 1e-8) << "i=" << i;
    }
}

TEST(MeyerStep1, NonzeroBetaRejected) {
    const Matrix k = Matrix::Identity(3, 3);
    EXPECT_THROW(meyer_t6_update(k, k, Vector::Unit(3, 0), Vector::Unit(3, 1)), PreconditionError);
}

TEST(MeyerStep2, IdentityTwoStep) {
    const Matrix k = Matrix::Identity(3, 3);
    const LooUpdateResult r = loo_pinv_kernel_two_step(k, svd_pseudoinverse(k), 0);
    EXPECT_EQ(r.path, LooPath::two_step_meyer);
    EXPECT_TRUE(r.pinv_loo.isApprox(identity_without(3, 0), 1e-14));
}

TEST(MeyerStep2, IntermediateRelations) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const Index n = 3 + static_cast<Index>(s * 3);
        const Matrix k = rbf_gram(43 + s, n);
        const auto kp = svd_pseudoinverse(k);
        ASSERT_TRUE(kp.full_rank());
        for (Index i = 0; i < n; i += 2) {
            const LooUpdateResult r = loo_pinv_kernel_two_step(k, kp, i);
            ASSERT_EQ(r.path, LooPath::two_step_meyer) << r.fallback_reason;
            const MeyerStep2& m = *r.step2;
            EXPECT_NEAR(m.meyer_phi, m.meyer_lambda, 1e-8);
            EXPECT_NEAR(m.meyer_eta, 1.0 - m.meyer_lambda, 1e-8);
            EXPECT_NEAR(m.meyer_nu, m.meyer_lambda, 1e-8);
            EXPECT_GE(m.meyer_lambda, 0.0);
            EXPECT_LE(m.meyer_lambda, 1.0 + 1e-10);
            EXPECT_LE(m.simplified_form_residual, 1e-8);
            EXPECT_LE(oracle::rel(r.pinv_loo, svd_pseudoinverse(oracle::zeroed(k, i)).pinv), 1e-8);
        }
    }
}

TEST(MeyerStep2, ColumnSpaceMemberRejected) {
    const Matrix k = Matrix::Identity(2, 2);
    EXPECT_THROW(meyer_t5_update(k, k, Vector::Unit(2, 0), Vector::Unit(2, 1)), PreconditionError);
}

TEST(LooKernel, IdentityClosedForm) {
    const Matrix k = Matrix::Identity(5, 5);
    for (Index i = 0; i < 5; ++i) {
        const LooUpdateResult r = loo_pinv_kernel(k, svd_pseudoinverse(k), i);
        EXPECT_EQ(r.path, LooPath::closed_form);
        EXPECT_TRUE(r.pinv_loo.isApprox(identity_without(5, i), 1e-15));
    }
}

TEST(LooKernel, MatchesSvdAndTwoStepAtThirty) {
    const Matrix k = rbf_gram(44, 30);
    const auto kp = svd_pseudoinverse(k);
    for (Index i = 0; i < 30; ++i) {
        const LooUpdateResult fast = loo_pinv_kernel(k, kp, i);
        ASSERT_EQ(fast.path, LooPath::closed_form);
        const Matrix direct = svd_pseudoinverse(oracle::zeroed(k, i)).pinv;
        EXPECT_LE(oracle::rel(fast.pinv_loo, direct), 1e-8);
        EXPECT_LE(oracle::rel(fast.pinv_loo, loo_pinv_kernel_two_step(k, kp, i).pinv_loo), 1e-8);
        EXPECT_LE((fast.pinv_loo * Vector::Unit(30, i)).norm(), 1e-10);
    }
}

TEST(LooKernel, IntermediatesFilledOnRequest) {
    const Matrix k = rbf_gram(45, 8);
    LooOptions opt;
    opt.intermediates = true;
    const LooUpdateResult r = loo_pinv_kernel(k, svd_pseudoinverse(k), 3, opt);
    ASSERT_TRUE(r.step1 && r.step2);
    EXPECT_LE((r.step1->k + Vector::Unit(8, 3)).norm(), 1e-8);  // k = −b
    EXPECT_NEAR(r.step2->meyer_nu, r.step2->meyer_lambda, 1e-8);
    EXPECT_FALSE(loo_pinv_kernel(k, svd_pseudoinverse(k), 3).step1.has_value());
}

TEST(LooKernel, RankDeficientFallsBack) {
    Rng rng = make_rng(46);
    Matrix x = gaussian_matrix(rng, 3, 6);
    x.col(4) = x.col(2);
    const Matrix k = gram(KernelSpec::rbf(1.0), x).matrix;
    const auto kp = svd_pseudoinverse(k);
    ASSERT_FALSE(kp.full_rank());
    const LooUpdateResult r = loo_pinv_kernel(k, kp, 2);
    EXPECT_EQ(r.path, LooPath::svd_fallback);
    EXPECT_FALSE(r.fallback_reason.empty());
    EXPECT_LE(penrose_residuals(oracle::zeroed(k, 2), r.pinv_loo).max(), 1e-9);
}

TEST(LooKernel, DirectPathIsSvdOfZeroed) {
    const Matrix k = rbf_gram(47, 7);
    const LooUpdateResult r = loo_pinv_kernel_direct(k, 4);
    EXPECT_EQ(r.path, LooPath::svd_fallback);
    EXPECT_LE(penrose_residuals(oracle::zeroed(k, 4), r.pinv_loo).max(), 1e-10);
}

TEST(LooLinear, IdentityZeroesColumn) {
    const Matrix x = Matrix::Identity(3, 3);
    const LooUpdateResult r = loo_pinv_linear(x, svd_pseudoinverse(x), 1);
    EXPECT_EQ(r.path, LooPath::closed_form);
    EXPECT_TRUE(r.pinv_loo.isApprox(identity_without(3, 1), 1e-15));
}

TEST(LooLinear, TallGaussianMatchesSvd) {
    Rng rng = make_rng(48);
    const Matrix x = gaussian_matrix(rng, 50, 10);
    const auto xp = svd_pseudoinverse(x);
    for (Index i = 0; i < 10; ++i) {
        const LooUpdateResult r = loo_pinv_linear(x, xp, i);
        ASSERT_EQ(r.path, LooPath::closed_form);
        EXPECT_LE(oracle::rel(r.pinv_loo, svd_pseudoinverse(oracle::zeroed_column(x, i)).pinv), 1e-8);
    }
}

TEST(LooLinear, OperatorNormBound) {
    LooOptions opt;
    opt.norm_bound = true;
    for (std::uint64_t t = 0; t < 100; ++t) {
        Rng rng = make_rng(49, {t});
        const Index n = 2 + static_cast<Index>(t % 12);
        const Matrix x = gaussian_matrix(rng, n + static_cast<Index>(t % 7), n);
        const auto xp = svd_pseudoinverse(x);
        const LooUpdateResult r = loo_pinv_linear(x, xp, static_cast<Index>(t) % n, opt);
        ASSERT_TRUE(r.diff_op_norm && r.pinv_op_norm);
        EXPECT_LE(*r.diff_op_norm, *r.pinv_op_norm * (1.0 + 1e-10));
        EXPECT_NEAR(*r.diff_op_norm, operator_norm(r.pinv_loo - xp.pinv), 1e-12 * *r.pinv_op_norm);
    }
}

TEST(LooLinear, WideMatrixFallsBack) {
    Rng rng = make_rng(50);
    const Matrix x = gaussian_matrix(rng, 3, 6);  // rank 3 < n
    const LooUpdateResult r = loo_pinv_linear(x, svd_pseudoinverse(x), 0);
    EXPECT_EQ(r.path, LooPath::svd_fallback);
    EXPECT_LE(oracle::rel(r.pinv_loo, svd_pseudoinverse(oracle::zeroed_column(x, 0)).pinv), 1e-12);
}

TEST(Projectors, IdentityGram) {
    const Matrix k = Matrix::Identity(4, 4);
    const auto rep = projector_identities_kernel(k, svd_pseudoinverse(k), 2);
    EXPECT_TRUE(rep.passed());
    // K†K − kk† = I − e_i e_iᵀ
    const Vector kv = -Vector::Unit(4, 2);
    EXPECT_TRUE((Matrix::Identity(4, 4) - kv * kv.transpose() / kv.squaredNorm()).isApprox(identity_without(4, 2)));
}

TEST(Projectors, RandomGramAndLinear) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const Index n = 3 + static_cast<Index>(4 * s);
        const Matrix k = rbf_gram(51 + s, n);
        const auto kr = projector_identities_kernel(k, svd_pseudoinverse(k), n / 2);
        EXPECT_EQ(kr.identities.size(), 3u);
        for (const auto& id : kr.identities) EXPECT_LE(id.residual, 1e-8) << id.name;

        Rng rng = make_rng(52, {s});
        const Matrix x = gaussian_matrix(rng, n + 5, n);
        const auto lr = projector_identities_linear(x, svd_pseudoinverse(x), n - 1);
        EXPECT_TRUE(lr.passed()) << lr.identities[0].residual;
        // oracle projector of the zeroed matrix from QR
        const Matrix xi = oracle::zeroed_column(x, n - 1);
        const Matrix xi_p = loo_pinv_linear(x, svd_pseudoinverse(x), n - 1).pinv_loo;
        EXPECT_LE((xi * xi_p - oracle::range_projector(xi)).norm(), 1e-8);
    }
}
