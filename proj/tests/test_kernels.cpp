#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "ridgeless/kernels.hpp"
#include "ridgeless/pinv.hpp"
#include "ridgeless/random.hpp"

using namespace ridgeless;

TEST(KernelEval, RbfAtSamePointIsOne) {
    const Vector x = Vector::LinSpaced(4, -1.0, 2.0);
    EXPECT_DOUBLE_EQ(kernel_eval(KernelSpec::rbf(0.7), x, x), 1.0);
}

TEST(KernelEval, LinearOrthogonalBasis) {
    EXPECT_DOUBLE_EQ(kernel_eval(KernelSpec::linear(), Vector::Unit(3, 0), Vector::Unit(3, 1)), 0.0);
}

TEST(KernelEval, RbfScalarValue) {
    Vector x = Vector::Zero(2);
    Vector y(2);
    y << 3.0, 4.0;  // distance 5
    EXPECT_NEAR(kernel_eval(KernelSpec::rbf(5.0), x, y), 0.606530659712633, 1e-12);
    EXPECT_NEAR(kernel_eval(KernelSpec::rbf(5.0), x, y), std::exp(-0.5), 1e-15);
}

TEST(KernelEval, DimensionMismatch) {
    EXPECT_THROW(kernel_eval(KernelSpec::linear(), Vector::Zero(2), Vector::Zero(3)), InputError);
}

TEST(KernelSpec, ValidatesSigma) {
    EXPECT_THROW(KernelSpec::rbf(0.0), InputError);
    EXPECT_THROW(KernelSpec::rbf(-1.0), InputError);
    EXPECT_NO_THROW(KernelSpec::linear().validate());
    EXPECT_EQ(parse_kernel_kind("rbf"), KernelKind::rbf);
    EXPECT_EQ(parse_kernel_kind("linear"), KernelKind::linear);
    EXPECT_THROW(parse_kernel_kind("poly"), InputError);
}

TEST(Gram, LinearIsXtX) {
    Rng rng = make_rng(11);
    const Matrix x = gaussian_matrix(rng, 4, 6);
    const GramMatrix g = gram(KernelSpec::linear(), x);
    EXPECT_LE((g.matrix - x.transpose() * x).norm(), 1e-13 * g.matrix.norm());
    EXPECT_EQ(g.source_fingerprint, fingerprint(x));
}

TEST(Gram, RbfSymmetricUnitDiagonalEntriesInUnitInterval) {
    Rng rng = make_rng(12);
    const GramMatrix g = gram(KernelSpec::rbf(1.5), gaussian_matrix(rng, 3, 10));
    EXPECT_EQ(g.matrix, g.matrix.transpose());
    for (Index i = 0; i < 10; ++i) {
        EXPECT_EQ(g.matrix(i, i), 1.0);
        for (Index j = 0; j < 10; ++j) {
            EXPECT_GT(g.matrix(i, j), 0.0);
            EXPECT_LE(g.matrix(i, j), 1.0);
        }
    }
}

TEST(Gram, SinglePoint) {
    const GramMatrix g = gram(KernelSpec::rbf(5.0), Matrix::Ones(3, 1));
    ASSERT_EQ(g.size(), 1);
    EXPECT_EQ(g.matrix(0, 0), 1.0);
}

TEST(Gram, RbfOnDistinctPointsIsFullRank) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        Rng rng = make_rng(13, {s});
        const Index n = 5 + static_cast<Index>(s * 3);  // up to 32
        const GramMatrix g = gram(KernelSpec::rbf(1.0), gaussian_matrix(rng, 5, n));
        EXPECT_EQ(svd_pseudoinverse(g.matrix).retained_rank, n);
    }
}

TEST(Gram, CrossKernelShapeAndValues) {
    Rng rng = make_rng(14);
    const Matrix x = gaussian_matrix(rng, 3, 4);
    const Matrix c = gaussian_matrix(rng, 3, 2);
    const KernelSpec spec = KernelSpec::rbf(2.0);
    const Matrix r = cross_kernel(spec, x, c);
    ASSERT_EQ(r.rows(), 4);
    ASSERT_EQ(r.cols(), 2);
    EXPECT_DOUBLE_EQ(r(3, 1), kernel_eval(spec, x.col(3), c.col(1)));
    EXPECT_THROW(cross_kernel(spec, x, Matrix::Zero(2, 2)), InputError);
}

TEST(KappaBound, RbfIsOne) {
    Rng rng = make_rng(15);
    EXPECT_EQ(kappa_bound(KernelSpec::rbf(0.3), gaussian_matrix(rng, 4, 7)), 1.0);
}

TEST(KappaBound, UnitColumnsAtMostOne) {
    Rng rng = make_rng(16);
    Matrix x = gaussian_matrix(rng, 5, 8);
    x.colwise().normalize();
    EXPECT_LE(kappa_bound(KernelSpec::linear(), x), 1.0 + 1e-15);
}

TEST(KappaBound, LinearMatchesExhaustivePairScan) {
    for (std::uint64_t s = 0; s < 5; ++s) {
        Rng rng = make_rng(17, {s});
        const Matrix x = gaussian_matrix(rng, 6, 9);
        EXPECT_NEAR(kappa_bound(KernelSpec::linear(), x), oracle::brute_force_linear_kappa(x), 1e-12);
    }
}
