#include <cmath>
#include <complex>
#include <random>

#include <gtest/gtest.h>

#include "avgtrack/linalg.hpp"
#include "support.hpp"

using namespace avgtrack;
using testsupport::lyapunov_quadrature;
using testsupport::random_hurwitz;
using testsupport::to_eigen;

namespace {

void expect_mat_near(const Mat& a, const Mat& b, double tol) {
    ASSERT_EQ(a.rows(), b.rows());
    ASSERT_EQ(a.cols(), b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) EXPECT_NEAR(a(r, c), b(r, c), tol) << "at (" << r << "," << c << ")";
}

double lyapunov_residual(const Mat& f, const Mat& w, const Mat& x) {
    return frobenius_norm(f.transpose() * x + x * f + w);
}

}  // namespace

TEST(Mat, RejectsNonFiniteAndBadShapes) {
    EXPECT_THROW(Mat(2, 2, std::vector<double>{1, 2, 3}), Error);
    EXPECT_THROW(Mat(1, 2, std::vector<double>{1, NAN}), Error);
    EXPECT_THROW(Mat(2, 2, INFINITY), Error);
    EXPECT_THROW((Mat{{1, 2}, {3}}), Error);
    const Mat m{{1, 2}, {3, 4}};
    EXPECT_EQ(m.size(), 4u);
    EXPECT_EQ(m(1, 0), 3.0);
}

TEST(Mat, ProductAndKron) {
    const Mat a{{1, 2}, {3, 4}};
    const Mat b{{0, 1}, {1, 0}};
    EXPECT_EQ(a * b, (Mat{{2, 1}, {4, 3}}));
    const Mat k = kron(Mat::identity(2), a);
    EXPECT_EQ(k.rows(), 4u);
    EXPECT_EQ(k(2, 3), 2.0);
    EXPECT_EQ(k(0, 2), 0.0);
    EXPECT_THROW(a * Mat(3, 1), Error);
}

TEST(SymEigen, SpecExamples) {
    auto e = sym_eigen(Mat::identity(3));
    EXPECT_EQ(e.values, (Vec{1, 1, 1}));

    e = sym_eigen(Mat{{3, 0, 0}, {0, 1, 0}, {0, 0, 2}});
    EXPECT_EQ(e.values, (Vec{1, 2, 3}));

    e = sym_eigen(Mat{{1, -1}, {-1, 1}});
    EXPECT_NEAR(e.values[0], 0.0, 1e-14);
    EXPECT_NEAR(e.values[1], 2.0, 1e-14);
}

TEST(SymEigen, RejectsBadInput) {
    try {
        sym_eigen(Mat(2, 3));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::input);
    }
    EXPECT_THROW(sym_eigen(Mat{{1, 2}, {0, 1}}), Error);
}

TEST(SymEigen, RandomMatricesMatchOracleAndInvariants) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + trial % 8;
        const Mat s = testsupport::random_symmetric(rng, n);
        const auto e = sym_eigen(s);
        const double scale = frobenius_norm(s);

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> oracle(to_eigen(s));
        for (std::size_t k = 0; k < n; ++k) {
            EXPECT_NEAR(e.values[k], oracle.eigenvalues()(static_cast<Eigen::Index>(k)), 1e-10 * (1 + scale));
            if (k > 0) {
                EXPECT_LE(e.values[k - 1], e.values[k]);
            }
            Vec v(n);
            for (std::size_t r = 0; r < n; ++r) v[r] = e.vectors(r, k);
            const Vec sv = s * v;
            double res = 0.0;
            for (std::size_t r = 0; r < n; ++r) res += (sv[r] - e.values[k] * v[r]) * (sv[r] - e.values[k] * v[r]);
            EXPECT_LE(std::sqrt(res), 1e-9 * scale);
        }
        const Mat gram = e.vectors.transpose() * e.vectors;
        EXPECT_LE(frobenius_norm(gram - Mat::identity(n)), 1e-9);
    }
}

TEST(SolveLinear, SingularSystemIsNumericalError) {
    try {
        solve_linear(Mat{{1, 2}, {2, 4}}, Vec{1, 1});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::numerical);
    }
    const Vec x = solve_linear(Mat{{2, 1}, {1, 3}}, Vec{3, 5});
    EXPECT_NEAR(x[0], 0.8, 1e-15);
    EXPECT_NEAR(x[1], 1.4, 1e-15);
}

TEST(Lyapunov, SpecExamples) {
    expect_mat_near(solve_lyapunov(Mat::identity(2) * -1.0, Mat::identity(2) * 2.0), Mat::identity(2), 1e-14);
    expect_mat_near(solve_lyapunov(Mat{{-2}}, Mat{{4}}), Mat{{1}}, 1e-14);

    // F = [[0,1],[-1,-2]], W = I: the three symmetric unknowns (a, b, c) satisfy
    // -2b + 1 = 0, a - 2b - c = 0, 2b - 4c + 1 = 0 → b = 1/2, c = 1/2, a = 3/2.
    const Mat f{{0, 1}, {-1, -2}};
    const Mat x = solve_lyapunov(f, Mat::identity(2));
    expect_mat_near(x, Mat{{1.5, 0.5}, {0.5, 0.5}}, 1e-13);
    EXPECT_LE(lyapunov_residual(f, Mat::identity(2), x), 1e-12);
}

TEST(Lyapunov, RejectsNonHurwitzAndAsymmetric) {
    EXPECT_THROW(solve_lyapunov(Mat{{1}}, Mat{{1}}), Error);
    EXPECT_THROW(solve_lyapunov(Mat::identity(2) * -1.0, Mat{{1, 2}, {0, 1}}), Error);
    EXPECT_THROW(solve_lyapunov(Mat::identity(2) * -1.0, Mat::identity(3)), Error);
}

TEST(Lyapunov, RandomResidualBound) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + trial % 6;
        const Mat f = random_hurwitz(rng, n);
        const Mat g = testsupport::random_mat(rng, n, n);
        const Mat w = symmetrize(g.transpose() * g + Mat::identity(n) * 0.01);
        const Mat x = solve_lyapunov(f, w);
        EXPECT_TRUE(is_symmetric(x, 1e-14));
        EXPECT_LE(lyapunov_residual(f, w, x), 1e-9 * (frobenius_norm(f) * frobenius_norm(x) + frobenius_norm(w)));
    }
}

TEST(Lyapunov, MatchesQuadratureOracle) {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 6; ++trial) {
        const std::size_t n = 1 + trial % 3;
        const Mat f = random_hurwitz(rng, n);
        const Mat g = testsupport::random_mat(rng, n, n);
        const Mat w = symmetrize(g.transpose() * g + Mat::identity(n) * 0.01);
        const Eigen::MatrixXd oracle = lyapunov_quadrature(to_eigen(f), to_eigen(w), 40.0, 1e-3);
        const Mat x = solve_lyapunov(f, w);
        EXPECT_LE((to_eigen(x) - oracle).cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial;
    }
}

TEST(Stabilizable, SpecExamples) {
    EXPECT_TRUE(is_stabilizable(Mat{{0, 1}, {-1, -2}}, Mat{{0}, {1}}));
    EXPECT_FALSE(is_stabilizable(Mat{{1}}, Mat{{0}}));
    EXPECT_TRUE(is_stabilizable(Mat{{1}}, Mat{{1}}));
    EXPECT_THROW(is_stabilizable(Mat{{1}}, Mat{{1}, {1}}), Error);
    EXPECT_THROW(is_stabilizable(Mat(1, 2), Mat{{1}}), Error);
}

TEST(Stabilizable, ComplexModesBothFormsAgree) {
    // rotation with no input: marginal complex pair, not stabilizable
    const Mat rot{{0, 1}, {-1, 0}};
    EXPECT_FALSE(is_stabilizable(rot, Mat{{0}, {0}}, PbhForm::complex_arithmetic));
    EXPECT_FALSE(is_stabilizable(rot, Mat{{0}, {0}}, PbhForm::realified));
    EXPECT_TRUE(is_stabilizable(rot, Mat{{0}, {1}}, PbhForm::complex_arithmetic));
    EXPECT_TRUE(is_stabilizable(rot, Mat{{0}, {1}}, PbhForm::realified));

    // unstable complex pair 1 ± 2i plus a stable uncontrolled mode
    const Mat a{{1, 2, 0}, {-2, 1, 0}, {0, 0, -3}};
    EXPECT_TRUE(is_stabilizable(a, Mat{{1}, {0}, {0}}, PbhForm::complex_arithmetic));
    EXPECT_TRUE(is_stabilizable(a, Mat{{1}, {0}, {0}}, PbhForm::realified));
    EXPECT_FALSE(is_stabilizable(a, Mat{{0}, {0}, {1}}, PbhForm::complex_arithmetic));
    EXPECT_FALSE(is_stabilizable(a, Mat{{0}, {0}, {1}}, PbhForm::realified));

    const std::complex<double> lam(1.0, 2.0);
    EXPECT_EQ(2 * pbh_rank_complex(a, Mat{{1}, {0}, {0}}, lam), pbh_rank_realified(a, Mat{{1}, {0}, {0}}, lam));

    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + trial % 5;
        const Mat am = testsupport::random_mat(rng, n, n);
        Mat bm = testsupport::random_mat(rng, n, 1);
        if (trial % 3 == 0) bm = Mat(n, 1);
        EXPECT_EQ(is_stabilizable(am, bm, PbhForm::complex_arithmetic), is_stabilizable(am, bm, PbhForm::realified));
    }
}

TEST(Care, ScalarExamples) {
    expect_mat_near(solve_care(Mat{{0}}, Mat{{1}}, Mat{{1}}), Mat{{1}}, 1e-12);
    expect_mat_near(solve_care(Mat{{1}}, Mat{{1}}, Mat{{1}}), Mat{{1 + std::sqrt(2.0)}}, 1e-12);
}

TEST(Care, TwoStatePlantClosedForm) {
    // With P = [[a, b], [b, c]] the entries give b² + 2b − 1 = 0, c² + 4c − 2b − 1 = 0
    // and a = 2b + c + bc, so b = c = √2 − 1 and a = √2 for the positive definite root.
    const double r2 = std::sqrt(2.0);
    const Mat a{{0, 1}, {-1, -2}};
    const Mat b{{0}, {1}};
    const Mat p = solve_care(a, b, Mat::identity(2));
    expect_mat_near(p, Mat{{r2, r2 - 1}, {r2 - 1, r2 - 1}}, 1e-12);
    EXPECT_LE(care_residual(a, b, Mat::identity(2), p), 1e-12);
}

TEST(Care, Errors) {
    try {
        solve_care(Mat{{1}}, Mat{{0}}, Mat{{1}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::design);
    }
    try {
        solve_care(Mat{{1}}, Mat{{1}}, Mat{{-1}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::input);
    }
    EXPECT_THROW(solve_care(Mat{{1}}, Mat{{1}}, Mat{{1, 0}, {0, 1}}), Error);
}

TEST(Care, RandomStabilizableInstances) {
    std::mt19937_64 rng(19);
    int solved = 0;
    while (solved < 50) {
        const std::size_t n = 1 + static_cast<std::size_t>(solved) % 5;
        const std::size_t p = 1 + static_cast<std::size_t>(solved) % 2;
        const Mat a = testsupport::random_mat(rng, n, n);
        const Mat b = testsupport::random_mat(rng, n, p);
        if (!is_stabilizable(a, b)) continue;
        const Mat q = testsupport::random_spd(rng, n);
        const Mat sol = solve_care(a, b, q);
        ++solved;

        EXPECT_LE(care_residual(a, b, q, sol), 1e-8);
        EXPECT_TRUE(is_symmetric(sol, 1e-12));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> pe(to_eigen(sol));
        EXPECT_GT(pe.eigenvalues().minCoeff(), 0.0);
        const Eigen::MatrixXd closed = to_eigen(a) - to_eigen(b) * to_eigen(b).transpose() * to_eigen(sol);
        Eigen::EigenSolver<Eigen::MatrixXd> ce(closed);
        EXPECT_LT(ce.eigenvalues().real().maxCoeff(), 0.0);
    }
}
