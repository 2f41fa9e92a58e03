#pragma once

// Dense kernels behind the gain design: symmetric eigendecomposition,
// Lyapunov and Riccati solves, and the stabilizability (PBH) test.
// Sizes in scope are small (n <= 10), so Kronecker-vectorized dense solves
// are used throughout.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "avgtrack/error.hpp"
#include "avgtrack/matrix.hpp"

namespace avgtrack {

/// Eigenpairs of a symmetric matrix: values ascending, vectors as orthonormal columns.
struct SymEigen {
    Vec values;
    Mat vectors;
};

inline constexpr int kJacobiSweepCap = 100;

/**
 * @brief Cyclic Jacobi eigensolver for symmetric matrices.
 *
 * Sweeps until the off-diagonal Frobenius norm drops below 1e-12·‖S‖_F,
 * or fails with a convergence error after kJacobiSweepCap sweeps.
 */
inline SymEigen sym_eigen(const Mat& s) {
    if (!s.is_square()) fail(ErrorKind::input, "sym_eigen: matrix is not square (" + s.shape() + ")");
    if (!is_symmetric(s, 1e-12)) fail(ErrorKind::input, "sym_eigen: matrix is not symmetric");

    const std::size_t n = s.rows();
    Mat a = symmetrize(s);
    Mat v = Mat::identity(n);
    const double threshold = 1e-12 * frobenius_norm(s);

    auto off_norm = [&] {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) acc += a(i, j) * a(i, j);
        return std::sqrt(acc);
    };

    bool converged = false;
    for (int sweep = 0; sweep <= kJacobiSweepCap; ++sweep) {
        if (off_norm() <= threshold) {
            converged = true;
            break;
        }
        if (sweep == kJacobiSweepCap) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                double t;
                if (std::abs(theta) > 1e150) {
                    t = 0.5 / theta;
                } else {
                    t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                }
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - sn * akq;
                    a(k, q) = sn * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - sn * aqk;
                    a(q, k) = sn * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - sn * vkq;
                    v(k, q) = sn * vkp + c * vkq;
                }
            }
        }
    }
    if (!converged) {
        fail(ErrorKind::convergence,
             "sym_eigen: Jacobi iteration did not converge within " + std::to_string(kJacobiSweepCap) + " sweeps");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });

    SymEigen out{Vec(n), Mat(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = a(order[k], order[k]);
        for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = v(r, order[k]);
    }
    return out;
}

inline double lambda_min(const Mat& s) { return sym_eigen(s).values.front(); }
inline double lambda_max(const Mat& s) { return sym_eigen(s).values.back(); }

/// Gaussian elimination with partial pivoting. Throws a numerical error on a singular system.
inline Vec solve_linear(Mat m, Vec b) {
    const std::size_t n = m.rows();
    if (!m.is_square() || b.size() != n) fail(ErrorKind::input, "solve_linear: shape mismatch");
    const double scale = std::max(max_abs(m), 1e-300);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(m(i, k)) > std::abs(m(piv, k))) piv = i;
        if (std::abs(m(piv, k)) <= 1e-14 * scale) fail(ErrorKind::numerical, "solve_linear: singular system");
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(m(k, j), m(piv, j));
            std::swap(b[k], b[piv]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = m(i, k) / m(k, k);
            if (f == 0.0) continue;
            for (std::size_t j = k; j < n; ++j) m(i, j) -= f * m(k, j);
            b[i] -= f * b[k];
        }
    }
    Vec x(n);
    for (std::size_t i = n; i-- > 0;) {
        double acc = b[i];
        for (std::size_t j = i + 1; j < n; ++j) acc -= m(i, j) * x[j];
        x[i] = acc / m(i, i);
    }
    return x;
}

namespace detail {

inline Eigen::MatrixXd to_eigen(const Mat& m) {
    Eigen::MatrixXd e(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
    return e;
}

inline std::size_t numerical_rank(const Eigen::VectorXd& sv, double rel_threshold) {
    if (sv.size() == 0) return 0;
    const double top = sv.maxCoeff();
    if (top == 0.0) return 0;
    std::size_t rank = 0;
    for (Eigen::Index k = 0; k < sv.size(); ++k)
        if (sv(k) > rel_threshold * top) ++rank;
    return rank;
}

}  // namespace detail

/// Eigenvalues of a general real square matrix.
inline std::vector<std::complex<double>> eigenvalues(const Mat& a) {
    if (!a.is_square()) fail(ErrorKind::input, "eigenvalues: matrix is not square (" + a.shape() + ")");
    if (a.rows() == 0) return {};
    Eigen::EigenSolver<Eigen::MatrixXd> solver(detail::to_eigen(a), false);
    if (solver.info() != Eigen::Success) fail(ErrorKind::convergence, "eigenvalues: QR iteration failed");
    std::vector<std::complex<double>> out(a.rows());
    for (std::size_t k = 0; k < a.rows(); ++k) out[k] = solver.eigenvalues()(static_cast<Eigen::Index>(k));
    return out;
}

inline double spectral_abscissa(const Mat& a) {
    double m = -std::numeric_limits<double>::infinity();
    for (auto l : eigenvalues(a)) m = std::max(m, l.real());
    return m;
}

inline bool is_hurwitz(const Mat& a) { return spectral_abscissa(a) < 0.0; }

/// Singular values at or below this fraction of the largest one count as zero in PBH rank tests.
inline constexpr double kRankThreshold = 1e-10;

/// Rank of [A − λI, B] evaluated in complex arithmetic.
inline std::size_t pbh_rank_complex(const Mat& a, const Mat& b, std::complex<double> lambda) {
    const auto n = static_cast<Eigen::Index>(a.rows());
    const auto p = static_cast<Eigen::Index>(b.cols());
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n + p);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = a(i, j);
        m(i, i) -= lambda;
        for (Eigen::Index j = 0; j < p; ++j) m(i, n + j) = b(i, j);
    }
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
    return detail::numerical_rank(svd.singularValues(), kRankThreshold);
}

/// Rank of the realification [[A−σI, B, ωI, 0], [−ωI, 0, A−σI, B]] of [A − λI, B],
/// λ = σ + iω. Equals twice the complex rank.
inline std::size_t pbh_rank_realified(const Mat& a, const Mat& b, std::complex<double> lambda) {
    const auto n = static_cast<Eigen::Index>(a.rows());
    const auto p = static_cast<Eigen::Index>(b.cols());
    const double sigma = lambda.real();
    const double omega = lambda.imag();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2 * n, 2 * (n + p));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            m(i, j) = a(i, j);
            m(n + i, n + p + j) = a(i, j);
        }
        m(i, i) -= sigma;
        m(n + i, n + p + i) -= sigma;
        m(i, n + p + i) = omega;
        m(n + i, i) = -omega;
        for (Eigen::Index j = 0; j < p; ++j) {
            m(i, n + j) = b(i, j);
            m(n + i, 2 * n + p + j) = b(i, j);
        }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return detail::numerical_rank(svd.singularValues(), kRankThreshold);
}

enum class PbhForm { complex_arithmetic, realified };

/**
 * PBH stabilizability: rank[A − λI, B] = n for every eigenvalue λ of A with
 * nonnegative real part. Eigenvalues within 1e-10·max(1, ‖A‖_F) of the
 * imaginary axis count as nonnegative.
 */
inline bool is_stabilizable(const Mat& a, const Mat& b, PbhForm form = PbhForm::complex_arithmetic) {
    if (!a.is_square()) fail(ErrorKind::input, "is_stabilizable: A is not square (" + a.shape() + ")");
    if (b.rows() != a.rows())
        fail(ErrorKind::input, "is_stabilizable: B has " + std::to_string(b.rows()) + " rows, A is " + a.shape());
    const double axis_tol = 1e-10 * std::max(1.0, frobenius_norm(a));
    for (auto lambda : eigenvalues(a)) {
        if (lambda.real() < -axis_tol) continue;
        const std::size_t n = a.rows();
        const bool full = form == PbhForm::complex_arithmetic ? pbh_rank_complex(a, b, lambda) == n
                                                              : pbh_rank_realified(a, b, lambda) == 2 * n;
        if (!full) return false;
    }
    return true;
}

/**
 * @brief Solves FᵀX + XF + W = 0 for symmetric X.
 *
 * The n² unknowns are solved directly from (Fᵀ⊗I + I⊗Fᵀ)·vec(X) = −vec(W)
 * using row-major vectorization. F must be Hurwitz.
 */
inline Mat solve_lyapunov(const Mat& f, const Mat& w) {
    if (!f.is_square()) fail(ErrorKind::input, "solve_lyapunov: F is not square (" + f.shape() + ")");
    if (w.rows() != f.rows() || w.cols() != f.cols())
        fail(ErrorKind::input, "solve_lyapunov: W shape " + w.shape() + " does not match F " + f.shape());
    if (!is_symmetric(w, 1e-10)) fail(ErrorKind::input, "solve_lyapunov: W is not symmetric");
    if (!is_hurwitz(f)) fail(ErrorKind::input, "solve_lyapunov: F is not Hurwitz, no unique solution");

    const std::size_t n = f.rows();
    const Mat ft = f.transpose();
    const Mat id = Mat::identity(n);
    Mat system = kron(ft, id) + kron(id, ft);
    Vec rhs(n * n);
    for (std::size_t k = 0; k < n * n; ++k) rhs[k] = -w.data()[k];
    Vec x = solve_linear(std::move(system), std::move(rhs));
    return symmetrize(Mat(n, n, std::move(x)));
}

/// ‖PA + AᵀP − PBBᵀP + Q‖_F
inline double care_residual(const Mat& a, const Mat& b, const Mat& q, const Mat& p) {
    const Mat pb = p * b;
    return frobenius_norm(p * a + a.transpose() * p - pb * pb.transpose() + q);
}

namespace detail {

inline Mat riccati_flow(const Mat& a, const Mat& g, const Mat& q, const Mat& p) {
    return p * a + a.transpose() * p - p * g * p + q;
}

/// Integrates Ṗ = PA + AᵀP − PGP + Q from P(0) = Q with RK4 until A − GP is Hurwitz.
inline Mat stabilizing_seed(const Mat& a, const Mat& g, const Mat& q) {
    constexpr long kMaxSteps = 2'000'000;
    Mat p = q;
    const double norm_a = frobenius_norm(a);
    const double norm_g = frobenius_norm(g);
    for (long step = 0; step < kMaxSteps; ++step) {
        if (step % 20 == 0 && is_hurwitz(a - g * p)) return p;
        // The flow's linearization has spectrum within 2(‖A‖ + ‖G‖‖P‖); RK4 is stable to −2.78.
        const double dt = 0.5 / (1.0 + norm_a + norm_g * frobenius_norm(p));
        const Mat k1 = riccati_flow(a, g, q, p);
        const Mat k2 = riccati_flow(a, g, q, p + k1 * (dt / 2));
        const Mat k3 = riccati_flow(a, g, q, p + k2 * (dt / 2));
        const Mat k4 = riccati_flow(a, g, q, p + k3 * dt);
        p = symmetrize(p + (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (dt / 6));
    }
    fail(ErrorKind::convergence, "solve_care: Riccati flow did not reach a stabilizing gain");
}

}  // namespace detail

/**
 * @brief Stabilizing solution of PA + AᵀP − PBBᵀP + Q = 0.
 *
 * Newton–Kleinman iteration. The initial gain is zero when A is Hurwitz,
 * otherwise it comes from integrating the differential Riccati equation
 * forward until the closed loop is stable.
 */
inline Mat solve_care(const Mat& a, const Mat& b, const Mat& q) {
    if (!a.is_square()) fail(ErrorKind::input, "solve_care: A is not square (" + a.shape() + ")");
    const std::size_t n = a.rows();
    if (b.rows() != n) fail(ErrorKind::input, "solve_care: B shape " + b.shape() + " incompatible with A");
    if (q.rows() != n || q.cols() != n) fail(ErrorKind::input, "solve_care: Q shape " + q.shape() + " incompatible with A");
    if (!is_symmetric(q, 1e-12)) fail(ErrorKind::input, "solve_care: Q is not symmetric");
    if (lambda_min(q) <= 0.0) fail(ErrorKind::input, "solve_care: Q is not positive definite");
    if (!is_stabilizable(a, b)) fail(ErrorKind::design, "solve_care: (A, B) is not stabilizable");

    const Mat bt = b.transpose();
    const Mat g = b * bt;
    Mat k = is_hurwitz(a) ? Mat(b.cols(), n) : bt * detail::stabilizing_seed(a, g, q);

    constexpr int kMaxNewton = 200;
    Mat p;
    bool converged = false;
    double previous = INFINITY;
    for (int it = 0; it < kMaxNewton; ++it) {
        const Mat closed = a - b * k;
        Mat next = solve_lyapunov(closed, symmetrize(q + k.transpose() * k));
        const double change = it == 0 ? INFINITY : frobenius_norm(next - p);
        p = std::move(next);
        k = bt * p;
        const double scale = std::max(1.0, frobenius_norm(p));
        // Newton converges quadratically; once the update stops shrinking it sits at the rounding floor.
        if (change <= 1e-12 * scale || (change >= previous && change <= 1e-8 * scale)) {
            converged = true;
            break;
        }
        previous = change;
    }
    if (!converged) fail(ErrorKind::convergence, "solve_care: Newton-Kleinman did not converge");

    if (lambda_min(p) <= 0.0) fail(ErrorKind::numerical, "solve_care: solution is not positive definite");
    if (!is_hurwitz(a - g * p)) fail(ErrorKind::numerical, "solve_care: closed loop A - BB'P is not Hurwitz");
    return p;
}

}  // namespace avgtrack
