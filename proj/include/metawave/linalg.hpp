#pragma once

#include <cmath>
#include <string>

#include <Eigen/Core>

#include <metawave/errors.hpp>

namespace metawave {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline Mat symmetrize(const Mat & a) { return 0.5 * (a + a.transpose()); }

inline void checkSquare(const Mat & m, const char * who) {
    if (m.rows() != m.cols())
        throw DimensionMismatch(std::string(who) + ": matrix is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
}

inline void checkSymmetric(const Mat & m, const char * who, double tol = 1e-9) {
    checkSquare(m, who);
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > tol * scale)
        throw Error(std::string(who) + ": matrix not symmetric (max asymmetry " + std::to_string(asym) + ")");
}

namespace detail {
    // Row-wise Cholesky; pivots at or below the tolerance abort.
    inline bool tryCholesky(const Mat & m, Mat & lower, double pivotTol) {
        const Eigen::Index d = m.rows();
        lower = Mat::Zero(d, d);
        for (Eigen::Index i = 0; i < d; ++i) {
            for (Eigen::Index j = 0; j <= i; ++j) {
                double sum = m(i, j);
                for (Eigen::Index k = 0; k < j; ++k)
                    sum -= lower(i, k) * lower(j, k);
                if (i == j) {
                    if (sum <= pivotTol)
                        return false;
                    lower(i, i) = std::sqrt(sum);
                } else {
                    lower(i, j) = sum / lower(j, j);
                }
            }
        }
        return true;
    }
}

/// Lower-triangular factor L with L·Lᵀ = m. Retries once with a 1e-10
/// diagonal jitter before giving up; a pivot ≤ 1e-12 after the retry throws.
inline Mat cholesky(const Mat & m) {
    constexpr double pivotTol = 1e-12;
    constexpr double jitter = 1e-10;
    checkSymmetric(m, "cholesky");
    Mat lower;
    if (detail::tryCholesky(m, lower, pivotTol))
        return lower;
    const Mat jittered = m + jitter * Mat::Identity(m.rows(), m.cols());
    if (detail::tryCholesky(jittered, lower, pivotTol))
        return lower;
    throw NotPositiveDefinite("cholesky pivot <= 1e-12 after jitter retry");
}

/// Solves (L·Lᵀ)x = b given the lower factor L.
inline Vec solveCholesky(const Mat & lower, const Vec & b) {
    Vec y = lower.triangularView<Eigen::Lower>().solve(b);
    return lower.transpose().triangularView<Eigen::Upper>().solve(y);
}

/// Solves (L·Lᵀ)X = B column-wise.
inline Mat solveCholesky(const Mat & lower, const Mat & b) {
    Mat y = lower.triangularView<Eigen::Lower>().solve(b);
    return lower.transpose().triangularView<Eigen::Upper>().solve(y);
}

/// log det(L·Lᵀ) from the lower factor.
inline double logDetFromCholesky(const Mat & lower) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < lower.rows(); ++i)
        s += std::log(lower(i, i));
    return 2.0 * s;
}

inline void checkFinite(const Vec & v, const char * who) {
    if (!v.allFinite())
        throw Error(std::string(who) + ": non-finite entries");
}

}
