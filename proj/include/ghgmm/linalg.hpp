#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <string>

#include "ghgmm/errors.hpp"

namespace ghgmm {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Cholesky factor of a symmetric positive-definite matrix; throws with the
// caller's label when the matrix is not numerically SPD.
template <typename Derived>
Eigen::LLT<Mat<typename Derived::Scalar>> spd_factor(const Eigen::MatrixBase<Derived>& m, const std::string& what) {
    Eigen::LLT<Mat<typename Derived::Scalar>> llt(m.derived());
    if (llt.info() != Eigen::Success || !llt.matrixLLT().diagonal().array().isFinite().all() ||
        (llt.matrixLLT().diagonal().array() <= 0).any())
        throw ConditioningError(what + " is not symmetric positive definite");
    return llt;
}

template <typename Scalar>
Scalar log_det(const Eigen::LLT<Mat<Scalar>>& llt) {
    return Scalar(2) * llt.matrixLLT().diagonal().array().log().sum();
}

template <typename Derived>
auto symmetrized(const Eigen::MatrixBase<Derived>& m) {
    return (typename Derived::Scalar(0.5) * (m + m.transpose())).eval();
}

// (y - mu)' S^-1 (y - mu) through a triangular solve, never an explicit inverse.
template <typename DY, typename DM, typename DS>
typename DY::Scalar mahalanobis_sq(const Eigen::MatrixBase<DY>& y, const Eigen::MatrixBase<DM>& mu,
                                   const Eigen::MatrixBase<DS>& sigma) {
    if (y.size() != mu.size() || sigma.rows() != y.size() || sigma.cols() != y.size())
        throw InputError("mahalanobis_sq: dimension mismatch");
    const auto llt = spd_factor(sigma, "covariance");
    return llt.matrixL().solve((y - mu).eval()).squaredNorm();
}

// (P^-1 + A' D^-1 A)^-1 for SPD P and positive diagonal D.
template <typename DP, typename DA, typename DD>
Mat<typename DP::Scalar> woodbury_posterior_cov(const Eigen::MatrixBase<DP>& psi, const Eigen::MatrixBase<DA>& a,
                                                 const Eigen::MatrixBase<DD>& d_diag) {
    using S = typename DP::Scalar;
    const Eigen::Index q = psi.rows();
    const Mat<S> psi_inv = spd_factor(psi, "growth-factor covariance").solve(Mat<S>::Identity(q, q));
    const Mat<S> prec = psi_inv + a.transpose() * d_diag.cwiseInverse().asDiagonal() * a;
    Mat<S> v = spd_factor(symmetrized(prec), "conditional precision").solve(Mat<S>::Identity(q, q));
    return symmetrized(v);
}

}  // namespace ghgmm
