#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <string>

#include "levyspec/ensemble.hpp"
#include "levyspec/errors.hpp"

namespace levyspec::spectral {

using Matrix = Eigen::MatrixXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using complexd = std::complex<double>;

/// Joint spectral data of a block D and its Hermitization H = [[0,D^T],[D,0]].
/// With D = U_svd S V_svd^T, the orthogonal matrix
///   U = [[V_svd, 0], [0, U_svd]]
/// block-diagonalizes H into [[0, S], [S, 0]]; eigenpairs of H come in
/// plus/minus pairs built from columns of U.
struct Decomposition {
  int N = 0;
  Eigen::VectorXd sing;  // singular values, increasing: sing(0) smallest
  Matrix U;              // 2N x 2N, columns [v_1..v_N | u_1..u_N]

  /// All 2N eigenvalues of H, increasing: -s_N .. -s_1, s_1 .. s_N.
  Eigen::VectorXd lambdas() const {
    Eigen::VectorXd L(2 * N);
    for (int i = 0; i < N; ++i) {
      L(N - 1 - i) = -sing(i);
      L(N + i) = sing(i);
    }
    return L;
  }

  /// Signed index convention: i in {1..N} gives +s_i (s_1 smallest),
  /// i in {-1..-N} gives -s_{|i|}.
  double lambda(int i) const {
    check_index(i);
    return i > 0 ? sing(i - 1) : -sing(-i - 1);
  }

  /// Unit eigenvector of H for the signed index: (v_k stacked on +/- u_k)/sqrt2.
  Eigen::VectorXd eigenvector(int i) const {
    check_index(i);
    const int k = std::abs(i) - 1;
    const double s = i > 0 ? 1.0 : -1.0;
    Eigen::VectorXd w(2 * N);
    w.head(N) = U.col(k).head(N);
    w.tail(N) = s * U.col(N + k).tail(N);
    return w / std::sqrt(2.0);
  }

  /// Rebuild H from the stored factors (testing hook).
  Matrix reconstruct() const {
    Matrix S = Matrix::Zero(2 * N, 2 * N);
    for (int i = 0; i < N; ++i) {
      S(i, N + i) = sing(i);
      S(N + i, i) = sing(i);
    }
    return U * S * U.transpose();
  }

  double smallest_positive() const { return sing(0); }

 private:
  void check_index(int i) const {
    if (i == 0 || std::abs(i) > N) {
      throw ValidationError("Decomposition: signed index out of range",
                            {"need 1 <= |i| <= N, got i = " + std::to_string(i)});
    }
  }
};

/// SVD of the block, repackaged with singular values increasing (Eigen returns
/// them decreasing) and the joint eigenbasis of the Hermitization.
inline Decomposition decompose(const Matrix& D) {
  if (D.rows() != D.cols()) {
    throw ValidationError("decompose: block must be square", {});
  }
  const int N = int(D.rows());
  Eigen::BDCSVD<Matrix> svd(D, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Decomposition out;
  out.N = N;
  out.sing.resize(N);
  out.U = Matrix::Zero(2 * N, 2 * N);
  for (int i = 0; i < N; ++i) {
    const int src = N - 1 - i;  // reverse to increasing order
    out.sing(i) = svd.singularValues()(src);
    out.U.col(i).head(N) = svd.matrixV().col(src);
    out.U.col(N + i).tail(N) = svd.matrixU().col(src);
  }
  return out;
}

/// Accepts the 2N x 2N Hermitization directly, after checking it has the
/// off-diagonal block structure (diagonal blocks zero, corners transposes).
inline Decomposition decompose_sym(const Matrix& H) {
  if (H.rows() != H.cols() || H.rows() % 2 != 0) {
    throw ValidationError("decompose_sym: need even-dimensional square matrix",
                          {});
  }
  const Eigen::Index n = H.rows() / 2;
  const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
  if (H.topLeftCorner(n, n).cwiseAbs().maxCoeff() > 1e-14 * scale ||
      H.bottomRightCorner(n, n).cwiseAbs().maxCoeff() > 1e-14 * scale) {
    throw ValidationError("decompose_sym: diagonal blocks are not zero", {});
  }
  if ((H.topRightCorner(n, n) - H.bottomLeftCorner(n, n).transpose())
          .cwiseAbs()
          .maxCoeff() > 1e-14 * scale) {
    throw ValidationError("decompose_sym: corner blocks are not transposes",
                          {});
  }
  return decompose(H.bottomLeftCorner(n, n));
}

enum class ResolventMethod { direct_solve, via_eigen };

/// G(z) = (M - z)^{-1} for symmetric M and Im z > 0, with a verified residual:
/// max |(M - z) G - I| must be <= 1e-8 or the call refuses the answer.
inline CMatrix resolvent(const Matrix& M, complexd z,
                         ResolventMethod method = ResolventMethod::direct_solve) {
  if (!(z.imag() > 0.0)) {
    throw ValidationError("resolvent: need Im z > 0",
                          {"Im z = " + std::to_string(z.imag())});
  }
  const Eigen::Index n = M.rows();
  if (M.cols() != n) throw ValidationError("resolvent: matrix must be square", {});
  CMatrix G;
  if (method == ResolventMethod::direct_solve) {
    CMatrix Mz = M.cast<complexd>();
    Mz.diagonal().array() -= z;
    G = Mz.partialPivLu().solve(CMatrix::Identity(n, n));
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> es(M);
    if (es.info() != Eigen::Success) {
      throw NumericalError("resolvent: eigendecomposition failed", 0.0);
    }
    CVector inv(n);
    for (Eigen::Index i = 0; i < n; ++i)
      inv(i) = 1.0 / (complexd(es.eigenvalues()(i)) - z);
    G = es.eigenvectors().cast<complexd>() * inv.asDiagonal() *
        es.eigenvectors().transpose().cast<complexd>();
  }
  CMatrix Mz = M.cast<complexd>();
  Mz.diagonal().array() -= z;
  const double resid = (Mz * G - CMatrix::Identity(n, n)).cwiseAbs().maxCoeff();
  if (!(resid <= 1e-8)) {
    throw NumericalError("resolvent: residual above contract", resid);
  }
  return G;
}

/// Stieltjes transform of the empirical spectral measure,
/// m(z) = (1/n) sum_i 1/(lambda_i - z).
inline complexd stieltjes(const Eigen::VectorXd& lambdas, complexd z) {
  complexd m = 0.0;
  for (Eigen::Index i = 0; i < lambdas.size(); ++i)
    m += 1.0 / (complexd(lambdas(i)) - z);
  return m / double(lambdas.size());
}

inline complexd stieltjes(const Matrix& M, complexd z) {
  return resolvent(M, z).trace() / double(M.rows());
}

/// Ward identity defect for one row: | sum_j |G_ij|^2 - Im G_ii / Im z |.
inline double ward_residual(const CMatrix& G, complexd z, Eigen::Index row) {
  double lhs = 0.0;
  for (Eigen::Index j = 0; j < G.cols(); ++j) lhs += std::norm(G(row, j));
  const double rhs = G(row, row).imag() / z.imag();
  return std::abs(lhs - rhs);
}

/// Schur-complement check on the Hermitization: for i in the first block,
/// G_ii(z) of [[0,D^T],[D,0]] equals z ((D^T D - z^2)^{-1})_ii. Returns the
/// worst deviation over that block.
inline double schur_diag_residual(const Matrix& D, complexd z) {
  const Eigen::Index n = D.rows();
  const CMatrix G = resolvent(ensemble::symmetrize(D), z);
  CMatrix K = (D.transpose() * D).cast<complexd>();
  K.diagonal().array() -= z * z;
  const CMatrix Kinv = K.partialPivLu().solve(CMatrix::Identity(n, n));
  double worst = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    worst = std::max(worst, std::abs(G(i, i) - z * Kinv(i, i)));
  return worst;
}

}  // namespace levyspec::spectral
