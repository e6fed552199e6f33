#ifndef HETSLOPE_LINALG_HPP
#define HETSLOPE_LINALG_HPP

// Dense kernels backing the estimators: thin SVD, singular value
// thresholding, matrix norms, leading eigenvectors and guarded least squares.
// LAPACK (through LAPACKE) does the heavy lifting; Eigen holds the data.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <lapacke.h>

#include "hetslope/error.hpp"

namespace hetslope {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct SvdResult {
  Matrix u;                // rows x m, orthonormal columns
  Vector singular_values;  // nonincreasing, m = min(rows, cols)
  Matrix v;                // cols x m, orthonormal columns
};

struct MatrixNorms {
  double nuclear = 0.0;
  double op = 0.0;
  double frobenius = 0.0;
};

/// Output of the singular value thresholding operator together with the
/// nuclear norm and rank of the result, which the solvers need every step.
struct ThresholdResult {
  Matrix value;
  double nuclear_norm = 0.0;
  Index rank = 0;
};

namespace linalg {

/// Relative cutoff under which singular values count as exact zeros.
inline constexpr double kRankTolerance = 1e-12;
/// Relative cutoff used by the least-squares solves.
inline constexpr double kLeastSquaresCutoff = 1e-10;

inline void require_finite(const Matrix& a, const std::string& what) {
  require(a.allFinite(), ErrorKind::InvalidInput, what + " contains non-finite entries");
}

inline void require_same_shape(const Matrix& a, const Matrix& b, const std::string& what) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::InvalidInput,
          what + ": dimension mismatch (" + std::to_string(a.rows()) + "x" +
              std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
              std::to_string(b.cols()) + ")");
}

namespace detail {

// Flips columns so the largest-magnitude entry of each column of `primary`
// is positive; `partner` columns (if any) are flipped in lockstep.
inline void apply_sign_rule(Matrix& primary, Matrix* partner) {
  for (Index j = 0; j < primary.cols(); ++j) {
    Index arg = 0;
    primary.col(j).cwiseAbs().maxCoeff(&arg);
    if (primary(arg, j) < 0.0) {
      primary.col(j) *= -1.0;
      if (partner != nullptr) partner->col(j) *= -1.0;
    }
  }
}

// Symmetric eigen-decomposition of the lower triangle of `a` (overwritten).
// range: 'A' all, 'V' half-open value window (vl, vu], 'I' index window
// [il, iu] in ascending order (1-based). Eigenvalues come back ascending.
inline Index syevr(Matrix& a, char jobz, char range, double vl, double vu, lapack_int il,
                   lapack_int iu, Vector& w, Matrix& z) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  if (n == 0) {
    w.resize(0);
    z.resize(0, 0);
    return 0;
  }
  lapack_int found = 0;
  w.resize(n);
  const lapack_int zcols = (range == 'I') ? (iu - il + 1) : n;
  if (jobz == 'V') {
    z.resize(n, std::max<lapack_int>(zcols, 1));
  } else {
    z.resize(1, 1);
  }
  std::vector<lapack_int> isuppz(2 * static_cast<std::size_t>(n));
  const lapack_int info =
      LAPACKE_dsyevr(LAPACK_COL_MAJOR, jobz, range, 'L', n, a.data(), n, vl, vu, il, iu, 0.0,
                     &found, w.data(), z.data(), jobz == 'V' ? n : 1, isuppz.data());
  require(info == 0, ErrorKind::InvalidInput, "dsyevr failed with info " + std::to_string(info));
  w.conservativeResize(found);
  if (jobz == 'V') z.conservativeResize(n, found);
  return found;
}

inline Matrix gram_lower(const Matrix& a, bool rows_side) {
  // rows_side: A A' (rows x rows); otherwise A' A (cols x cols).
  const Index n = rows_side ? a.rows() : a.cols();
  Matrix g = Matrix::Zero(n, n);
  if (rows_side) {
    g.selfadjointView<Eigen::Lower>().rankUpdate(a);
  } else {
    g.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose());
  }
  return g;
}

}  // namespace detail

/// Thin SVD A = U diag(s) V' with the largest-magnitude entry of every left
/// singular vector made positive.
inline SvdResult thin_svd(const Matrix& a) {
  require_finite(a, "thin_svd input");
  const lapack_int m = static_cast<lapack_int>(a.rows());
  const lapack_int n = static_cast<lapack_int>(a.cols());
  const lapack_int p = std::min(m, n);
  SvdResult out;
  if (p == 0) {
    out.u.resize(m, 0);
    out.v.resize(n, 0);
    out.singular_values.resize(0);
    return out;
  }
  Matrix work = a;
  Matrix vt(p, n);
  out.u.resize(m, p);
  out.singular_values.resize(p);
  lapack_int info = LAPACKE_dgesdd(LAPACK_COL_MAJOR, 'S', m, n, work.data(), m,
                                   out.singular_values.data(), out.u.data(), m, vt.data(), p);
  if (info > 0) {
    // Divide and conquer occasionally fails to converge; QR iteration is the fallback.
    work = a;
    std::vector<double> superb(static_cast<std::size_t>(std::max<lapack_int>(p - 1, 1)));
    info = LAPACKE_dgesvd(LAPACK_COL_MAJOR, 'S', 'S', m, n, work.data(), m,
                          out.singular_values.data(), out.u.data(), m, vt.data(), p,
                          superb.data());
  }
  require(info == 0, ErrorKind::InvalidInput, "SVD failed with info " + std::to_string(info));
  out.v = vt.transpose();
  detail::apply_sign_rule(out.u, &out.v);
  return out;
}

/// Singular values only, nonincreasing.
inline Vector singular_values(const Matrix& a) {
  require_finite(a, "singular_values input");
  const lapack_int m = static_cast<lapack_int>(a.rows());
  const lapack_int n = static_cast<lapack_int>(a.cols());
  const lapack_int p = std::min(m, n);
  Vector s(p);
  if (p == 0) return s;
  Matrix work = a;
  double dummy = 0.0;
  lapack_int info =
      LAPACKE_dgesdd(LAPACK_COL_MAJOR, 'N', m, n, work.data(), m, s.data(), &dummy, 1, &dummy, 1);
  require(info == 0, ErrorKind::InvalidInput, "SVD failed with info " + std::to_string(info));
  return s;
}

/// Largest singular value, from the top eigenvalue of the smaller Gram matrix.
inline double operator_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  const bool rows_side = a.rows() <= a.cols();
  Matrix g = detail::gram_lower(a, rows_side);
  const lapack_int n = static_cast<lapack_int>(g.rows());
  Vector w;
  Matrix z;
  detail::syevr(g, 'N', 'I', 0.0, 0.0, n, n, w, z);
  return w.size() == 0 ? 0.0 : std::sqrt(std::max(0.0, w(0)));
}

/// Number of singular values above the relative zero cutoff.
inline Index numerical_rank(const Vector& sv) {
  if (sv.size() == 0 || !(sv(0) > 0.0)) return 0;
  const double cut = kRankTolerance * sv(0);
  Index r = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cut) ++r;
  }
  return r;
}

/// Soft singular value thresholding S_lambda(A) = U (D - lambda)_+ V'.
///
/// When lambda is not negligible against ||A||_F the singular triplets come
/// from an eigen-decomposition of the smaller Gram matrix; otherwise a full
/// thin SVD is used. `rank_hint` (expected output rank, e.g. from the previous
/// iteration) selects a partial decomposition when few values survive.
inline ThresholdResult soft_threshold(const Matrix& a, double lambda, Index rank_hint = -1) {
  require(lambda >= 0.0 && std::isfinite(lambda), ErrorKind::InvalidInput,
          "soft threshold level must be finite and nonnegative");
  require_finite(a, "soft_threshold input");
  ThresholdResult out;
  if (a.size() == 0) {
    out.value = a;
    return out;
  }
  const double fro = a.norm();
  if (fro == 0.0) {
    out.value = Matrix::Zero(a.rows(), a.cols());
    return out;
  }
  if (lambda == 0.0) {
    const Vector s = singular_values(a);
    out.value = a;
    out.nuclear_norm = s.sum();
    out.rank = numerical_rank(s);
    return out;
  }

  if (lambda >= 1e-4 * fro) {
    const bool rows_side = a.rows() <= a.cols();
    Matrix g = detail::gram_lower(a, rows_side);
    Vector w;
    Matrix z;
    // Eigenvalues of the Gram are squared singular values; the trace bounds them.
    const double upper = g.trace() * (1.0 + 1e-8) + 1.0;
    out.value = Matrix::Zero(a.rows(), a.cols());
    if (lambda * lambda >= upper) return out;
    Index found = 0;
    // A value window uses inverse iteration, which only pays off for a few vectors.
    if (rank_hint >= 0 && rank_hint <= std::max<Index>(4, g.rows() / 10)) {
      found = detail::syevr(g, 'V', 'V', lambda * lambda, upper, 0, 0, w, z);
    } else {
      detail::syevr(g, 'V', 'A', 0.0, 0.0, 0, 0, w, z);
      Index first = 0;
      while (first < w.size() && w(first) <= lambda * lambda) ++first;
      found = w.size() - first;
      w = w.tail(found).eval();
      z = z.rightCols(found).eval();
    }
    if (found == 0) return out;
    Vector shrink(found);
    for (Index j = 0; j < found; ++j) {
      const double sigma = std::sqrt(std::max(w(j), 0.0));
      const double kept = std::max(sigma - lambda, 0.0);
      shrink(j) = sigma > 0.0 ? kept / sigma : 0.0;
      out.nuclear_norm += kept;
      if (kept > 0.0) ++out.rank;
    }
    if (rows_side) {
      // A = U S V' with U from A A': S_lambda(A) = U diag(1 - lambda/s) U' A.
      const Matrix ua = z.transpose() * a;
      out.value.noalias() = z * shrink.asDiagonal() * ua;
    } else {
      const Matrix av = a * z;
      out.value.noalias() = av * shrink.asDiagonal() * z.transpose();
    }
    return out;
  }

  const SvdResult svd = thin_svd(a);
  const Index p = svd.singular_values.size();
  Index keep = 0;
  while (keep < p && svd.singular_values(keep) > lambda) ++keep;
  Vector d(keep);
  for (Index j = 0; j < keep; ++j) {
    d(j) = svd.singular_values(j) - lambda;
    out.nuclear_norm += d(j);
  }
  out.rank = keep;
  out.value.noalias() =
      svd.u.leftCols(keep) * d.asDiagonal() * svd.v.leftCols(keep).transpose();
  return out;
}

inline Matrix soft_threshold_sv(const Matrix& a, double lambda) {
  return soft_threshold(a, lambda).value;
}

inline MatrixNorms norms(const Matrix& a) {
  const Vector s = singular_values(a);
  MatrixNorms out;
  out.nuclear = s.sum();
  out.op = s.size() > 0 ? s(0) : 0.0;
  out.frobenius = a.norm();
  return out;
}

inline double nuclear_norm(const Matrix& a) { return singular_values(a).sum(); }

/// `scale` times the unit eigenvectors of the k largest eigenvalues of the
/// symmetric matrix S, largest first, each with its largest-magnitude entry
/// positive.
inline Matrix scaled_top_eigenvectors(const Matrix& s, Index k, double scale) {
  require(s.rows() == s.cols(), ErrorKind::InvalidInput, "eigenvector input must be square");
  require(k >= 1 && k <= s.rows(), ErrorKind::InvalidInput,
          "requested " + std::to_string(k) + " eigenvectors of a " + std::to_string(s.rows()) +
              "x" + std::to_string(s.cols()) + " matrix");
  require_finite(s, "eigenvector input");
  const double mag = s.cwiseAbs().maxCoeff();
  require((s - s.transpose()).cwiseAbs().maxCoeff() <= 1e-8 * (1.0 + mag),
          ErrorKind::InvalidInput, "eigenvector input is not symmetric");
  const lapack_int n = static_cast<lapack_int>(s.rows());
  Matrix work = s;
  Vector w;
  Matrix z;
  detail::syevr(work, 'V', 'I', 0.0, 0.0, n - static_cast<lapack_int>(k) + 1, n, w, z);
  Matrix out = z.rowwise().reverse();
  detail::apply_sign_rule(out, nullptr);
  return out * scale;
}

/// Least squares with a rank guard: throws SingularDesign when the smallest
/// singular value of the design falls below the relative cutoff.
inline Vector least_squares(const Matrix& design, const Vector& y, const std::string& where = "") {
  require(design.rows() == y.size(), ErrorKind::InvalidInput, "least squares dimension mismatch");
  const Index p = design.cols();
  if (p == 0) return Vector(0);
  require(design.rows() >= p, ErrorKind::SingularDesign,
          "fewer observations than parameters" + (where.empty() ? "" : " at " + where));
  Eigen::JacobiSVD<Matrix> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double top = sv(0);
  if (!(top > 0.0) || sv(p - 1) <= kLeastSquaresCutoff * top) {
    fail(ErrorKind::SingularDesign, "rank-deficient design" + (where.empty() ? "" : " at " + where));
  }
  const Vector uty = svd.matrixU().transpose() * y;
  return svd.matrixV() * uty.cwiseQuotient(sv);
}

/// Columns of `a` selected by `idx`.
inline Matrix select_columns(const Matrix& a, const std::vector<Index>& idx) {
  Matrix out(a.rows(), static_cast<Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Index>(j)) = a.col(idx[j]);
  return out;
}

}  // namespace linalg
}  // namespace hetslope

#endif  // HETSLOPE_LINALG_HPP
