#ifndef HETSLOPE_RANK_SELECT_HPP
#define HETSLOPE_RANK_SELECT_HPP

#include <cmath>

#include "hetslope/linalg.hpp"

namespace hetslope::rank {

/// Number of positive singular values psi_i with psi_i >= sqrt(nu * psi_1).
inline Index estimate_rank_from_values(const Vector& sv, double nu) {
  require(nu > 0.0 && std::isfinite(nu), ErrorKind::InvalidInput, "rank threshold penalty must be positive");
  if (sv.size() == 0 || !(sv(0) > 0.0)) return 0;
  const double cut = std::sqrt(nu * sv(0));
  const double zero = linalg::kRankTolerance * sv(0);
  Index k = 0;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv(i) > zero && sv(i) >= cut) ++k;
  return k;
}

inline Index estimate_rank(const Matrix& theta, double nu) {
  return estimate_rank_from_values(linalg::singular_values(theta), nu);
}

struct RatioChoice {
  Index k = 0;
  double max_ratio = 0.0;
  bool low_confidence = false;  // max ratio below 1.5
};

/// Eigenvalue-ratio factor count on the unit-demeaned N x N covariance:
/// argmax_{k <= k_max} mu_k / mu_{k+1}.
inline RatioChoice eigenvalue_ratio(const Matrix& x, Index k_max) {
  const Index n = x.rows(), t = x.cols();
  require(k_max >= 1 && 2 * k_max < std::min(n, t), ErrorKind::InvalidInput,
          "k_max must satisfy 1 <= k_max < min(N,T)/2");
  linalg::require_finite(x, "covariate");
  const Matrix centered = x.colwise() - x.rowwise().mean();
  const Vector sv = linalg::singular_values(centered);
  // Eigenvalues of centered centered' / T, largest first.
  const Vector mu = sv.array().square() / static_cast<double>(t);
  RatioChoice out;
  out.max_ratio = -1.0;
  for (Index k = 1; k <= k_max; ++k) {
    const double below = mu(k);
    const double ratio = below > 0.0 ? mu(k - 1) / below : std::numeric_limits<double>::infinity();
    if (ratio > out.max_ratio) {
      out.max_ratio = ratio;
      out.k = k;
    }
  }
  out.low_confidence = out.max_ratio < 1.5;
  return out;
}

inline Index eigenvalue_ratio_factors(const Matrix& x, Index k_max) { return eigenvalue_ratio(x, k_max).k; }

}  // namespace hetslope::rank

#endif  // HETSLOPE_RANK_SELECT_HPP
