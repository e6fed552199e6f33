#ifndef HETSLOPE_ORTHOGONALIZER_HPP
#define HETSLOPE_ORTHOGONALIZER_HPP

// Principal-components fit of a covariate x_it = a_i + l_i' w_t + e_it.

#include <cmath>
#include <vector>

#include "hetslope/linalg.hpp"
#include "hetslope/panel.hpp"

namespace hetslope::ortho {

struct FactorDecomposition {
  Matrix loadings;  // N x K, loadings' loadings / N = I
  Matrix factors;   // T x K
  Matrix common;    // intercepts + loadings factors'
  Matrix residuals;
  Vector intercepts;  // length N, zeros when demeaning is off
  Index k = 0;
};

/// K = 0 is allowed and leaves only the intercepts (or nothing).
inline FactorDecomposition pc_factor_fit(const Matrix& x, Index k, bool demean_units = true) {
  const Index n = x.rows(), t = x.cols();
  require(n > 0 && t > 0, ErrorKind::InvalidInput, "covariate is empty");
  require(k >= 0 && k < std::min(n, t), ErrorKind::InvalidInput,
          "factor count must satisfy 0 <= K < min(N,T)");
  linalg::require_finite(x, "covariate");
  FactorDecomposition out;
  out.k = k;
  out.intercepts = demean_units ? Vector(x.rowwise().mean()) : Vector::Zero(n);
  const Matrix centered = x.colwise() - out.intercepts;
  if (k > 0) {
    const Matrix cov = centered * centered.transpose() / static_cast<double>(t);
    out.loadings = linalg::scaled_top_eigenvectors(0.5 * (cov + cov.transpose()), k, std::sqrt(static_cast<double>(n)));
    // Cross-sectional least squares; loadings' loadings = N I.
    out.factors = centered.transpose() * out.loadings / static_cast<double>(n);
  } else {
    out.loadings.resize(n, 0);
    out.factors.resize(t, 0);
  }
  out.common = out.loadings * out.factors.transpose();
  out.common.colwise() += out.intercepts;
  out.residuals = x - out.common;
  return out;
}

struct CovariateSplit {
  Matrix mu_hat;
  Matrix e_hat;
  FactorDecomposition decomposition;
};

inline std::vector<CovariateSplit> decompose_covariates(const std::vector<Matrix>& x,
                                                        const std::vector<Index>& k_list, bool demean = true) {
  require(k_list.size() == x.size(), ErrorKind::InvalidInput, "one factor count per covariate is required");
  std::vector<CovariateSplit> out;
  out.reserve(x.size());
  for (std::size_t r = 0; r < x.size(); ++r) {
    CovariateSplit c;
    c.decomposition = pc_factor_fit(x[r], k_list[r], demean);
    c.mu_hat = c.decomposition.common;
    c.e_hat = c.decomposition.residuals;
    out.push_back(std::move(c));
  }
  return out;
}

inline std::vector<CovariateSplit> decompose_covariates(const PanelData& panel, const std::vector<Index>& k_list,
                                                        bool demean = true) {
  return decompose_covariates(panel.x, k_list, demean);
}

}  // namespace hetslope::ortho

#endif  // HETSLOPE_ORTHOGONALIZER_HPP
