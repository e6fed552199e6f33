#ifndef HETSLOPE_PANEL_HPP
#define HETSLOPE_PANEL_HPP

#include <optional>
#include <string>
#include <vector>

#include "hetslope/linalg.hpp"

namespace hetslope {

/// Balanced panel: outcome y (N x T), d covariates of the same shape and an
/// optional 0/1 observation mask. Unobserved outcomes are stored as 0.
struct PanelData {
  std::vector<std::string> unit_labels;
  std::vector<std::string> time_labels;
  Matrix y;
  std::vector<Matrix> x;
  std::optional<Matrix> mask;

  Index n() const { return y.rows(); }
  Index t() const { return y.cols(); }
  Index d() const { return static_cast<Index>(x.size()); }

  void fill_default_labels() {
    if (unit_labels.empty())
      for (Index i = 0; i < n(); ++i) unit_labels.push_back(std::to_string(i + 1));
    if (time_labels.empty())
      for (Index s = 0; s < t(); ++s) time_labels.push_back(std::to_string(s + 1));
  }

  void validate() const {
    require(n() > 0 && t() > 0, ErrorKind::InvalidInput, "panel is empty");
    for (Index r = 0; r < d(); ++r) {
      linalg::require_same_shape(y, x[static_cast<std::size_t>(r)],
                                 "covariate " + std::to_string(r + 1));
      linalg::require_finite(x[static_cast<std::size_t>(r)], "covariate " + std::to_string(r + 1));
    }
    if (mask) {
      linalg::require_same_shape(y, *mask, "mask");
      require(((mask->array() == 0.0) || (mask->array() == 1.0)).all(), ErrorKind::InvalidInput,
              "mask entries must be 0 or 1");
    }
    linalg::require_finite(y, "outcome");
    if (!unit_labels.empty())
      require(static_cast<Index>(unit_labels.size()) == n(), ErrorKind::InvalidInput,
              "unit label count does not match rows");
    if (!time_labels.empty())
      require(static_cast<Index>(time_labels.size()) == t(), ErrorKind::InvalidInput,
              "time label count does not match columns");
  }
};

}  // namespace hetslope

#endif  // HETSLOPE_PANEL_HPP
