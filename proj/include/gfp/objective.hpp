#pragma once

#include "gfp/predictor.hpp"
#include "gfp/types.hpp"

#include <string>
#include <vector>

namespace gfp::objective {

struct LossWeights {
  double lambda = 5.0;  // prediction weight
  double alpha = 5.0;   // covariance weight
  double beta = 1.0;    // variance weight
  double gamma = 1.0;   // variance threshold

  void validate() const {
    require(lambda >= 0 && alpha >= 0 && beta >= 0 && gamma >= 0,
            "LossWeights: all weights must be >= 0");
  }
};

/// Per-term values for one batch plus per-level mean target standard
/// deviations (the collapse diagnostic).
struct LossReport {
  double l_pred = 0.0;
  double l_var = 0.0;
  double l_cov = 0.0;
  double l_reg = 0.0;
  double l_total = 0.0;
  std::vector<std::string> level_names;
  std::vector<double> target_std;  // aligned with level_names
};

/// Differentiability floor inside the variance hinge's square root.
inline constexpr double kVarianceEps = 1e-4;

/// Eq-style hierarchical prediction loss for one sample:
///   (1/M) * sum_j ||Z_p_j - Z_t_j||_F^2
/// with M the total target count across levels (plus global if present).
double prediction_loss(const predictor::HierarchyOutputs& preds,
                       const predictor::HierarchyOutputs& targets);

/// Patch reconstruction loss (1/N) * ||decoded - x_e||_F^2.
double reconstruction_loss(const Matrix& decoded, const Matrix& x_e);

/// (1/C) * sum_i max(0, gamma - sqrt(Var(Z[:,i]) + eps)), unbiased variance
/// over the row dimension.
double variance_loss(const Matrix& z, double gamma);
Matrix variance_loss_grad(const Matrix& z, double gamma);

/// (1/C) * sum_{i != j} Cov(Z)_{ij}^2 with Cov = Z'^T Z' / (B-1) on the
/// column-centered Z'. The off-diagonal sum counts ordered pairs.
double covariance_loss(const Matrix& z);
Matrix covariance_loss_grad(const Matrix& z);

/// Per-dimension std of the rows, averaged over dimensions (diagnostic).
double mean_column_std(const Matrix& z);

struct RegTerms {
  double l_var = 0.0;
  double l_cov = 0.0;
  double total() const { return l_var + l_cov; }  // already weighted
};

/// Sum over levels of alpha*L_cov + beta*L_var on the stacked target rows
/// (batch x token rows for local levels, batch rows for the global level).
RegTerms reg_loss(const std::vector<Matrix>& stacked_targets, const LossWeights& weights);

/// Accumulates d(reg)/dZ for one stacked level into grad.
void reg_loss_grad(const Matrix& stacked_targets, const LossWeights& weights, Matrix& grad);

LossReport total_loss(double l_pred, const RegTerms& reg, const LossWeights& weights);

}  // namespace gfp::objective
