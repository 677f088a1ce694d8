#include "gfp/objective.hpp"

#include <cmath>

namespace gfp::objective {

double prediction_loss(const predictor::HierarchyOutputs& preds,
                       const predictor::HierarchyOutputs& targets) {
  require(preds.levels.size() == targets.levels.size(),
          "prediction_loss: level count mismatch");
  require(preds.has_global == targets.has_global, "prediction_loss: global flag mismatch");

  double sum = 0.0;
  Index m = 0;
  for (size_t i = 0; i < preds.levels.size(); ++i) {
    require(preds.levels[i].rows() == targets.levels[i].rows() &&
                preds.levels[i].cols() == targets.levels[i].cols(),
            "prediction_loss: level " + std::to_string(i) + " shape mismatch");
    sum += (preds.levels[i] - targets.levels[i]).squaredNorm();
    m += preds.levels[i].rows();
  }
  if (preds.has_global) {
    require(preds.global.size() == targets.global.size(),
            "prediction_loss: global dim mismatch");
    sum += (preds.global - targets.global).squaredNorm();
    m += 1;
  }
  require(m > 0, "prediction_loss: no targets");
  return sum / static_cast<double>(m);
}

double reconstruction_loss(const Matrix& decoded, const Matrix& x_e) {
  require(decoded.rows() == x_e.rows() && decoded.cols() == x_e.cols(),
          "reconstruction_loss: shape mismatch");
  require(x_e.rows() > 0, "reconstruction_loss: empty input");
  return (decoded - x_e).squaredNorm() / static_cast<double>(x_e.rows());
}

double variance_loss(const Matrix& z, double gamma) {
  require(z.rows() >= 2, "variance_loss: needs at least 2 samples");
  const Index b = z.rows(), c = z.cols();
  double sum = 0.0;
  for (Index i = 0; i < c; ++i) {
    const double mean = z.col(i).mean();
    const double var = (z.col(i).array() - mean).square().sum() / static_cast<double>(b - 1);
    sum += std::max(0.0, gamma - std::sqrt(var + kVarianceEps));
  }
  return sum / static_cast<double>(c);
}

Matrix variance_loss_grad(const Matrix& z, double gamma) {
  require(z.rows() >= 2, "variance_loss_grad: needs at least 2 samples");
  const Index b = z.rows(), c = z.cols();
  Matrix grad = Matrix::Zero(b, c);
  for (Index i = 0; i < c; ++i) {
    const double mean = z.col(i).mean();
    const double var = (z.col(i).array() - mean).square().sum() / static_cast<double>(b - 1);
    const double std = std::sqrt(var + kVarianceEps);
    if (std < gamma) {
      // d/dz of -sqrt(var+eps)/C; the hinge is active.
      const double coeff = -1.0 / (static_cast<double>(c) * std * static_cast<double>(b - 1));
      grad.col(i) = coeff * (z.col(i).array() - mean);
    }
  }
  return grad;
}

double covariance_loss(const Matrix& z) {
  require(z.rows() >= 2, "covariance_loss: needs at least 2 samples");
  const Index b = z.rows(), c = z.cols();
  Matrix centered = z.rowwise() - z.colwise().mean();
  Matrix cov = (centered.transpose() * centered) / static_cast<double>(b - 1);
  const double off_diag = cov.squaredNorm() - cov.diagonal().squaredNorm();
  return off_diag / static_cast<double>(c);
}

Matrix covariance_loss_grad(const Matrix& z) {
  require(z.rows() >= 2, "covariance_loss_grad: needs at least 2 samples");
  const Index b = z.rows(), c = z.cols();
  Matrix centered = z.rowwise() - z.colwise().mean();
  Matrix cov = (centered.transpose() * centered) / static_cast<double>(b - 1);
  cov.diagonal().setZero();
  // dL/dCov = (2/C) * offdiag(Cov); symmetric, so
  // dL/dZ' = (2/(B-1)) * Z' * dL/dCov, then center-backward.
  Matrix gcentered = centered * cov * (4.0 / (static_cast<double>(c) * static_cast<double>(b - 1)));
  Matrix grad = gcentered.rowwise() - gcentered.colwise().mean();
  return grad;
}

double mean_column_std(const Matrix& z) {
  if (z.rows() < 2 || z.cols() == 0) return 0.0;
  double sum = 0.0;
  for (Index i = 0; i < z.cols(); ++i) {
    const double mean = z.col(i).mean();
    const double var = (z.col(i).array() - mean).square().sum() / static_cast<double>(z.rows() - 1);
    sum += std::sqrt(var);
  }
  return sum / static_cast<double>(z.cols());
}

RegTerms reg_loss(const std::vector<Matrix>& stacked_targets, const LossWeights& weights) {
  weights.validate();
  RegTerms terms;
  for (const Matrix& z : stacked_targets) {
    require(z.rows() >= 2, "reg_loss: each level needs at least 2 regularization samples");
    terms.l_cov += weights.alpha * covariance_loss(z);
    terms.l_var += weights.beta * variance_loss(z, weights.gamma);
  }
  return terms;
}

void reg_loss_grad(const Matrix& stacked_targets, const LossWeights& weights, Matrix& grad) {
  require(grad.rows() == stacked_targets.rows() && grad.cols() == stacked_targets.cols(),
          "reg_loss_grad: grad shape mismatch");
  if (weights.alpha > 0) grad += weights.alpha * covariance_loss_grad(stacked_targets);
  if (weights.beta > 0) grad += weights.beta * variance_loss_grad(stacked_targets, weights.gamma);
}

LossReport total_loss(double l_pred, const RegTerms& reg, const LossWeights& weights) {
  LossReport report;
  report.l_pred = l_pred;
  report.l_var = reg.l_var;
  report.l_cov = reg.l_cov;
  report.l_reg = reg.total();
  report.l_total = weights.lambda * l_pred + report.l_reg;
  return report;
}

}  // namespace gfp::objective
