#include "gfp/model.hpp"

#include <cmath>

namespace gfp::model {

GfpModel::GfpModel(const ModelConfig& mc_in, const predictor::HierarchySpec& hs_in,
                   const targetnet::TgnConfig& tc_in, ObjectiveMode objective_in,
                   uint64_t init_seed)
    : mc(mc_in), hs(hs_in), tc(tc_in), objective(objective_in) {
  mc.validate();
  hs.validate(mc.t_e(), mc.encoder.width);
  if (objective == ObjectiveMode::reconstruction) {
    require(hs.levels == std::vector<int>{1} && !hs.include_global,
            "reconstruction objective requires the single-level t=1 hierarchy");
  }

  patch_embed.configure(registry, "embed", mc.patch_dim(), mc.encoder.width);
  pos.temporal.resize(mc.t_e(), mc.encoder.width);
  pos.spatial.resize(mc.joints, mc.encoder.width);
  registry.add("pos.temporal", pos.temporal, pos_temporal_grad, false);
  registry.add("pos.spatial", pos.spatial, pos_spatial_grad, false);
  mask_token.resize(1, mc.encoder.width);
  registry.add("mask_token", mask_token, mask_token_grad, false);

  encoder.configure(registry, "encoder", mc.encoder);

  const int projector_out =
      objective == ObjectiveMode::reconstruction ? mc.patch_dim() : hs.target_width;
  decoder.configure(registry, "decoder", hs, mc.encoder, mc.t_e(), mc.joints,
                    /*global_hidden=*/2048, projector_out);

  if (has_tgn()) {
    tc.validate();
    require(tc.target_width == hs.target_width,
            "TgnConfig: target width must match the hierarchy target width");
    std::vector<int> level_dims;
    for (int t : hs.levels) level_dims.push_back(t * mc.patch_len * mc.channels);
    const int global_dim = mc.target_frames * mc.joints * mc.channels;
    tgn.configure(registry, "tgn", tc, level_dims, global_dim, hs.include_global);
  }

  backbone::init_params(registry, init_seed);
}

Matrix GfpModel::tgn_input(const Matrix& x, const tokenizer::MaskPlan& plan) const {
  switch (tc.input) {
    case targetnet::TgnInput::motion:
      return skeldata::motion_transform(x);
    case targetnet::TgnInput::joint:
      return x;
    case targetnet::TgnInput::masked: {
      Matrix masked = x;
      for (int idx : plan.masked) {
        const int t_e_idx = idx / mc.joints;
        const int v = idx % mc.joints;
        masked.block(Index(t_e_idx) * mc.patch_len, Index(v) * mc.channels, mc.patch_len,
                     mc.channels)
            .setZero();
      }
      return masked;
    }
  }
  throw ValidationError("unknown TGN input variant");
}

GfpModel::SampleCache GfpModel::forward_sample(const Matrix& x, const tokenizer::MaskPlan& plan,
                                               LossPositions positions) const {
  require(x.rows() == mc.target_frames && x.cols() == Index(mc.joints) * mc.channels,
          "pretrain_forward: sample shape does not match model config");

  SampleCache cache;
  cache.patches = tokenizer::patchify(x, mc.joints, mc.channels, mc.patch_len);
  cache.plan = plan;
  cache.embedded = tokenizer::embed(cache.patches, pos, patch_embed.w, patch_embed.b);
  cache.visible_out = backbone::encode_visible(encoder, cache.embedded, plan, cache.enc);
  cache.e_n =
      predictor::assemble_full(cache.visible_out, plan, mask_token, pos, mc.t_e(), mc.joints);
  cache.preds = decoder.forward(cache.e_n, cache.dec);

  if (has_tgn()) {
    Matrix tin = tgn_input(x, plan);
    for (int t : hs.levels)
      cache.level_inputs.push_back(
          targetnet::assemble_level_input(tin, mc.joints, mc.channels, t, mc.patch_len));
    if (hs.include_global) cache.global_input = targetnet::assemble_global_input(tin);
    cache.targets = tgn.forward(cache.level_inputs, cache.global_input, cache.tgn);
  } else {
    cache.targets.levels.push_back(cache.patches.tokens);
    cache.targets.has_global = false;
  }

  // Loss inclusion per level token. In masked mode a pooled token counts
  // when any of its constituent patches was masked; the global target is
  // always included.
  cache.included.resize(cache.preds.levels.size());
  cache.num_targets = 0;
  std::vector<char> patch_masked(static_cast<size_t>(mc.num_tokens()), 0);
  for (int idx : plan.masked) patch_masked[static_cast<size_t>(idx)] = 1;
  for (size_t i = 0; i < cache.preds.levels.size(); ++i) {
    const int span = hs.levels[i];
    const Index count = cache.preds.levels[i].rows();
    cache.included[i].assign(static_cast<size_t>(count), 1);
    if (positions == LossPositions::masked) {
      for (Index n = 0; n < count; ++n) {
        const Index tp = n / mc.joints;
        const Index v = n % mc.joints;
        char any_masked = 0;
        for (int j = 0; j < span && !any_masked; ++j)
          any_masked = patch_masked[static_cast<size_t>((tp * span + j) * mc.joints + v)];
        cache.included[i][static_cast<size_t>(n)] = any_masked;
      }
    }
    for (char inc : cache.included[i]) cache.num_targets += inc;
  }
  if (cache.preds.has_global) cache.num_targets += 1;
  require(cache.num_targets > 0,
          "pretrain_forward: loss_positions=masked selected zero targets");
  return cache;
}

GfpModel::BatchResult GfpModel::pretrain_forward(const std::vector<Matrix>& xs,
                                                 const std::vector<tokenizer::MaskPlan>& plans,
                                                 const objective::LossWeights& weights,
                                                 LossPositions positions) const {
  require(!xs.empty(), "pretrain_forward: empty batch");
  require(xs.size() == plans.size(), "pretrain_forward: plan count mismatch");
  weights.validate();

  BatchResult batch;
  batch.samples.reserve(xs.size());
  for (size_t b = 0; b < xs.size(); ++b)
    batch.samples.push_back(forward_sample(xs[b], plans[b], positions));

  const auto bsz = static_cast<double>(xs.size());
  double l_pred = 0.0;
  for (const auto& s : batch.samples) {
    double sum = 0.0;
    for (size_t i = 0; i < s.preds.levels.size(); ++i) {
      const Matrix diff = s.preds.levels[i] - s.targets.levels[i];
      for (Index n = 0; n < diff.rows(); ++n)
        if (s.included[i][static_cast<size_t>(n)]) sum += diff.row(n).squaredNorm();
    }
    if (s.preds.has_global) sum += (s.preds.global - s.targets.global).squaredNorm();
    l_pred += sum / static_cast<double>(s.num_targets);
  }
  l_pred /= bsz;

  objective::RegTerms reg;
  batch.report.level_names = hs.level_names();
  if (has_tgn()) {
    for (size_t i = 0; i < hs.levels.size(); ++i) {
      Index rows = 0;
      for (const auto& s : batch.samples) rows += s.targets.levels[i].rows();
      Matrix stacked(rows, hs.target_width);
      Index at = 0;
      for (const auto& s : batch.samples) {
        stacked.middleRows(at, s.targets.levels[i].rows()) = s.targets.levels[i];
        at += s.targets.levels[i].rows();
      }
      reg.l_cov += weights.alpha * objective::covariance_loss(stacked);
      reg.l_var += weights.beta * objective::variance_loss(stacked, weights.gamma);
      batch.report.target_std.push_back(objective::mean_column_std(stacked));
    }
    if (hs.include_global) {
      Matrix stacked(static_cast<Index>(batch.samples.size()), hs.target_width);
      for (size_t b = 0; b < batch.samples.size(); ++b)
        stacked.row(static_cast<Index>(b)) = batch.samples[b].targets.global.transpose();
      reg.l_cov += weights.alpha * objective::covariance_loss(stacked);
      reg.l_var += weights.beta * objective::variance_loss(stacked, weights.gamma);
      batch.report.target_std.push_back(objective::mean_column_std(stacked));
    }
  } else {
    batch.report.level_names.clear();
  }

  const double lambda_eff = objective == ObjectiveMode::reconstruction ? 1.0 : weights.lambda;
  auto names = batch.report.level_names;
  auto stds = batch.report.target_std;
  batch.report = objective::total_loss(l_pred, reg,
                                       objective::LossWeights{lambda_eff, weights.alpha,
                                                              weights.beta, weights.gamma});
  batch.report.level_names = std::move(names);
  batch.report.target_std = std::move(stds);
  return batch;
}

void GfpModel::pretrain_backward(BatchResult& batch, const objective::LossWeights& weights) {
  const auto bsz = static_cast<double>(batch.samples.size());
  const double lambda_eff = objective == ObjectiveMode::reconstruction ? 1.0 : weights.lambda;

  // Regularizer gradients on the stacked target rows, then sliced per sample.
  std::vector<Matrix> reg_grads;  // one per level, plus global at the end
  Index global_level = -1;
  if (has_tgn()) {
    for (size_t i = 0; i < hs.levels.size(); ++i) {
      Index rows = 0;
      for (const auto& s : batch.samples) rows += s.targets.levels[i].rows();
      Matrix stacked(rows, hs.target_width);
      Index at = 0;
      for (const auto& s : batch.samples) {
        stacked.middleRows(at, s.targets.levels[i].rows()) = s.targets.levels[i];
        at += s.targets.levels[i].rows();
      }
      Matrix grad = Matrix::Zero(stacked.rows(), stacked.cols());
      objective::reg_loss_grad(stacked, weights, grad);
      reg_grads.push_back(std::move(grad));
    }
    if (hs.include_global) {
      Matrix stacked(static_cast<Index>(batch.samples.size()), hs.target_width);
      for (size_t b = 0; b < batch.samples.size(); ++b)
        stacked.row(static_cast<Index>(b)) = batch.samples[b].targets.global.transpose();
      Matrix grad = Matrix::Zero(stacked.rows(), stacked.cols());
      objective::reg_loss_grad(stacked, weights, grad);
      global_level = static_cast<Index>(reg_grads.size());
      reg_grads.push_back(std::move(grad));
    }
  }

  std::vector<Index> level_offsets(hs.levels.size(), 0);
  for (size_t b = 0; b < batch.samples.size(); ++b) {
    SampleCache& s = batch.samples[b];
    const double pred_coeff = 2.0 * lambda_eff / (bsz * static_cast<double>(s.num_targets));

    predictor::HierarchyOutputs pred_grads;
    targetnet::TargetOutputs target_grads;
    pred_grads.has_global = target_grads.has_global = s.preds.has_global;
    for (size_t i = 0; i < s.preds.levels.size(); ++i) {
      Matrix diff = s.preds.levels[i] - s.targets.levels[i];
      for (Index n = 0; n < diff.rows(); ++n)
        if (!s.included[i][static_cast<size_t>(n)]) diff.row(n).setZero();
      pred_grads.levels.push_back(pred_coeff * diff);
      target_grads.levels.push_back(-pred_coeff * diff);
    }
    if (s.preds.has_global) {
      Vector gdiff = pred_coeff * (s.preds.global - s.targets.global);
      pred_grads.global = gdiff;
      target_grads.global = -gdiff;
    }

    if (has_tgn()) {
      for (size_t i = 0; i < hs.levels.size(); ++i) {
        const Index rows = s.targets.levels[i].rows();
        target_grads.levels[i] += reg_grads[i].middleRows(level_offsets[i], rows);
        level_offsets[i] += rows;
      }
      if (hs.include_global)
        target_grads.global +=
            reg_grads[static_cast<size_t>(global_level)].row(static_cast<Index>(b)).transpose();
    }

    backward_sample(s, pred_grads, target_grads);
  }
}

void GfpModel::backward_sample(SampleCache& cache, const predictor::HierarchyOutputs& pred_grads,
                               const targetnet::TargetOutputs& target_grads) {
  Matrix g_en = decoder.backward(cache.dec, pred_grads);

  // assemble_full adjoint: positional terms feed every slot, the mask token
  // feeds masked slots, the encoder path feeds visible slots.
  for (int t = 0; t < mc.t_e(); ++t)
    for (int v = 0; v < mc.joints; ++v) {
      const Index n = Index(t) * mc.joints + v;
      pos_temporal_grad.row(t) += g_en.row(n);
      pos_spatial_grad.row(v) += g_en.row(n);
    }
  for (int idx : cache.plan.masked) mask_token_grad.row(0) += g_en.row(idx);

  Matrix g_visible(static_cast<Index>(cache.plan.visible.size()), g_en.cols());
  for (size_t i = 0; i < cache.plan.visible.size(); ++i)
    g_visible.row(static_cast<Index>(i)) = g_en.row(cache.plan.visible[i]);
  Matrix g_selected = encoder.backward(cache.enc, g_visible);

  Matrix g_embedded = Matrix::Zero(cache.embedded.rows(), cache.embedded.cols());
  for (size_t i = 0; i < cache.plan.visible.size(); ++i)
    g_embedded.row(cache.plan.visible[i]) = g_selected.row(static_cast<Index>(i));

  // embed adjoint.
  patch_embed.gw.noalias() += cache.patches.tokens.transpose() * g_embedded;
  patch_embed.gb.row(0) += g_embedded.colwise().sum();
  for (int t = 0; t < mc.t_e(); ++t)
    for (int v = 0; v < mc.joints; ++v) {
      const Index n = Index(t) * mc.joints + v;
      pos_temporal_grad.row(t) += g_embedded.row(n);
      pos_spatial_grad.row(v) += g_embedded.row(n);
    }

  if (has_tgn()) tgn.backward(cache.tgn, target_grads);
}

Vector GfpModel::encode_features(const skeldata::SkeletonSequence& seq, FeaturePool pool) const {
  require(seq.joints == mc.joints && seq.channels == mc.channels,
          "encode_features: sequence joints/channels do not match the model");
  skeldata::SkeletonSequence resampled = skeldata::center_resample(seq, mc.target_frames);
  Matrix x = resampled.to_double();
  tokenizer::PatchSequence patches = tokenizer::patchify(x, mc.joints, mc.channels, mc.patch_len);
  Matrix embedded = tokenizer::embed(patches, pos, patch_embed.w, patch_embed.b);
  backbone::EncoderStack::Cache cache;
  Matrix out = encoder.forward(embedded, cache);
  if (pool == FeaturePool::max) return out.colwise().maxCoeff().transpose();
  return out.colwise().mean().transpose();
}

double evaluate_total_loss(const GfpModel& model, const std::vector<Matrix>& xs,
                           const std::vector<tokenizer::MaskPlan>& plans,
                           const objective::LossWeights& weights, LossPositions positions) {
  return model.pretrain_forward(xs, plans, weights, positions).report.l_total;
}

}  // namespace gfp::model
