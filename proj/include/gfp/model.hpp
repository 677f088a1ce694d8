#pragma once

#include "gfp/backbone.hpp"
#include "gfp/objective.hpp"
#include "gfp/predictor.hpp"
#include "gfp/skeldata.hpp"
#include "gfp/targetnet.hpp"
#include "gfp/tokenizer.hpp"
#include "gfp/types.hpp"

#include <string>
#include <vector>

namespace gfp::model {

struct ModelConfig {
  int joints = 10;
  int channels = 3;
  int patch_len = 4;
  int target_frames = 40;  // frames after crop/resample
  backbone::TransformerConfig encoder{64, 4, 256, 4, 1e-5};

  int t_e() const { return target_frames / patch_len; }
  Index num_tokens() const { return Index(t_e()) * joints; }
  int patch_dim() const { return patch_len * channels; }

  void validate() const {
    require(joints >= 1 && channels >= 1, "ModelConfig: joints/channels must be >= 1");
    require(patch_len >= 1, "ModelConfig: patch_len must be >= 1");
    require(target_frames >= 2 && target_frames % patch_len == 0,
            "ModelConfig: patch_len must divide target_frames");
    encoder.validate();
  }
};

enum class ObjectiveMode { hierarchical, reconstruction };
enum class LossPositions { all, masked };
enum class FeaturePool { mean, max };

/// Full pretraining graph: patch embedding, positional tables, mask token,
/// visible-token encoder, hierarchical decoder, and (in hierarchical mode)
/// the co-trained target generation network. All parameters are reachable
/// through `registry` by path.
struct GfpModel {
  ModelConfig mc;
  predictor::HierarchySpec hs;
  targetnet::TgnConfig tc;
  ObjectiveMode objective = ObjectiveMode::hierarchical;

  backbone::ParamRegistry registry;
  backbone::Dense patch_embed;
  tokenizer::PositionalTable pos;
  Matrix pos_temporal_grad, pos_spatial_grad;
  Matrix mask_token;  // 1 x C_e
  Matrix mask_token_grad;
  backbone::EncoderStack encoder;
  predictor::HierarchicalPredictor decoder;
  targetnet::TargetNetwork tgn;

  GfpModel(const ModelConfig& mc_in, const predictor::HierarchySpec& hs_in,
           const targetnet::TgnConfig& tc_in, ObjectiveMode objective_in, uint64_t init_seed);

  /// In reconstruction mode the decoder projects to the patch feature size
  /// and the target is the patch content itself; targets therefore need no
  /// network and the TGN is never instantiated.
  bool has_tgn() const { return objective == ObjectiveMode::hierarchical; }

  struct SampleCache {
    tokenizer::PatchSequence patches;
    tokenizer::MaskPlan plan;
    Matrix embedded;
    backbone::EncoderStack::Cache enc;
    Matrix visible_out;
    Matrix e_n;
    predictor::HierarchicalPredictor::Cache dec;
    predictor::HierarchyOutputs preds;
    std::vector<Matrix> level_inputs;
    Vector global_input;
    targetnet::TargetNetwork::Cache tgn;
    targetnet::TargetOutputs targets;
    std::vector<std::vector<char>> included;  // per level / per token loss inclusion
    Index num_targets = 0;                    // per-sample M for normalization
  };

  struct BatchResult {
    std::vector<SampleCache> samples;
    objective::LossReport report;
  };

  /// xs are augmented raw sequences (target_frames x joints*channels, double).
  BatchResult pretrain_forward(const std::vector<Matrix>& xs,
                               const std::vector<tokenizer::MaskPlan>& plans,
                               const objective::LossWeights& weights,
                               LossPositions positions) const;

  /// Accumulates gradients of report.l_total into the registry.
  void pretrain_backward(BatchResult& batch, const objective::LossWeights& weights);

  /// Frozen-encoder feature: deterministic full-sequence resample, no
  /// masking, encode all tokens, pool.
  Vector encode_features(const skeldata::SkeletonSequence& seq, FeaturePool pool) const;

  /// TGN input under the configured variant (motion, raw joint, or
  /// mask-zeroed joint data).
  Matrix tgn_input(const Matrix& x, const tokenizer::MaskPlan& plan) const;

 private:
  SampleCache forward_sample(const Matrix& x, const tokenizer::MaskPlan& plan,
                             LossPositions positions) const;
  void backward_sample(SampleCache& cache, const predictor::HierarchyOutputs& pred_grads,
                       const targetnet::TargetOutputs& target_grads);
};

/// Loss of one fixed batch under the current parameters; the pure function
/// the finite-difference harness probes.
double evaluate_total_loss(const GfpModel& model, const std::vector<Matrix>& xs,
                           const std::vector<tokenizer::MaskPlan>& plans,
                           const objective::LossWeights& weights, LossPositions positions);

}  // namespace gfp::model
