#pragma once

#include "gfp/backbone.hpp"
#include "gfp/tokenizer.hpp"
#include "gfp/types.hpp"

#include <string>
#include <vector>

namespace gfp::predictor {

/// Temporal granularity ladder. Levels are spans in patch units; level t_i
/// emits (T_e/t_i)*V tokens, the optional global level emits one vector per
/// sample. Each t_i must divide T_e and each previous level must divide the
/// next so the pooling cascade uses integral kernels.
struct HierarchySpec {
  std::vector<int> levels = {5, 10};
  bool include_global = true;
  int predictor_width = 256;   // C_p, kept equal to the encoder width
  int target_width = 256;      // C_t
  int projector_hidden = 512;
  int global_mlp_hidden = 2048;

  void validate(int t_e, int encoder_width) const;
  std::vector<Index> token_counts(int t_e, int joints) const;

  /// Total target count M (level tokens plus the optional global one).
  Index total_targets(int t_e, int joints) const;

  std::vector<std::string> level_names() const;
};

/// Level-indexed prediction set {Z_p_j}: one matrix per local level plus an
/// optional per-sample global vector. The same container shape is used for
/// targets.
struct HierarchyOutputs {
  std::vector<Matrix> levels;  // level i: ((T_e/t_i)*V) x C_t
  Vector global;               // C_t, valid when has_global
  bool has_global = false;
};

/// Visible features back into their token slots, the shared mask token in
/// every masked slot, and positional terms re-added to all slots.
Matrix assemble_full(const Matrix& visible_features, const tokenizer::MaskPlan& plan,
                     const Matrix& mask_token, const tokenizer::PositionalTable& pos,
                     int t_e, int joints);

/// Non-overlapping mean over `kernel` consecutive temporal positions,
/// per joint; joints never mix. Tokens are time-major (row t*V + v).
Matrix temporal_pool(const Matrix& tokens, int joints, int kernel);

/// Adjoint of temporal_pool: distributes each pooled gradient uniformly
/// over its window.
Matrix temporal_pool_backward(const Matrix& gpooled, int joints, int kernel);

/// The decoder f(): per level one pooling step (kernel t_i/t_{i-1}) and one
/// transformer block, a 3-layer projector per level emitting Z_p_i, and for
/// the global level mean aggregation over the last stage's tokens followed
/// by a 2-layer MLP and its own projector.
struct HierarchicalPredictor {
  struct Stage {
    int kernel = 1;
    backbone::TransformerBlock block;
    backbone::Mlp projector;
  };

  HierarchySpec spec;
  int t_e = 0;
  int joints = 0;
  std::vector<Stage> stages;
  backbone::Mlp global_mlp;        // C_p -> 2048 -> C_p
  backbone::Mlp global_projector;  // C_p -> hidden -> hidden -> C_t
  int global_hidden = 2048;

  struct Cache {
    std::vector<Matrix> pooled;  // pooling output per stage (pre-block)
    std::vector<Matrix> stage_out;
    std::vector<backbone::TransformerBlock::Cache> block;
    std::vector<backbone::Mlp::Cache> projector;
    Matrix aggregated;  // 1 x C_p mean over last-stage tokens
    backbone::Mlp::Cache global_mlp, global_projector;
  };

  void configure(backbone::ParamRegistry& reg, const std::string& prefix,
                 const HierarchySpec& spec_in, const backbone::TransformerConfig& encoder_cfg,
                 int t_e_in, int joints_in, int global_hidden_in, int projector_out);

  HierarchyOutputs forward(const Matrix& e_n, Cache& cache) const;

  /// Takes dL/dZ_p_j for every level (and global) and returns dL/dE_N.
  Matrix backward(Cache& cache, const HierarchyOutputs& grads);
};

}  // namespace gfp::predictor
