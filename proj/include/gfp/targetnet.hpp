#pragma once

#include "gfp/backbone.hpp"
#include "gfp/predictor.hpp"
#include "gfp/types.hpp"

#include <string>
#include <vector>

namespace gfp::targetnet {

enum class TgnInput { motion, joint, masked };

struct TgnConfig {
  int local_hidden = 512;
  int global_hidden = 2048;
  int depth = 3;  // dense layers per extractor
  int target_width = 256;
  TgnInput input = TgnInput::motion;

  void validate() const {
    require(local_hidden >= 1 && global_hidden >= 1, "TgnConfig: hidden widths must be >= 1");
    require(depth >= 2, "TgnConfig: depth must be >= 2");
    require(target_width >= 1, "TgnConfig: target width must be >= 1");
  }
};

/// Level-indexed target set {Z_t_j}; token counts mirror HierarchyOutputs.
using TargetOutputs = predictor::HierarchyOutputs;

/// Per joint, concatenates level_t * patch_len consecutive frames of the
/// (motion) input in frame-major order; token order matches the predictor's
/// level ordering (time-major over pooled positions, then joints).
Matrix assemble_level_input(const Matrix& x_motion, int joints, int channels, int level_t,
                            int patch_len);

/// Full flatten in (t, v, c) order.
Vector assemble_global_input(const Matrix& x_motion);

/// The target generation network g(): one lightweight MLP per hierarchy
/// level (shared across that level's tokens, no sharing across levels) and
/// one for the global vector.
struct TargetNetwork {
  TgnConfig cfg;
  std::vector<int> level_input_dims;
  int global_input_dim = 0;
  std::vector<backbone::Mlp> level_mlps;
  backbone::Mlp global_mlp;
  bool has_global = false;

  struct Cache {
    std::vector<backbone::Mlp::Cache> levels;
    backbone::Mlp::Cache global;
  };

  void configure(backbone::ParamRegistry& reg, const std::string& prefix, const TgnConfig& cfg_in,
                 const std::vector<int>& level_input_dims_in, int global_input_dim_in,
                 bool include_global);

  TargetOutputs forward(const std::vector<Matrix>& level_inputs, const Vector& global_input,
                        Cache& cache) const;

  /// Accumulates parameter gradients; input gradients are discarded since
  /// the network consumes raw (motion) signal.
  void backward(Cache& cache, const TargetOutputs& grads);
};

}  // namespace gfp::targetnet
