#include "gfp/targetnet.hpp"

namespace gfp::targetnet {

Matrix assemble_level_input(const Matrix& x_motion, int joints, int channels, int level_t,
                            int patch_len) {
  const int span = level_t * patch_len;  // raw frames per token
  require(span >= 1, "assemble_level_input: level span must be >= 1");
  require(x_motion.rows() % span == 0,
          "assemble_level_input: level span must divide the frame count");
  require(x_motion.cols() == Index(joints) * channels,
          "assemble_level_input: column count != joints*channels");
  // Same layout rule as patchify, with a wider patch.
  return tokenizer::patchify(x_motion, joints, channels, span).tokens;
}

Vector assemble_global_input(const Matrix& x_motion) {
  Vector flat(x_motion.size());
  Index at = 0;
  for (Index t = 0; t < x_motion.rows(); ++t)
    for (Index j = 0; j < x_motion.cols(); ++j) flat[at++] = x_motion(t, j);
  return flat;
}

void TargetNetwork::configure(backbone::ParamRegistry& reg, const std::string& prefix,
                              const TgnConfig& cfg_in, const std::vector<int>& level_input_dims_in,
                              int global_input_dim_in, bool include_global) {
  cfg = cfg_in;
  cfg.validate();
  level_input_dims = level_input_dims_in;
  global_input_dim = global_input_dim_in;
  has_global = include_global;

  level_mlps.resize(level_input_dims.size());
  for (size_t i = 0; i < level_mlps.size(); ++i) {
    std::vector<int> dims{level_input_dims[i]};
    for (int d = 0; d < cfg.depth - 1; ++d) dims.push_back(cfg.local_hidden);
    dims.push_back(cfg.target_width);
    level_mlps[i].configure(reg, prefix + ".level" + std::to_string(i), dims);
  }
  if (has_global) {
    std::vector<int> dims{global_input_dim};
    for (int d = 0; d < cfg.depth - 1; ++d) dims.push_back(cfg.global_hidden);
    dims.push_back(cfg.target_width);
    global_mlp.configure(reg, prefix + ".global", dims);
  }
}

TargetOutputs TargetNetwork::forward(const std::vector<Matrix>& level_inputs,
                                     const Vector& global_input, Cache& cache) const {
  require(level_inputs.size() == level_mlps.size(),
          "TargetNetwork: level input count mismatch");
  TargetOutputs out;
  cache.levels.assign(level_mlps.size(), {});
  for (size_t i = 0; i < level_mlps.size(); ++i) {
    require(level_inputs[i].cols() == level_input_dims[i],
            "TargetNetwork: level " + std::to_string(i) + " input dim mismatch");
    out.levels.push_back(level_mlps[i].forward(level_inputs[i], cache.levels[i]));
    if (!out.levels.back().allFinite())
      throw NumericError("non-finite activations", "tgn.level" + std::to_string(i));
  }
  if (has_global) {
    require(global_input.size() == global_input_dim, "TargetNetwork: global input dim mismatch");
    out.global = global_mlp.forward(global_input.transpose(), cache.global).row(0).transpose();
    out.has_global = true;
  }
  return out;
}

void TargetNetwork::backward(Cache& cache, const TargetOutputs& grads) {
  for (size_t i = 0; i < level_mlps.size(); ++i)
    level_mlps[i].backward(cache.levels[i], grads.levels[i]);
  if (has_global) global_mlp.backward(cache.global, grads.global.transpose());
}

}  // namespace gfp::targetnet
