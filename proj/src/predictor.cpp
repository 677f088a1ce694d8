#include "gfp/predictor.hpp"

namespace gfp::predictor {

void HierarchySpec::validate(int t_e, int encoder_width) const {
  require(!levels.empty(), "HierarchySpec: at least one level required");
  require(t_e >= 1, "HierarchySpec: t_e must be >= 1");
  int prev = 0;
  for (int t : levels) {
    require(t >= 1, "HierarchySpec: level spans must be >= 1");
    if (prev > 0) {
      require(t > prev, "HierarchySpec: levels must be strictly increasing");
      require(t % prev == 0, "HierarchySpec: each level span must be a multiple of the previous");
    }
    require(t_e % t == 0, "HierarchySpec: each level span must divide t_e");
    prev = t;
  }
  require(levels.back() <= t_e, "HierarchySpec: largest level span must be <= t_e");
  require(predictor_width == encoder_width,
          "HierarchySpec: predictor width must equal encoder width");
  require(target_width >= 1 && projector_hidden >= 1, "HierarchySpec: widths must be >= 1");
}

std::vector<Index> HierarchySpec::token_counts(int t_e, int joints) const {
  std::vector<Index> counts;
  counts.reserve(levels.size());
  for (int t : levels) counts.push_back(Index(t_e / t) * joints);
  return counts;
}

Index HierarchySpec::total_targets(int t_e, int joints) const {
  Index m = 0;
  for (Index c : token_counts(t_e, joints)) m += c;
  if (include_global) m += 1;
  return m;
}

std::vector<std::string> HierarchySpec::level_names() const {
  std::vector<std::string> names;
  for (int t : levels) names.push_back("t" + std::to_string(t));
  if (include_global) names.push_back("global");
  return names;
}

Matrix assemble_full(const Matrix& visible_features, const tokenizer::MaskPlan& plan,
                     const Matrix& mask_token, const tokenizer::PositionalTable& pos,
                     int t_e, int joints) {
  const Index n = Index(t_e) * joints;
  plan.validate(n);
  require(visible_features.rows() == static_cast<Index>(plan.visible.size()),
          "assemble_full: visible feature count does not match plan");
  require(mask_token.rows() == 1 && mask_token.cols() == visible_features.cols(),
          "assemble_full: mask token width mismatch");

  Matrix e_n(n, visible_features.cols());
  for (int idx : plan.masked) e_n.row(idx) = mask_token.row(0);
  for (size_t i = 0; i < plan.visible.size(); ++i)
    e_n.row(plan.visible[i]) = visible_features.row(static_cast<Index>(i));
  for (int t = 0; t < t_e; ++t)
    for (int v = 0; v < joints; ++v)
      e_n.row(Index(t) * joints + v) += pos.temporal.row(t) + pos.spatial.row(v);
  return e_n;
}

Matrix temporal_pool(const Matrix& tokens, int joints, int kernel) {
  require(kernel >= 1, "temporal_pool: kernel must be >= 1");
  require(tokens.rows() % joints == 0, "temporal_pool: token count not a multiple of joints");
  const Index t_len = tokens.rows() / joints;
  require(t_len % kernel == 0, "temporal_pool: kernel must divide the temporal length");

  const Index t_out = t_len / kernel;
  Matrix pooled = Matrix::Zero(t_out * joints, tokens.cols());
  for (Index t = 0; t < t_out; ++t)
    for (Index j = 0; j < kernel; ++j)
      pooled.middleRows(t * joints, joints) += tokens.middleRows((t * kernel + j) * joints, joints);
  pooled /= static_cast<double>(kernel);
  return pooled;
}

Matrix temporal_pool_backward(const Matrix& gpooled, int joints, int kernel) {
  const Index t_out = gpooled.rows() / joints;
  Matrix g(t_out * kernel * joints, gpooled.cols());
  const double inv_k = 1.0 / static_cast<double>(kernel);
  for (Index t = 0; t < t_out; ++t)
    for (Index j = 0; j < kernel; ++j)
      g.middleRows((t * kernel + j) * joints, joints) = inv_k * gpooled.middleRows(t * joints, joints);
  return g;
}

void HierarchicalPredictor::configure(backbone::ParamRegistry& reg, const std::string& prefix,
                                      const HierarchySpec& spec_in,
                                      const backbone::TransformerConfig& encoder_cfg,
                                      int t_e_in, int joints_in, int global_hidden_in,
                                      int projector_out) {
  spec = spec_in;
  t_e = t_e_in;
  joints = joints_in;
  global_hidden = global_hidden_in;
  spec.validate(t_e, encoder_cfg.width);

  backbone::TransformerConfig stage_cfg = encoder_cfg;
  stage_cfg.layers = 1;

  stages.resize(spec.levels.size());
  int prev = 1;
  for (size_t i = 0; i < spec.levels.size(); ++i) {
    stages[i].kernel = spec.levels[i] / prev;
    prev = spec.levels[i];
    const std::string sp = prefix + ".stage" + std::to_string(i);
    stages[i].block.configure(reg, sp + ".block", stage_cfg);
    stages[i].projector.configure(reg, sp + ".proj",
                                  {spec.predictor_width, spec.projector_hidden,
                                   spec.projector_hidden, projector_out});
  }
  if (spec.include_global) {
    global_mlp.configure(reg, prefix + ".global.mlp",
                         {spec.predictor_width, global_hidden, spec.predictor_width});
    global_projector.configure(reg, prefix + ".global.proj",
                               {spec.predictor_width, spec.projector_hidden,
                                spec.projector_hidden, projector_out});
  }
}

HierarchyOutputs HierarchicalPredictor::forward(const Matrix& e_n, Cache& cache) const {
  require(e_n.rows() == Index(t_e) * joints, "predict_hierarchy: E_N row count mismatch");
  require(e_n.cols() == spec.predictor_width, "predict_hierarchy: E_N width mismatch");

  HierarchyOutputs out;
  cache.pooled.clear();
  cache.stage_out.clear();
  cache.block.assign(stages.size(), {});
  cache.projector.assign(stages.size(), {});

  Matrix h = e_n;
  for (size_t i = 0; i < stages.size(); ++i) {
    Matrix pooled = temporal_pool(h, joints, stages[i].kernel);
    cache.pooled.push_back(pooled);
    h = stages[i].block.forward(pooled, cache.block[i]);
    if (!h.allFinite())
      throw NumericError("non-finite activations", "decoder.stage" + std::to_string(i));
    cache.stage_out.push_back(h);
    out.levels.push_back(stages[i].projector.forward(h, cache.projector[i]));
  }

  if (spec.include_global) {
    cache.aggregated = h.colwise().mean();
    Matrix g = global_mlp.forward(cache.aggregated, cache.global_mlp);
    out.global = global_projector.forward(g, cache.global_projector).row(0).transpose();
    out.has_global = true;
  }
  return out;
}

Matrix HierarchicalPredictor::backward(Cache& cache, const HierarchyOutputs& grads) {
  if (cache.stage_out.size() != stages.size())
    throw StateError("predictor backward before forward");

  // Gradient flowing along the stage cascade, seeded from the deepest side.
  Matrix gh;
  if (spec.include_global) {
    Matrix gproj = global_projector.backward(cache.global_projector,
                                             grads.global.transpose());
    Matrix gagg = global_mlp.backward(cache.global_mlp, gproj);
    const Matrix& last = cache.stage_out.back();
    gh = Matrix::Zero(last.rows(), last.cols());
    gh.rowwise() += (gagg.row(0) / static_cast<double>(last.rows()));
  }

  for (size_t i = stages.size(); i-- > 0;) {
    Matrix gstage = stages[i].projector.backward(cache.projector[i], grads.levels[i]);
    if (gh.size() > 0) gstage += gh;
    Matrix gpooled = stages[i].block.backward(cache.block[i], gstage);
    gh = temporal_pool_backward(gpooled, joints, stages[i].kernel);
  }
  return gh;
}

}  // namespace gfp::predictor
