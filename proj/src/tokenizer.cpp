#include "gfp/tokenizer.hpp"

#include "gfp/skeldata.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gfp::tokenizer {

void MaskPlan::validate(Index n) const {
  require(visible.size() + masked.size() == static_cast<size_t>(n),
          "MaskPlan: partition size does not match token count");
  std::vector<char> seen(static_cast<size_t>(n), 0);
  for (int i : visible) {
    require(i >= 0 && i < n && !seen[i], "MaskPlan: bad or duplicate visible index");
    seen[i] = 1;
  }
  for (int i : masked) {
    require(i >= 0 && i < n && !seen[i], "MaskPlan: bad or duplicate masked index");
    seen[i] = 1;
  }
  require(std::is_sorted(visible.begin(), visible.end()), "MaskPlan: visible not sorted");
  require(std::is_sorted(masked.begin(), masked.end()), "MaskPlan: masked not sorted");
}

PatchSequence patchify(const Matrix& x, int joints, int channels, int patch_len) {
  require(joints >= 1 && channels >= 1 && patch_len >= 1, "patchify: bad dimensions");
  require(x.cols() == Index(joints) * channels, "patchify: column count != joints*channels");
  require(x.rows() % patch_len == 0, "patchify: patch_len must divide the frame count");

  PatchSequence out;
  out.t_e = static_cast<int>(x.rows()) / patch_len;
  out.joints = joints;
  out.patch_len = patch_len;
  out.channels = channels;
  out.tokens.resize(Index(out.t_e) * joints, Index(patch_len) * channels);
  for (int te = 0; te < out.t_e; ++te) {
    for (int v = 0; v < joints; ++v) {
      const Index row = Index(te) * joints + v;
      for (int f = 0; f < patch_len; ++f)
        for (int c = 0; c < channels; ++c)
          out.tokens(row, Index(f) * channels + c) = x(Index(te) * patch_len + f, Index(v) * channels + c);
    }
  }
  return out;
}

Matrix unpatchify(const PatchSequence& patches) {
  const int t_e = patches.t_e, joints = patches.joints;
  const int patch_len = patches.patch_len, channels = patches.channels;
  Matrix x(Index(t_e) * patch_len, Index(joints) * channels);
  for (int te = 0; te < t_e; ++te)
    for (int v = 0; v < joints; ++v) {
      const Index row = Index(te) * joints + v;
      for (int f = 0; f < patch_len; ++f)
        for (int c = 0; c < channels; ++c)
          x(Index(te) * patch_len + f, Index(v) * channels + c) = patches.tokens(row, Index(f) * channels + c);
    }
  return x;
}

Matrix embed(const PatchSequence& patches, const PositionalTable& pos, const Matrix& w,
             const Matrix& b) {
  require(w.rows() == patches.tokens.cols(), "embed: weight rows != patch feature dim");
  require(b.rows() == 1 && b.cols() == w.cols(), "embed: bias must be 1 x width");
  require(pos.temporal.rows() == patches.t_e && pos.spatial.rows() == patches.joints,
          "embed: positional table rows do not match t_e / joints");
  require(pos.temporal.cols() == w.cols() && pos.spatial.cols() == w.cols(),
          "embed: positional table width mismatch");

  Matrix e = patches.tokens * w;
  e.rowwise() += b.row(0);
  for (int te = 0; te < patches.t_e; ++te)
    for (int v = 0; v < patches.joints; ++v)
      e.row(Index(te) * patches.joints + v) += pos.temporal.row(te) + pos.spatial.row(v);
  return e;
}

Vector motion_intensity(const Matrix& x, int joints, int channels, int patch_len) {
  Matrix motion = skeldata::motion_transform(x);
  PatchSequence patches = patchify(motion, joints, channels, patch_len);
  return patches.tokens.cwiseAbs().rowwise().mean();
}

MaskPlan sample_mask(const Vector& intensity, double ratio, double temperature, RngStream& rng) {
  const Index n = intensity.size();
  require(n >= 1, "sample_mask: empty intensity");
  require(ratio > 0.0 && ratio < 1.0, "sample_mask: ratio must lie in (0, 1)");
  require(temperature > 0.0, "sample_mask: temperature must be positive");

  Vector keys(n);
  const double mean = intensity.mean();
  const double var = (intensity.array() - mean).square().sum() / static_cast<double>(n);
  if (var > 0.0) {
    const double inv_std = 1.0 / std::sqrt(var);
    for (Index i = 0; i < n; ++i)
      keys[i] = (intensity[i] - mean) * inv_std / temperature + rng.gumbel();
  } else {
    for (Index i = 0; i < n; ++i) keys[i] = rng.gumbel();
  }

  const auto num_masked = static_cast<Index>(std::lround(ratio * static_cast<double>(n)));
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return keys[a] > keys[b]; });

  MaskPlan plan;
  plan.ratio = ratio;
  plan.masked.assign(order.begin(), order.begin() + num_masked);
  plan.visible.assign(order.begin() + num_masked, order.end());
  std::sort(plan.masked.begin(), plan.masked.end());
  std::sort(plan.visible.begin(), plan.visible.end());
  plan.validate(n);
  return plan;
}

}  // namespace gfp::tokenizer
