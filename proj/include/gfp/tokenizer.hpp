#pragma once

#include "gfp/types.hpp"

#include <vector>

namespace gfp::tokenizer {

/// Non-overlapping temporal patches. Token n = t_e*V + v (time-major over
/// patches, then joints) carries patch_len consecutive frames of joint v
/// in frame-major layout: feature f*C + c is channel c at frame offset f.
struct PatchSequence {
  Matrix tokens;  // (t_e*joints) x (patch_len*channels)
  int t_e = 0;
  int joints = 0;
  int patch_len = 0;
  int channels = 0;

  Index count() const { return tokens.rows(); }
};

/// Visible/masked partition of the token index range [0, N).
struct MaskPlan {
  std::vector<int> visible;  // sorted
  std::vector<int> masked;   // sorted
  double ratio = 0.0;

  void validate(Index n) const;
};

/// Learnable additive position encoding, factored into a temporal table
/// (t_e rows) and a spatial table (joints rows), both of encoder width.
struct PositionalTable {
  Matrix temporal;
  Matrix spatial;

  Vector term(int t, int v) const { return temporal.row(t).transpose() + spatial.row(v).transpose(); }
};

PatchSequence patchify(const Matrix& x, int joints, int channels, int patch_len);

/// Inverse layout map of patchify.
Matrix unpatchify(const PatchSequence& patches);

/// Per-token affine embedding plus positional terms:
///   E[n] = tokens[n] * w + b + temporal[t_e(n)] + spatial[v(n)].
Matrix embed(const PatchSequence& patches, const PositionalTable& pos, const Matrix& w,
             const Matrix& b);

/// Mean absolute frame difference per patch (zero-padded motion), the key
/// the motion-aware masking ranks on.
Vector motion_intensity(const Matrix& x, int joints, int channels, int patch_len);

/// Gumbel-top-k masking: masked set = indices of the round(ratio*N) largest
/// keys z_n / temperature + g_n, where z is the intensity standardized to
/// zero mean and unit variance (all zeros when the variance vanishes, which
/// reduces the rule to uniform random masking).
MaskPlan sample_mask(const Vector& intensity, double ratio, double temperature, RngStream& rng);

}  // namespace gfp::tokenizer
