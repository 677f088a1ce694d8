#pragma once

#include "gfp/types.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gfp::skeldata {

/// One action sample: T frames of V joints with C coordinate channels.
/// Stored as a frames x (joints*channels) float32 matrix; column v*C + c
/// holds channel c of joint v, so a row is one flattened frame.
struct SkeletonSequence {
  int frames = 0;
  int joints = 0;
  int channels = 0;
  MatrixF data;
  int label = -1;  // -1 = unlabeled
  std::string sample_id;

  float& at(int t, int v, int c) { return data(t, v * channels + c); }
  float at(int t, int v, int c) const { return data(t, v * channels + c); }

  void validate() const;

  /// Frame-major copy widened to double for model-side math.
  Matrix to_double() const { return data.cast<double>(); }
};

struct SampleInfo {
  std::string sample_id;
  int label = -1;
  uint64_t offset = 0;  // byte offset of the sample record in the file
  uint64_t length = 0;  // record length in bytes
};

struct DatasetManifest {
  std::vector<SampleInfo> samples;
  int num_classes = 0;
  int joints = 0;
  int channels = 0;
};

/// Deterministic multi-class generator. Class c traces
///   data[t,v,:] = base_pose[v,:] + amplitude*sin(2*pi*f_c*t/frames + phi_v) + N(0, noise_std^2)
/// with per-joint phase phi_v = 2*pi*v/V; classes are separable by their
/// temporal frequency f_c.
struct SyntheticSpec {
  int num_classes = 4;
  int samples_per_class = 32;
  int frames = 60;
  int joints = 10;
  int channels = 3;
  MatrixF base_pose;          // joints x channels; empty = ring_pose default
  std::vector<double> class_frequencies;  // cycles per sequence; empty = 1..K
  double amplitude = 1.0;
  double noise_std = 0.0;
  uint64_t seed = 0;

  void validate() const;
  MatrixF resolved_base_pose() const;
  std::vector<double> resolved_frequencies() const;
};

/// Joints spread on a unit circle in the first two channels.
MatrixF ring_pose(int joints, int channels);

std::vector<SkeletonSequence> generate_synthetic(const SyntheticSpec& spec);

/// SKL1 container. Writes a JSON summary sidecar at path + ".json".
DatasetManifest write_dataset(const std::vector<SkeletonSequence>& sequences,
                              const std::string& path);
std::pair<DatasetManifest, std::vector<SkeletonSequence>> read_dataset(const std::string& path);

/// Random contiguous clip covering 50-100% of the frames, then linear
/// resampling along time to exactly target_frames.
SkeletonSequence temporal_crop_resample(const SkeletonSequence& seq, int target_frames,
                                        RngStream& rng);

/// Deterministic eval-time counterpart: the full sequence resampled to
/// target_frames.
SkeletonSequence center_resample(const SkeletonSequence& seq, int target_frames);

/// Frame differences, zero-padded on the last frame so the output keeps
/// the input frame count: out[t] = x[t+1] - x[t], out[T-1] = 0.
Matrix motion_transform(const Matrix& x);

}  // namespace gfp::skeldata
