#include "gfp/skeldata.hpp"

#include "gfp/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

namespace gfp::skeldata {

namespace {
constexpr char kMagic[4] = {'S', 'K', 'L', '1'};
constexpr uint16_t kFormatVersion = 1;
}  // namespace

void SkeletonSequence::validate() const {
  require(frames >= 2, "SkeletonSequence: frames must be >= 2");
  require(joints >= 1, "SkeletonSequence: joints must be >= 1");
  require(channels >= 1, "SkeletonSequence: channels must be >= 1");
  require(data.rows() == frames && data.cols() == Index(joints) * channels,
          "SkeletonSequence: data shape does not match frames/joints/channels");
  require(data.allFinite(), "SkeletonSequence: data contains non-finite values");
}

void SyntheticSpec::validate() const {
  require(num_classes >= 2, "SyntheticSpec: num_classes must be >= 2");
  require(samples_per_class >= 1, "SyntheticSpec: samples_per_class must be >= 1");
  require(frames >= 2, "SyntheticSpec: frames must be >= 2");
  require(joints >= 1 && channels >= 1, "SyntheticSpec: joints and channels must be >= 1");
  require(noise_std >= 0.0, "SyntheticSpec: noise_std must be >= 0");
  if (base_pose.size() > 0) {
    require(base_pose.rows() == joints && base_pose.cols() == channels,
            "SyntheticSpec: base_pose must be joints x channels");
  }
  auto freqs = resolved_frequencies();
  require(static_cast<int>(freqs.size()) == num_classes,
          "SyntheticSpec: class_frequencies must have num_classes entries");
  for (size_t i = 0; i < freqs.size(); ++i)
    for (size_t j = i + 1; j < freqs.size(); ++j)
      require(freqs[i] != freqs[j], "SyntheticSpec: class_frequencies must be pairwise distinct");
}

MatrixF ring_pose(int joints, int channels) {
  MatrixF pose = MatrixF::Zero(joints, channels);
  for (int v = 0; v < joints; ++v) {
    double angle = 2.0 * M_PI * v / joints;
    pose(v, 0) = static_cast<float>(std::cos(angle));
    if (channels >= 2) pose(v, 1) = static_cast<float>(std::sin(angle));
  }
  return pose;
}

MatrixF SyntheticSpec::resolved_base_pose() const {
  return base_pose.size() > 0 ? base_pose : ring_pose(joints, channels);
}

std::vector<double> SyntheticSpec::resolved_frequencies() const {
  if (!class_frequencies.empty()) return class_frequencies;
  std::vector<double> freqs(num_classes);
  for (int c = 0; c < num_classes; ++c) freqs[c] = c + 1.0;
  return freqs;
}

std::vector<SkeletonSequence> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const MatrixF pose = spec.resolved_base_pose();
  const std::vector<double> freqs = spec.resolved_frequencies();

  std::vector<SkeletonSequence> out;
  out.reserve(static_cast<size_t>(spec.num_classes) * spec.samples_per_class);
  int sample_index = 0;
  for (int cls = 0; cls < spec.num_classes; ++cls) {
    for (int s = 0; s < spec.samples_per_class; ++s, ++sample_index) {
      RngStream noise(spec.seed, "synthetic-noise", static_cast<uint64_t>(sample_index));
      SkeletonSequence seq;
      seq.frames = spec.frames;
      seq.joints = spec.joints;
      seq.channels = spec.channels;
      seq.label = cls;
      seq.sample_id = "syn-" + std::to_string(spec.seed) + "-c" + std::to_string(cls) + "-s" +
                      std::to_string(s);
      seq.data.resize(spec.frames, Index(spec.joints) * spec.channels);
      for (int t = 0; t < spec.frames; ++t) {
        for (int v = 0; v < spec.joints; ++v) {
          const double phase = 2.0 * M_PI * v / spec.joints;
          const double wave =
              spec.amplitude *
              std::sin(2.0 * M_PI * freqs[cls] * t / spec.frames + phase);
          for (int c = 0; c < spec.channels; ++c) {
            double value = pose(v, c) + wave + spec.noise_std * noise.normal();
            seq.at(t, v, c) = static_cast<float>(value);
          }
        }
      }
      out.push_back(std::move(seq));
    }
  }
  return out;
}

DatasetManifest write_dataset(const std::vector<SkeletonSequence>& sequences,
                              const std::string& path) {
  int joints = 0, channels = 0;
  for (const auto& seq : sequences) {
    seq.validate();
    if (joints == 0) {
      joints = seq.joints;
      channels = seq.channels;
    }
    require(seq.joints == joints && seq.channels == channels,
            "write_dataset: all sequences must share joints and channels");
  }

  DatasetManifest manifest;
  manifest.joints = joints;
  manifest.channels = channels;

  io::BinaryWriter w(path);
  w.bytes(kMagic, 4);
  w.u16(kFormatVersion);
  w.u16(static_cast<uint16_t>(joints));
  w.u16(static_cast<uint16_t>(channels));
  w.u32(static_cast<uint32_t>(sequences.size()));

  std::map<int, int> label_counts;
  for (const auto& seq : sequences) {
    SampleInfo info;
    info.sample_id = seq.sample_id;
    info.label = seq.label;
    info.offset = w.tell();
    w.str16(seq.sample_id);
    w.i32(seq.label);
    w.u32(static_cast<uint32_t>(seq.frames));
    for (int t = 0; t < seq.frames; ++t)
      for (int v = 0; v < seq.joints; ++v)
        for (int c = 0; c < seq.channels; ++c) w.f32(seq.at(t, v, c));
    info.length = w.tell() - info.offset;
    manifest.samples.push_back(std::move(info));
    if (seq.label >= 0) {
      label_counts[seq.label]++;
      manifest.num_classes = std::max(manifest.num_classes, seq.label + 1);
    }
  }
  w.close();

  nlohmann::json summary;
  summary["num_samples"] = sequences.size();
  summary["num_classes"] = manifest.num_classes;
  summary["joints"] = joints;
  summary["channels"] = channels;
  nlohmann::json per_class = nlohmann::json::object();
  for (auto& [label, count] : label_counts) per_class[std::to_string(label)] = count;
  summary["samples_per_class"] = per_class;
  std::ofstream side(path + ".json", std::ios::trunc);
  require(bool(side), "write_dataset: cannot write sidecar " + path + ".json");
  side << summary.dump(2) << "\n";

  return manifest;
}

std::pair<DatasetManifest, std::vector<SkeletonSequence>> read_dataset(const std::string& path) {
  io::BinaryReader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic in " + path);
  uint16_t version = r.u16();
  if (version != kFormatVersion)
    throw FormatError("unsupported dataset format version " + std::to_string(version));

  DatasetManifest manifest;
  manifest.joints = r.u16();
  manifest.channels = r.u16();
  uint32_t num_samples = r.u32();

  std::vector<SkeletonSequence> sequences;
  sequences.reserve(num_samples);
  for (uint32_t i = 0; i < num_samples; ++i) {
    SampleInfo info;
    info.offset = r.tell();
    SkeletonSequence seq;
    seq.sample_id = r.str16();
    seq.label = r.i32();
    seq.frames = static_cast<int>(r.u32());
    seq.joints = manifest.joints;
    seq.channels = manifest.channels;
    seq.data.resize(seq.frames, Index(seq.joints) * seq.channels);
    for (int t = 0; t < seq.frames; ++t)
      for (int v = 0; v < seq.joints; ++v)
        for (int c = 0; c < seq.channels; ++c) seq.at(t, v, c) = r.f32();
    info.sample_id = seq.sample_id;
    info.label = seq.label;
    info.length = r.tell() - info.offset;
    if (seq.label >= 0) manifest.num_classes = std::max(manifest.num_classes, seq.label + 1);
    manifest.samples.push_back(std::move(info));
    sequences.push_back(std::move(seq));
  }

  for (size_t i = 0; i < manifest.samples.size(); ++i)
    for (size_t j = i + 1; j < manifest.samples.size(); ++j)
      if (manifest.samples[i].sample_id == manifest.samples[j].sample_id)
        throw FormatError("duplicate sample_id in " + path + ": " + manifest.samples[i].sample_id);

  return {std::move(manifest), std::move(sequences)};
}

namespace {
// Linear interpolation of rows [start, start+len) onto target_frames points.
MatrixF resample_rows(const MatrixF& data, int start, int len, int target_frames) {
  MatrixF out(target_frames, data.cols());
  for (int t = 0; t < target_frames; ++t) {
    double src = start + (target_frames == 1 ? 0.0
                                             : static_cast<double>(t) * (len - 1) / (target_frames - 1));
    int lo = static_cast<int>(std::floor(src));
    int hi = std::min(lo + 1, start + len - 1);
    double frac = src - lo;
    out.row(t) = ((1.0 - frac) * data.row(lo).cast<double>() +
                  frac * data.row(hi).cast<double>())
                     .cast<float>();
  }
  return out;
}
}  // namespace

SkeletonSequence temporal_crop_resample(const SkeletonSequence& seq, int target_frames,
                                        RngStream& rng) {
  seq.validate();
  require(target_frames >= 2, "temporal_crop_resample: target_frames must be >= 2");
  const int t_raw = seq.frames;
  const int min_len = static_cast<int>((t_raw + 1) / 2);  // ceil(0.5 * T_raw)
  const int len = min_len + static_cast<int>(rng.uniform_int(t_raw - min_len + 1));
  const int start = static_cast<int>(rng.uniform_int(t_raw - len + 1));

  SkeletonSequence out = seq;
  out.frames = target_frames;
  out.data = resample_rows(seq.data, start, len, target_frames);
  return out;
}

SkeletonSequence center_resample(const SkeletonSequence& seq, int target_frames) {
  seq.validate();
  require(target_frames >= 2, "center_resample: target_frames must be >= 2");
  SkeletonSequence out = seq;
  out.frames = target_frames;
  out.data = resample_rows(seq.data, 0, seq.frames, target_frames);
  return out;
}

Matrix motion_transform(const Matrix& x) {
  require(x.rows() >= 2, "motion_transform: needs at least 2 frames");
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  out.topRows(x.rows() - 1) = x.bottomRows(x.rows() - 1) - x.topRows(x.rows() - 1);
  return out;
}

}  // namespace gfp::skeldata
