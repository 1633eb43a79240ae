// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mssf/tensor.hpp"

namespace mssf::data {

/// Left/right views of one rectified scene, each [3,H,W] in [0,1].
struct StereoImage {
  std::string id;
  TensorF left;
  TensorF right;

  std::size_t height() const { return left.dim(1); }
  std::size_t width() const { return left.dim(2); }
  /// Throws InputError unless both views are [3,H,W] with equal extents.
  void validate() const;
};

/// A low-resolution pair together with its ground truth at `scale`x.
struct StereoPair {
  StereoImage lr;
  StereoImage hr;
  std::size_t scale = 2;

  const std::string& id() const { return hr.id; }
  void validate() const;
};

struct PatchRecord {
  std::string id;
  std::size_t lr_row = 0, lr_col = 0;
  std::size_t scale = 1;
  TensorF lr_left, lr_right;  // [3,h,w]
  TensorF hr_left, hr_right;  // [3,s*h,s*w]

  std::size_t hr_row() const { return lr_row * scale; }
  std::size_t hr_col() const { return lr_col * scale; }
};

struct PatchOptions {
  std::size_t height = 30;
  std::size_t width = 90;
  std::size_t stride = 20;
};

/// Window start positions 0, stride, ... plus a final start of
/// extent - patch when the regular grid does not reach the end.
std::vector<std::size_t> window_offsets(std::size_t extent, std::size_t patch, std::size_t stride);

/// Row-major sliding-window crops of the LR pair and the matching HR crops.
/// A pair smaller than the patch yields nothing and logs a warning.
std::vector<PatchRecord> extract_patches(const StereoPair& pair, const PatchOptions& options);

/// Crops rows [row, row+h) and columns [col, col+w) of a [C,H,W] image.
TensorF crop(const TensorF& image, std::size_t row, std::size_t col, std::size_t h, std::size_t w);

struct AugmentOptions {
  bool hflip = true;
  bool vflip = true;
  bool channel_shuffle = true;
};

/// What augment() did. Output channel c is taken from input channel
/// channel_order[c].
struct AugRecord {
  bool hflip = false;
  bool vflip = false;
  std::array<std::size_t, 3> channel_order{0, 1, 2};
};

/// Applies a fixed augmentation to all four tensors. A horizontal flip also
/// swaps the two views, since a mirrored left image is a right image.
PatchRecord apply_augmentation(const PatchRecord& rec, const AugRecord& aug);

/// Draws flips and a channel permutation for the enabled options and
/// applies them. Disabled options consume no randomness.
std::pair<PatchRecord, AugRecord> augment(const PatchRecord& rec, const AugmentOptions& options,
                                          std::mt19937_64& rng);

/// Stacked mini-batch: each tensor is [B,3,h,w].
struct Batch {
  TensorF lr_left, lr_right, hr_left, hr_right;
  std::vector<std::size_t> indices;

  std::size_t size() const { return indices.size(); }
};

/// Index groups for one pass over `count` records; the last group may be
/// short. Throws ConfigError when count or batch is zero.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count, std::size_t batch, std::mt19937_64& rng,
                                                    bool shuffle);

/// Stacks the given records (after optional augmentation) into a Batch.
Batch assemble_batch(const std::vector<PatchRecord>& records, const std::vector<std::size_t>& indices,
                     const AugmentOptions* augment_options, std::mt19937_64& rng);

/// Endless batch stream over a fixed record set, reshuffling at every epoch
/// boundary. The sequence depends only on the seed.
class BatchStream {
 public:
  BatchStream(const std::vector<PatchRecord>& records, std::size_t batch, std::uint64_t seed, bool shuffle,
              std::optional<AugmentOptions> augment_options);

  Batch next();
  std::size_t epoch() const { return epoch_; }

 private:
  const std::vector<PatchRecord>& records_;
  std::size_t batch_;
  bool shuffle_;
  std::optional<AugmentOptions> augment_;
  std::mt19937_64 order_rng_;
  std::mt19937_64 aug_rng_;
  std::vector<std::vector<std::size_t>> pending_;
  std::size_t cursor_ = 0;
  std::size_t epoch_ = 0;
};

/// Downscales an HR pair by `scale` after cropping it to a multiple of
/// `scale`; results are clamped to [0,1].
StereoPair synthesize_pair(const StereoImage& hr, std::size_t scale);

/// Pairs <id>_L.<ext> / <id>_R.<ext> under `hr_dir`, sorted by id. With an
/// `lr_dir` the LR views are read from files of the same names, otherwise
/// they are synthesized by bicubic downscaling.
std::vector<StereoPair> load_stereo_dir(const std::string& hr_dir, const std::optional<std::string>& lr_dir,
                                        std::size_t scale);

/// Stereo pairs <id>_L.<ext> / <id>_R.<ext> in `dir`, sorted by id.
std::vector<StereoImage> load_stereo_images(const std::string& dir);

/// Tab-separated manifest: `id  hr_left  hr_right [lr_left  lr_right]` per
/// line; relative paths resolve against the manifest's directory and
/// blank lines or lines starting with '#' are ignored.
std::vector<StereoPair> load_manifest(const std::string& path, std::size_t scale);

}  // namespace mssf::data
