// SPDX-License-Identifier: Apache-2.0
#include "mssf/data/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "mssf/data/image.hpp"
#include "mssf/data/resize.hpp"
#include "mssf/log.hpp"

namespace fs = std::filesystem;

namespace mssf::data {

namespace {

void check_view(const TensorF& t, const std::string& what) {
  if (!t.defined() || t.rank() != 3 || t.dim(0) != 3)
    throw InputError(what + ": expected a [3,H,W] image, got " + (t.defined() ? shape_str(t.shape()) : "nothing"));
}

TensorF flip_rows(const TensorF& x) {
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  TensorF out(x.shape());
  auto s = x.data();
  auto o = out.mutable_data();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      std::copy_n(s.data() + (ch * h + y) * w, w, o.data() + (ch * h + (h - 1 - y)) * w);
  return out;
}

TensorF flip_cols(const TensorF& x) {
  const std::size_t rows = x.dim(0) * x.dim(1), w = x.dim(2);
  TensorF out(x.shape());
  auto s = x.data();
  auto o = out.mutable_data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t col = 0; col < w; ++col) o[r * w + col] = s[r * w + (w - 1 - col)];
  return out;
}

TensorF reorder_channels(const TensorF& x, const std::array<std::size_t, 3>& order) {
  const std::size_t plane = x.dim(1) * x.dim(2);
  TensorF out(x.shape());
  auto s = x.data();
  auto o = out.mutable_data();
  for (std::size_t c = 0; c < 3; ++c) std::copy_n(s.data() + order[c] * plane, plane, o.data() + c * plane);
  return out;
}

TensorF stack(const std::vector<TensorF>& items) {
  Shape shape = items.front().shape();
  const std::size_t each = items.front().numel();
  shape.insert(shape.begin(), items.size());
  std::vector<float> values(each * items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].shape() != items.front().shape())
      throw DimensionError("assemble_batch: records of different shapes " + shape_str(items.front().shape()) +
                           " and " + shape_str(items[i].shape()));
    std::copy(items[i].data().begin(), items[i].data().end(), values.begin() + static_cast<std::ptrdiff_t>(i * each));
  }
  return TensorF(std::move(shape), std::move(values));
}

TensorF clamp_unit(TensorF x) {
  for (auto& v : x.mutable_data()) v = std::clamp(v, 0.0f, 1.0f);
  return x;
}

StereoImage read_pair(const std::string& id, const fs::path& left, const fs::path& right) {
  StereoImage img{id, load_image(left.string()), load_image(right.string())};
  img.validate();
  return img;
}

StereoPair pair_from(StereoImage hr, std::optional<StereoImage> lr, std::size_t scale) {
  if (!lr) return synthesize_pair(hr, scale);
  StereoPair pair{std::move(*lr), std::move(hr), scale};
  const std::size_t want_h = pair.lr.height() * scale, want_w = pair.lr.width() * scale;
  if (pair.hr.height() < want_h || pair.hr.width() < want_w)
    throw InputError(pair.hr.id + ": HR " + std::to_string(pair.hr.height()) + "x" + std::to_string(pair.hr.width()) +
                     " is smaller than " + std::to_string(scale) + "x the LR size");
  pair.hr.left = crop(pair.hr.left, 0, 0, want_h, want_w);
  pair.hr.right = crop(pair.hr.right, 0, 0, want_h, want_w);
  return pair;
}

bool is_image(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".ppm" || ext == ".pnm";
}

}  // namespace

void StereoImage::validate() const {
  check_view(left, id + " left view");
  check_view(right, id + " right view");
  if (left.shape() != right.shape())
    throw InputError(id + ": left " + shape_str(left.shape()) + " and right " + shape_str(right.shape()) +
                     " views differ in size");
}

void StereoPair::validate() const {
  lr.validate();
  hr.validate();
  if (hr.height() != lr.height() * scale || hr.width() != lr.width() * scale)
    throw InputError(id() + ": HR extents are not " + std::to_string(scale) + "x the LR extents");
}

std::vector<std::size_t> window_offsets(std::size_t extent, std::size_t patch, std::size_t stride) {
  if (patch == 0 || stride == 0) throw ConfigError("patch extents and stride must be positive");
  std::vector<std::size_t> out;
  if (extent < patch) return out;
  for (std::size_t o = 0; o + patch <= extent; o += stride) out.push_back(o);
  if (out.back() + patch < extent) out.push_back(extent - patch);
  return out;
}

TensorF crop(const TensorF& image, std::size_t row, std::size_t col, std::size_t h, std::size_t w) {
  const std::size_t c = image.dim(0), H = image.dim(1), W = image.dim(2);
  if (row + h > H || col + w > W)
    throw DimensionError("crop: window exceeds image " + shape_str(image.shape()));
  TensorF out({c, h, w});
  auto s = image.data();
  auto o = out.mutable_data();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      std::copy_n(s.data() + (ch * H + row + y) * W + col, w, o.data() + (ch * h + y) * w);
  return out;
}

std::vector<PatchRecord> extract_patches(const StereoPair& pair, const PatchOptions& options) {
  pair.validate();
  const auto rows = window_offsets(pair.lr.height(), options.height, options.stride);
  const auto cols = window_offsets(pair.lr.width(), options.width, options.stride);
  std::vector<PatchRecord> out;
  if (rows.empty() || cols.empty()) {
    log::warn("skipping " + pair.id() + ": LR size " + std::to_string(pair.lr.height()) + "x" +
              std::to_string(pair.lr.width()) + " is smaller than the " + std::to_string(options.height) + "x" +
              std::to_string(options.width) + " patch");
    return out;
  }
  const std::size_t s = pair.scale;
  out.reserve(rows.size() * cols.size());
  for (auto r : rows)
    for (auto c : cols) {
      PatchRecord rec;
      rec.id = pair.id();
      rec.lr_row = r;
      rec.lr_col = c;
      rec.scale = s;
      rec.lr_left = crop(pair.lr.left, r, c, options.height, options.width);
      rec.lr_right = crop(pair.lr.right, r, c, options.height, options.width);
      rec.hr_left = crop(pair.hr.left, r * s, c * s, options.height * s, options.width * s);
      rec.hr_right = crop(pair.hr.right, r * s, c * s, options.height * s, options.width * s);
      out.push_back(std::move(rec));
    }
  return out;
}

PatchRecord apply_augmentation(const PatchRecord& rec, const AugRecord& aug) {
  PatchRecord out = rec;
  auto each = [&](auto&& fn) {
    out.lr_left = fn(out.lr_left);
    out.lr_right = fn(out.lr_right);
    out.hr_left = fn(out.hr_left);
    out.hr_right = fn(out.hr_right);
  };
  if (aug.channel_order != std::array<std::size_t, 3>{0, 1, 2})
    each([&](const TensorF& t) { return reorder_channels(t, aug.channel_order); });
  if (aug.vflip) each(flip_rows);
  if (aug.hflip) {
    each(flip_cols);
    std::swap(out.lr_left, out.lr_right);
    std::swap(out.hr_left, out.hr_right);
  }
  return out;
}

std::pair<PatchRecord, AugRecord> augment(const PatchRecord& rec, const AugmentOptions& options,
                                          std::mt19937_64& rng) {
  AugRecord aug;
  if (options.hflip) aug.hflip = (rng() & 1u) != 0;
  if (options.vflip) aug.vflip = (rng() & 1u) != 0;
  if (options.channel_shuffle) {
    static constexpr std::array<std::array<std::size_t, 3>, 6> kOrders{
        {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
    aug.channel_order = kOrders[rng() % kOrders.size()];
  }
  return {apply_augmentation(rec, aug), aug};
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count, std::size_t batch, std::mt19937_64& rng,
                                                    bool shuffle) {
  if (count == 0) throw ConfigError("dataset is empty: no training patches");
  if (batch == 0) throw ConfigError("train.batch must be positive");
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < count; i += batch)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(count, i + batch)));
  return out;
}

Batch assemble_batch(const std::vector<PatchRecord>& records, const std::vector<std::size_t>& indices,
                     const AugmentOptions* augment_options, std::mt19937_64& rng) {
  if (indices.empty()) throw ConfigError("assemble_batch: empty batch");
  std::vector<TensorF> ll, lr, hl, hr;
  for (auto i : indices) {
    const PatchRecord& src = records.at(i);
    PatchRecord rec = augment_options ? augment(src, *augment_options, rng).first : src;
    ll.push_back(rec.lr_left);
    lr.push_back(rec.lr_right);
    hl.push_back(rec.hr_left);
    hr.push_back(rec.hr_right);
  }
  return Batch{stack(ll), stack(lr), stack(hl), stack(hr), indices};
}

BatchStream::BatchStream(const std::vector<PatchRecord>& records, std::size_t batch, std::uint64_t seed,
                         bool shuffle, std::optional<AugmentOptions> augment_options)
    : records_(records),
      batch_(batch),
      shuffle_(shuffle),
      augment_(augment_options),
      order_rng_(seed),
      aug_rng_(seed ^ 0x9e3779b97f4a7c15ull) {
  pending_ = epoch_batches(records_.size(), batch_, order_rng_, shuffle_);
}

Batch BatchStream::next() {
  if (cursor_ == pending_.size()) {
    pending_ = epoch_batches(records_.size(), batch_, order_rng_, shuffle_);
    cursor_ = 0;
    ++epoch_;
  }
  return assemble_batch(records_, pending_[cursor_++], augment_ ? &*augment_ : nullptr, aug_rng_);
}

StereoPair synthesize_pair(const StereoImage& hr, std::size_t scale) {
  hr.validate();
  if (scale == 0) throw ConfigError("scale must be positive");
  const std::size_t h = hr.height() / scale, w = hr.width() / scale;
  if (h == 0 || w == 0)
    throw InputError(hr.id + ": image " + std::to_string(hr.height()) + "x" + std::to_string(hr.width()) +
                     " is too small for scale " + std::to_string(scale));
  StereoImage hr_crop{hr.id, crop(hr.left, 0, 0, h * scale, w * scale), crop(hr.right, 0, 0, h * scale, w * scale)};
  StereoImage lr{hr.id, clamp_unit(bicubic_resize(hr_crop.left, h, w)), clamp_unit(bicubic_resize(hr_crop.right, h, w))};
  return StereoPair{std::move(lr), std::move(hr_crop), scale};
}

namespace {

struct PairFiles {
  std::string id;
  fs::path left, right;
};

std::vector<PairFiles> scan_pairs(const std::string& dir) {
  if (!fs::is_directory(dir)) throw InputError("image directory does not exist: " + dir);
  std::map<std::string, std::pair<fs::path, fs::path>> found;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || !is_image(entry.path())) continue;
    const std::string stem = entry.path().stem().string();
    if (stem.size() < 3) continue;
    const std::string tag = stem.substr(stem.size() - 2), id = stem.substr(0, stem.size() - 2);
    if (tag == "_L") found[id].first = entry.path();
    if (tag == "_R") found[id].second = entry.path();
  }
  std::vector<PairFiles> out;
  for (const auto& [id, paths] : found) {
    if (paths.first.empty() || paths.second.empty()) {
      log::warn("skipping " + id + ": missing " + (paths.first.empty() ? "left" : "right") + " view in " + dir);
      continue;
    }
    out.push_back({id, paths.first, paths.second});
  }
  if (out.empty()) throw InputError("no <id>_L/<id>_R image pairs found in " + dir);
  return out;
}

}  // namespace

std::vector<StereoImage> load_stereo_images(const std::string& dir) {
  std::vector<StereoImage> out;
  for (const auto& f : scan_pairs(dir)) out.push_back(read_pair(f.id, f.left, f.right));
  return out;
}

std::vector<StereoPair> load_stereo_dir(const std::string& hr_dir, const std::optional<std::string>& lr_dir,
                                        std::size_t scale) {
  if (lr_dir && !fs::is_directory(*lr_dir)) throw InputError("image directory does not exist: " + *lr_dir);
  std::vector<StereoPair> out;
  for (const auto& f : scan_pairs(hr_dir)) {
    StereoImage hr = read_pair(f.id, f.left, f.right);
    std::optional<StereoImage> lr;
    if (lr_dir) {
      const fs::path l = fs::path(*lr_dir) / f.left.filename(), r = fs::path(*lr_dir) / f.right.filename();
      if (!fs::exists(l) || !fs::exists(r)) throw InputError("missing LR view for " + f.id + " in " + *lr_dir);
      lr = read_pair(f.id, l, r);
    }
    out.push_back(pair_from(std::move(hr), std::move(lr), scale));
  }
  return out;
}

std::vector<StereoPair> load_manifest(const std::string& path, std::size_t scale) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open manifest " + path);
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  std::vector<StereoPair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() != 3 && fields.size() != 5)
      throw InputError(path + ":" + std::to_string(lineno) + ": expected 3 or 5 tab-separated fields, got " +
                       std::to_string(fields.size()));
    StereoImage hr = read_pair(fields[0], resolve(fields[1]), resolve(fields[2]));
    std::optional<StereoImage> lr;
    if (fields.size() == 5) lr = read_pair(fields[0], resolve(fields[3]), resolve(fields[4]));
    out.push_back(pair_from(std::move(hr), std::move(lr), scale));
  }
  if (out.empty()) throw InputError("manifest " + path + " lists no image pairs");
  return out;
}

}  // namespace mssf::data
