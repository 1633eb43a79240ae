// SPDX-License-Identifier: Apache-2.0
#include "mssf/train/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "mssf/config.hpp"
#include "mssf/log.hpp"
#include "mssf/ops.hpp"
#include "mssf/train/metrics.hpp"

namespace mssf::train {

namespace {

TensorF batch_of_one(const TensorF& img) {
  Shape s = img.shape();
  s.insert(s.begin(), 1);
  return TensorF(s, std::vector<float>(img.data().begin(), img.data().end()));
}

TensorF unbatch_clamped(const TensorF& out) {
  Shape s(out.shape().begin() + 1, out.shape().end());
  std::vector<float> v(out.data().begin(), out.data().end());
  for (auto& x : v) x = std::clamp(x, 0.0f, 1.0f);
  return TensorF(std::move(s), std::move(v));
}

TensorF drop_left_columns(const TensorF& img, std::size_t cols) {
  const std::size_t c = img.dim(0), h = img.dim(1), w = img.dim(2), ow = w - cols;
  TensorF out({c, h, ow});
  auto s = img.data();
  auto o = out.mutable_data();
  for (std::size_t r = 0; r < c * h; ++r) std::copy_n(s.data() + r * w + cols, ow, o.data() + r * ow);
  return out;
}

std::string metric(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << v;
  return os.str();
}

}  // namespace

data::StereoImage super_resolve(const Model<float>& model, const data::StereoImage& lr) {
  lr.validate();
  NoGradGuard no_grad;
  const auto out = model.forward(batch_of_one(lr.left), batch_of_one(lr.right));
  return data::StereoImage{lr.id, unbatch_clamped(out.left), unbatch_clamped(out.right)};
}

EvalRow score_pair(const data::StereoImage& sr, const data::StereoImage& hr) {
  EvalRow row;
  row.id = hr.id;
  row.psnr_avg = 0.5 * (psnr(hr.left, sr.left) + psnr(hr.right, sr.right));
  row.ssim_avg = 0.5 * (ssim(hr.left, sr.left) + ssim(hr.right, sr.right));
  if (hr.width() > kLeftCrop) {
    const TensorF ref = drop_left_columns(hr.left, kLeftCrop), out = drop_left_columns(sr.left, kLeftCrop);
    row.psnr_left_crop = psnr(ref, out);
    if (ref.dim(2) >= SsimOptions{}.window) {
      row.ssim_left_crop = ssim(ref, out);
    } else {
      row.psnr_left_crop.reset();
      log::info(hr.id + ": left-view crop leaves " + std::to_string(ref.dim(2)) +
                " columns, too few for SSIM; cropped metrics skipped");
    }
  } else {
    log::info(hr.id + ": width " + std::to_string(hr.width()) + " leaves nothing after the " +
              std::to_string(kLeftCrop) + "-column crop; cropped metrics skipped");
  }
  return row;
}

EvalReport summarize(std::vector<EvalRow> rows) {
  std::sort(rows.begin(), rows.end(), [](const EvalRow& a, const EvalRow& b) { return a.id < b.id; });
  EvalReport r;
  for (const auto& row : rows) {
    r.mean_psnr_avg += row.psnr_avg;
    r.mean_ssim_avg += row.ssim_avg;
    if (row.psnr_left_crop) {
      r.mean_psnr_left_crop += *row.psnr_left_crop;
      r.mean_ssim_left_crop += *row.ssim_left_crop;
      ++r.cropped_count;
    }
  }
  const auto n = static_cast<double>(rows.size());
  if (!rows.empty()) {
    r.mean_psnr_avg /= n;
    r.mean_ssim_avg /= n;
  }
  if (r.cropped_count) {
    r.mean_psnr_left_crop /= static_cast<double>(r.cropped_count);
    r.mean_ssim_left_crop /= static_cast<double>(r.cropped_count);
  } else {
    r.mean_psnr_left_crop = r.mean_ssim_left_crop = std::nan("");
  }
  r.rows = std::move(rows);
  return r;
}

EvalReport evaluate(const Model<float>& model, const std::vector<data::StereoPair>& pairs) {
  std::vector<EvalRow> rows;
  rows.reserve(pairs.size());
  for (const auto& pair : pairs) {
    pair.validate();
    if (pair.scale != model.config().scale)
      throw ConfigError(pair.id() + ": data scale " + std::to_string(pair.scale) + " does not match model.scale " +
                        std::to_string(model.config().scale));
    rows.push_back(score_pair(super_resolve(model, pair.lr), pair.hr));
  }
  return summarize(std::move(rows));
}

void write_report_csv(std::ostream& os, const EvalReport& report) {
  const double none = std::nan("");
  os << "id,psnr_left_crop,ssim_left_crop,psnr_avg,ssim_avg\n";
  for (const auto& r : report.rows)
    os << r.id << ',' << metric(r.psnr_left_crop.value_or(none)) << ',' << metric(r.ssim_left_crop.value_or(none))
       << ',' << metric(r.psnr_avg) << ',' << metric(r.ssim_avg) << '\n';
}

void write_report_summary(std::ostream& os, const EvalReport& report) {
  os << "images: " << report.rows.size() << '\n'
     << "left view, " << kLeftCrop << " columns cropped (" << report.cropped_count
     << " images): PSNR " << metric(report.mean_psnr_left_crop) << " dB, SSIM " << metric(report.mean_ssim_left_crop)
     << '\n'
     << "stereo average, uncropped: PSNR " << metric(report.mean_psnr_avg) << " dB, SSIM "
     << metric(report.mean_ssim_avg) << '\n';
}

}  // namespace mssf::train
