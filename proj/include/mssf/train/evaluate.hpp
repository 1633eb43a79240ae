// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mssf/data/dataset.hpp"
#include "mssf/model/model.hpp"

namespace mssf::train {

/// Columns removed from the left edge for the cropped-left-view metrics.
inline constexpr std::size_t kLeftCrop = 64;

struct EvalRow {
  std::string id;
  /// Left view without its leftmost 64 columns; empty when the image is
  /// too narrow.
  std::optional<double> psnr_left_crop, ssim_left_crop;
  /// Mean of the left and right full-frame scores.
  double psnr_avg = 0.0, ssim_avg = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;  // sorted by id
  double mean_psnr_left_crop = 0.0, mean_ssim_left_crop = 0.0;
  std::size_t cropped_count = 0;
  double mean_psnr_avg = 0.0, mean_ssim_avg = 0.0;
};

/// Eval-mode forward on one pair; outputs are [3,sH,sW] clamped to [0,1].
data::StereoImage super_resolve(const Model<float>& model, const data::StereoImage& lr);

EvalRow score_pair(const data::StereoImage& sr, const data::StereoImage& hr);
EvalReport summarize(std::vector<EvalRow> rows);
EvalReport evaluate(const Model<float>& model, const std::vector<data::StereoPair>& pairs);

/// Header plus one id,psnr_left_crop,ssim_left_crop,psnr_avg,ssim_avg row
/// per image; skipped crops are written as "nan".
void write_report_csv(std::ostream& os, const EvalReport& report);
/// Human-readable aggregates.
void write_report_summary(std::ostream& os, const EvalReport& report);

}  // namespace mssf::train
