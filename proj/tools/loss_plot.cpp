// SPDX-License-Identifier: Apache-2.0
#include "loss_plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>

#include "mssf/data/image.hpp"

namespace mssf::tools {

namespace {

constexpr std::size_t kWidth = 800, kHeight = 400, kMargin = 40;

struct Canvas {
  std::vector<std::uint8_t> rgb = std::vector<std::uint8_t>(kWidth * kHeight * 3, 255);

  void set(long x, long y, std::array<std::uint8_t, 3> c) {
    if (x < 0 || y < 0 || x >= long(kWidth) || y >= long(kHeight)) return;
    std::copy(c.begin(), c.end(), rgb.begin() + (static_cast<std::size_t>(y) * kWidth + static_cast<std::size_t>(x)) * 3);
  }

  void line(long x0, long y0, long x1, long y1, std::array<std::uint8_t, 3> c) {
    const long dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const long sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    long err = dx + dy;
    while (true) {
      set(x0, y0, c);
      if (x0 == x1 && y0 == y1) break;
      const long e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }
};

}  // namespace

void plot_loss(const std::string& path, const std::vector<train::LossRecord>& trace) {
  Canvas canvas;
  const long left = kMargin, right = kWidth - kMargin, top = kMargin / 2, bottom = kHeight - kMargin;
  constexpr std::array<std::uint8_t, 3> axis{60, 60, 60}, grid{225, 225, 225}, raw{170, 200, 235}, avg{20, 70, 160};

  std::vector<double> logs;
  for (const auto& r : trace)
    if (std::isfinite(r.loss) && r.loss > 0) logs.push_back(std::log10(r.loss));
  if (!logs.empty()) {
    double lo = *std::min_element(logs.begin(), logs.end()), hi = *std::max_element(logs.begin(), logs.end());
    lo = std::floor(lo);
    hi = std::max(std::ceil(hi), lo + 1);
    for (double d = lo; d <= hi; d += 1.0) {
      const long y = bottom - std::lround((d - lo) / (hi - lo) * double(bottom - top));
      canvas.line(left, y, right, y, grid);
    }
    const std::size_t n = logs.size();
    auto px = [&](std::size_t i) { return left + std::lround(n > 1 ? double(i) / double(n - 1) * double(right - left) : 0.0); };
    auto py = [&](double v) { return bottom - std::lround((v - lo) / (hi - lo) * double(bottom - top)); };
    for (std::size_t i = 1; i < n; ++i) canvas.line(px(i - 1), py(logs[i - 1]), px(i), py(logs[i]), raw);
    const std::size_t window = 100;
    double sum = 0;
    long prev_x = 0, prev_y = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sum += logs[i];
      if (i >= window) sum -= logs[i - window];
      const long x = px(i), y = py(sum / double(std::min(i + 1, window)));
      if (i > 0) canvas.line(prev_x, prev_y, x, y, avg);
      prev_x = x;
      prev_y = y;
    }
  }
  canvas.line(left, top, left, bottom, axis);
  canvas.line(left, bottom, right, bottom, axis);
  data::write_png_rgb8(path, kWidth, kHeight, canvas.rgb);
}

}  // namespace mssf::tools
