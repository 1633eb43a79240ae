// SPDX-License-Identifier: Apache-2.0
// Writes a tiny stereo dataset: <dir>/hr with two 60x180 pairs and
// <dir>/lr_only with one 30x90 low-resolution pair.
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "mssf/data/image.hpp"

using namespace mssf;

namespace {

TensorF pattern(std::size_t h, std::size_t w, double shift, double tone) {
  TensorF t({3, h, w});
  auto d = t.mutable_data();
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        d[(c * h + y) * w + x] = static_cast<float>(
            0.5 + 0.3 * std::sin(0.19 * (static_cast<double>(x) + shift) + tone * c) * std::cos(0.13 * y));
  return t;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: make_fixture DIR\n");
    return 2;
  }
  const std::filesystem::path root(argv[1]);
  std::filesystem::create_directories(root / "hr");
  std::filesystem::create_directories(root / "lr_only");
  for (int i = 0; i < 2; ++i) {
    const std::string id = "scene" + std::to_string(i);
    data::save_image((root / "hr" / (id + "_L.png")).string(), pattern(60, 180, 0.0, 0.5 + i));
    data::save_image((root / "hr" / (id + "_R.png")).string(), pattern(60, 180, 3.0, 0.5 + i));
  }
  data::save_image((root / "lr_only" / "view_L.png").string(), pattern(30, 90, 0.0, 0.8));
  data::save_image((root / "lr_only" / "view_R.png").string(), pattern(30, 90, 1.5, 0.8));
  return 0;
}
