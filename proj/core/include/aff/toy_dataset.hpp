#pragma once

#include <cstdint>
#include <vector>

namespace aff {

/// Synthetic classification sample: dark noise background plus one 4x4
/// high-contrast textured patch. Label 0 = checkerboard, 1 = stripes.
struct ToyImage {
  int size = 32;
  std::vector<float> pixels;  // size*size, unit range, single channel
  int label = 0;
  int patch_x = 0;  // top-left corner of the 4x4 patch
  int patch_y = 0;
};

constexpr int kToyPatchSize = 4;

std::vector<ToyImage> make_toy_dataset(std::uint64_t seed, int n, int image_size = 32);

}  // namespace aff
