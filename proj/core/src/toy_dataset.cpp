#include "aff/toy_dataset.hpp"

#include <random>

#include "aff/tensor.hpp"

namespace aff {

std::vector<ToyImage> make_toy_dataset(std::uint64_t seed, int n, int image_size) {
  check(n >= 2, "make_toy_dataset: need at least 2 samples");
  check(image_size >= 8 && image_size % 4 == 0, "make_toy_dataset: image size must be >= 8 and divisible by 4");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> bg(0.0f, 0.05f);
  // Patch corners land on the 4-pixel token lattice so each patch occupies
  // exactly one embed token; arbitrary phases bury the texture signal.
  std::uniform_int_distribution<int> corner(0, image_size / kToyPatchSize - 1);
  std::uniform_int_distribution<int> coin(0, 1);

  std::vector<ToyImage> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    ToyImage img;
    img.size = image_size;
    img.pixels.resize(static_cast<std::size_t>(image_size) * image_size);
    for (auto& p : img.pixels) p = bg(rng);
    img.label = coin(rng);
    img.patch_x = kToyPatchSize * corner(rng);
    img.patch_y = kToyPatchSize * corner(rng);
    // Patch values 0.65/1.0 on a <=0.05 background: contrast >= 0.6.
    for (int dy = 0; dy < kToyPatchSize; ++dy)
      for (int dx = 0; dx < kToyPatchSize; ++dx) {
        const bool high = img.label == 0 ? ((dx + dy) % 2 == 0) : (dx % 2 == 0);
        img.pixels[static_cast<std::size_t>(img.patch_y + dy) * image_size + (img.patch_x + dx)] =
            high ? 1.0f : 0.65f;
      }
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace aff
