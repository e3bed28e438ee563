#include "aff/image_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace aff {

namespace {

[[noreturn]] void fail_at(std::istream& in, const std::string& what) {
  const auto pos = in.tellg();
  throw std::runtime_error("image parse error at byte offset " +
                           std::to_string(pos < 0 ? -1 : static_cast<long long>(pos)) + ": " + what);
}

// Netpbm token: skips whitespace and '#' comment lines.
std::string next_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (!std::isspace(ch)) {
      tok.push_back(static_cast<char>(ch));
      break;
    }
  }
  while ((ch = in.get()) != EOF && !std::isspace(ch)) tok.push_back(static_cast<char>(ch));
  return tok;
}

int parse_int(std::istream& in, const std::string& what) {
  const std::string tok = next_token(in);
  if (tok.empty()) fail_at(in, "missing " + what);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    fail_at(in, "malformed " + what + " '" + tok + "'");
  }
}

}  // namespace

Image read_image(std::istream& in) {
  const std::string magic = next_token(in);
  int channels;
  if (magic == "P5") channels = 1;
  else if (magic == "P6") channels = 3;
  else fail_at(in, "unsupported magic '" + magic + "' (expected P5 or P6)");

  Image img;
  img.channels = channels;
  img.width = parse_int(in, "width");
  img.height = parse_int(in, "height");
  if (img.width <= 0 || img.height <= 0) fail_at(in, "non-positive dimensions");
  const int maxval = parse_int(in, "maxval");
  if (maxval != 255) fail_at(in, "unsupported maxval " + std::to_string(maxval) + " (only 255)");
  // Exactly one whitespace byte separates the header from the payload; it
  // was consumed by the maxval token read.

  const std::size_t count = static_cast<std::size_t>(img.width) * img.height * channels;
  img.pixels.resize(count);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(in.gcount()) != count) fail_at(in, "truncated pixel payload");
  return img;
}

Image read_image(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  check(f.good(), "read_image: cannot open " + path);
  return read_image(f);
}

void write_image(const Image& img, std::ostream& out) {
  check(img.channels == 1 || img.channels == 3, "write_image: channels must be 1 or 3");
  check(img.pixels.size() == static_cast<std::size_t>(img.width) * img.height * img.channels,
        "write_image: pixel buffer size mismatch");
  out << (img.channels == 1 ? "P5" : "P6") << "\n"
      << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
}

void write_image(const Image& img, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  check(f.good(), "write_image: cannot open " + path);
  write_image(img, f);
  check(f.good(), "write_image: write failed for " + path);
}

std::vector<float> to_unit_floats(const Image& img) {
  std::vector<float> out(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) out[i] = float(img.pixels[i]) / 255.0f;
  return out;
}

Image from_unit_floats(const std::vector<float>& pixels, int height, int width) {
  check(pixels.size() == static_cast<std::size_t>(height) * width, "from_unit_floats: size mismatch");
  Image img;
  img.height = height;
  img.width = width;
  img.channels = 1;
  img.pixels.resize(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const float v = std::min(1.0f, std::max(0.0f, pixels[i]));
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  return img;
}

Image render_overlay(const Image& base, const std::vector<Vec2>& token_positions) {
  Image out;
  out.height = base.height;
  out.width = base.width;
  out.channels = 3;
  out.pixels.resize(static_cast<std::size_t>(base.height) * base.width * 3);
  for (int r = 0; r < base.height; ++r)
    for (int c = 0; c < base.width; ++c)
      for (int ch = 0; ch < 3; ++ch)
        out.at(r, c, ch) = base.channels == 3 ? base.at(r, c, ch) : base.at(r, c, 0);

  for (const Vec2& p : token_positions) {
    const long long c = std::llround(p.x * 4.0);
    const long long r = std::llround(p.y * 4.0);
    check(r >= 0 && r < base.height && c >= 0 && c < base.width,
          "render_overlay: token out of image range");
    out.at(static_cast<int>(r), static_cast<int>(c), 0) = 255;
    out.at(static_cast<int>(r), static_cast<int>(c), 1) = 0;
    out.at(static_cast<int>(r), static_cast<int>(c), 2) = 0;
  }
  return out;
}

}  // namespace aff
