#include "firntda/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>

#include "firntda/error.hpp"
#include "firntda/rng.hpp"

namespace firntda {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::io: return "io";
    case Errc::format: return "format";
    case Errc::unsupported_format: return "unsupported_format";
    case Errc::bad_maxval: return "bad_maxval";
    case Errc::degenerate_split: return "degenerate_split";
    case Errc::degenerate_histogram: return "degenerate_histogram";
    case Errc::no_background: return "no_background";
    case Errc::empty_input: return "empty_input";
    case Errc::dimension_mismatch: return "dimension_mismatch";
    case Errc::config: return "config";
    case Errc::argument: return "argument";
  }
  return "unknown";
}

GrayImage::GrayImage(int width, int height, std::uint8_t fill)
    : width_(width), height_(height) {
  if (width <= 0 || height <= 0) {
    throw Error(Errc::argument, "image dimensions must be positive");
  }
  pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

GrayImage::GrayImage(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width <= 0 || height <= 0) {
    throw Error(Errc::argument, "image dimensions must be positive");
  }
  if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(Errc::dimension_mismatch, "pixel count does not match width x height");
  }
}

// ---------------------------------------------------------------------------
// I/O

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(Errc::io, "cannot open " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) {
    throw Error(Errc::io, "read failed: " + path.string());
  }
  return bytes;
}

constexpr std::array<std::uint8_t, 8> kPngSignature{0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

GrayImage decode_png(std::span<const std::uint8_t> bytes) {
  // IHDR is always the first chunk: signature(8) len(4) "IHDR"(4) w(4) h(4)
  // bit depth(1) colour type(1).
  if (bytes.size() < 33 || std::memcmp(bytes.data() + 12, "IHDR", 4) != 0) {
    throw Error(Errc::format, "truncated PNG header");
  }
  const int bit_depth = bytes[24];
  const int colour_type = bytes[25];
  if (bit_depth != 8 || colour_type != 0) {
    throw Error(Errc::unsupported_format,
                "PNG must be 8-bit single-channel grayscale (got depth " +
                    std::to_string(bit_depth) + ", colour type " +
                    std::to_string(colour_type) + ")");
  }

  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw Error(Errc::format, std::string("PNG decode failed: ") + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error(Errc::format, std::string("PNG decode failed: ") + image.message);
  }
  return GrayImage(static_cast<int>(image.width), static_cast<int>(image.height),
                   std::move(pixels));
}

// Reads one whitespace/comment-separated unsigned integer from a PNM header.
int read_header_int(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  if (pos >= bytes.size() || !std::isdigit(bytes[pos])) {
    throw Error(Errc::format, "truncated or malformed PGM header");
  }
  long value = 0;
  while (pos < bytes.size() && std::isdigit(bytes[pos])) {
    value = value * 10 + (bytes[pos] - '0');
    if (value > 1'000'000) {
      throw Error(Errc::format, "PGM header value out of range");
    }
    ++pos;
  }
  return static_cast<int>(value);
}

}  // namespace

GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw Error(Errc::unsupported_format, "not a binary PGM (P5)");
  }
  std::size_t pos = 2;
  const int width = read_header_int(bytes, pos);
  const int height = read_header_int(bytes, pos);
  const int maxval = read_header_int(bytes, pos);
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw Error(Errc::format, "truncated or malformed PGM header");
  }
  ++pos;  // exactly one whitespace byte before the raster
  if (width <= 0 || height <= 0) {
    throw Error(Errc::format, "PGM dimensions must be positive");
  }
  if (maxval != 255) {
    throw Error(Errc::bad_maxval, "PGM maxval must be 255, got " + std::to_string(maxval));
  }
  const auto count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() - pos < count) {
    throw Error(Errc::format, "truncated PGM raster");
  }
  std::vector<std::uint8_t> pixels(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                   bytes.begin() + static_cast<std::ptrdiff_t>(pos + count));
  return GrayImage(width, height, std::move(pixels));
}

GrayImage load_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() >= kPngSignature.size() &&
      std::equal(kPngSignature.begin(), kPngSignature.end(), bytes.begin())) {
    return decode_png(bytes);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') {
    return decode_pgm(bytes);
  }
  throw Error(Errc::unsupported_format, "unrecognised image format: " + path.string());
}

void save_pgm(const GrayImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(Errc::io, "cannot write " + path.string());
  }
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels().data()),
            static_cast<std::streamsize>(img.size()));
  if (!out) {
    throw Error(Errc::io, "write failed: " + path.string());
  }
}

void save_pgm16(int width, int height, std::span<const std::uint16_t> values,
                const std::filesystem::path& path) {
  if (values.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(Errc::dimension_mismatch, "value count does not match width x height");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(Errc::io, "cannot write " + path.string());
  }
  out << "P5\n" << width << ' ' << height << "\n65535\n";
  for (const auto v : values) {
    const char be[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xFF)};
    out.write(be, 2);
  }
  if (!out) {
    throw Error(Errc::io, "write failed: " + path.string());
  }
}

// ---------------------------------------------------------------------------
// Manipulations

GrayImage gaussian_blur3(const GrayImage& img) {
  constexpr int kKernel[3][3] = {{1, 2, 1}, {2, 4, 2}, {1, 2, 1}};
  const int w = img.width();
  const int h = img.height();
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int acc = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        const int yy = std::clamp(y + dy, 0, h - 1);
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = std::clamp(x + dx, 0, w - 1);
          acc += kKernel[dy + 1][dx + 1] * img.at(xx, yy);
        }
      }
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp((acc + 8) / 16, 0, 255));
    }
  }
  return out;
}

const char* to_string(Quadrant q) noexcept {
  switch (q) {
    case Quadrant::top_left: return "TL";
    case Quadrant::top_right: return "TR";
    case Quadrant::bottom_left: return "BL";
    case Quadrant::bottom_right: return "BR";
  }
  return "?";
}

namespace {

GrayImage crop(const GrayImage& img, int x0, int y0, int w, int h) {
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      out.at(x, y) = img.at(x0 + x, y0 + y);
    }
  }
  return out;
}

}  // namespace

std::array<GrayImage, 4> split_quadrants(const GrayImage& img) {
  const int w = img.width();
  const int h = img.height();
  if (w < 2 || h < 2) {
    throw Error(Errc::degenerate_split, "quadrant split needs at least a 2x2 image");
  }
  const int cx = w / 2;
  const int cy = h / 2;
  return {crop(img, 0, 0, cx, cy), crop(img, cx, 0, w - cx, cy),
          crop(img, 0, cy, cx, h - cy), crop(img, cx, cy, w - cx, h - cy)};
}

GrayImage join_quadrants(const std::array<GrayImage, 4>& parts) {
  const auto& [tl, tr, bl, br] = parts;
  if (tl.height() != tr.height() || bl.height() != br.height() ||
      tl.width() != bl.width() || tr.width() != br.width()) {
    throw Error(Errc::dimension_mismatch, "quadrants do not tile a rectangle");
  }
  GrayImage out(tl.width() + tr.width(), tl.height() + bl.height());
  const std::array<std::pair<int, int>, 4> origin{
      std::pair{0, 0}, std::pair{tl.width(), 0}, std::pair{0, tl.height()},
      std::pair{tl.width(), tl.height()}};
  for (std::size_t q = 0; q < 4; ++q) {
    const auto& part = parts[q];
    for (int y = 0; y < part.height(); ++y) {
      for (int x = 0; x < part.width(); ++x) {
        out.at(origin[q].first + x, origin[q].second + y) = part.at(x, y);
      }
    }
  }
  return out;
}

GrayImage transform(const GrayImage& img, Dihedral op) {
  const int w = img.width();
  const int h = img.height();
  const bool swaps = op == Dihedral::rotate90 || op == Dihedral::rotate270 ||
                     op == Dihedral::transpose || op == Dihedral::anti_transpose;
  GrayImage out(swaps ? h : w, swaps ? w : h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int nx = x;
      int ny = y;
      switch (op) {
        case Dihedral::identity: break;
        case Dihedral::rotate90: nx = h - 1 - y; ny = x; break;  // clockwise
        case Dihedral::rotate180: nx = w - 1 - x; ny = h - 1 - y; break;
        case Dihedral::rotate270: nx = y; ny = w - 1 - x; break;
        case Dihedral::flip_horizontal: nx = w - 1 - x; break;
        case Dihedral::flip_vertical: ny = h - 1 - y; break;
        case Dihedral::transpose: nx = y; ny = x; break;
        case Dihedral::anti_transpose: nx = h - 1 - y; ny = w - 1 - x; break;
      }
      out.at(nx, ny) = img.at(x, y);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic firn

int depth_class(int depth_metres) noexcept {
  const auto it = std::find(kDepthsMetres.begin(), kDepthsMetres.end(), depth_metres);
  return it == kDepthsMetres.end() ? -1 : static_cast<int>(it - kDepthsMetres.begin());
}

SynthParams default_synth_params(int depth_metres, std::uint64_t seed, int size) {
  constexpr double kShallow = 7.0;
  constexpr double kDeep = 78.0;
  const double s = (static_cast<double>(depth_metres) - kShallow) / (kDeep - kShallow);
  SynthParams p;
  p.depth_label = depth_metres;
  p.pore_fraction = 0.45 + s * (0.06 - 0.45);
  p.correlation_length = 6.0 + s * (2.5 - 6.0);
  p.speckle_amplitude = 25;
  // Each depth section is scanned separately; the shift is shared by every
  // image at that depth.
  Rng section(derive_seed(0x5ec7'10f5'0ff5'e7ULL, static_cast<std::uint64_t>(depth_metres)));
  p.intensity_offset = static_cast<int>(section.between(0, 60));
  p.seed = seed;
  p.width = size;
  p.height = size;
  return p;
}

namespace {

// Separable Gaussian smoothing on a periodic domain.
std::vector<double> smooth_periodic(const std::vector<double>& field, int w, int h,
                                    double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * static_cast<std::size_t>(radius) + 1);
  for (int k = -radius; k <= radius; ++k) {
    kernel[static_cast<std::size_t>(k + radius)] = std::exp(-0.5 * k * k / (sigma * sigma));
  }
  const double norm = std::accumulate(kernel.begin(), kernel.end(), 0.0);
  for (auto& v : kernel) v /= norm;

  auto wrap = [](int i, int n) { return ((i % n) + n) % n; };
  std::vector<double> tmp(field.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[static_cast<std::size_t>(k + radius)] *
               field[static_cast<std::size_t>(y) * w + wrap(x + k, w)];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  std::vector<double> out(field.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[static_cast<std::size_t>(k + radius)] *
               tmp[static_cast<std::size_t>(wrap(y + k, h)) * w + x];
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

void validate(const SynthParams& p) {
  if (p.width <= 0 || p.height <= 0) {
    throw Error(Errc::argument, "synthetic image size must be positive");
  }
  if (!(p.pore_fraction > 0.0 && p.pore_fraction < 1.0)) {
    throw Error(Errc::argument, "pore_fraction must lie in (0, 1)");
  }
  if (!(p.correlation_length > 0.0)) {
    throw Error(Errc::argument, "correlation_length must be positive");
  }
  if (p.speckle_amplitude < 0) {
    throw Error(Errc::argument, "speckle_amplitude must be non-negative");
  }
  if (p.intensity_offset < -255 || p.intensity_offset > 255) {
    throw Error(Errc::argument, "intensity_offset must lie in [-255, 255]");
  }
}

}  // namespace

std::vector<bool> synth_pore_mask(const SynthParams& params) {
  validate(params);
  const int w = params.width;
  const int h = params.height;
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);

  Rng rng(derive_seed(params.seed, 0));
  std::vector<double> noise(n);
  for (auto& v : noise) v = rng.uniform();
  const auto field = smooth_periodic(noise, w, h, params.correlation_length);

  // The lowest pore_fraction quantile of the smoothed field becomes pore.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return field[a] < field[b] || (field[a] == field[b] && a < b);
  });
  const auto n_pore = static_cast<std::size_t>(std::llround(params.pore_fraction * static_cast<double>(n)));
  std::vector<bool> pore(n, false);
  for (std::size_t i = 0; i < n_pore; ++i) pore[order[i]] = true;
  return pore;
}

GrayImage synth_firn(const SynthParams& params) {
  constexpr int kPoreLevel = 10;
  constexpr int kIceLevel = 140;
  const auto pore = synth_pore_mask(params);

  Rng rng(derive_seed(params.seed, 1));
  const int amp = params.speckle_amplitude;
  const int pore_amp = amp / 2;
  GrayImage img(params.width, params.height);
  auto px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    const int v = params.intensity_offset +
                  (pore[i] ? kPoreLevel + static_cast<int>(rng.between(-pore_amp, pore_amp))
                           : kIceLevel + static_cast<int>(rng.between(-amp, amp)));
    px[i] = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
  }
  return img;
}

}  // namespace firntda
