#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace firntda {

/// 8-bit grayscale image, row-major. Pixel values are stored as uint8_t so
/// the [0, 255] range holds by construction.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, std::uint8_t fill = 0);
  GrayImage(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool empty() const noexcept { return pixels_.empty(); }

  std::uint8_t at(int x, int y) const { return pixels_[index(x, y)]; }
  std::uint8_t& at(int x, int y) { return pixels_[index(x, y)]; }

  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
  std::span<std::uint8_t> pixels() noexcept { return pixels_; }

  bool operator==(const GrayImage&) const = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

// ---------------------------------------------------------------------------
// I/O

/// Reads a binary PGM (P5, maxval 255) or an 8-bit grayscale PNG. Pixel
/// values are copied verbatim.
GrayImage load_image(const std::filesystem::path& path);

/// Parses an in-memory P5 buffer.
GrayImage decode_pgm(std::span<const std::uint8_t> bytes);

void save_pgm(const GrayImage& img, const std::filesystem::path& path);

/// 16-bit big-endian P5 dump, used for distance-transform debugging.
void save_pgm16(int width, int height, std::span<const std::uint16_t> values,
                const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Manipulations

/// 3x3 binomial blur (1,2,1;2,4,2;1,2,1)/16 with edge replication and
/// round-half-up.
GrayImage gaussian_blur3(const GrayImage& img);

enum class Quadrant : std::uint8_t { top_left, top_right, bottom_left, bottom_right };

inline constexpr std::array<Quadrant, 4> kQuadrants{
    Quadrant::top_left, Quadrant::top_right, Quadrant::bottom_left,
    Quadrant::bottom_right};

const char* to_string(Quadrant q) noexcept;

/// Splits at column width/2 and row height/2 (floor). Output order is
/// TL, TR, BL, BR; on odd sizes the top-left block is the smaller one.
std::array<GrayImage, 4> split_quadrants(const GrayImage& img);

/// Inverse of split_quadrants.
GrayImage join_quadrants(const std::array<GrayImage, 4>& parts);

/// The eight symmetries of the square.
enum class Dihedral : std::uint8_t {
  identity,
  rotate90,
  rotate180,
  rotate270,
  flip_horizontal,
  flip_vertical,
  transpose,
  anti_transpose,
};

inline constexpr std::array<Dihedral, 8> kDihedralGroup{
    Dihedral::identity,        Dihedral::rotate90,      Dihedral::rotate180,
    Dihedral::rotate270,       Dihedral::flip_horizontal, Dihedral::flip_vertical,
    Dihedral::transpose,       Dihedral::anti_transpose};

GrayImage transform(const GrayImage& img, Dihedral op);

// ---------------------------------------------------------------------------
// Synthetic firn

inline constexpr std::array<int, 10> kDepthsMetres{7, 15, 23, 31, 38, 46, 53, 61, 70, 78};

/// Index of a depth in kDepthsMetres, or -1.
int depth_class(int depth_metres) noexcept;

struct SynthParams {
  int depth_label = 7;
  double pore_fraction = 0.45;
  double correlation_length = 6.0;  // pixels
  int speckle_amplitude = 25;
  int intensity_offset = 0;  // added to both pore and ice levels
  std::uint64_t seed = 0;
  int width = 128;
  int height = 128;
};

/// Default depth -> parameter map: pore fraction 0.45 at 7 m down to 0.06 at
/// 78 m, correlation length 6 px down to 2.5 px, both linear in depth.
/// intensity_offset is a per-depth acquisition shift in [0, 60], a fixed hash
/// of the depth (independent of seed and not monotone in depth).
SynthParams default_synth_params(int depth_metres, std::uint64_t seed, int size = 128);

/// Smoothed white noise thresholded at the pore-fraction quantile. Pores are
/// near black (10 +- amplitude/2), ice is mid gray (140 +- amplitude), both
/// shifted by intensity_offset.
GrayImage synth_firn(const SynthParams& params);

/// Boolean pore mask used by synth_firn before intensities are assigned.
std::vector<bool> synth_pore_mask(const SynthParams& params);

}  // namespace firntda
