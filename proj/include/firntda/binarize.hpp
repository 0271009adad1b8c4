#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "firntda/image.hpp"

namespace firntda {

enum class Phase : std::uint8_t { ice, pore };

struct BinaryImage {
  int width = 0;
  int height = 0;
  std::vector<Phase> mask;  // row-major

  Phase at(int x, int y) const {
    return mask[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                static_cast<std::size_t>(x)];
  }
  bool operator==(const BinaryImage&) const = default;
};

/// Distance-transform filtration image. `squared` holds exact integer squared
/// distances, `values` their square roots, `capped` min(round(value), 100).
struct DTImage {
  static constexpr int kCap = 100;

  int width = 0;
  int height = 0;
  std::vector<std::int64_t> squared;
  std::vector<double> values;
  std::vector<int> capped;

  bool operator==(const DTImage&) const = default;
};

using Histogram = std::array<std::uint64_t, 256>;

Histogram histogram(const GrayImage& img);

/// Otsu threshold: the smallest t maximising between-class variance of
/// {v <= t} vs {v > t}. Scores are compared exactly, so ties are genuine.
/// Throws Errc::degenerate_histogram when fewer than two levels are occupied.
int otsu_threshold(const Histogram& hist);
int otsu_threshold(const GrayImage& img);

/// Smooth with gaussian_blur3, threshold with Otsu; dark side is PORE.
BinaryImage binarize(const GrayImage& img);

/// Exact Euclidean distance to the nearest ICE pixel (two separable passes:
/// per-row 1D distances, then a per-column lower envelope). Rows and columns
/// are processed in parallel with OpenMP.
/// Throws Errc::no_background if the mask contains no ICE pixel.
DTImage distance_transform(const BinaryImage& bin);

/// Single-threaded reference of distance_transform; results are identical.
DTImage distance_transform_serial(const BinaryImage& bin);

BinaryImage transpose(const BinaryImage& bin);

}  // namespace firntda
