#pragma once

// Independent reference computations for the test suites. Nothing here
// calls into the code paths it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "firntda/binarize.hpp"
#include "firntda/cubical.hpp"
#include "firntda/image.hpp"

namespace firntda::oracle {

/// Squared distance from every pixel to its nearest ICE pixel, by scanning
/// all ICE pixels.
inline std::vector<std::int64_t> brute_force_edt(const BinaryImage& bin) {
  std::vector<std::pair<int, int>> ice;
  for (int y = 0; y < bin.height; ++y) {
    for (int x = 0; x < bin.width; ++x) {
      if (bin.at(x, y) == Phase::ice) ice.emplace_back(x, y);
    }
  }
  std::vector<std::int64_t> out;
  out.reserve(bin.mask.size());
  for (int y = 0; y < bin.height; ++y) {
    for (int x = 0; x < bin.width; ++x) {
      std::int64_t best = std::numeric_limits<std::int64_t>::max();
      for (const auto& [ix, iy] : ice) {
        const std::int64_t dx = x - ix;
        const std::int64_t dy = y - iy;
        best = std::min(best, dx * dx + dy * dy);
      }
      out.push_back(best);
    }
  }
  return out;
}

/// Otsu by exhaustive scan: for each t, class sizes and means are recounted
/// from the pixels and w0*w1*(mu0 - mu1)^2 is compared as an exact rational
/// (S0*n1 - S1*n0)^2 / (n0*n1*N^2). Small images only (N <= 4096).
/// Returns -1 when no threshold separates two non-empty classes.
inline int exhaustive_otsu(const GrayImage& img) {
  __extension__ using i128 = __int128;
  const auto px = img.pixels();
  const auto total = static_cast<i128>(px.size());
  int best_t = -1;
  i128 best_num = 0;
  i128 best_den = 1;
  for (int t = 0; t < 256; ++t) {
    i128 n0 = 0, n1 = 0, s0 = 0, s1 = 0;
    for (const auto v : px) {
      if (v <= t) {
        ++n0;
        s0 += v;
      } else {
        ++n1;
        s1 += v;
      }
    }
    if (n0 == 0 || n1 == 0) continue;
    const i128 diff = s0 * n1 - s1 * n0;
    const i128 num = diff * diff;
    const i128 den = n0 * n1 * total * total;
    if (best_t < 0 || num * best_den > best_num * den) {
      best_t = t;
      best_num = num;
      best_den = den;
    }
  }
  return best_t;
}

/// Persistence by Z/2 boundary-matrix column reduction over the full
/// T-construction complex, built here from scratch. Small grids only.
inline Diagrams reduction_persistence(const RealGrid& grid) {
  const int w = grid.width;
  const int h = grid.height;
  struct Cell {
    int dim;
    double value;
    std::vector<int> boundary;  // ids before sorting
  };
  std::vector<Cell> cells;
  auto vid = [&](int x, int y) { return y * (w + 1) + x; };
  auto pixel = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= w || y >= h) return std::numeric_limits<double>::infinity();
    return grid.at(x, y);
  };
  for (int y = 0; y <= h; ++y) {
    for (int x = 0; x <= w; ++x) {
      const double v = std::min({pixel(x - 1, y - 1), pixel(x, y - 1), pixel(x - 1, y), pixel(x, y)});
      cells.push_back({0, v, {}});
    }
  }
  // Horizontal then vertical edges; remember ids for squares.
  std::vector<int> hedge((static_cast<std::size_t>(w)) * (h + 1));
  std::vector<int> vedge((static_cast<std::size_t>(w) + 1) * h);
  for (int y = 0; y <= h; ++y) {
    for (int x = 0; x < w; ++x) {
      hedge[static_cast<std::size_t>(y * w + x)] = static_cast<int>(cells.size());
      cells.push_back({1, std::min(pixel(x, y - 1), pixel(x, y)), {vid(x, y), vid(x + 1, y)}});
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x <= w; ++x) {
      vedge[static_cast<std::size_t>(y * (w + 1) + x)] = static_cast<int>(cells.size());
      cells.push_back({1, std::min(pixel(x - 1, y), pixel(x, y)), {vid(x, y), vid(x, y + 1)}});
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      cells.push_back({2, grid.at(x, y),
                       {hedge[static_cast<std::size_t>(y * w + x)],
                        hedge[static_cast<std::size_t>((y + 1) * w + x)],
                        vedge[static_cast<std::size_t>(y * (w + 1) + x)],
                        vedge[static_cast<std::size_t>(y * (w + 1) + x + 1)]}});
    }
  }

  // Filtration order: value, then dimension, then id.
  std::vector<int> order(cells.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (cells[a].value != cells[b].value) return cells[a].value < cells[b].value;
    return cells[a].dim < cells[b].dim;
  });
  std::vector<int> position(cells.size());
  for (std::size_t i = 0; i < order.size(); ++i) position[order[i]] = static_cast<int>(i);

  std::vector<std::vector<int>> columns(cells.size());
  for (std::size_t j = 0; j < order.size(); ++j) {
    for (const int f : cells[order[j]].boundary) columns[j].push_back(position[f]);
    std::sort(columns[j].begin(), columns[j].end());
  }

  std::vector<int> owner(cells.size(), -1);  // low row -> column
  std::vector<bool> paired(cells.size(), false);
  Diagrams out;
  for (std::size_t j = 0; j < columns.size(); ++j) {
    auto& col = columns[j];
    while (!col.empty() && owner[col.back()] >= 0) {
      const auto& other = columns[owner[col.back()]];
      std::vector<int> sum;
      std::set_symmetric_difference(col.begin(), col.end(), other.begin(), other.end(),
                                    std::back_inserter(sum));
      col = std::move(sum);
    }
    if (col.empty()) continue;
    const int low = col.back();
    owner[low] = static_cast<int>(j);
    paired[low] = true;
    paired[j] = true;
    const auto& born = cells[order[low]];
    const double death = cells[order[j]].value;
    if (born.value < death) {
      (born.dim == 0 ? out.dim0 : out.dim1).pairs.push_back({born.value, death});
    }
  }
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (paired[i]) continue;
    const auto& c = cells[order[i]];
    if (c.dim == 0) out.dim0.pairs.push_back({c.value, kEssential});
    if (c.dim == 1) out.dim1.pairs.push_back({c.value, kEssential});
  }
  return out;
}

/// Integral over {x <= t < y} of sum_i weight_i * N((b_i, d_i), sigma^2 I),
/// by composite Simpson on a truncated rectangle.
inline double box_mass_quadrature(const std::vector<std::pair<double, double>>& points,
                                  const std::vector<double>& weights, double t, double sigma,
                                  int intervals = 1600) {
  double lo_x = std::numeric_limits<double>::infinity();
  double hi_y = -std::numeric_limits<double>::infinity();
  for (const auto& [b, d] : points) {
    lo_x = std::min(lo_x, b - 12.0 * sigma);
    hi_y = std::max(hi_y, d + 12.0 * sigma);
  }
  if (t <= lo_x || t >= hi_y) return 0.0;
  const double hx = (t - lo_x) / intervals;
  const double hy = (hi_y - t) / intervals;
  const double inv = 1.0 / (2.0 * M_PI * sigma * sigma);
  auto simpson_weight = [intervals](int i) {
    if (i == 0 || i == intervals) return 1.0;
    return i % 2 == 1 ? 4.0 : 2.0;
  };
  double total = 0.0;
  for (int i = 0; i <= intervals; ++i) {
    const double x = lo_x + i * hx;
    for (int j = 0; j <= intervals; ++j) {
      const double y = t + j * hy;
      double density = 0.0;
      for (std::size_t k = 0; k < points.size(); ++k) {
        const double dx = (x - points[k].first) / sigma;
        const double dy = (y - points[k].second) / sigma;
        density += weights[k] * inv * std::exp(-0.5 * (dx * dx + dy * dy));
      }
      total += simpson_weight(i) * simpson_weight(j) * density;
    }
  }
  return total * hx * hy / 9.0;
}

inline GrayImage random_image(std::mt19937_64& gen, int w, int h, int max_value) {
  std::uniform_int_distribution<int> dist(0, max_value);
  GrayImage img(w, h);
  for (auto& p : img.pixels()) p = static_cast<std::uint8_t>(dist(gen));
  return img;
}

inline BinaryImage random_mask(std::mt19937_64& gen, int w, int h, double ice_probability) {
  std::bernoulli_distribution ice(ice_probability);
  BinaryImage bin{w, h, std::vector<Phase>(static_cast<std::size_t>(w) * h)};
  for (auto& p : bin.mask) p = ice(gen) ? Phase::ice : Phase::pore;
  bool any = std::any_of(bin.mask.begin(), bin.mask.end(), [](Phase p) { return p == Phase::ice; });
  if (!any) bin.mask[std::uniform_int_distribution<std::size_t>(0, bin.mask.size() - 1)(gen)] = Phase::ice;
  return bin;
}

}  // namespace firntda::oracle
