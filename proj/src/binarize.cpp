#include "firntda/binarize.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "firntda/error.hpp"

namespace firntda {

Histogram histogram(const GrayImage& img) {
  Histogram hist{};
  for (const auto v : img.pixels()) ++hist[v];
  return hist;
}

namespace {

__extension__ using u128 = unsigned __int128;

// Sign of a/b - c/d for b, d > 0, without overflow (continued-fraction walk).
int compare_fractions(u128 a, u128 b, u128 c, u128 d) {
  for (;;) {
    const u128 q1 = a / b;
    const u128 q2 = c / d;
    if (q1 != q2) return q1 < q2 ? -1 : 1;
    const u128 r1 = a % b;
    const u128 r2 = c % d;
    if (r1 == 0 || r2 == 0) {
      if (r1 == r2) return 0;
      return r1 == 0 ? -1 : 1;
    }
    // r1/b vs r2/d has the opposite sign of b/r1 vs d/r2.
    const u128 na = d, nb = r2, nc = b, nd = r1;
    a = na;
    b = nb;
    c = nc;
    d = nd;
  }
}

// Between-class variance for the split {<= t} vs {> t} is
//   (S0*N - S*n0)^2 / (N^2 * n0 * n1),
// kept as the exact fraction numerator / (n0 * n1).
struct OtsuScore {
  u128 numerator = 0;
  u128 denominator = 1;
};

}  // namespace

int otsu_threshold(const Histogram& hist) {
  std::uint64_t total = 0;
  std::uint64_t total_sum = 0;
  int occupied = 0;
  for (int v = 0; v < 256; ++v) {
    total += hist[v];
    total_sum += hist[v] * static_cast<std::uint64_t>(v);
    occupied += hist[v] > 0 ? 1 : 0;
  }
  if (total == 0) {
    throw Error(Errc::empty_input, "Otsu threshold of an empty image");
  }
  if (occupied < 2) {
    throw Error(Errc::degenerate_histogram, "Otsu threshold of a constant image");
  }

  int best_t = -1;
  OtsuScore best;
  std::uint64_t n0 = 0;
  std::uint64_t s0 = 0;
  for (int t = 0; t < 255; ++t) {
    n0 += hist[t];
    s0 += hist[t] * static_cast<std::uint64_t>(t);
    const std::uint64_t n1 = total - n0;
    if (n0 == 0 || n1 == 0) continue;
    const auto lhs = static_cast<u128>(s0) * total;
    const auto rhs = static_cast<u128>(total_sum) * n0;
    const u128 diff = lhs > rhs ? lhs - rhs : rhs - lhs;
    OtsuScore score{diff * diff, static_cast<u128>(n0) * n1};
    if (best_t < 0 ||
        compare_fractions(score.numerator, score.denominator, best.numerator,
                          best.denominator) > 0) {
      best = score;
      best_t = t;
    }
  }
  return best_t;
}

int otsu_threshold(const GrayImage& img) {
  if (img.empty()) {
    throw Error(Errc::empty_input, "Otsu threshold of an empty image");
  }
  return otsu_threshold(histogram(img));
}

BinaryImage binarize(const GrayImage& img) {
  const GrayImage smoothed = gaussian_blur3(img);
  const int t = otsu_threshold(smoothed);
  BinaryImage bin{smoothed.width(), smoothed.height(), {}};
  bin.mask.reserve(smoothed.size());
  for (const auto v : smoothed.pixels()) {
    bin.mask.push_back(v <= t ? Phase::pore : Phase::ice);
  }
  return bin;
}

BinaryImage transpose(const BinaryImage& bin) {
  BinaryImage out{bin.height, bin.width, std::vector<Phase>(bin.mask.size())};
  for (int y = 0; y < bin.height; ++y) {
    for (int x = 0; x < bin.width; ++x) {
      out.mask[static_cast<std::size_t>(x) * out.width + y] = bin.at(x, y);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exact EDT (Meijster, Roerdink & Hesselink): integer arithmetic throughout,
// so squared distances are exact.

namespace {

struct EdtShape {
  int width;
  int height;
  std::int64_t infinity;  // exceeds any attainable 1D distance
};

EdtShape edt_shape(const BinaryImage& bin) {
  if (bin.width <= 0 || bin.height <= 0 ||
      bin.mask.size() != static_cast<std::size_t>(bin.width) * bin.height) {
    throw Error(Errc::dimension_mismatch, "malformed binary image");
  }
  bool any_ice = false;
  for (const auto p : bin.mask) {
    if (p == Phase::ice) {
      any_ice = true;
      break;
    }
  }
  if (!any_ice) {
    throw Error(Errc::no_background, "distance transform needs at least one ICE pixel");
  }
  return {bin.width, bin.height, static_cast<std::int64_t>(bin.width) + bin.height};
}

// Pass 1, one row: g[x] = distance along the row to the nearest ICE pixel.
void row_pass(const BinaryImage& bin, const EdtShape& s, int y, std::int64_t* g) {
  const Phase* row = bin.mask.data() + static_cast<std::size_t>(y) * s.width;
  const int w = s.width;
  g[0] = row[0] == Phase::ice ? 0 : s.infinity;
  for (int x = 1; x < w; ++x) {
    g[x] = row[x] == Phase::ice ? 0 : std::min(s.infinity, g[x - 1] + 1);
  }
  for (int x = w - 2; x >= 0; --x) {
    if (g[x + 1] + 1 < g[x]) g[x] = g[x + 1] + 1;
  }
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

// Pass 2, one column: lower envelope of parabolas (y - i)^2 + g(i)^2.
// `g` is strided by `stride`; writes squared distances into `out` (same stride).
void column_pass(const std::int64_t* g, std::size_t stride, int n,
                 std::int64_t* out, std::vector<int>& site, std::vector<int>& start) {
  auto g2 = [&](int i) {
    const auto v = g[static_cast<std::size_t>(i) * stride];
    return v * v;
  };
  auto f = [&](int y, int i) {
    const std::int64_t d = y - i;
    return d * d + g2(i);
  };
  auto sep = [&](int i, int u) {
    return floor_div(static_cast<std::int64_t>(u) * u - static_cast<std::int64_t>(i) * i +
                         g2(u) - g2(i),
                     2 * static_cast<std::int64_t>(u - i));
  };

  site.assign(static_cast<std::size_t>(n), 0);
  start.assign(static_cast<std::size_t>(n), 0);
  int q = 0;
  for (int u = 1; u < n; ++u) {
    while (q >= 0 && f(start[q], site[q]) > f(start[q], u)) --q;
    if (q < 0) {
      q = 0;
      site[0] = u;
    } else {
      const std::int64_t w = 1 + sep(site[q], u);
      if (w < n) {
        ++q;
        site[q] = u;
        start[q] = static_cast<int>(w);
      }
    }
  }
  for (int u = n - 1; u >= 0; --u) {
    out[static_cast<std::size_t>(u) * stride] = f(u, site[q]);
    if (u == start[q]) --q;
  }
}

// round-half-up of sqrt(s), computed exactly: the result r satisfies
// (2r - 1)^2 <= 4s < (2r + 1)^2.
std::int64_t round_sqrt(std::int64_t s) {
  auto r = static_cast<std::int64_t>(std::sqrt(static_cast<double>(s)));
  while (r > 0 && r * r > s) --r;
  while ((r + 1) * (r + 1) <= s) ++r;
  if (4 * s >= (2 * r + 1) * (2 * r + 1)) ++r;
  return r;
}

DTImage finish(const EdtShape& s, std::vector<std::int64_t> squared) {
  DTImage dt;
  dt.width = s.width;
  dt.height = s.height;
  dt.values.resize(squared.size());
  dt.capped.resize(squared.size());
  for (std::size_t i = 0; i < squared.size(); ++i) {
    const double d = std::sqrt(static_cast<double>(squared[i]));
    dt.values[i] = d;
    dt.capped[i] = static_cast<int>(std::min<std::int64_t>(round_sqrt(squared[i]), DTImage::kCap));
  }
  dt.squared = std::move(squared);
  return dt;
}

}  // namespace

DTImage distance_transform(const BinaryImage& bin) {
  const EdtShape s = edt_shape(bin);
  const auto n = static_cast<std::size_t>(s.width) * s.height;
  std::vector<std::int64_t> g(n);
  std::vector<std::int64_t> squared(n);

#pragma omp parallel
  {
#pragma omp for schedule(static)
    for (int y = 0; y < s.height; ++y) {
      row_pass(bin, s, y, g.data() + static_cast<std::size_t>(y) * s.width);
    }
    std::vector<int> site;
    std::vector<int> start;
#pragma omp for schedule(static)
    for (int x = 0; x < s.width; ++x) {
      column_pass(g.data() + x, static_cast<std::size_t>(s.width), s.height,
                  squared.data() + x, site, start);
    }
  }
  return finish(s, std::move(squared));
}

DTImage distance_transform_serial(const BinaryImage& bin) {
  const EdtShape s = edt_shape(bin);
  const auto n = static_cast<std::size_t>(s.width) * s.height;
  std::vector<std::int64_t> g(n);
  std::vector<std::int64_t> squared(n);
  for (int y = 0; y < s.height; ++y) {
    row_pass(bin, s, y, g.data() + static_cast<std::size_t>(y) * s.width);
  }
  std::vector<int> site;
  std::vector<int> start;
  for (int x = 0; x < s.width; ++x) {
    column_pass(g.data() + x, static_cast<std::size_t>(s.width), s.height,
                squared.data() + x, site, start);
  }
  return finish(s, std::move(squared));
}

}  // namespace firntda
