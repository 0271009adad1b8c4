#include "firntda/cubical.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "firntda/error.hpp"

namespace firntda {

RealGrid RealGrid::from_image(const GrayImage& img) {
  RealGrid g{img.width(), img.height(), {}};
  g.values.assign(img.pixels().begin(), img.pixels().end());
  return g;
}

RealGrid RealGrid::from_ints(int width, int height, std::span<const int> values) {
  if (values.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(Errc::dimension_mismatch, "value count does not match width x height");
  }
  RealGrid g{width, height, {}};
  g.values.assign(values.begin(), values.end());
  return g;
}

CubicalComplex CubicalComplex::build(const RealGrid& grid) {
  if (grid.width <= 0 || grid.height <= 0 || grid.values.empty()) {
    throw Error(Errc::empty_input, "cubical complex of an empty grid");
  }
  if (grid.values.size() != static_cast<std::size_t>(grid.width) * grid.height) {
    throw Error(Errc::dimension_mismatch, "grid value count does not match its shape");
  }
  const int w = grid.width;
  const int h = grid.height;
  CubicalComplex cx;
  cx.width_ = w;
  cx.height_ = h;
  cx.square_values_ = grid.values;

  constexpr double kInf = std::numeric_limits<double>::infinity();
  cx.vertex_values_.assign(static_cast<std::size_t>(w + 1) * (h + 1), kInf);
  cx.edge_values_.assign(static_cast<std::size_t>(w) * (h + 1) +
                             static_cast<std::size_t>(h) * (w + 1),
                         kInf);
  const std::size_t hcount = cx.num_horizontal_edges();
  auto lower = [](double& slot, double v) { slot = std::min(slot, v); };

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = grid.at(x, y);
      for (int dy = 0; dy <= 1; ++dy) {
        for (int dx = 0; dx <= 1; ++dx) {
          lower(cx.vertex_values_[static_cast<std::size_t>(y + dy) * (w + 1) + x + dx], v);
        }
      }
      lower(cx.edge_values_[static_cast<std::size_t>(y) * w + x], v);
      lower(cx.edge_values_[static_cast<std::size_t>(y + 1) * w + x], v);
      lower(cx.edge_values_[hcount + static_cast<std::size_t>(y) * (w + 1) + x], v);
      lower(cx.edge_values_[hcount + static_cast<std::size_t>(y) * (w + 1) + x + 1], v);
    }
  }
  return cx;
}

std::array<std::size_t, 2> CubicalComplex::edge_vertices(std::size_t edge) const {
  const auto w = static_cast<std::size_t>(width_);
  const std::size_t hcount = num_horizontal_edges();
  if (edge < hcount) {
    const std::size_t y = edge / w;
    const std::size_t x = edge % w;
    return {y * (w + 1) + x, y * (w + 1) + x + 1};
  }
  const std::size_t e = edge - hcount;
  const std::size_t y = e / (w + 1);
  const std::size_t x = e % (w + 1);
  return {y * (w + 1) + x, (y + 1) * (w + 1) + x};
}

std::array<std::size_t, 4> CubicalComplex::square_edges(std::size_t square) const {
  const auto w = static_cast<std::size_t>(width_);
  const std::size_t hcount = num_horizontal_edges();
  const std::size_t y = square / w;
  const std::size_t x = square % w;
  return {y * w + x, (y + 1) * w + x, hcount + y * (w + 1) + x,
          hcount + y * (w + 1) + x + 1};
}

std::array<std::size_t, 2> CubicalComplex::edge_squares(std::size_t edge) const {
  const auto w = static_cast<std::size_t>(width_);
  const auto h = static_cast<std::size_t>(height_);
  const std::size_t hcount = num_horizontal_edges();
  std::array<std::size_t, 2> out{kNone, kNone};
  if (edge < hcount) {
    const std::size_t y = edge / w;
    const std::size_t x = edge % w;
    if (y > 0) out[0] = (y - 1) * w + x;
    if (y < h) out[1] = y * w + x;
  } else {
    const std::size_t e = edge - hcount;
    const std::size_t y = e / (w + 1);
    const std::size_t x = e % (w + 1);
    if (x > 0) out[0] = y * w + x - 1;
    if (x < w) out[1] = y * w + x;
  }
  return out;
}

std::vector<PersistencePair> PersistenceDiagram::sorted() const {
  auto out = pairs;
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void attach(std::size_t child_root, std::size_t parent_root) { parent_[child_root] = parent_root; }

 private:
  std::vector<std::size_t> parent_;
};

// Edge order of the sublevel filtration: (value, index) ascending.
std::vector<std::size_t> sorted_edges(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b] || (values[a] == values[b] && a < b);
  });
  return order;
}

PersistenceDiagram dimension0(const CubicalComplex& cx, const std::vector<std::size_t>& order) {
  const auto vv = cx.vertex_values();
  const auto ev = cx.edge_values();
  UnionFind uf(cx.num_vertices());
  // Roots are the oldest vertex of their component.
  auto older = [&](std::size_t a, std::size_t b) {
    return vv[a] < vv[b] || (vv[a] == vv[b] && a < b);
  };

  PersistenceDiagram dgm{0, {}};
  for (const auto e : order) {
    const auto [u, v] = cx.edge_vertices(e);
    std::size_t ru = uf.find(u);
    std::size_t rv = uf.find(v);
    if (ru == rv) continue;
    if (older(rv, ru)) std::swap(ru, rv);
    // rv is the younger component and dies here.
    if (vv[rv] < ev[e]) dgm.pairs.push_back({vv[rv], ev[e]});
    uf.attach(rv, ru);
  }
  // Everything is connected at the end: one essential class at the global min.
  const std::size_t root = uf.find(0);
  dgm.pairs.push_back({vv[root], kEssential});
  return dgm;
}

PersistenceDiagram dimension1(const CubicalComplex& cx, const std::vector<std::size_t>& order) {
  // Alexander duality: a hole of the sublevel set is a bounded component of
  // the complement. Walking the filtration backwards, the complement grows
  // square by square; dual edges join 4-adjacent squares (or a frame square
  // to the outer cell) at the primal edge's value. A dual component born at
  // square value s that merges at edge value e is the hole (e, s).
  const auto sv = cx.square_values();
  const auto ev = cx.edge_values();
  const std::size_t outer = cx.num_squares();
  UnionFind uf(cx.num_squares() + 1);

  auto birth = [&](std::size_t node) {
    return node == outer ? kEssential : sv[node];
  };
  // Reverse filtration order: larger value first, ties by larger index.
  auto older = [&](std::size_t a, std::size_t b) {
    const double ba = birth(a);
    const double bb = birth(b);
    return ba > bb || (ba == bb && a > b);
  };

  PersistenceDiagram dgm{1, {}};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const std::size_t e = *it;
    auto [s0, s1] = cx.edge_squares(e);
    if (s0 == CubicalComplex::kNone) s0 = outer;
    if (s1 == CubicalComplex::kNone) s1 = outer;
    std::size_t r0 = uf.find(s0);
    std::size_t r1 = uf.find(s1);
    if (r0 == r1) continue;
    if (older(r1, r0)) std::swap(r0, r1);
    if (ev[e] < birth(r1)) dgm.pairs.push_back({ev[e], birth(r1)});
    uf.attach(r1, r0);
  }
  return dgm;
}

}  // namespace

Diagrams persistence(const CubicalComplex& cx) {
  const auto order = sorted_edges(cx.edge_values());
  return {dimension0(cx, order), dimension1(cx, order)};
}

BettiNumbers betti_at(const RealGrid& grid, double t) {
  const auto cx = CubicalComplex::build(grid);
  const auto vv = cx.vertex_values();
  const auto ev = cx.edge_values();
  const auto sv = cx.square_values();

  long vertices = 0;
  long edges = 0;
  long squares = 0;
  for (const double v : vv) vertices += v <= t ? 1 : 0;
  for (const double v : ev) edges += v <= t ? 1 : 0;
  for (const double v : sv) squares += v <= t ? 1 : 0;
  if (vertices == 0) return {0, 0};

  UnionFind uf(cx.num_vertices());
  long components = vertices;
  for (std::size_t e = 0; e < ev.size(); ++e) {
    if (ev[e] > t) continue;
    const auto [u, v] = cx.edge_vertices(e);
    const auto ru = uf.find(u);
    const auto rv = uf.find(v);
    if (ru != rv) {
      uf.attach(ru, rv);
      --components;
    }
  }
  const long euler = vertices - edges + squares;
  return {static_cast<int>(components), static_cast<int>(components - euler)};
}

int count_alive(const PersistenceDiagram& dgm, double t) {
  return static_cast<int>(std::count_if(dgm.pairs.begin(), dgm.pairs.end(),
                                        [t](const PersistencePair& p) {
                                          return p.birth <= t && t < p.death;
                                        }));
}

void write_diagram(std::ostream& out, const Diagrams& dgms) {
  for (const auto* d : {&dgms.dim0, &dgms.dim1}) {
    for (const auto& p : d->sorted()) {
      out << d->dimension << ' ' << p.birth << ' ';
      if (p.essential()) {
        out << "inf";
      } else {
        out << p.death;
      }
      out << '\n';
    }
  }
}

}  // namespace firntda
