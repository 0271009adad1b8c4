#pragma once

// Cubical persistent homology of 2D pixel grids.
//
// Pixels are the top cells (T-construction): a w x h grid yields w*h squares,
// w*(h+1) + h*(w+1) edges and (w+1)*(h+1) vertices, and every edge or vertex
// takes the minimum value of its incident squares. Under this rule diagonal
// neighbours share a vertex, so dimension-0 connectivity is 8-connectivity.
//
// Cell enumeration (row-major within each kind):
//   vertex (x, y), 0 <= x <= w, 0 <= y <= h      -> y*(w+1) + x
//   horizontal edge (x,y)-(x+1,y)                -> y*w + x
//   vertical edge   (x,y)-(x,y+1)                -> w*(h+1) + y*(w+1) + x
//   square (x, y)                                -> y*w + x

#include <array>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "firntda/image.hpp"

namespace firntda {

/// Rectangular grid of real values, row-major.
struct RealGrid {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double at(int x, int y) const {
    return values[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(x)];
  }

  static RealGrid from_image(const GrayImage& img);
  static RealGrid from_ints(int width, int height, std::span<const int> values);
};

class CubicalComplex {
 public:
  /// Throws Errc::empty_input for an empty grid.
  static CubicalComplex build(const RealGrid& grid);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  std::size_t num_vertices() const noexcept { return vertex_values_.size(); }
  std::size_t num_edges() const noexcept { return edge_values_.size(); }
  std::size_t num_squares() const noexcept { return square_values_.size(); }
  std::size_t num_cells() const noexcept {
    return num_vertices() + num_edges() + num_squares();
  }

  std::span<const double> vertex_values() const noexcept { return vertex_values_; }
  std::span<const double> edge_values() const noexcept { return edge_values_; }
  std::span<const double> square_values() const noexcept { return square_values_; }

  std::size_t num_horizontal_edges() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_ + 1);
  }

  /// The two endpoint vertices of an edge.
  std::array<std::size_t, 2> edge_vertices(std::size_t edge) const;
  /// Bottom, top, left, right edges of a square.
  std::array<std::size_t, 4> square_edges(std::size_t square) const;
  /// Squares incident to an edge: one on the image frame, two inside.
  /// Missing entries are kNone.
  std::array<std::size_t, 2> edge_squares(std::size_t edge) const;

  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> vertex_values_;
  std::vector<double> edge_values_;
  std::vector<double> square_values_;
};

inline constexpr double kEssential = std::numeric_limits<double>::infinity();

struct PersistencePair {
  double birth = 0.0;
  double death = kEssential;  // kEssential for classes that never die

  bool essential() const noexcept { return death == kEssential; }
  auto operator<=>(const PersistencePair&) const = default;
};

struct PersistenceDiagram {
  int dimension = 0;
  std::vector<PersistencePair> pairs;

  /// Pairs sorted by (birth, death); handy for comparisons.
  std::vector<PersistencePair> sorted() const;
};

struct Diagrams {
  PersistenceDiagram dim0{0, {}};
  PersistenceDiagram dim1{1, {}};
};

/// Sublevel persistence in dimensions 0 and 1. Zero-persistence pairs are
/// dropped. Dimension 0 is a union-find over vertices with the elder rule
/// (older = smaller (value, vertex index)); dimension 1 is the dimension-0
/// persistence of the dual superlevel filtration (squares plus one outer
/// cell, 4-adjacency).
Diagrams persistence(const CubicalComplex& cx);

inline Diagrams persistence(const RealGrid& grid) {
  return persistence(CubicalComplex::build(grid));
}

struct BettiNumbers {
  int b0 = 0;
  int b1 = 0;
  bool operator==(const BettiNumbers&) const = default;
};

/// Betti numbers of the sublevel subcomplex {cells with value <= t}, from a
/// union-find for b0 and the Euler characteristic for b1. Independent of
/// persistence(); used as its oracle.
BettiNumbers betti_at(const RealGrid& grid, double t);

/// Number of pairs with birth <= t < death.
int count_alive(const PersistenceDiagram& dgm, double t);

/// "dim birth death" per line, essential deaths written as "inf".
void write_diagram(std::ostream& out, const Diagrams& dgms);

}  // namespace firntda
