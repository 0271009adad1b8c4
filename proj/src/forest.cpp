#include "firntda/forest.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "firntda/error.hpp"
#include "firntda/rng.hpp"

namespace firntda {

const char* to_string(Task task) noexcept {
  return task == Task::regression ? "regression" : "classification";
}

void Dataset::add(std::span<const double> row, double label, std::string id) {
  if (n_features == 0 && labels.empty()) n_features = row.size();
  if (row.size() != n_features) {
    throw Error(Errc::dimension_mismatch, "feature row length differs from the dataset's");
  }
  features.insert(features.end(), row.begin(), row.end());
  labels.push_back(label);
  ids.push_back(std::move(id));
}

void Dataset::validate(Task task) const {
  if (labels.empty()) throw Error(Errc::empty_input, "empty dataset");
  if (n_features == 0) throw Error(Errc::empty_input, "dataset has no features");
  if (features.size() != labels.size() * n_features) {
    throw Error(Errc::dimension_mismatch, "feature matrix does not match label count");
  }
  if (!ids.empty() && ids.size() != labels.size()) {
    throw Error(Errc::dimension_mismatch, "id count does not match label count");
  }
  if (task == Task::classification) {
    for (const double y : labels) {
      if (!(y >= 0 && y < kNumClasses) || y != std::floor(y)) {
        throw Error(Errc::argument, "class labels must be integers in [0, 10)");
      }
    }
  }
}

ForestConfig ForestConfig::defaults(Task task, std::uint64_t seed) {
  ForestConfig cfg;
  cfg.task = task;
  cfg.max_features = task == Task::classification ? MaxFeatures::sqrt : MaxFeatures::all;
  cfg.seed = seed;
  return cfg;
}

double Tree::predict(std::span<const double> row) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                        : n.right);
  }
  return nodes[i].value;
}

std::size_t Tree::depth() const {
  std::vector<std::size_t> level(nodes.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (!nodes[i].is_leaf()) {
      level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

// ---------------------------------------------------------------------------
// Tree growing
//
// Each tree keeps, for every feature, the node's samples sorted by that
// feature ("slots" are positions in the bootstrap sample). Splitting a node
// stably partitions every column, so sort order is inherited and each level
// costs O(samples x features).

namespace {

struct Columns {
  std::size_t n_rows = 0;
  std::size_t n_features = 0;
  std::vector<double> values;            // feature-major: values[f * n_rows + r]
  std::vector<std::uint32_t> row_order;  // feature-major: rows sorted by value
};

Columns make_columns(const Dataset& data) {
  Columns c;
  c.n_rows = data.size();
  c.n_features = data.n_features;
  c.values.resize(c.n_rows * c.n_features);
  c.row_order.resize(c.n_rows * c.n_features);
  for (std::size_t r = 0; r < c.n_rows; ++r) {
    const auto row = data.row(r);
    for (std::size_t f = 0; f < c.n_features; ++f) c.values[f * c.n_rows + r] = row[f];
  }
  for (std::size_t f = 0; f < c.n_features; ++f) {
    const double* col = c.values.data() + f * c.n_rows;
    auto* order = c.row_order.data() + f * c.n_rows;
    std::iota(order, order + c.n_rows, std::uint32_t{0});
    std::stable_sort(order, order + c.n_rows,
                     [col](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
  }
  return c;
}

std::size_t candidate_count(const ForestConfig& cfg, std::size_t n_features) {
  if (cfg.max_features == MaxFeatures::all) return n_features;
  return std::max<std::size_t>(
      1, static_cast<std::size_t>(std::sqrt(static_cast<double>(n_features))));
}

class TreeGrower {
 public:
  TreeGrower(const Columns& cols, std::span<const double> labels, std::span<const std::size_t> rows,
             const ForestConfig& cfg, Rng& rng)
      : cols_(cols), labels_(labels), cfg_(cfg), rng_(rng) {
    const std::size_t m = rows.size();
    // Slots are grouped by row so a row's copies are contiguous.
    slot_row_.assign(rows.begin(), rows.end());
    std::sort(slot_row_.begin(), slot_row_.end());
    std::vector<std::uint32_t> first_slot(cols.n_rows + 1, 0);
    for (const auto r : slot_row_) ++first_slot[r + 1];
    std::partial_sum(first_slot.begin(), first_slot.end(), first_slot.begin());

    order_.resize(cols.n_features * m);
    for (std::size_t f = 0; f < cols.n_features; ++f) {
      auto* out = order_.data() + f * m;
      for (std::size_t k = 0; k < cols.n_rows; ++k) {
        const auto r = cols.row_order[f * cols.n_rows + k];
        for (auto s = first_slot[r]; s < first_slot[r + 1]; ++s) *out++ = s;
      }
    }
    go_left_.resize(m);
    scratch_.resize(m);
    features_.resize(cols.n_features);
    std::iota(features_.begin(), features_.end(), 0);
    n_candidates_ = candidate_count(cfg, cols.n_features);
  }

  Tree grow() {
    Tree tree;
    tree.nodes.emplace_back();
    struct Pending {
      std::size_t node;
      std::size_t lo;
      std::size_t hi;
    };
    std::vector<Pending> stack{{0, 0, slot_row_.size()}};
    while (!stack.empty()) {
      const auto [node, lo, hi] = stack.back();
      stack.pop_back();
      const Split split = find_split(lo, hi);
      if (!split.found) {
        tree.nodes[node].value = leaf_value(lo, hi);
        continue;
      }
      const std::size_t mid = partition(lo, hi, split);
      const auto left = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& n = tree.nodes[node];
      n.feature = static_cast<int>(split.feature);
      n.threshold = split.threshold;
      n.left = left;
      n.right = left + 1;
      stack.push_back({static_cast<std::size_t>(left + 1), mid, hi});
      stack.push_back({static_cast<std::size_t>(left), lo, mid});
    }
    return tree;
  }

 private:
  struct Split {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
  };

  std::size_t m() const { return slot_row_.size(); }
  const std::uint32_t* column(std::size_t f) const { return order_.data() + f * m(); }
  double label(std::uint32_t slot) const { return labels_[slot_row_[slot]]; }
  double value(std::size_t f, std::uint32_t slot) const {
    return cols_.values[f * cols_.n_rows + slot_row_[slot]];
  }

  bool classification() const { return cfg_.task == Task::classification; }

  double leaf_value(std::size_t lo, std::size_t hi) const {
    const auto* col = column(0);
    if (classification()) {
      std::array<int, kNumClasses> counts{};
      for (auto p = lo; p < hi; ++p) ++counts[static_cast<std::size_t>(label(col[p]))];
      return static_cast<double>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    }
    double sum = 0.0;
    for (auto p = lo; p < hi; ++p) sum += label(col[p]);
    return sum / static_cast<double>(hi - lo);
  }

  bool pure(std::size_t lo, std::size_t hi) const {
    const auto* col = column(0);
    const double first = label(col[lo]);
    for (auto p = lo + 1; p < hi; ++p) {
      if (label(col[p]) != first) return false;
    }
    return true;
  }

  Split find_split(std::size_t lo, std::size_t hi) {
    Split best;
    const std::size_t n = hi - lo;
    const auto min_leaf = static_cast<std::size_t>(cfg_.min_samples_leaf);
    if (n < 2 * min_leaf || pure(lo, hi)) return best;

    double best_proxy = -std::numeric_limits<double>::infinity();
    std::size_t evaluated = 0;
    // Features are drawn without replacement; constant ones do not count
    // towards the candidate budget.
    for (std::size_t k = 0; k < features_.size() && evaluated < n_candidates_; ++k) {
      const auto j = k + rng_.below(features_.size() - k);
      std::swap(features_[k], features_[j]);
      const std::size_t f = features_[k];
      const auto* col = column(f);
      if (value(f, col[lo]) == value(f, col[hi - 1])) continue;
      ++evaluated;
      scan_feature(f, lo, hi, min_leaf, best, best_proxy);
    }
    return best;
  }

  void scan_feature(std::size_t f, std::size_t lo, std::size_t hi, std::size_t min_leaf,
                    Split& best, double& best_proxy) const {
    const auto* col = column(f);
    const std::size_t n = hi - lo;
    if (classification()) {
      std::array<double, kNumClasses> right{};
      std::array<double, kNumClasses> left{};
      for (auto p = lo; p < hi; ++p) ++right[static_cast<std::size_t>(label(col[p]))];
      double sq_left = 0.0;
      double sq_right = 0.0;
      for (const double c : right) sq_right += c * c;
      for (auto p = lo; p + 1 < hi; ++p) {
        const auto c = static_cast<std::size_t>(label(col[p]));
        sq_left += 2.0 * left[c] + 1.0;
        sq_right -= 2.0 * right[c] - 1.0;
        left[c] += 1.0;
        right[c] -= 1.0;
        consider(f, col, p, lo, n, min_leaf, sq_left, sq_right, best, best_proxy);
      }
    } else {
      double sum_right = 0.0;
      for (auto p = lo; p < hi; ++p) sum_right += label(col[p]);
      double sum_left = 0.0;
      for (auto p = lo; p + 1 < hi; ++p) {
        const double y = label(col[p]);
        sum_left += y;
        sum_right -= y;
        consider(f, col, p, lo, n, min_leaf, sum_left * sum_left, sum_right * sum_right, best,
                 best_proxy);
      }
    }
  }

  // Split between positions p and p+1. The proxy a/nL + b/nR, with a, b the
  // children's sums of squared class counts (Gini) or squared label sums
  // (variance), equals parent impurity minus weighted child impurity up to
  // terms constant within the node.
  void consider(std::size_t f, const std::uint32_t* col, std::size_t p, std::size_t lo,
                std::size_t n, std::size_t min_leaf, double a, double b, Split& best,
                double& best_proxy) const {
    const std::size_t n_left = p - lo + 1;
    const std::size_t n_right = n - n_left;
    if (n_left < min_leaf || n_right < min_leaf) return;
    const double x = value(f, col[p]);
    const double x_next = value(f, col[p + 1]);
    if (x == x_next) return;
    const double proxy = a / static_cast<double>(n_left) + b / static_cast<double>(n_right);
    if (proxy > best_proxy) {
      best_proxy = proxy;
      best.found = true;
      best.feature = f;
      double mid = x + (x_next - x) / 2.0;
      if (!(mid < x_next)) mid = x;
      best.threshold = mid;
    }
  }

  std::size_t partition(std::size_t lo, std::size_t hi, const Split& split) {
    const auto* col = column(split.feature);
    std::size_t n_left = 0;
    for (auto p = lo; p < hi; ++p) {
      const bool left = value(split.feature, col[p]) <= split.threshold;
      go_left_[col[p]] = left ? 1 : 0;
      n_left += left ? 1 : 0;
    }
    for (std::size_t f = 0; f < cols_.n_features; ++f) {
      auto* c = order_.data() + f * m();
      std::size_t l = lo;
      std::size_t r = 0;
      for (auto p = lo; p < hi; ++p) {
        if (go_left_[c[p]]) {
          c[l++] = c[p];
        } else {
          scratch_[r++] = c[p];
        }
      }
      std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(r), c + l);
    }
    return lo + n_left;
  }

  const Columns& cols_;
  std::span<const double> labels_;
  const ForestConfig& cfg_;
  Rng& rng_;
  std::vector<std::uint32_t> slot_row_;
  std::vector<std::uint32_t> order_;
  std::vector<std::uint8_t> go_left_;
  std::vector<std::uint32_t> scratch_;
  std::vector<std::size_t> features_;
  std::size_t n_candidates_ = 0;
};

void check_config(const ForestConfig& cfg) {
  if (cfg.n_trees < 1) throw Error(Errc::argument, "n_trees must be at least 1");
  if (cfg.min_samples_leaf < 1) throw Error(Errc::argument, "min_samples_leaf must be at least 1");
}

// Draws the bootstrap sample and grows tree `index`.
Tree grow_indexed(const Columns& cols, const Dataset& data, const ForestConfig& cfg,
                  std::size_t index, std::vector<std::uint16_t>& in_bag) {
  Rng rng(derive_seed(cfg.seed, index));
  const std::size_t n = data.size();
  std::vector<std::size_t> rows(n);
  if (cfg.bootstrap) {
    for (auto& r : rows) r = static_cast<std::size_t>(rng.below(n));
  } else {
    std::iota(rows.begin(), rows.end(), std::size_t{0});
  }
  in_bag.assign(n, 0);
  for (const auto r : rows) ++in_bag[r];
  return TreeGrower(cols, data.labels, rows, cfg, rng).grow();
}

Forest fit_impl(const Dataset& data, const ForestConfig& cfg, bool parallel) {
  check_config(cfg);
  data.validate(cfg.task);
  if (data.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(Errc::argument, "dataset too large");
  }
  const Columns cols = make_columns(data);
  Forest forest;
  forest.task = cfg.task;
  forest.n_features = data.n_features;
  forest.trees.resize(static_cast<std::size_t>(cfg.n_trees));
  forest.in_bag.resize(static_cast<std::size_t>(cfg.n_trees));
  const auto n_trees = static_cast<std::int64_t>(cfg.n_trees);
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
  for (std::int64_t t = 0; t < n_trees; ++t) {
    const auto i = static_cast<std::size_t>(t);
    forest.trees[i] = grow_indexed(cols, data, cfg, i, forest.in_bag[i]);
  }
  return forest;
}

double aggregate(Task task, std::span<const double> outputs) {
  if (task == Task::regression) {
    return std::accumulate(outputs.begin(), outputs.end(), 0.0) /
           static_cast<double>(outputs.size());
  }
  std::array<int, kNumClasses> votes{};
  for (const double v : outputs) ++votes[static_cast<std::size_t>(v)];
  return static_cast<double>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

}  // namespace

Forest fit(const Dataset& data, const ForestConfig& cfg) { return fit_impl(data, cfg, true); }

Forest fit_serial(const Dataset& data, const ForestConfig& cfg) {
  return fit_impl(data, cfg, false);
}

Tree grow_tree(const Dataset& data, std::span<const std::size_t> rows, const ForestConfig& cfg,
               std::uint64_t tree_seed) {
  check_config(cfg);
  data.validate(cfg.task);
  if (rows.empty()) throw Error(Errc::empty_input, "cannot grow a tree on zero rows");
  const Columns cols = make_columns(data);
  Rng rng(tree_seed);
  return TreeGrower(cols, data.labels, rows, cfg, rng).grow();
}

double predict(const Forest& forest, std::span<const double> row) {
  if (row.size() != forest.n_features) {
    throw Error(Errc::dimension_mismatch, "row has " + std::to_string(row.size()) +
                                              " features, forest expects " +
                                              std::to_string(forest.n_features));
  }
  if (forest.trees.empty()) throw Error(Errc::empty_input, "forest has no trees");
  std::vector<double> outputs;
  outputs.reserve(forest.trees.size());
  for (const auto& tree : forest.trees) outputs.push_back(tree.predict(row));
  return aggregate(forest.task, outputs);
}

std::vector<double> predict_all(const Forest& forest, const Dataset& data) {
  std::vector<double> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out.push_back(predict(forest, data.row(i)));
  return out;
}

std::vector<double> oob_predictions(const Forest& forest, const Dataset& data) {
  if (forest.in_bag.size() != forest.trees.size()) {
    throw Error(Errc::argument, "forest carries no bootstrap record");
  }
  std::vector<double> out(data.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<double> outputs;
  for (std::size_t i = 0; i < data.size(); ++i) {
    outputs.clear();
    for (std::size_t t = 0; t < forest.trees.size(); ++t) {
      if (forest.in_bag[t].size() != data.size()) {
        throw Error(Errc::dimension_mismatch, "dataset is not the training set");
      }
      if (forest.in_bag[t][i] == 0) outputs.push_back(forest.trees[t].predict(data.row(i)));
    }
    if (!outputs.empty()) out[i] = aggregate(forest.task, outputs);
  }
  return out;
}

double metric(std::span<const double> predictions, std::span<const double> truths, Task task) {
  if (predictions.size() != truths.size()) {
    throw Error(Errc::dimension_mismatch, "prediction and truth counts differ");
  }
  if (predictions.empty()) throw Error(Errc::empty_input, "metric of no predictions");
  const auto n = static_cast<double>(predictions.size());
  if (task == Task::regression) {
    double sum = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
      sum += std::abs(predictions[i] - truths[i]);
    }
    return sum / n;
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    correct += predictions[i] == truths[i] ? 1 : 0;
  }
  return 100.0 * static_cast<double>(correct) / n;
}

// ---------------------------------------------------------------------------
// Serialisation
//
//   firntda-forest 1
//   task classification
//   features 512
//   trees 100
//   tree <node count>
//   S <feature> <threshold> <left> <right>
//   L <value>
//   ...

namespace {

constexpr int kFormatVersion = 1;

std::string hex(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::hex);
  return std::string(buf, res.ptr);
}

double parse_hex(const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v, std::chars_format::hex);
  if (res.ec != std::errc() || res.ptr != end) {
    throw Error(Errc::format, "bad hex float '" + s + "' in forest file");
  }
  return v;
}

template <typename T>
T expect_field(std::istream& in, const char* key) {
  std::string word;
  T value{};
  if (!(in >> word) || word != key || !(in >> value)) {
    throw Error(Errc::format, std::string("forest file: expected '") + key + "'");
  }
  return value;
}

}  // namespace

void save_forest(std::ostream& out, const Forest& forest) {
  out << "firntda-forest " << kFormatVersion << '\n'
      << "task " << to_string(forest.task) << '\n'
      << "features " << forest.n_features << '\n'
      << "trees " << forest.trees.size() << '\n';
  for (const auto& tree : forest.trees) {
    out << "tree " << tree.nodes.size() << '\n';
    for (const auto& n : tree.nodes) {
      if (n.is_leaf()) {
        out << "L " << hex(n.value) << '\n';
      } else {
        out << "S " << n.feature << ' ' << hex(n.threshold) << ' ' << n.left << ' ' << n.right
            << '\n';
      }
    }
  }
}

Forest load_forest(std::istream& in) {
  const int version = expect_field<int>(in, "firntda-forest");
  if (version != kFormatVersion) {
    throw Error(Errc::unsupported_format, "forest format version " + std::to_string(version));
  }
  Forest forest;
  const auto task = expect_field<std::string>(in, "task");
  if (task == "regression") {
    forest.task = Task::regression;
  } else if (task == "classification") {
    forest.task = Task::classification;
  } else {
    throw Error(Errc::format, "forest file: unknown task '" + task + "'");
  }
  forest.n_features = expect_field<std::size_t>(in, "features");
  const auto n_trees = expect_field<std::size_t>(in, "trees");
  forest.trees.resize(n_trees);
  for (auto& tree : forest.trees) {
    const auto n_nodes = expect_field<std::size_t>(in, "tree");
    if (n_nodes == 0) throw Error(Errc::format, "forest file: empty tree");
    tree.nodes.resize(n_nodes);
    for (auto& node : tree.nodes) {
      std::string tag;
      std::string number;
      in >> tag;
      if (tag == "L") {
        in >> number;
        node.value = parse_hex(number);
      } else if (tag == "S") {
        in >> node.feature >> number >> node.left >> node.right;
        node.threshold = parse_hex(number);
        const auto limit = static_cast<int>(n_nodes);
        if (node.feature < 0 || static_cast<std::size_t>(node.feature) >= forest.n_features ||
            node.left <= 0 || node.left >= limit || node.right <= 0 || node.right >= limit) {
          throw Error(Errc::format, "forest file: node index out of range");
        }
      } else {
        throw Error(Errc::format, "forest file: expected node tag, got '" + tag + "'");
      }
      if (!in) throw Error(Errc::format, "forest file: truncated");
    }
  }
  return forest;
}

}  // namespace firntda
