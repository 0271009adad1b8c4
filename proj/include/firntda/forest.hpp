#pragma once

// CART decision trees and random forests for depth regression and 10-class
// depth classification.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace firntda {

enum class Task : std::uint8_t { regression, classification };

const char* to_string(Task task) noexcept;

inline constexpr int kNumClasses = 10;

/// Row-major feature matrix with one label per row. Classification labels
/// are class indices stored as doubles.
struct Dataset {
  std::size_t n_features = 0;
  std::vector<double> features;
  std::vector<double> labels;
  std::vector<std::string> ids;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * n_features, n_features};
  }

  void add(std::span<const double> row, double label, std::string id = {});

  /// Checks shape and, for classification, that labels are integers in [0, 10).
  void validate(Task task) const;
};

enum class MaxFeatures : std::uint8_t { sqrt, all };

struct ForestConfig {
  Task task = Task::classification;
  int n_trees = 100;
  MaxFeatures max_features = MaxFeatures::sqrt;
  int min_samples_leaf = 1;
  bool bootstrap = true;
  std::uint64_t seed = 0;

  /// 100 trees, leaf size 1; sqrt(F) candidate features per node for
  /// classification, all F for regression.
  static ForestConfig defaults(Task task, std::uint64_t seed);
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // go left iff x[feature] <= threshold
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf payload: mean label or class index

  bool is_leaf() const noexcept { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> row) const;
  std::size_t depth() const;
  bool operator==(const Tree&) const = default;
};

struct Forest {
  Task task = Task::classification;
  std::size_t n_features = 0;
  std::vector<Tree> trees;
  /// Bootstrap multiplicity of each training row, per tree. Only populated
  /// by fit(); not serialised.
  std::vector<std::vector<std::uint16_t>> in_bag;
};

/// Grows cfg.n_trees trees in parallel (OpenMP). Tree i draws from its own
/// stream derive_seed(cfg.seed, i), so results do not depend on scheduling.
Forest fit(const Dataset& data, const ForestConfig& cfg);

/// Single-threaded reference of fit(); produces an identical forest.
Forest fit_serial(const Dataset& data, const ForestConfig& cfg);

/// Grows one tree on the given rows (with multiplicity).
Tree grow_tree(const Dataset& data, std::span<const std::size_t> rows, const ForestConfig& cfg,
               std::uint64_t tree_seed);

/// Mean of tree outputs (regression) or plurality vote with ties to the
/// smallest class (classification). Throws Errc::dimension_mismatch.
double predict(const Forest& forest, std::span<const double> row);
std::vector<double> predict_all(const Forest& forest, const Dataset& data);

/// Aggregate over trees for which row i was out of bag. Rows that were in
/// every bootstrap get NaN.
std::vector<double> oob_predictions(const Forest& forest, const Dataset& data);

/// Regression: mean absolute error. Classification: percent correct.
double metric(std::span<const double> predictions, std::span<const double> truths, Task task);

/// Text format, versioned: header lines then one line per node with
/// hex-float thresholds so a round trip is exact.
void save_forest(std::ostream& out, const Forest& forest);
Forest load_forest(std::istream& in);

}  // namespace firntda
