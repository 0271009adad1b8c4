#pragma once

// Train/test scenarios, the featurization x predictor grid, and the results
// table.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "firntda/curves.hpp"
#include "firntda/forest.hpp"
#include "firntda/image.hpp"

namespace firntda {

struct LabeledImage {
  std::string id;
  int depth = 0;  // metres, one of kDepthsMetres
  GrayImage image;
};

using Corpus = std::vector<LabeledImage>;

/// Manifest CSV with header "path,depth_metres"; relative paths resolve
/// against the manifest's directory. Image ids are the paths as written.
Corpus load_corpus(const std::filesystem::path& manifest);

/// images_per_depth synthetic images for each of the ten depths, in depth
/// order. Image i at depth class c uses seed derive_seed(base_seed, c * 1e6 + i).
Corpus synth_corpus(int images_per_depth, int size, std::uint64_t base_seed);

enum class Scenario : std::uint8_t { whole, split, split_br, blurred, missing_depths };

inline constexpr std::array<Scenario, 5> kScenarios{Scenario::whole, Scenario::split,
                                                    Scenario::split_br, Scenario::blurred,
                                                    Scenario::missing_depths};

std::string_view display_name(Scenario s) noexcept;  // "Whole", "Split BR", ...
std::string_view slug(Scenario s) noexcept;          // "whole", "split_br", ...
std::optional<Scenario> parse_scenario(std::string_view text) noexcept;
std::optional<Task> parse_task(std::string_view text) noexcept;

/// Scenarios whose partition does not depend on the seed.
inline bool deterministic_split(Scenario s) noexcept {
  return s == Scenario::split_br || s == Scenario::missing_depths;
}

struct ScenarioSpec {
  Scenario name = Scenario::whole;
  double split_fraction = 0.75;
  std::vector<int> held_out_depths{23, 53, 70};
  std::uint64_t trial_seed = 0;
};

enum class Manipulation : std::uint8_t { none, blurred };

/// One sample: a whole image or one of its quadrants, optionally blurred.
struct SampleRef {
  std::size_t image = 0;  // index into the corpus
  std::optional<Quadrant> quadrant;
  Manipulation manipulation = Manipulation::none;

  auto operator<=>(const SampleRef&) const = default;
};

/// Materialises the pixels a SampleRef refers to.
GrayImage render(const Corpus& corpus, const SampleRef& ref);

struct Split {
  std::vector<SampleRef> train;
  std::vector<SampleRef> test;
};

/// WHOLE: seeded 75/25 over images. SPLIT: seeded 75/25 over all quadrants.
/// SPLIT_BR: BR quadrants test, the rest train. BLURRED: WHOLE's partition
/// with every test image blurred. MISSING_DEPTHS: held-out depths test.
/// Random partitions keep floor(fraction * n) samples for training.
/// Throws Errc::config for MISSING_DEPTHS with classification, and when a
/// classification test depth has no training sample.
Split make_split(const Corpus& corpus, const ScenarioSpec& spec, Task task);

/// Feature vectors keyed by (sample, kind). Filled once before the grid,
/// then read-only.
class FeatureCache {
 public:
  void insert(const SampleRef& ref, FeatureKind kind, std::vector<double> values);
  bool contains(const SampleRef& ref, FeatureKind kind) const;
  const std::vector<double>& get(const SampleRef& ref, FeatureKind kind) const;
  std::size_t size() const noexcept { return entries_.size(); }

  /// Computes every missing (ref, kind) entry, in parallel across samples.
  /// Throws the first featurization error.
  void populate(const Corpus& corpus, std::span<const SampleRef> refs,
                std::span<const FeatureKind> kinds);

 private:
  std::map<std::pair<SampleRef, FeatureKind>, std::vector<double>> entries_;
};

/// Every sample a scenario can touch: whole images, quadrants and blurred
/// whole images, as needed by `scenarios`.
std::vector<SampleRef> required_samples(const Corpus& corpus, std::span<const Scenario> scenarios);

struct GridConfig {
  std::vector<Scenario> scenarios{kScenarios.begin(), kScenarios.end()};
  std::vector<FeatureKind> kinds{kFeatureKinds.begin(), kFeatureKinds.end()};
  std::vector<Task> tasks{Task::regression, Task::classification};
  int n_trials = 10;
  int n_trees = 100;
  std::uint64_t base_seed = 0;
};

struct ExperimentResult {
  Scenario scenario = Scenario::whole;
  FeatureKind kind = FeatureKind::ss_betti;
  Task task = Task::regression;
  std::vector<double> trials;
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation over trials

  bool operator==(const ExperimentResult&) const = default;
};

/// Mean and population standard deviation.
std::pair<double, double> mean_std(std::span<const double> values);

/// One trial: split, fit, score.
double run_trial(const Corpus& corpus, const FeatureCache& cache, Scenario scenario,
                 FeatureKind kind, Task task, std::uint64_t trial_seed, int n_trees);

/// All (scenario, kind, task) cells. Trial t uses trial_seed = base_seed + t
/// for the partition (random-split scenarios) and derive_seed(trial_seed, 1)
/// for the forest. MISSING_DEPTHS is skipped for classification. The cache
/// must already hold every required sample (see required_samples).
std::vector<ExperimentResult> run_grid(const Corpus& corpus, const FeatureCache& cache,
                                       const GridConfig& cfg);

/// "mean ± std" with two decimals.
std::string format_cell(double mean, double stddev);

/// Aligned text: a regression block (MAE, metres) and a classification
/// block (accuracy, %), rows = scenarios, columns = featurizations. Empty
/// blocks are omitted; classification never lists MISSING_DEPTHS.
std::string render_table(std::span<const ExperimentResult> results);

/// scenario,featurization,task,n_trials,mean,std,trials (';'-separated).
void write_results_csv(std::ostream& out, std::span<const ExperimentResult> results);
std::vector<ExperimentResult> read_results_csv(std::istream& in);

/// depth,kind,v0,... : the mean whole-image feature vector per depth.
void write_mean_curves_csv(std::ostream& out, const Corpus& corpus, const FeatureCache& cache,
                           FeatureKind kind);

}  // namespace firntda
