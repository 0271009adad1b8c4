#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "firntda/error.hpp"
#include "firntda/experiments.hpp"

namespace firntda {
namespace {

namespace fs = std::filesystem;

// Images are tiny and never featurized unless a test says so.
Corpus corpus_of(int per_depth, int size = 8) { return synth_corpus(per_depth, size, 2024); }

std::set<SampleRef> as_set(const std::vector<SampleRef>& v) { return {v.begin(), v.end()}; }

void expect_partition(const Split& s, const std::vector<SampleRef>& universe) {
  const auto train = as_set(s.train);
  const auto test = as_set(s.test);
  EXPECT_EQ(train.size(), s.train.size());
  EXPECT_EQ(test.size(), s.test.size());
  for (const auto& r : test) EXPECT_FALSE(train.contains(r));
  EXPECT_EQ(train.size() + test.size(), universe.size());
}

std::vector<SampleRef> strip_manipulation(std::vector<SampleRef> refs) {
  for (auto& r : refs) r.manipulation = Manipulation::none;
  return refs;
}

std::vector<SampleRef> wholes(const Corpus& c) {
  std::vector<SampleRef> out;
  for (std::size_t i = 0; i < c.size(); ++i) out.push_back({i, std::nullopt, Manipulation::none});
  return out;
}

std::vector<SampleRef> quadrants(const Corpus& c) {
  std::vector<SampleRef> out;
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (const auto q : kQuadrants) out.push_back({i, q, Manipulation::none});
  }
  return out;
}

ScenarioSpec spec(Scenario s, std::uint64_t seed = 0) {
  ScenarioSpec sp;
  sp.name = s;
  sp.trial_seed = seed;
  return sp;
}

// --- corpus ------------------------------------------------------------------

TEST(SynthCorpus, LayoutAndDeterminism) {
  const auto a = corpus_of(3);
  ASSERT_EQ(a.size(), 30u);
  EXPECT_EQ(a.front().id, "depth_07m/img_000.pgm");
  EXPECT_EQ(a.back().id, "depth_78m/img_002.pgm");
  EXPECT_EQ(a[4].depth, 15);
  const auto b = corpus_of(3);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].image, b[i].image);
  EXPECT_NE(a[0].image, a[1].image);
  EXPECT_THROW(synth_corpus(0, 8, 1), Error);
}

TEST(LoadCorpus, ResolvesRelativePaths) {
  const auto dir = fs::temp_directory_path() / "firntda_test_corpus";
  fs::remove_all(dir);
  fs::create_directories(dir / "sub");
  save_pgm(GrayImage(2, 2, 9), dir / "sub" / "a.pgm");
  {
    std::ofstream m(dir / "manifest.csv");
    m << "path,depth_metres\nsub/a.pgm,23\n";
  }
  const auto c = load_corpus(dir / "manifest.csv");
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].id, "sub/a.pgm");
  EXPECT_EQ(c[0].depth, 23);
  EXPECT_EQ(c[0].image, GrayImage(2, 2, 9));

  {
    std::ofstream m(dir / "bad.csv");
    m << "path,depth_metres\nsub/a.pgm,24\n";
  }
  try {
    (void)load_corpus(dir / "bad.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::config);
  }
}

// --- make_split -----------------------------------------------------------------

TEST(MakeSplit, WholeIsSeventyFiveTwentyFive) {
  const auto c = corpus_of(4);  // 40 images
  const auto s = make_split(c, spec(Scenario::whole, 3), Task::regression);
  EXPECT_EQ(s.train.size(), 30u);
  EXPECT_EQ(s.test.size(), 10u);
  expect_partition(s, wholes(c));
}

TEST(MakeSplit, SplitBrHoldsOutBottomRight) {
  const auto c = corpus_of(4);
  const auto s = make_split(c, spec(Scenario::split_br, 3), Task::regression);
  EXPECT_EQ(s.train.size(), 120u);
  EXPECT_EQ(s.test.size(), 40u);
  expect_partition(s, quadrants(c));
  std::vector<int> train_per_image(c.size(), 0), test_per_image(c.size(), 0);
  for (const auto& r : s.train) {
    EXPECT_NE(r.quadrant, Quadrant::bottom_right);
    ++train_per_image[r.image];
  }
  for (const auto& r : s.test) {
    EXPECT_EQ(r.quadrant, Quadrant::bottom_right);
    ++test_per_image[r.image];
  }
  EXPECT_TRUE(std::all_of(train_per_image.begin(), train_per_image.end(), [](int n) { return n == 3; }));
  EXPECT_TRUE(std::all_of(test_per_image.begin(), test_per_image.end(), [](int n) { return n == 1; }));
  EXPECT_EQ(s.train, make_split(c, spec(Scenario::split_br, 99), Task::regression).train);
}

TEST(MakeSplit, MissingDepthsHoldsOutThreeDepths) {
  const auto c = corpus_of(20);
  const auto s = make_split(c, spec(Scenario::missing_depths), Task::regression);
  EXPECT_EQ(s.train.size(), 140u);
  EXPECT_EQ(s.test.size(), 60u);
  for (const auto& r : s.test) {
    const int d = c[r.image].depth;
    EXPECT_TRUE(d == 23 || d == 53 || d == 70);
  }
  expect_partition(s, wholes(c));
}

TEST(MakeSplit, MissingDepthsRejectsClassification) {
  try {
    (void)make_split(corpus_of(2), spec(Scenario::missing_depths), Task::classification);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::config);
  }
}

TEST(MakeSplit, ClassificationNeedsEveryTestDepthInTraining) {
  // One image per depth: any 75/25 split leaves some test depth untrained.
  try {
    (void)make_split(corpus_of(1), spec(Scenario::whole, 1), Task::classification);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::config);
  }
  EXPECT_NO_THROW(make_split(corpus_of(1), spec(Scenario::whole, 1), Task::regression));
}

TEST(MakeSplit, SeedControlsRandomPartitions) {
  const auto c = corpus_of(4);
  for (const auto sc : {Scenario::whole, Scenario::split}) {
    const auto a = make_split(c, spec(sc, 1), Task::regression);
    const auto b = make_split(c, spec(sc, 1), Task::regression);
    const auto other = make_split(c, spec(sc, 2), Task::regression);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.test, b.test);
    EXPECT_NE(a.test, other.test);
  }
}

TEST(MakeSplit, PartitionsForManySeeds) {
  const auto c = corpus_of(4);
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto w = make_split(c, spec(Scenario::whole, seed), Task::classification);
    expect_partition(w, wholes(c));
    const auto q = make_split(c, spec(Scenario::split, seed), Task::regression);
    EXPECT_EQ(q.train.size(), 120u);
    expect_partition(q, quadrants(c));
  }
}

TEST(MakeSplit, BlurredOnlyTouchesTheTestSet) {
  const auto c = corpus_of(4);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto whole = make_split(c, spec(Scenario::whole, seed), Task::regression);
    const auto blurred = make_split(c, spec(Scenario::blurred, seed), Task::regression);
    EXPECT_EQ(blurred.train, whole.train);
    EXPECT_EQ(strip_manipulation(blurred.test), whole.test);
    for (const auto& r : blurred.test) EXPECT_EQ(r.manipulation, Manipulation::blurred);
    for (const auto& r : blurred.train) EXPECT_EQ(r.manipulation, Manipulation::none);
  }
}

TEST(Render, QuadrantsAndBlur) {
  const auto c = corpus_of(1, 10);
  EXPECT_EQ(render(c, {3, std::nullopt, Manipulation::none}), c[3].image);
  EXPECT_EQ(render(c, {3, Quadrant::bottom_right, Manipulation::none}),
            split_quadrants(c[3].image)[3]);
  EXPECT_EQ(render(c, {3, std::nullopt, Manipulation::blurred}), gaussian_blur3(c[3].image));
}

// --- cache and grid ----------------------------------------------------------------

TEST(FeatureCache, MissingEntryIsConfigError) {
  FeatureCache cache;
  try {
    (void)cache.get({0, std::nullopt, Manipulation::none}, FeatureKind::ss_betti);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::config);
  }
}

TEST(FeatureCache, RequiredSamples) {
  const auto c = corpus_of(1);
  const std::vector<Scenario> whole{Scenario::whole};
  EXPECT_EQ(required_samples(c, whole).size(), 10u);
  const std::vector<Scenario> blurred{Scenario::blurred};
  EXPECT_EQ(required_samples(c, blurred).size(), 20u);
  const std::vector<Scenario> split{Scenario::split_br};
  EXPECT_EQ(required_samples(c, split).size(), 40u);
  EXPECT_EQ(required_samples(c, kScenarios).size(), 60u);
}

class GridTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    corpus_ = new Corpus(synth_corpus(4, 32, 7));
    cache_ = new FeatureCache();
    const std::vector<FeatureKind> kinds{FeatureKind::ss_betti, FeatureKind::dt_betti};
    cache_->populate(*corpus_, required_samples(*corpus_, kScenarios), kinds);
  }
  static void TearDownTestSuite() {
    delete corpus_;
    delete cache_;
  }
  static GridConfig small_grid() {
    GridConfig g;
    g.kinds = {FeatureKind::ss_betti, FeatureKind::dt_betti};
    g.n_trials = 2;
    g.n_trees = 10;
    g.base_seed = 5;
    return g;
  }
  static Corpus* corpus_;
  static FeatureCache* cache_;
};

Corpus* GridTest::corpus_ = nullptr;
FeatureCache* GridTest::cache_ = nullptr;

TEST_F(GridTest, ShapeAndDeterminism) {
  const auto cfg = small_grid();
  const auto a = run_grid(*corpus_, *cache_, cfg);
  // 5 scenarios x 2 kinds x 2 tasks, minus classification for Missing depths.
  EXPECT_EQ(a.size(), 18u);
  for (const auto& r : a) {
    EXPECT_FALSE(r.scenario == Scenario::missing_depths && r.task == Task::classification);
    ASSERT_EQ(r.trials.size(), 2u);
    const auto [m, s] = mean_std(r.trials);
    EXPECT_EQ(r.mean, m);
    EXPECT_EQ(r.stddev, s);
  }
  EXPECT_EQ(run_grid(*corpus_, *cache_, cfg), a);
}

TEST_F(GridTest, SingleTrialHasZeroStd) {
  auto cfg = small_grid();
  cfg.n_trials = 1;
  cfg.scenarios = {Scenario::whole};
  for (const auto& r : run_grid(*corpus_, *cache_, cfg)) EXPECT_EQ(r.stddev, 0.0);
}

TEST_F(GridTest, TrialsMatchRunTrial) {
  auto cfg = small_grid();
  cfg.scenarios = {Scenario::split};
  cfg.tasks = {Task::classification};
  cfg.kinds = {FeatureKind::dt_betti};
  const auto r = run_grid(*corpus_, *cache_, cfg);
  ASSERT_EQ(r.size(), 1u);
  for (int t = 0; t < cfg.n_trials; ++t) {
    EXPECT_EQ(r[0].trials[static_cast<std::size_t>(t)],
              run_trial(*corpus_, *cache_, Scenario::split, FeatureKind::dt_betti,
                        Task::classification, cfg.base_seed + static_cast<std::uint64_t>(t), cfg.n_trees));
  }
}

TEST_F(GridTest, BlurredTrainingFeaturesEqualWhole) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto whole = make_split(*corpus_, spec(Scenario::whole, seed), Task::regression);
    const auto blurred = make_split(*corpus_, spec(Scenario::blurred, seed), Task::regression);
    std::multiset<std::vector<double>> a, b;
    for (const auto& r : whole.train) a.insert(cache_->get(r, FeatureKind::ss_betti));
    for (const auto& r : blurred.train) b.insert(cache_->get(r, FeatureKind::ss_betti));
    EXPECT_EQ(a, b);
  }
}

TEST_F(GridTest, MeanCurvesCsv) {
  std::ostringstream out;
  write_mean_curves_csv(out, *corpus_, *cache_, FeatureKind::dt_betti);
  std::istringstream lines(out.str());
  std::string line;
  int rows = 0;
  while (std::getline(lines, line)) {
    if (line.rfind("depth,", 0) == 0) continue;
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 2 + 200 - 1);
  }
  EXPECT_EQ(rows, 10);
}

// --- reporting ------------------------------------------------------------------------

ExperimentResult result(Scenario s, FeatureKind k, Task t, std::vector<double> trials) {
  ExperimentResult r{s, k, t, trials, 0.0, 0.0};
  std::tie(r.mean, r.stddev) = mean_std(r.trials);
  return r;
}

TEST(Report, CellFormat) {
  EXPECT_EQ(format_cell(100.0, 0.0), "100.00 ± 0.00");
  EXPECT_EQ(format_cell(7.346, 0.024), "7.35 ± 0.02");
}

TEST(Report, MeanStdIsPopulation) {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  const auto [m, s] = mean_std(v);
  EXPECT_DOUBLE_EQ(m, 5.0);
  EXPECT_DOUBLE_EQ(s, 2.0);
}

TEST(Report, FullTableShape) {
  std::vector<ExperimentResult> results;
  for (const auto s : kScenarios) {
    for (const auto k : kFeatureKinds) {
      results.push_back(result(s, k, Task::regression, {10.0, 12.0}));
      if (s != Scenario::missing_depths) results.push_back(result(s, k, Task::classification, {90.0}));
    }
  }
  const auto table = render_table(results);
  const auto reg = table.find("Depth as scalar");
  const auto cls = table.find("Depth as category");
  ASSERT_NE(reg, std::string::npos);
  ASSERT_NE(cls, std::string::npos);
  const auto count_rows = [&](std::size_t from, std::size_t to) {
    int n = 0;
    for (const auto s : kScenarios) {
      const auto needle = "\n" + std::string(display_name(s)) + " ";
      auto pos = table.find(needle, from);
      if (pos != std::string::npos && pos < to) ++n;
    }
    return n;
  };
  EXPECT_EQ(count_rows(reg, cls), 5);
  EXPECT_EQ(count_rows(cls, table.size()), 4);
  EXPECT_NE(table.find("11.00 ± 1.00"), std::string::npos);
  EXPECT_NE(table.find("90.00 ± 0.00"), std::string::npos);
}

TEST(Report, EmptyBlockOmitted) {
  const std::vector<ExperimentResult> results{
      result(Scenario::whole, FeatureKind::ss_betti, Task::regression, {3.0})};
  const auto table = render_table(results);
  EXPECT_EQ(table.find("Depth as category"), std::string::npos);
  EXPECT_NE(table.find("Whole"), std::string::npos);
  EXPECT_NE(table.find("3.00 ± 0.00"), std::string::npos);
}

TEST(Report, ResultsCsvRoundTrip) {
  const std::vector<ExperimentResult> results{
      result(Scenario::split_br, FeatureKind::dt_gaussian, Task::regression, {7.1, 7.3, 0.1 + 0.2}),
      result(Scenario::whole, FeatureKind::ss_betti, Task::classification, {100.0})};
  std::stringstream ss;
  write_results_csv(ss, results);
  EXPECT_EQ(read_results_csv(ss), results);
}

TEST(Report, NamesRoundTrip) {
  for (const auto s : kScenarios) {
    EXPECT_EQ(parse_scenario(slug(s)), s);
    EXPECT_EQ(parse_scenario(display_name(s)), s);
  }
  EXPECT_EQ(parse_task("regression"), Task::regression);
  EXPECT_FALSE(parse_task("ranking").has_value());
}

}  // namespace
}  // namespace firntda
