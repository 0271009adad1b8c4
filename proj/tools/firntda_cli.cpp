// firntda: synthesize a firn corpus, featurize it, train forests, run the
// scenario grid and print the results table.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "firntda/curves.hpp"
#include "firntda/error.hpp"
#include "firntda/experiments.hpp"
#include "firntda/forest.hpp"
#include "firntda/image.hpp"

namespace fs = std::filesystem;
using namespace firntda;

namespace {

struct Options {
  fs::path manifest;
  fs::path out;
  std::uint64_t seed = 0;
  std::vector<std::string> scenarios;
  std::vector<std::string> features;
  std::vector<std::string> tasks;
  int trials = 10;
  int trees = 100;
  int images_per_depth = 20;
  int size = 128;
};

std::vector<Scenario> selected_scenarios(const Options& o) {
  if (o.scenarios.empty()) return {kScenarios.begin(), kScenarios.end()};
  std::vector<Scenario> out;
  for (const auto& s : o.scenarios) {
    const auto v = parse_scenario(s);
    if (!v) throw Error(Errc::argument, "unknown scenario '" + s + "'");
    if (std::find(out.begin(), out.end(), *v) == out.end()) out.push_back(*v);
  }
  return out;
}

std::vector<FeatureKind> selected_kinds(const Options& o) {
  if (o.features.empty()) return {kFeatureKinds.begin(), kFeatureKinds.end()};
  std::vector<FeatureKind> out;
  for (const auto& s : o.features) {
    const auto v = parse_feature_kind(s);
    if (!v) throw Error(Errc::argument, "unknown featurization '" + s + "'");
    if (std::find(out.begin(), out.end(), *v) == out.end()) out.push_back(*v);
  }
  return out;
}

std::vector<Task> selected_tasks(const Options& o) {
  if (o.tasks.empty()) return {Task::regression, Task::classification};
  std::vector<Task> out;
  for (const auto& s : o.tasks) {
    const auto v = parse_task(s);
    if (!v) throw Error(Errc::argument, "unknown task '" + s + "'");
    if (std::find(out.begin(), out.end(), *v) == out.end()) out.push_back(*v);
  }
  return out;
}

fs::path features_path(const fs::path& dir, FeatureKind kind) {
  return dir / ("features_" + std::string(slug(kind)) + ".csv");
}

std::ofstream open_output(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + p.string());
  return out;
}

void close_output(std::ofstream& out, const fs::path& p) {
  out.close();
  if (!out) throw Error(Errc::io, "error while writing " + p.string());
}

void make_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::io, "cannot create " + dir.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------

int cmd_synth(const Options& o) {
  if (o.images_per_depth < 1) throw Error(Errc::argument, "--images-per-depth must be at least 1");
  if (o.size < 2) throw Error(Errc::argument, "--size must be at least 2");
  make_out_dir(o.out);
  const Corpus corpus = synth_corpus(o.images_per_depth, o.size, o.seed);
  const auto manifest = o.out / "manifest.csv";
  auto m = open_output(manifest);
  m << "path,depth_metres\n";
  for (const auto& item : corpus) {
    const auto p = o.out / item.id;
    make_out_dir(p.parent_path());
    save_pgm(item.image, p);
    m << item.id << ',' << item.depth << '\n';
  }
  close_output(m, manifest);
  std::cerr << "wrote " << corpus.size() << " images and " << manifest.string() << '\n';
  return 0;
}

int cmd_featurize(const Options& o) {
  const Corpus corpus = load_corpus(o.manifest);
  const auto kinds = selected_kinds(o);
  make_out_dir(o.out);

  std::vector<GrayImage> images;
  images.reserve(corpus.size());
  for (const auto& item : corpus) images.push_back(item.image);

  // Chunks keep the progress log moving; each chunk is parallel inside.
  constexpr std::size_t kChunk = 32;
  std::vector<FeatureResult> results;
  results.reserve(images.size());
  for (std::size_t start = 0; start < images.size(); start += kChunk) {
    const auto n = std::min(kChunk, images.size() - start);
    auto part = featurize_batch(std::span(images).subspan(start, n), kinds);
    std::move(part.begin(), part.end(), std::back_inserter(results));
    std::cerr << "featurized " << results.size() << '/' << images.size() << '\n';
  }

  std::size_t failures = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i].ok()) {
      ++failures;
      std::cerr << "error: " << corpus[i].id << ": " << results[i].error << '\n';
    }
  }

  for (std::size_t k = 0; k < kinds.size(); ++k) {
    std::vector<FeatureRow> rows;
    for (std::size_t i = 0; i < results.size(); ++i) {
      if (results[i].ok()) rows.push_back({corpus[i].id, corpus[i].depth, results[i].features[k]});
    }
    const auto p = features_path(o.out, kinds[k]);
    auto out = open_output(p);
    write_feature_csv(out, rows);
    close_output(out, p);
    std::cerr << "wrote " << p.string() << " (" << rows.size() << " rows)\n";
  }
  if (failures > 0) {
    std::cerr << failures << " of " << corpus.size() << " images failed\n";
    return 1;
  }
  return 0;
}

// Whole-image features from featurize's CSVs, keyed by corpus index.
void load_whole_features(const Corpus& corpus, const fs::path& dir, std::span<const FeatureKind> kinds,
                         FeatureCache& cache) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < corpus.size(); ++i) index.emplace(corpus[i].id, i);
  for (const auto kind : kinds) {
    const auto p = features_path(dir, kind);
    std::ifstream in(p);
    if (!in) {
      throw Error(Errc::config, "missing " + p.string() +
                                    "; run 'firntda featurize --manifest <manifest> --out " +
                                    dir.string() + "' first");
    }
    for (auto& row : read_feature_csv(in)) {
      const auto it = index.find(row.image_id);
      if (it == index.end() || row.feature.kind != kind) continue;
      cache.insert({it->second, std::nullopt, Manipulation::none}, kind, std::move(row.feature.values));
    }
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (!cache.contains({i, std::nullopt, Manipulation::none}, kind)) {
        throw Error(Errc::config, p.string() + " has no row for " + corpus[i].id +
                                      "; rerun 'firntda featurize' for this manifest");
      }
    }
  }
}

int cmd_train(const Options& o) {
  const Corpus corpus = load_corpus(o.manifest);
  const auto kinds = selected_kinds(o);
  const auto tasks = selected_tasks(o);
  FeatureCache cache;
  load_whole_features(corpus, o.out, kinds, cache);
  for (const auto kind : kinds) {
    for (const auto task : tasks) {
      Dataset data;
      data.n_features = feature_length(kind);
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        const double label = task == Task::regression ? corpus[i].depth : depth_class(corpus[i].depth);
        data.add(cache.get({i, std::nullopt, Manipulation::none}, kind), label, corpus[i].id);
      }
      auto cfg = ForestConfig::defaults(task, o.seed);
      cfg.n_trees = o.trees;
      const Forest forest = fit(data, cfg);
      const auto p = o.out / ("forest_" + std::string(slug(kind)) + "_" + to_string(task) + ".txt");
      auto out = open_output(p);
      save_forest(out, forest);
      close_output(out, p);
      std::cerr << "wrote " << p.string() << '\n';
    }
  }
  return 0;
}

void write_table(const fs::path& dir, std::span<const ExperimentResult> results) {
  const auto table = render_table(results);
  const auto p = dir / "results.txt";
  auto out = open_output(p);
  out << table;
  close_output(out, p);
  std::cout << table;
}

int cmd_evaluate(const Options& o) {
  if (o.trials < 1) throw Error(Errc::argument, "--trials must be at least 1");
  const Corpus corpus = load_corpus(o.manifest);
  GridConfig grid;
  grid.scenarios = selected_scenarios(o);
  grid.kinds = selected_kinds(o);
  grid.tasks = selected_tasks(o);
  grid.n_trials = o.trials;
  grid.n_trees = o.trees;
  grid.base_seed = o.seed;

  FeatureCache cache;
  load_whole_features(corpus, o.out, grid.kinds, cache);
  // Quadrants and blurred copies exist only in memory; compute what is missing.
  const auto refs = required_samples(corpus, grid.scenarios);
  std::cerr << "computing features for derived samples\n";
  cache.populate(corpus, refs, grid.kinds);

  std::cerr << "running " << grid.scenarios.size() << " scenario(s) x " << grid.kinds.size()
            << " featurization(s) x " << grid.tasks.size() << " task(s), " << grid.n_trials
            << " trials\n";
  const auto results = run_grid(corpus, cache, grid);

  const auto csv = o.out / "results.csv";
  auto out = open_output(csv);
  write_results_csv(out, results);
  close_output(out, csv);
  for (const auto kind : grid.kinds) {
    const auto p = o.out / ("mean_curves_" + std::string(slug(kind)) + ".csv");
    auto mc = open_output(p);
    write_mean_curves_csv(mc, corpus, cache, kind);
    close_output(mc, p);
  }
  write_table(o.out, results);
  return 0;
}

int cmd_report(const Options& o) {
  const auto csv = o.out / "results.csv";
  std::ifstream in(csv);
  if (!in) throw Error(Errc::io, "cannot open " + csv.string() + "; run 'firntda evaluate' first");
  const auto results = read_results_csv(in);
  if (results.empty()) throw Error(Errc::empty_input, csv.string() + " holds no results");
  write_table(o.out, results);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topological featurization of firn images and depth prediction"};
  app.require_subcommand(1);
  Options o;

  auto* synth = app.add_subcommand("synth", "Write a synthetic corpus and its manifest");
  synth->add_option("--out", o.out, "Output directory")->required();
  synth->add_option("--seed", o.seed, "Base seed")->capture_default_str();
  synth->add_option("--images-per-depth", o.images_per_depth, "Images per depth")->capture_default_str();
  synth->add_option("--size", o.size, "Image width and height in pixels")->capture_default_str();

  auto* featurize = app.add_subcommand("featurize", "Write one feature CSV per featurization");
  featurize->add_option("--manifest", o.manifest, "Corpus manifest (path,depth_metres)")->required();
  featurize->add_option("--out", o.out, "Output directory")->required();
  featurize->add_option("--features", o.features, "ss-betti, ss-gaussian, dt-betti, dt-gaussian")
      ->delimiter(',');

  auto* train = app.add_subcommand("train", "Fit forests on every image and save them");
  train->add_option("--manifest", o.manifest, "Corpus manifest")->required();
  train->add_option("--out", o.out, "Directory holding the feature CSVs")->required();
  train->add_option("--seed", o.seed, "Forest seed")->capture_default_str();
  train->add_option("--features", o.features, "Featurizations")->delimiter(',');
  train->add_option("--tasks", o.tasks, "regression, classification")->delimiter(',');
  train->add_option("--trees", o.trees, "Trees per forest")->capture_default_str();

  auto* evaluate = app.add_subcommand("evaluate", "Run the scenario grid and write the results");
  evaluate->add_option("--manifest", o.manifest, "Corpus manifest")->required();
  evaluate->add_option("--out", o.out, "Directory holding the feature CSVs")->required();
  evaluate->add_option("--seed", o.seed, "Base seed")->capture_default_str();
  evaluate->add_option("--scenarios", o.scenarios, "whole, split, split_br, blurred, missing_depths")
      ->delimiter(',');
  evaluate->add_option("--features", o.features, "Featurizations")->delimiter(',');
  evaluate->add_option("--tasks", o.tasks, "regression, classification")->delimiter(',');
  evaluate->add_option("--trials", o.trials, "Trials per cell")->capture_default_str();
  evaluate->add_option("--trees", o.trees, "Trees per forest")->capture_default_str();

  auto* report = app.add_subcommand("report", "Print the table from results.csv");
  report->add_option("--out", o.out, "Directory holding results.csv")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(o);
    if (featurize->parsed()) return cmd_featurize(o);
    if (train->parsed()) return cmd_train(o);
    if (evaluate->parsed()) return cmd_evaluate(o);
    if (report->parsed()) return cmd_report(o);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return e.code() == Errc::argument ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
