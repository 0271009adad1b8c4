#include "firntda/experiments.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "firntda/error.hpp"
#include "firntda/rng.hpp"

namespace firntda {

// ---------------------------------------------------------------------------
// Corpus

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error(Errc::io, "cannot open manifest " + manifest.string());
  const auto base = manifest.parent_path();
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (line_no == 1 && !fields.empty() && trim(fields[0]) == "path") continue;
    if (fields.size() != 2) {
      throw Error(Errc::format, "manifest line " + std::to_string(line_no) +
                                    ": expected 'path,depth_metres'");
    }
    LabeledImage item;
    item.id = trim(fields[0]);
    const auto depth_text = trim(fields[1]);
    const auto* end = depth_text.data() + depth_text.size();
    if (std::from_chars(depth_text.data(), end, item.depth).ptr != end ||
        depth_class(item.depth) < 0) {
      throw Error(Errc::config, "manifest line " + std::to_string(line_no) +
                                    ": depth must be one of 7,15,23,31,38,46,53,61,70,78");
    }
    std::filesystem::path p(item.id);
    item.image = load_image(p.is_absolute() ? p : base / p);
    corpus.push_back(std::move(item));
  }
  if (corpus.empty()) throw Error(Errc::empty_input, "manifest lists no images");
  return corpus;
}

Corpus synth_corpus(int images_per_depth, int size, std::uint64_t base_seed) {
  if (images_per_depth < 1) throw Error(Errc::argument, "images per depth must be at least 1");
  Corpus corpus;
  corpus.reserve(kDepthsMetres.size() * static_cast<std::size_t>(images_per_depth));
  for (std::size_t c = 0; c < kDepthsMetres.size(); ++c) {
    const int depth = kDepthsMetres[c];
    for (int i = 0; i < images_per_depth; ++i) {
      const auto seed = derive_seed(base_seed, c * 1'000'000 + static_cast<std::uint64_t>(i));
      std::ostringstream id;
      id << "depth_" << std::setw(2) << std::setfill('0') << depth << "m/img_" << std::setw(3)
         << i << ".pgm";
      corpus.push_back({id.str(), depth, synth_firn(default_synth_params(depth, seed, size))});
    }
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Names

std::string_view display_name(Scenario s) noexcept {
  switch (s) {
    case Scenario::whole: return "Whole";
    case Scenario::split: return "Split";
    case Scenario::split_br: return "Split BR";
    case Scenario::blurred: return "Blurred";
    case Scenario::missing_depths: return "Missing depths";
  }
  return "?";
}

std::string_view slug(Scenario s) noexcept {
  switch (s) {
    case Scenario::whole: return "whole";
    case Scenario::split: return "split";
    case Scenario::split_br: return "split_br";
    case Scenario::blurred: return "blurred";
    case Scenario::missing_depths: return "missing_depths";
  }
  return "?";
}

std::optional<Scenario> parse_scenario(std::string_view text) noexcept {
  for (const auto s : kScenarios) {
    if (text == slug(s) || text == display_name(s)) return s;
  }
  return std::nullopt;
}

std::optional<Task> parse_task(std::string_view text) noexcept {
  if (text == "regression") return Task::regression;
  if (text == "classification") return Task::classification;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Splits

GrayImage render(const Corpus& corpus, const SampleRef& ref) {
  const auto& source = corpus.at(ref.image).image;
  GrayImage img = ref.quadrant ? split_quadrants(source)[static_cast<std::size_t>(*ref.quadrant)]
                               : source;
  if (ref.manipulation == Manipulation::blurred) img = gaussian_blur3(img);
  return img;
}

namespace {

std::vector<SampleRef> whole_refs(const Corpus& corpus) {
  std::vector<SampleRef> refs;
  for (std::size_t i = 0; i < corpus.size(); ++i) refs.push_back({i, std::nullopt, Manipulation::none});
  return refs;
}

std::vector<SampleRef> quadrant_refs(const Corpus& corpus) {
  std::vector<SampleRef> refs;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (const auto q : kQuadrants) refs.push_back({i, q, Manipulation::none});
  }
  return refs;
}

Split random_split(std::vector<SampleRef> refs, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw Error(Errc::config, "split fraction must lie in (0, 1)");
  }
  Rng rng(derive_seed(seed, 0));
  rng.shuffle(refs.begin(), refs.end());
  const auto n_train = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(refs.size())));
  Split s;
  s.train.assign(refs.begin(), refs.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(refs.begin() + static_cast<std::ptrdiff_t>(n_train), refs.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

}  // namespace

Split make_split(const Corpus& corpus, const ScenarioSpec& spec, Task task) {
  if (corpus.empty()) throw Error(Errc::empty_input, "empty corpus");
  for (const auto& item : corpus) {
    if (depth_class(item.depth) < 0) {
      throw Error(Errc::config, "image " + item.id + " has an unknown depth label");
    }
  }
  if (spec.name == Scenario::missing_depths && task == Task::classification) {
    throw Error(Errc::config, "Missing depths is a regression-only scenario");
  }

  Split s;
  switch (spec.name) {
    case Scenario::whole:
      s = random_split(whole_refs(corpus), spec.split_fraction, spec.trial_seed);
      break;
    case Scenario::split:
      s = random_split(quadrant_refs(corpus), spec.split_fraction, spec.trial_seed);
      break;
    case Scenario::split_br:
      for (const auto& ref : quadrant_refs(corpus)) {
        (ref.quadrant == Quadrant::bottom_right ? s.test : s.train).push_back(ref);
      }
      break;
    case Scenario::blurred:
      s = random_split(whole_refs(corpus), spec.split_fraction, spec.trial_seed);
      for (auto& ref : s.test) ref.manipulation = Manipulation::blurred;
      break;
    case Scenario::missing_depths: {
      const std::set<int> held(spec.held_out_depths.begin(), spec.held_out_depths.end());
      for (const auto& ref : whole_refs(corpus)) {
        (held.contains(corpus[ref.image].depth) ? s.test : s.train).push_back(ref);
      }
      break;
    }
  }

  if (s.train.empty()) throw Error(Errc::config, "scenario leaves the training set empty");
  if (s.test.empty()) throw Error(Errc::config, "scenario leaves the test set empty");
  if (task == Task::classification) {
    std::set<int> train_depths;
    for (const auto& r : s.train) train_depths.insert(corpus[r.image].depth);
    for (const auto& r : s.test) {
      if (!train_depths.contains(corpus[r.image].depth)) {
        throw Error(Errc::config, "depth " + std::to_string(corpus[r.image].depth) +
                                      " m has no training sample in scenario " +
                                      std::string(slug(spec.name)));
      }
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Feature cache

void FeatureCache::insert(const SampleRef& ref, FeatureKind kind, std::vector<double> values) {
  entries_[{ref, kind}] = std::move(values);
}

bool FeatureCache::contains(const SampleRef& ref, FeatureKind kind) const {
  return entries_.contains({ref, kind});
}

const std::vector<double>& FeatureCache::get(const SampleRef& ref, FeatureKind kind) const {
  const auto it = entries_.find({ref, kind});
  if (it == entries_.end()) {
    throw Error(Errc::config, "feature cache has no " + std::string(slug(kind)) +
                                  " entry for image #" + std::to_string(ref.image));
  }
  return it->second;
}

void FeatureCache::populate(const Corpus& corpus, std::span<const SampleRef> refs,
                            std::span<const FeatureKind> kinds) {
  struct Job {
    SampleRef ref;
    std::vector<FeatureKind> kinds;
  };
  std::vector<Job> jobs;
  for (const auto& ref : refs) {
    Job job{ref, {}};
    for (const auto k : kinds) {
      if (!contains(ref, k)) job.kinds.push_back(k);
    }
    if (!job.kinds.empty()) jobs.push_back(std::move(job));
  }

  std::vector<FeatureResult> results(jobs.size());
  const auto n = static_cast<std::int64_t>(jobs.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& job = jobs[static_cast<std::size_t>(i)];
    auto& r = results[static_cast<std::size_t>(i)];
    try {
      r.features = featurize_all(render(corpus, job.ref), job.kinds);
    } catch (const std::exception& e) {
      r.error = e.what();
    }
  }
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!results[i].ok()) {
      throw Error(Errc::config, "featurization failed for " + corpus[jobs[i].ref.image].id +
                                    ": " + results[i].error);
    }
    for (auto& fv : results[i].features) insert(jobs[i].ref, fv.kind, std::move(fv.values));
  }
}

std::vector<SampleRef> required_samples(const Corpus& corpus, std::span<const Scenario> scenarios) {
  auto wants = [&](std::initializer_list<Scenario> any) {
    return std::any_of(scenarios.begin(), scenarios.end(), [&](Scenario s) {
      return std::find(any.begin(), any.end(), s) != any.end();
    });
  };
  std::vector<SampleRef> refs;
  if (wants({Scenario::whole, Scenario::blurred, Scenario::missing_depths})) {
    const auto w = whole_refs(corpus);
    refs.insert(refs.end(), w.begin(), w.end());
  }
  if (wants({Scenario::blurred})) {
    for (auto r : whole_refs(corpus)) {
      r.manipulation = Manipulation::blurred;
      refs.push_back(r);
    }
  }
  if (wants({Scenario::split, Scenario::split_br})) {
    const auto q = quadrant_refs(corpus);
    refs.insert(refs.end(), q.begin(), q.end());
  }
  return refs;
}

// ---------------------------------------------------------------------------
// Grid

std::pair<double, double> mean_std(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  const auto n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (const double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / n)};
}

namespace {

Dataset build_dataset(const Corpus& corpus, const FeatureCache& cache,
                      std::span<const SampleRef> refs, FeatureKind kind, Task task) {
  Dataset data;
  data.n_features = feature_length(kind);
  for (const auto& ref : refs) {
    const int depth = corpus[ref.image].depth;
    const double label =
        task == Task::regression ? static_cast<double>(depth) : static_cast<double>(depth_class(depth));
    data.add(cache.get(ref, kind), label, corpus[ref.image].id);
  }
  return data;
}

}  // namespace

double run_trial(const Corpus& corpus, const FeatureCache& cache, Scenario scenario,
                 FeatureKind kind, Task task, std::uint64_t trial_seed, int n_trees) {
  ScenarioSpec spec;
  spec.name = scenario;
  spec.trial_seed = trial_seed;
  const Split split = make_split(corpus, spec, task);
  const Dataset train = build_dataset(corpus, cache, split.train, kind, task);
  const Dataset test = build_dataset(corpus, cache, split.test, kind, task);
  ForestConfig cfg = ForestConfig::defaults(task, derive_seed(trial_seed, 1));
  cfg.n_trees = n_trees;
  const Forest forest = fit_serial(train, cfg);
  return metric(predict_all(forest, test), test.labels, task);
}

std::vector<ExperimentResult> run_grid(const Corpus& corpus, const FeatureCache& cache,
                                       const GridConfig& cfg) {
  if (cfg.n_trials < 1) throw Error(Errc::argument, "n_trials must be at least 1");
  std::vector<ExperimentResult> cells;
  for (const auto scenario : cfg.scenarios) {
    for (const auto kind : cfg.kinds) {
      for (const auto task : cfg.tasks) {
        if (scenario == Scenario::missing_depths && task == Task::classification) continue;
        ExperimentResult r;
        r.scenario = scenario;
        r.kind = kind;
        r.task = task;
        r.trials.assign(static_cast<std::size_t>(cfg.n_trials), 0.0);
        cells.push_back(std::move(r));
      }
    }
  }

  const auto trials = static_cast<std::size_t>(cfg.n_trials);
  const auto n_jobs = static_cast<std::int64_t>(cells.size() * trials);
  std::vector<std::string> errors(static_cast<std::size_t>(n_jobs));
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t j = 0; j < n_jobs; ++j) {
    auto& cell = cells[static_cast<std::size_t>(j) / trials];
    const std::size_t t = static_cast<std::size_t>(j) % trials;
    try {
      cell.trials[t] = run_trial(corpus, cache, cell.scenario, cell.kind, cell.task,
                                 cfg.base_seed + t, cfg.n_trees);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(j)] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw Error(Errc::config, e);
  }
  for (auto& cell : cells) std::tie(cell.mean, cell.stddev) = mean_std(cell.trials);
  return cells;
}

// ---------------------------------------------------------------------------
// Reporting

std::string format_cell(double mean, double stddev) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << mean << " ± " << stddev;
  return out.str();
}

namespace {

// Display width of UTF-8 text (counts code points).
std::size_t display_width(std::string_view s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

std::string pad(std::string_view s, std::size_t width) {
  std::string out(s);
  const auto w = display_width(s);
  if (w < width) out.append(width - w, ' ');
  return out;
}

}  // namespace

std::string render_table(std::span<const ExperimentResult> results) {
  std::ostringstream out;
  constexpr std::size_t kFirstColumn = 16;
  constexpr std::size_t kColumn = 18;
  bool first_block = true;
  for (const auto task : {Task::regression, Task::classification}) {
    const bool any = std::any_of(results.begin(), results.end(),
                                 [task](const ExperimentResult& r) { return r.task == task; });
    if (!any) continue;
    if (!first_block) out << '\n';
    first_block = false;
    out << (task == Task::regression ? "Depth as scalar: mean absolute error (m)"
                                     : "Depth as category: accuracy (%)")
        << '\n';
    out << pad("Scenario", kFirstColumn);
    for (const auto kind : kFeatureKinds) out << pad(display_name(kind), kColumn);
    out << '\n';
    for (const auto scenario : kScenarios) {
      if (task == Task::classification && scenario == Scenario::missing_depths) continue;
      const bool row_present = std::any_of(results.begin(), results.end(), [&](const ExperimentResult& r) {
        return r.task == task && r.scenario == scenario;
      });
      if (!row_present) continue;
      out << pad(display_name(scenario), kFirstColumn);
      for (const auto kind : kFeatureKinds) {
        const auto it = std::find_if(results.begin(), results.end(), [&](const ExperimentResult& r) {
          return r.task == task && r.scenario == scenario && r.kind == kind;
        });
        out << pad(it == results.end() ? "-" : format_cell(it->mean, it->stddev), kColumn);
      }
      out << '\n';
    }
  }
  // Strip trailing padding on each line.
  std::string text = out.str();
  std::string cleaned;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    line.erase(line.find_last_not_of(' ') + 1);
    cleaned += line;
    cleaned += '\n';
  }
  return cleaned;
}

void write_results_csv(std::ostream& out, std::span<const ExperimentResult> results) {
  out << "scenario,featurization,task,n_trials,mean,std,trials\n";
  for (const auto& r : results) {
    out << slug(r.scenario) << ',' << slug(r.kind) << ',' << to_string(r.task) << ','
        << r.trials.size() << ',' << format_double(r.mean) << ',' << format_double(r.stddev) << ',';
    for (std::size_t i = 0; i < r.trials.size(); ++i) {
      if (i > 0) out << ';';
      out << format_double(r.trials[i]);
    }
    out << '\n';
  }
}

std::vector<ExperimentResult> read_results_csv(std::istream& in) {
  std::vector<ExperimentResult> results;
  std::string line;
  std::size_t line_no = 0;
  auto parse_double = [&](const std::string& s) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    if (std::from_chars(s.data(), end, v).ptr != end) {
      throw Error(Errc::format, "results CSV line " + std::to_string(line_no) + ": bad number '" + s + "'");
    }
    return v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || (line_no == 1 && line.rfind("scenario,", 0) == 0)) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 7) {
      throw Error(Errc::format, "results CSV line " + std::to_string(line_no) + ": expected 7 fields");
    }
    ExperimentResult r;
    const auto scenario = parse_scenario(f[0]);
    const auto kind = parse_feature_kind(f[1]);
    const auto task = parse_task(f[2]);
    if (!scenario || !kind || !task) {
      throw Error(Errc::format, "results CSV line " + std::to_string(line_no) + ": unknown label");
    }
    r.scenario = *scenario;
    r.kind = *kind;
    r.task = *task;
    r.mean = parse_double(f[4]);
    r.stddev = parse_double(f[5]);
    std::istringstream trials(f[6]);
    std::string v;
    while (std::getline(trials, v, ';')) r.trials.push_back(parse_double(v));
    if (r.trials.size() != static_cast<std::size_t>(parse_double(f[3]))) {
      throw Error(Errc::format, "results CSV line " + std::to_string(line_no) + ": trial count mismatch");
    }
    results.push_back(std::move(r));
  }
  return results;
}

void write_mean_curves_csv(std::ostream& out, const Corpus& corpus, const FeatureCache& cache,
                           FeatureKind kind) {
  for (const int depth : kDepthsMetres) {
    std::vector<double> sum(feature_length(kind), 0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (corpus[i].depth != depth) continue;
      const auto& v = cache.get({i, std::nullopt, Manipulation::none}, kind);
      for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += v[k];
      ++count;
    }
    if (count == 0) continue;
    out << depth << ',' << slug(kind);
    for (const double s : sum) out << ',' << format_double(s / static_cast<double>(count));
    out << '\n';
  }
}

}  // namespace firntda
