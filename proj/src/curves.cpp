#include "firntda/curves.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "firntda/error.hpp"

namespace firntda {

namespace {

double finite_death(const PersistencePair& p, const CurveConfig& cfg) {
  return p.essential() ? cfg.essential_death : p.death;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

std::vector<double> betti_curve(const PersistenceDiagram& dgm, const CurveConfig& cfg) {
  std::vector<double> curve(cfg.size(), 0.0);
  for (const auto& p : dgm.pairs) {
    const double d = finite_death(p, cfg);
    for (std::size_t i = 0; i < curve.size(); ++i) {
      const double t = cfg.t_min + static_cast<int>(i);
      if (p.birth <= t && t < d) curve[i] += 1.0;
    }
  }
  return curve;
}

std::vector<double> gaussian_weights(const PersistenceDiagram& dgm, const CurveConfig& cfg) {
  std::vector<double> kappa;
  kappa.reserve(dgm.pairs.size());
  double total = 0.0;
  for (const auto& p : dgm.pairs) {
    kappa.push_back(finite_death(p, cfg) - p.birth);
    total += kappa.back();
  }
  if (total > 0.0) {
    for (auto& k : kappa) k /= total;
  }
  return kappa;
}

std::vector<double> gaussian_curve(const PersistenceDiagram& dgm, const CurveConfig& cfg) {
  // Summation order is fixed by sorting so that diagrams listing the same
  // pairs in a different order give bit-identical curves.
  const PersistenceDiagram canonical{dgm.dimension, dgm.sorted()};
  std::vector<double> curve(cfg.size(), 0.0);
  const auto kappa = gaussian_weights(canonical, cfg);
  for (std::size_t j = 0; j < canonical.pairs.size(); ++j) {
    const double b = canonical.pairs[j].birth;
    const double d = finite_death(canonical.pairs[j], cfg);
    for (std::size_t i = 0; i < curve.size(); ++i) {
      const double t = cfg.t_min + static_cast<int>(i);
      // P(X <= t) * P(Y > t) for X ~ N(b, sigma^2), Y ~ N(d, sigma^2).
      curve[i] += kappa[j] * normal_cdf((t - b) / cfg.sigma) * normal_cdf((d - t) / cfg.sigma);
    }
  }
  return curve;
}

std::string_view display_name(FeatureKind kind) noexcept {
  switch (kind) {
    case FeatureKind::ss_betti: return "SS-Betti";
    case FeatureKind::ss_gaussian: return "SS-Gaussian";
    case FeatureKind::dt_betti: return "DT-Betti";
    case FeatureKind::dt_gaussian: return "DT-Gaussian";
  }
  return "?";
}

std::string_view slug(FeatureKind kind) noexcept {
  switch (kind) {
    case FeatureKind::ss_betti: return "ss-betti";
    case FeatureKind::ss_gaussian: return "ss-gaussian";
    case FeatureKind::dt_betti: return "dt-betti";
    case FeatureKind::dt_gaussian: return "dt-gaussian";
  }
  return "?";
}

std::optional<FeatureKind> parse_feature_kind(std::string_view text) noexcept {
  for (const auto k : kFeatureKinds) {
    if (text == slug(k) || text == display_name(k)) return k;
  }
  return std::nullopt;
}

std::size_t feature_length(FeatureKind kind) noexcept {
  return 2 * (is_distance_kind(kind) ? kDistanceCurves.size() : kSublevelCurves.size());
}

std::vector<double> curve_vector(const Diagrams& dgms, CurveKind kind, const CurveConfig& cfg) {
  auto curve = kind == CurveKind::betti ? betti_curve : gaussian_curve;
  auto out = curve(dgms.dim0, cfg);
  const auto dim1 = curve(dgms.dim1, cfg);
  out.insert(out.end(), dim1.begin(), dim1.end());
  return out;
}

namespace {

Diagrams sublevel_diagrams(const GrayImage& img) {
  return persistence(RealGrid::from_image(img));
}

Diagrams distance_diagrams(const BinaryImage& bin) {
  const DTImage dt = distance_transform_serial(bin);
  return persistence(RealGrid::from_ints(dt.width, dt.height, dt.capped));
}

FeatureKind sublevel_kind(CurveKind k) {
  return k == CurveKind::betti ? FeatureKind::ss_betti : FeatureKind::ss_gaussian;
}
FeatureKind distance_kind(CurveKind k) {
  return k == CurveKind::betti ? FeatureKind::dt_betti : FeatureKind::dt_gaussian;
}

}  // namespace

FeatureVector featurize_sublevel(const GrayImage& img, CurveKind kind) {
  return {sublevel_kind(kind), curve_vector(sublevel_diagrams(img), kind, kSublevelCurves)};
}

FeatureVector featurize_binary(const BinaryImage& bin, CurveKind kind) {
  return {distance_kind(kind), curve_vector(distance_diagrams(bin), kind, kDistanceCurves)};
}

FeatureVector featurize_dt(const GrayImage& img, CurveKind kind) {
  return featurize_binary(binarize(img), kind);
}

FeatureVector featurize(const GrayImage& img, FeatureKind kind) {
  return is_distance_kind(kind) ? featurize_dt(img, curve_kind(kind))
                                : featurize_sublevel(img, curve_kind(kind));
}

std::vector<FeatureVector> featurize_all(const GrayImage& img, std::span<const FeatureKind> kinds) {
  std::optional<Diagrams> sublevel;
  std::optional<Diagrams> distance;
  std::vector<FeatureVector> out;
  out.reserve(kinds.size());
  for (const auto kind : kinds) {
    if (is_distance_kind(kind)) {
      if (!distance) distance = distance_diagrams(binarize(img));
      out.push_back({kind, curve_vector(*distance, curve_kind(kind), kDistanceCurves)});
    } else {
      if (!sublevel) sublevel = sublevel_diagrams(img);
      out.push_back({kind, curve_vector(*sublevel, curve_kind(kind), kSublevelCurves)});
    }
  }
  return out;
}

namespace {

FeatureResult featurize_one(const GrayImage& img, std::span<const FeatureKind> kinds) {
  FeatureResult r;
  try {
    r.features = featurize_all(img, kinds);
  } catch (const Error& e) {
    r.error = std::string(to_string(e.code())) + ": " + e.what();
  }
  return r;
}

}  // namespace

std::vector<FeatureResult> featurize_batch(std::span<const GrayImage> images,
                                           std::span<const FeatureKind> kinds) {
  std::vector<FeatureResult> out(images.size());
  const auto n = static_cast<std::int64_t>(images.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = featurize_one(images[static_cast<std::size_t>(i)], kinds);
  }
  return out;
}

std::vector<FeatureResult> featurize_batch_serial(std::span<const GrayImage> images,
                                                  std::span<const FeatureKind> kinds) {
  std::vector<FeatureResult> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(featurize_one(img, kinds));
  return out;
}

// ---------------------------------------------------------------------------
// CSV

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_feature_csv(std::ostream& out, std::span<const FeatureRow> rows) {
  for (const auto& row : rows) {
    out << row.image_id << ',' << row.depth << ',' << slug(row.feature.kind);
    for (const double v : row.feature.values) out << ',' << format_double(v);
    out << '\n';
  }
}

std::vector<FeatureRow> read_feature_csv(std::istream& in) {
  std::vector<FeatureRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fail = [&](const std::string& why) {
      return Error(Errc::format, "feature CSV line " + std::to_string(line_no) + ": " + why);
    };

    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() < 4) throw fail("expected id, depth, kind and values");

    FeatureRow row;
    row.image_id = std::string(fields[0]);
    const auto* depth_end = fields[1].data() + fields[1].size();
    if (std::from_chars(fields[1].data(), depth_end, row.depth).ptr != depth_end) {
      throw fail("bad depth");
    }
    const auto kind = parse_feature_kind(fields[2]);
    if (!kind) throw fail("unknown feature kind '" + std::string(fields[2]) + "'");
    row.feature.kind = *kind;
    row.feature.values.reserve(fields.size() - 3);
    for (std::size_t i = 3; i < fields.size(); ++i) {
      double v = 0.0;
      const auto* end = fields[i].data() + fields[i].size();
      if (std::from_chars(fields[i].data(), end, v).ptr != end) throw fail("bad value");
      row.feature.values.push_back(v);
    }
    if (row.feature.values.size() != feature_length(*kind)) {
      throw fail("expected " + std::to_string(feature_length(*kind)) + " values");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace firntda
