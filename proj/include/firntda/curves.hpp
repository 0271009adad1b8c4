#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "firntda/binarize.hpp"
#include "firntda/cubical.hpp"
#include "firntda/image.hpp"

namespace firntda {

/// Threshold grid {t_min, ..., t_max}, Gaussian width and the finite death
/// substituted for essential classes.
struct CurveConfig {
  int t_min = 0;
  int t_max = 255;
  double sigma = 10.0;
  double essential_death = 256.0;

  std::size_t size() const noexcept { return static_cast<std::size_t>(t_max - t_min + 1); }
};

/// Raw intensities: grid 0..255, sigma 10 (covariance 100 I), essential 256.
inline constexpr CurveConfig kSublevelCurves{0, 255, 10.0, 256.0};
/// Capped distance transform: grid 1..100, sigma 5 (covariance 25 I), essential 101.
inline constexpr CurveConfig kDistanceCurves{1, 100, 5.0, 101.0};

/// beta(t) = #{(b, d) : b <= t < d} on the grid.
std::vector<double> betti_curve(const PersistenceDiagram& dgm, const CurveConfig& cfg);

/// kappa(b, d) = (d - b) / sum of lifespans, after essential substitution.
/// Empty for an empty diagram.
std::vector<double> gaussian_weights(const PersistenceDiagram& dgm, const CurveConfig& cfg);

/// gamma(t) = sum kappa(b,d) * Phi((t-b)/sigma) * (1 - Phi((t-d)/sigma)): the
/// mass of isotropic Gaussians centred on the diagram points that falls in
/// the box {x <= t < y}. All zeros for an empty diagram.
std::vector<double> gaussian_curve(const PersistenceDiagram& dgm, const CurveConfig& cfg);

enum class CurveKind : std::uint8_t { betti, gaussian };

enum class FeatureKind : std::uint8_t { ss_betti, ss_gaussian, dt_betti, dt_gaussian };

inline constexpr std::array<FeatureKind, 4> kFeatureKinds{
    FeatureKind::ss_betti, FeatureKind::ss_gaussian, FeatureKind::dt_betti,
    FeatureKind::dt_gaussian};

/// "SS-Betti", "SS-Gaussian", "DT-Betti", "DT-Gaussian".
std::string_view display_name(FeatureKind kind) noexcept;
/// "ss-betti", ... as used on the command line and in file names.
std::string_view slug(FeatureKind kind) noexcept;
std::optional<FeatureKind> parse_feature_kind(std::string_view text) noexcept;

inline bool is_distance_kind(FeatureKind k) noexcept {
  return k == FeatureKind::dt_betti || k == FeatureKind::dt_gaussian;
}
inline CurveKind curve_kind(FeatureKind k) noexcept {
  return k == FeatureKind::ss_betti || k == FeatureKind::dt_betti ? CurveKind::betti
                                                                  : CurveKind::gaussian;
}
/// 512 for sublevel kinds, 200 for distance-transform kinds.
std::size_t feature_length(FeatureKind kind) noexcept;

struct FeatureVector {
  FeatureKind kind = FeatureKind::ss_betti;
  std::vector<double> values;  // [dim-0 curve | dim-1 curve]

  bool operator==(const FeatureVector&) const = default;
};

/// Concatenated dimension-0 and dimension-1 curves of a diagram pair.
std::vector<double> curve_vector(const Diagrams& dgms, CurveKind kind, const CurveConfig& cfg);

/// Sublevel filtration of the raw intensities.
FeatureVector featurize_sublevel(const GrayImage& img, CurveKind kind);

/// Sublevel filtration of the capped distance transform of a binarised image.
FeatureVector featurize_binary(const BinaryImage& bin, CurveKind kind);

/// binarize -> distance_transform -> featurize_binary.
FeatureVector featurize_dt(const GrayImage& img, CurveKind kind);

FeatureVector featurize(const GrayImage& img, FeatureKind kind);

/// All requested kinds for one image, computing each filtration's diagrams
/// once. Result order follows `kinds`.
std::vector<FeatureVector> featurize_all(const GrayImage& img, std::span<const FeatureKind> kinds);

/// One image's features, or the error message that prevented them.
struct FeatureResult {
  std::vector<FeatureVector> features;
  std::string error;

  bool ok() const noexcept { return error.empty(); }
};

/// featurize_all over a batch, parallel across images (OpenMP). Output order
/// matches input order; per-image failures are captured, not thrown.
std::vector<FeatureResult> featurize_batch(std::span<const GrayImage> images,
                                           std::span<const FeatureKind> kinds);

/// Single-threaded reference of featurize_batch.
std::vector<FeatureResult> featurize_batch_serial(std::span<const GrayImage> images,
                                                  std::span<const FeatureKind> kinds);

// ---------------------------------------------------------------------------
// Feature CSV: image-id, depth-label, kind, v0, v1, ...

struct FeatureRow {
  std::string image_id;
  int depth = 0;
  FeatureVector feature;
};

void write_feature_csv(std::ostream& out, std::span<const FeatureRow> rows);
std::vector<FeatureRow> read_feature_csv(std::istream& in);

/// Shortest text that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace firntda
