#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "protoseg/core.hpp"
#include "protoseg/manifest.hpp"
#include "protoseg/metrics.hpp"
#include "protoseg/types.hpp"

namespace protoseg {

struct SweepOptions {
  std::size_t jobs = 1;
  Interpolation interpolation = Interpolation::kBilinear;
};

// ---- layer sweep ----------------------------------------------------------

struct LayerSweepRow {
  std::string image_id;
  int layer_index = 0;
  SaScore sa;
  std::size_t height = 0;  // layer's own spatial dims, before upsampling
  std::size_t width = 0;
  std::size_t channels = 0;
  std::string error;  // non-empty when the entry failed
};

struct LayerSummary {
  int layer_index = 0;
  double mean = 0.0;
  double std = 0.0;  // population
  std::size_t count = 0;
};

struct LayerSweepReport {
  std::vector<LayerSweepRow> rows;  // manifest order
  std::vector<LayerSummary> layers;  // ascending layer_index
};

/// Upsample each layer to the ground-truth dims, run ProtoSeg seeded with the
/// output mask and score against the ground truth. Failures are recorded in
/// the row, never thrown.
LayerSweepReport layer_sweep(const AnalysisManifest& manifest, const SweepOptions& options = {});

/// Per-layer mean and population std over the defined rows.
std::vector<LayerSummary> summarize_layers(std::span<const LayerSweepRow> rows);

// ---- unit sweep -----------------------------------------------------------

struct UnitScore {
  int unit_id = 0;
  SaScore sa;
};

struct UnitSweepReport {
  std::vector<UnitScore> units;  // descending SA, ties by unit_id, undefined last
  std::optional<std::size_t> boundary;  // active units are units[0, boundary)
  /// SAMs of the defined units in unit order, kept for heatmaps; not serialized.
  std::vector<SegmentationAbilityMap> unit_sams;
};

UnitSweepReport unit_sweep(const FeatureMap& layer_features, const LabelMask& init_mask, const LabelMask& g,
                           const SweepOptions& options = {});

/// Boundary at the first largest gap between consecutive sorted scores.
/// Throws kTooFewUnits below two scores and kPreconditionViolation if the
/// input is not sorted descending.
std::size_t split_active_inertia(std::span<const double> sorted_scores);

/// Per-pixel share of SAMs labelling the pixel as `positive_class`.
RealMap unit_heatmap(std::span<const SegmentationAbilityMap> unit_sams, std::size_t positive_class = 1);

// ---- confidence: mu, ranking, coverage ------------------------------------

struct ImageMu {
  std::string image_id;
  double mu = 0.0;
  std::size_t unit_count = 0;
};

struct RankingReport {
  std::vector<ImageMu> entries;  // ascending mu, ties by image id
};

RankingReport rank_images(std::span<const ImageMu> mu_per_image);

struct CoverageRecord {
  std::string image_id;
  double mu = 0.0;
  std::optional<double> dice;  // absent in deployment mode
  std::size_t unit_count = 0;
};

struct CoverageRow {
  double coverage = 0.0;  // percent
  std::size_t retained = 0;
  std::optional<double> mean_dice;
  std::optional<double> std_dice;
  std::vector<std::string> retained_ids;
  std::vector<std::string> rejected_ids;
};

struct CoverageTable {
  std::size_t total = 0;
  std::vector<CoverageRow> rows;  // in requested order
};

/// Keeps the ceil(c * N / 100) records with the highest mu (ties by image id)
/// for each requested coverage c in (0, 100].
CoverageTable coverage_table(std::span<const CoverageRecord> records, std::span<const double> coverages);

/// Unit scores against the network output on the last two layers of one
/// image; degenerate units are excluded.
ImageMu image_confidence(const ImageEntry& image, const SweepOptions& options = {});

struct ConfidenceReport {
  std::vector<CoverageRecord> records;  // manifest order
  std::vector<std::string> failures;    // "id: reason"
};

/// mu for every image and, where ground truth exists, the output Dice.
ConfidenceReport evaluate_confidence(const AnalysisManifest& manifest, const SweepOptions& options = {});

// ---- separableness ---------------------------------------------------------

struct GainReport {
  std::vector<GainRecord> records;
  std::optional<double> mean_d;  // m(d)
  std::vector<std::string> failures;
};

/// Separableness of every image with both an input and a ground truth.
GainReport separableness_sweep(const AnalysisManifest& manifest, const SweepOptions& options = {});

// ---- noise -----------------------------------------------------------------

struct NoiseRow {
  int layer_index = 0;
  double level = 0.0;
  double mean_difference = 0.0;
  std::size_t count = 0;
};

struct NoiseReport {
  std::vector<NoiseRow> rows;  // ascending layer, then level
  std::vector<std::string> failures;
};

/// One image of an in-memory noise bed: clean per-layer features plus masks.
struct NoiseImage {
  std::string id;
  LabelMask reference;  // SA reference (ground truth, or output if none)
  LabelMask output;     // initial mask
  std::vector<FeatureMap> layers;  // layer_id set on each
};

/// Uniform noise in [-level, +level] added to each feature value, seeded per
/// (global_seed, image, layer, level). Reports mean SA(noisy) - SA(clean).
NoiseReport noise_sweep(std::span<const NoiseImage> images, std::span<const double> levels, std::uint64_t global_seed,
                        const SweepOptions& options = {});

/// Manifest variant: the stored tensors are perturbed as-is. The input image,
/// when present, is treated as layer 0.
NoiseReport noise_sweep(const AnalysisManifest& manifest, std::span<const double> levels,
                        const SweepOptions& options = {});

/// Synthetic noise bed: `images` images whose layers have the given
/// separations (layer_index = position + 1).
std::vector<NoiseImage> make_noise_bed(std::uint64_t seed, std::size_t images, std::span<const double> separations,
                                       std::size_t height = 32, std::size_t width = 32, std::size_t channels = 4);

}  // namespace protoseg
