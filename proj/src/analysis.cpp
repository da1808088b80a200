#include "protoseg/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <map>
#include <numeric>
#include <random>

#include "protoseg/error.hpp"
#include "protoseg/parallel.hpp"
#include "protoseg/synthetic.hpp"
#include "protoseg/tensor_io.hpp"

namespace protoseg {

namespace {

struct Moments {
  double mean = 0.0;
  double std = 0.0;
};

Moments population_moments(std::span<const double> values) {
  if (values.empty()) return {};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / n)};
}

std::string describe(const std::exception& e) { return e.what(); }

// Masks of one manifest image, loaded once per sweep.
struct ImageMasks {
  std::optional<LabelMask> output;
  std::optional<LabelMask> truth;
  std::string error;
};

std::vector<ImageMasks> load_masks(const AnalysisManifest& manifest, std::size_t jobs) {
  std::vector<ImageMasks> masks(manifest.images.size());
  parallel_for(masks.size(), jobs, [&](std::size_t i) {
    const auto& image = manifest.images[i];
    try {
      masks[i].output = to_label_mask(read_tensor(image.output));
      if (image.ground_truth) {
        masks[i].truth = to_label_mask(read_tensor(*image.ground_truth));
        if (masks[i].truth->dims() != masks[i].output->dims()) {
          throw Error(ErrorCode::kDimMismatch, "output and ground-truth dims differ");
        }
      }
    } catch (const std::exception& e) {
      masks[i].output.reset();
      masks[i].truth.reset();
      masks[i].error = describe(e);
    }
  });
  return masks;
}

FeatureMap load_layer(const LayerEntry& layer) {
  auto f = to_feature_map(read_tensor(layer.feature));
  if (f.channels() != layer.channels) {
    throw Error(ErrorCode::kDimMismatch, "layer " + std::to_string(layer.layer_index) + " dump has " +
                                             std::to_string(f.channels()) + " channels, manifest says " +
                                             std::to_string(layer.channels));
  }
  f.layer_id = layer.layer_index;
  return f;
}

SaScore unit_score(const FeatureMap& unit, const LabelMask& init_mask, const LabelMask& reference,
                   Interpolation mode, SegmentationAbilityMap* sam_out = nullptr) {
  try {
    auto result = protoseg_resampled(unit, init_mask, mode);
    const auto score = sa_score(result.sam.mask, reference);
    if (sam_out != nullptr) *sam_out = std::move(result.sam);
    return score;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kEmptyClass) throw;
    return SaScore::undefined();
  }
}

// SA(noisy) - SA(clean) at every level for one (image, layer); nullopt when undefined.
std::vector<std::optional<double>> noise_item(const FeatureMap& clean, const LabelMask& init_mask,
                                              const LabelMask& reference, std::span<const double> levels,
                                              std::uint64_t item_seed, Interpolation mode) {
  std::vector<std::optional<double>> out(levels.size());
  const auto sa_clean = unit_score(clean, init_mask, reference, mode);
  if (!sa_clean.defined) return out;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const double level = levels[l];
    if (level == 0.0) {
      out[l] = sa_difference(sa_clean, sa_clean);
      continue;
    }
    std::uint64_t level_bits = 0;
    std::memcpy(&level_bits, &level, sizeof level);
    std::mt19937_64 rng(mix_seed(item_seed, level_bits));
    std::uniform_real_distribution<double> noise(-level, level);
    const auto src = clean.values();
    std::vector<float> values(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) values[i] = static_cast<float>(src[i] + noise(rng));
    FeatureMap noisy(clean.height(), clean.width(), clean.channels(), std::move(values));
    const auto sa_noisy = unit_score(noisy, init_mask, reference, mode);
    if (sa_noisy.defined) out[l] = sa_difference(sa_noisy, sa_clean);
  }
  return out;
}

struct NoiseItem {
  std::string image_id;
  int layer_index = 0;
  std::function<std::vector<std::optional<double>>(std::uint64_t item_seed)> run;
};

NoiseReport run_noise_items(const std::vector<NoiseItem>& items, std::span<const double> levels,
                            std::uint64_t global_seed, std::size_t jobs) {
  for (double level : levels) {
    if (!std::isfinite(level) || level < 0.0) throw Error(ErrorCode::kPreconditionViolation, "noise levels must be >= 0");
  }
  std::vector<std::vector<std::optional<double>>> results(items.size());
  std::vector<std::string> errors(items.size());
  parallel_for(items.size(), jobs, [&](std::size_t i) {
    const auto& item = items[i];
    const std::uint64_t seed =
        mix_seed(mix_seed(global_seed, hash_string(item.image_id)), static_cast<std::uint64_t>(item.layer_index));
    try {
      results[i] = item.run(seed);
    } catch (const std::exception& e) {
      errors[i] = describe(e);
      results[i].assign(levels.size(), std::nullopt);
    }
  });

  NoiseReport report;
  std::map<int, std::vector<std::vector<double>>> by_layer;
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto& per_level = by_layer[items[i].layer_index];
    per_level.resize(levels.size());
    if (!errors[i].empty()) {
      report.failures.push_back(items[i].image_id + " layer " + std::to_string(items[i].layer_index) + ": " + errors[i]);
      continue;
    }
    for (std::size_t l = 0; l < levels.size(); ++l) {
      if (results[i][l]) {
        per_level[l].push_back(*results[i][l]);
      } else if (l == 0 || results[i][0]) {
        report.failures.push_back(items[i].image_id + " layer " + std::to_string(items[i].layer_index) +
                                  ": undefined SA at level " + std::to_string(levels[l]));
      }
    }
  }
  for (const auto& [layer, per_level] : by_layer) {
    for (std::size_t l = 0; l < levels.size(); ++l) {
      const auto m = population_moments(per_level[l]);
      report.rows.push_back({layer, levels[l], m.mean, per_level[l].size()});
    }
  }
  return report;
}

}  // namespace

std::vector<LayerSummary> summarize_layers(std::span<const LayerSweepRow> rows) {
  std::map<int, std::vector<double>> by_layer;
  for (const auto& row : rows) {
    auto& scores = by_layer[row.layer_index];
    if (row.error.empty() && row.sa.defined) scores.push_back(row.sa.value);
  }
  std::vector<LayerSummary> out;
  for (const auto& [layer, scores] : by_layer) {
    const auto m = population_moments(scores);
    out.push_back({layer, m.mean, m.std, scores.size()});
  }
  return out;
}

LayerSweepReport layer_sweep(const AnalysisManifest& manifest, const SweepOptions& options) {
  const auto masks = load_masks(manifest, options.jobs);
  struct Item {
    std::size_t image;
    std::size_t layer;
  };
  std::vector<Item> items;
  for (std::size_t i = 0; i < manifest.images.size(); ++i) {
    for (std::size_t j = 0; j < manifest.images[i].layers.size(); ++j) items.push_back({i, j});
  }

  LayerSweepReport report;
  report.rows.resize(items.size());
  parallel_for(items.size(), options.jobs, [&](std::size_t n) {
    const auto& image = manifest.images[items[n].image];
    const auto& layer = image.layers[items[n].layer];
    const auto& m = masks[items[n].image];
    auto& row = report.rows[n];
    row.image_id = image.id;
    row.layer_index = layer.layer_index;
    row.channels = layer.channels;
    row.sa = SaScore::undefined();
    try {
      if (!m.error.empty()) throw Error(ErrorCode::kIoFailure, m.error);
      if (!m.truth) throw Error(ErrorCode::kPreconditionViolation, "image has no ground_truth");
      const auto f = load_layer(layer);
      row.height = f.height();
      row.width = f.width();
      const auto result = protoseg_resampled(f, *m.output, options.interpolation);
      row.sa = sa_score(result.sam.mask, *m.truth);
    } catch (const std::exception& e) {
      row.error = describe(e);
    }
  });
  report.layers = summarize_layers(report.rows);
  return report;
}

UnitSweepReport unit_sweep(const FeatureMap& layer_features, const LabelMask& init_mask, const LabelMask& g,
                           const SweepOptions& options) {
  if (init_mask.dims() != g.dims()) throw Error(ErrorCode::kDimMismatch, "initial mask and reference dims differ");
  const std::size_t units = layer_features.channels();
  std::vector<UnitScore> scores(units);
  std::vector<SegmentationAbilityMap> sams(units);
  parallel_for(units, options.jobs, [&](std::size_t c) {
    scores[c] = {static_cast<int>(c),
                 unit_score(extract_unit(layer_features, c), init_mask, g, options.interpolation, &sams[c])};
  });

  UnitSweepReport report;
  for (std::size_t c = 0; c < units; ++c) {
    if (scores[c].sa.defined) report.unit_sams.push_back(std::move(sams[c]));
  }
  report.units = std::move(scores);
  std::stable_sort(report.units.begin(), report.units.end(), [](const UnitScore& a, const UnitScore& b) {
    if (a.sa.defined != b.sa.defined) return a.sa.defined;
    return a.sa.defined && a.sa.value > b.sa.value;
  });
  std::vector<double> defined;
  for (const auto& u : report.units) {
    if (u.sa.defined) defined.push_back(u.sa.value);
  }
  if (defined.size() >= 2) report.boundary = split_active_inertia(defined);
  return report;
}

std::size_t split_active_inertia(std::span<const double> sorted_scores) {
  if (sorted_scores.size() < 2) throw Error(ErrorCode::kTooFewUnits, "need at least two scores to split");
  std::size_t boundary = 1;
  double widest = -1.0;
  for (std::size_t i = 1; i < sorted_scores.size(); ++i) {
    const double gap = sorted_scores[i - 1] - sorted_scores[i];
    if (gap < 0.0) throw Error(ErrorCode::kPreconditionViolation, "scores must be sorted descending");
    if (gap > widest) {
      widest = gap;
      boundary = i;
    }
  }
  return boundary;
}

RealMap unit_heatmap(std::span<const SegmentationAbilityMap> unit_sams, std::size_t positive_class) {
  if (unit_sams.empty()) throw Error(ErrorCode::kEmptyInput, "heatmap of an empty SAM list");
  const auto dims = unit_sams.front().mask.dims();
  std::vector<std::size_t> hits(dims.pixels(), 0);
  for (const auto& sam : unit_sams) {
    if (sam.mask.dims() != dims) throw Error(ErrorCode::kDimMismatch, "unit SAMs differ in dims");
    const auto labels = sam.mask.labels();
    for (std::size_t i = 0; i < labels.size(); ++i) hits[i] += labels[i] == positive_class;
  }
  RealMap map{dims.height, dims.width, std::vector<double>(dims.pixels())};
  const double n = static_cast<double>(unit_sams.size());
  for (std::size_t i = 0; i < hits.size(); ++i) map.values[i] = static_cast<double>(hits[i]) / n;
  return map;
}

RankingReport rank_images(std::span<const ImageMu> mu_per_image) {
  RankingReport report{{mu_per_image.begin(), mu_per_image.end()}};
  std::sort(report.entries.begin(), report.entries.end(), [](const ImageMu& a, const ImageMu& b) {
    if (a.mu != b.mu) return a.mu < b.mu;
    return a.image_id < b.image_id;
  });
  return report;
}

CoverageTable coverage_table(std::span<const CoverageRecord> records, std::span<const double> coverages) {
  if (records.empty()) throw Error(ErrorCode::kEmptyInput, "coverage table of an empty record list");
  const bool evaluation = records.front().dice.has_value();
  for (const auto& r : records) {
    if (r.dice.has_value() != evaluation) {
      throw Error(ErrorCode::kPreconditionViolation, "dice must be present for all records or for none");
    }
  }
  std::vector<CoverageRecord> ordered(records.begin(), records.end());
  std::sort(ordered.begin(), ordered.end(), [](const CoverageRecord& a, const CoverageRecord& b) {
    if (a.mu != b.mu) return a.mu > b.mu;
    return a.image_id < b.image_id;
  });

  CoverageTable table;
  table.total = ordered.size();
  for (double coverage : coverages) {
    if (!(coverage > 0.0 && coverage <= 100.0)) {
      throw Error(ErrorCode::kPreconditionViolation, "coverage must lie in (0, 100]");
    }
    // ceil with a tolerance so 70% of 10 retains exactly 7
    const double exact = coverage * static_cast<double>(table.total) / 100.0;
    auto keep = static_cast<std::size_t>(std::ceil(exact - 1e-9));
    keep = std::clamp<std::size_t>(keep, 1, table.total);

    CoverageRow row;
    row.coverage = coverage;
    row.retained = keep;
    std::vector<double> dice;
    for (std::size_t i = 0; i < ordered.size(); ++i) {
      if (i < keep) {
        row.retained_ids.push_back(ordered[i].image_id);
        if (evaluation) dice.push_back(*ordered[i].dice);
      } else {
        row.rejected_ids.push_back(ordered[i].image_id);
      }
    }
    if (evaluation) {
      const auto m = population_moments(dice);
      row.mean_dice = m.mean;
      row.std_dice = m.std;
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

ImageMu image_confidence(const ImageEntry& image, const SweepOptions& options) {
  const auto output = to_label_mask(read_tensor(image.output));
  const std::size_t first = image.layers.size() >= 2 ? image.layers.size() - 2 : 0;
  std::vector<SaScore> scores;
  for (std::size_t j = first; j < image.layers.size(); ++j) {
    const auto f = load_layer(image.layers[j]);
    for (std::size_t c = 0; c < f.channels(); ++c) {
      scores.push_back(unit_score(extract_unit(f, c), output, output, options.interpolation));
    }
  }
  const auto mean = mean_sa_score(scores);
  return {image.id, mean.mu, mean.unit_count};
}

ConfidenceReport evaluate_confidence(const AnalysisManifest& manifest, const SweepOptions& options) {
  const std::size_t n = manifest.images.size();
  std::vector<std::optional<CoverageRecord>> records(n);
  std::vector<std::string> errors(n);
  SweepOptions serial = options;
  serial.jobs = 1;
  parallel_for(n, options.jobs, [&](std::size_t i) {
    const auto& image = manifest.images[i];
    try {
      const auto mu = image_confidence(image, serial);
      CoverageRecord record{image.id, mu.mu, std::nullopt, mu.unit_count};
      if (image.ground_truth) {
        const auto output = to_label_mask(read_tensor(image.output));
        const auto truth = to_label_mask(read_tensor(*image.ground_truth));
        record.dice = sa_score(output, truth).value;
      }
      records[i] = std::move(record);
    } catch (const std::exception& e) {
      errors[i] = describe(e);
    }
  });
  ConfidenceReport report;
  for (std::size_t i = 0; i < n; ++i) {
    if (records[i]) {
      report.records.push_back(std::move(*records[i]));
    } else {
      report.failures.push_back(manifest.images[i].id + ": " + errors[i]);
    }
  }
  return report;
}

GainReport separableness_sweep(const AnalysisManifest& manifest, const SweepOptions& options) {
  const std::size_t n = manifest.images.size();
  std::vector<std::optional<GainRecord>> records(n);
  std::vector<std::string> errors(n);
  parallel_for(n, options.jobs, [&](std::size_t i) {
    const auto& image = manifest.images[i];
    try {
      if (!image.input) throw Error(ErrorCode::kPreconditionViolation, "image has no input tensor");
      if (!image.ground_truth) throw Error(ErrorCode::kPreconditionViolation, "image has no ground_truth");
      const auto x = to_feature_map(read_tensor(*image.input));
      const auto output = to_label_mask(read_tensor(image.output));
      const auto truth = to_label_mask(read_tensor(*image.ground_truth));
      records[i] = separableness(x, output, truth, image.id);
    } catch (const std::exception& e) {
      errors[i] = describe(e);
    }
  });
  GainReport report;
  for (std::size_t i = 0; i < n; ++i) {
    if (records[i]) {
      report.records.push_back(std::move(*records[i]));
    } else {
      report.failures.push_back(manifest.images[i].id + ": " + errors[i]);
    }
  }
  if (!report.records.empty()) report.mean_d = mean_gain(report.records);
  return report;
}

NoiseReport noise_sweep(std::span<const NoiseImage> images, std::span<const double> levels, std::uint64_t global_seed,
                        const SweepOptions& options) {
  std::vector<NoiseItem> items;
  for (const auto& image : images) {
    for (const auto& layer : image.layers) {
      const int index = layer.layer_id.value_or(0);
      items.push_back({image.id, index, [&image, &layer, levels, mode = options.interpolation](std::uint64_t seed) {
                         return noise_item(layer, image.output, image.reference, levels, seed, mode);
                       }});
    }
  }
  return run_noise_items(items, levels, global_seed, options.jobs);
}

NoiseReport noise_sweep(const AnalysisManifest& manifest, std::span<const double> levels,
                        const SweepOptions& options) {
  const auto masks = load_masks(manifest, options.jobs);
  std::vector<NoiseItem> items;
  for (std::size_t i = 0; i < manifest.images.size(); ++i) {
    const auto& image = manifest.images[i];
    const auto& m = masks[i];
    auto make = [&m, levels, mode = options.interpolation](std::function<FeatureMap()> load) {
      return [&m, levels, mode, load = std::move(load)](std::uint64_t seed) {
        if (!m.error.empty()) throw Error(ErrorCode::kIoFailure, m.error);
        const auto& reference = m.truth ? *m.truth : *m.output;
        return noise_item(load(), *m.output, reference, levels, seed, mode);
      };
    };
    if (image.input) {
      items.push_back({image.id, 0, make([&image] { return to_feature_map(read_tensor(*image.input)); })});
    }
    for (const auto& layer : image.layers) {
      items.push_back({image.id, layer.layer_index, make([&layer] { return load_layer(layer); })});
    }
  }
  return run_noise_items(items, levels, manifest.global_seed, options.jobs);
}

std::vector<NoiseImage> make_noise_bed(std::uint64_t seed, std::size_t images, std::span<const double> separations,
                                       std::size_t height, std::size_t width, std::size_t channels) {
  std::vector<NoiseImage> bed;
  for (std::size_t i = 0; i < images; ++i) {
    const std::uint64_t image_seed = mix_seed(seed, i);
    NoiseImage image;
    image.id = "noise_" + std::to_string(i);
    image.reference = synthesize_blob(height, width, 0.3, mix_seed(image_seed, 1));
    image.output = simulate_output(image.reference, 0.1, mix_seed(image_seed, 3));
    for (std::size_t l = 0; l < separations.size(); ++l) {
      const std::vector<double> sep(channels, separations[l]);
      auto f = synthesize_features(image.reference, sep, 1.0, mix_seed(image_seed, 100 + l));
      f.layer_id = static_cast<int>(l + 1);
      image.layers.push_back(std::move(f));
    }
    bed.push_back(std::move(image));
  }
  return bed;
}

}  // namespace protoseg
