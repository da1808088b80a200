// Acceptance gate: one PASS/FAIL line per primary criterion. Exit status is
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "protoseg/analysis.hpp"
#include "protoseg/core.hpp"
#include "protoseg/diffkernel.hpp"
#include "protoseg/metrics.hpp"
#include "protoseg/parallel.hpp"
#include "protoseg/report_io.hpp"
#include "protoseg/synthetic.hpp"
#include "protoseg/tensor_io.hpp"
#include "support.hpp"

using namespace protoseg;
using namespace testing_support;

namespace {

// Tolerances and budgets.
constexpr double kOracleBudgetS = 5.0;
constexpr double kSoftmaxTol = 1e-6;
constexpr double kGradTol = 1e-6;
constexpr double kGradBudgetS = 30.0;
constexpr double kGradStep = 1e-5;
constexpr double kSepHighMin = 0.99;
constexpr double kSepChanceLo = 0.3;
constexpr double kSepChanceHi = 0.7;
constexpr double kSpearmanMin = 0.9;
constexpr double kBedBudgetS = 60.0;
constexpr double kSingleBudgetMs = 200.0;
constexpr double kSweepBudgetS = 2.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const char* name, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("[%s] %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* pattern, auto... args) {
  char buffer[512];
  std::snprintf(buffer, sizeof buffer, pattern, args...);
  return buffer;
}

Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  int matches = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    std::mt19937_64 rng(seed);
    const auto f = random_features(rng, 4, 4, 3);
    const auto m = random_mask(rng, 4, 4);
    matches += protoseg::protoseg(f, m).sam.mask == naive_sam(f, m);
  }
  const double s = seconds_since(t0);
  return {matches == 1000 && s < kOracleBudgetS, fmt("%d/1000 exact, %.3f s (budget %.0f s)", matches, s, kOracleBudgetS)};
}

Outcome mask_fixpoint() {
  int matches = 0;
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<std::size_t> side(2, 24);
  std::uniform_real_distribution<double> density(0.05, 0.95);
  for (int t = 0; t < 100; ++t) {
    const auto m = random_mask(rng, side(rng), side(rng), density(rng));
    matches += protoseg::protoseg(mask_as_feature(m), m).sam.mask == m;
  }
  return {matches == 100, fmt("%d/100 masks reproduced exactly", matches)};
}

Outcome softmax_normalization() {
  double worst = 0.0;
  bool finite = true;
  std::mt19937_64 rng(202);
  for (int t = 0; t < 100; ++t) {
    // separations from 1e0 up to 1e6
    const double sep = std::pow(10.0, t % 7);
    const auto m = random_mask(rng, 8, 8);
    auto f = random_features(rng, 8, 8, 3);
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t x = 0; x < 8; ++x)
        for (std::size_t c = 0; c < 3; ++c) f.at(y, x, c) += static_cast<float>(sep * m.at(y, x));
    const auto p = protoseg::protoseg(f, m).probabilities;
    for (std::size_t i = 0; i < p.pixels(); ++i) {
      double sum = 0.0;
      for (double v : p.pixel(i)) {
        finite &= std::isfinite(v);
        sum += v;
      }
      worst = std::max(worst, std::abs(sum - 1.0));
    }
  }
  return {finite && worst <= kSoftmaxTol, fmt("max |sum - 1| = %.3e (tol %.0e), all finite: %s", worst, kSoftmaxTol,
                                              finite ? "yes" : "no")};
}

Outcome affine_invariance() {
  int matches = 0, total = 0;
  std::normal_distribution<double> shift(0.0, 5.0);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(3000 + seed);
    const auto f = random_features(rng, 8, 8, 3);
    const auto m = random_mask(rng, 8, 8);
    const auto base = protoseg::protoseg(f, m).sam.mask;
    for (double a : {0.5, 2.0, 100.0}) {
      const double t[3] = {shift(rng), shift(rng), shift(rng)};
      FeatureMap g = f;
      for (std::size_t i = 0; i < g.pixels(); ++i) {
        for (std::size_t c = 0; c < 3; ++c) g.pixel(i)[c] = static_cast<float>(a * f.pixel(i)[c] + t[c]);
      }
      matches += protoseg::protoseg(g, m).sam.mask == base;
      ++total;
    }
  }
  return {matches == total, fmt("%d/%d transformed SAMs identical", matches, total)};
}

Outcome dice_oracle() {
  int matches = 0;
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> density(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    const auto s = any_mask(rng, 16, 16, t % 50 == 0 ? 0.0 : density(rng));
    const auto g = any_mask(rng, 16, 16, t % 70 == 0 ? 0.0 : density(rng));
    matches += sa_score(s, g).value == brute_dice(s, g);
  }
  return {matches == 1000, fmt("%d/1000 pairs exact", matches)};
}

Outcome gradient_check() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::uniform_int_distribution<std::size_t> side(1, 4);
  std::uniform_int_distribution<std::size_t> chans(1, 3);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(5000 + seed);
    std::size_t h = side(rng), w = side(rng);
    if (h * w < 2) w = 2;
    const std::size_t c = chans(rng);
    const auto f = random_features(rng, h, w, c);
    const auto init = random_mask(rng, h, w);
    const auto g = random_mask(rng, h, w);
    for (auto mode : {GradMode::kThroughPrototypes, GradMode::kDetachedPrototypes}) {
      worst = std::max(worst, finite_diff_check(f, init, g, mode, kGradStep));
    }
  }
  const double s = seconds_since(t0);
  return {worst < kGradTol && s < kGradBudgetS,
          fmt("max relative error %.3e (tol %.0e), %.2f s (budget %.0f s)", worst, kGradTol, s, kGradBudgetS)};
}

Outcome separation_sensitivity() {
  const double seps[] = {0.0, 0.5, 2.0, 6.0};
  double mean[4] = {};
  for (int k = 0; k < 4; ++k) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      SyntheticSpec spec;
      spec.seed = 7000 + seed;
      spec.separation = seps[k];
      spec.object_fraction = 0.5;
      const auto s = gen_synthetic(spec);
      mean[k] += sa_score(protoseg::protoseg(s.feature, s.output).sam.mask, s.truth).value / 100.0;
    }
  }
  const bool ok = mean[1] < mean[2] && mean[2] < mean[3] && mean[3] >= kSepHighMin && mean[0] >= kSepChanceLo &&
                  mean[0] <= kSepChanceHi;
  return {ok, fmt("mean SA at d=0/0.5/2/6: %.4f %.4f %.4f %.4f (need increasing, d=6 >= %.2f, d=0 in [%.1f, %.1f])",
                  mean[0], mean[1], mean[2], mean[3], kSepHighMin, kSepChanceLo, kSepChanceHi)};
}

std::vector<ConfidenceSample> bed;
double bed_seconds = 0.0;

const std::vector<ConfidenceSample>& confidence_bed() {
  if (bed.empty()) {
    const auto t0 = Clock::now();
    ConfidenceBedSpec spec;
    spec.seed = 2024;
    bed = make_confidence_bed(spec, resolve_jobs());
    bed_seconds = seconds_since(t0);
  }
  return bed;
}

Outcome mu_dice_correlation() {
  const auto& samples = confidence_bed();
  std::vector<double> mu, dice;
  for (const auto& s : samples) {
    mu.push_back(s.mu);
    dice.push_back(s.dice);
  }
  const double rho = spearman(mu, dice);
  return {rho > kSpearmanMin && bed_seconds < kBedBudgetS && samples.size() == 50,
          fmt("Spearman rho = %.4f over %zu images (need > %.1f), %.2f s (budget %.0f s)", rho, samples.size(),
              kSpearmanMin, bed_seconds, kBedBudgetS)};
}

Outcome coverage_trend() {
  std::vector<CoverageRecord> records;
  for (const auto& s : confidence_bed()) records.push_back({s.image_id, s.mu, s.dice});
  const std::vector<double> coverages{100, 90, 70, 50};
  const auto table = coverage_table(records, coverages);
  bool ok = true;
  std::string values;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    values += fmt("%s%.0f%%: %.4f", i ? ", " : "", table.rows[i].coverage, *table.rows[i].mean_dice);
    if (i > 0) ok &= *table.rows[i].mean_dice >= *table.rows[i - 1].mean_dice;
  }
  return {ok, "retained mean dice " + values + " (need non-decreasing as coverage drops)"};
}

Outcome noise_zero_level() {
  const std::vector<double> seps{0.5, 2.0, 6.0};
  const auto images = make_noise_bed(31, 10, seps);
  const std::vector<double> levels{0.0, 0.5, 2.0};
  const auto a = noise_sweep(images, levels, 77, {1});
  const auto b = noise_sweep(images, levels, 77, {resolve_jobs()});
  bool zero = true;
  int zero_rows = 0;
  for (const auto& row : a.rows) {
    if (row.level == 0.0) {
      zero &= row.mean_difference == 0.0 && row.count == images.size();
      ++zero_rows;
    }
  }
  const bool same = format_json(to_json(a)) == format_json(to_json(b)) && to_csv(a) == to_csv(b);
  return {zero && zero_rows == 3 && same, fmt("%d zero-level rows exactly 0: %s; repeated runs byte-identical: %s",
                                              zero_rows, zero ? "yes" : "no", same ? "yes" : "no")};
}

Outcome unit_split() {
  int matches = 0;
  std::mt19937_64 rng(808);
  std::uniform_int_distribution<std::size_t> len(2, 64);
  std::uniform_int_distribution<int> coarse(0, 10);
  std::uniform_real_distribution<double> fine(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> s(len(rng));
    for (auto& v : s) v = t % 3 == 0 ? coarse(rng) / 10.0 : fine(rng);
    std::sort(s.rbegin(), s.rend());
    matches += split_active_inertia(s) == exhaustive_split(s);
  }
  return {matches == 1000, fmt("%d/1000 lists match the exhaustive scan", matches)};
}

Outcome io_round_trip() {
  int ok = 0, total = 0;
  std::mt19937_64 rng(909);
  std::uniform_int_distribution<int> rank(0, 4);
  std::uniform_int_distribution<int> extent(0, 6);
  const auto dir = temp_dir("acceptance_io");
  for (int t = 0; t < 400; ++t) {
    std::vector<std::size_t> shape(static_cast<std::size_t>(rank(rng)));
    std::size_t n = 1;
    for (auto& d : shape) n *= (d = static_cast<std::size_t>(extent(rng)));
    TensorDump dump;
    if (t % 2) {
      std::vector<float> v(n);
      std::normal_distribution<float> normal(0.0f, 100.0f);
      for (auto& x : v) x = normal(rng);
      dump = TensorDump::from_floats(shape, v);
    } else {
      std::vector<std::uint8_t> v(n);
      for (auto& x : v) x = static_cast<std::uint8_t>(rng());
      dump = TensorDump::from_bytes(shape, v);
    }
    const auto path = dir / "t.npy";
    write_tensor(path, dump);
    ok += read_tensor(path) == dump;
    ++total;
  }
  // report determinism: the same report saved twice, in both formats
  LayerSweepReport report;
  for (int i = 0; i < 5; ++i) report.rows.push_back({"img" + std::to_string(i), i % 2, {i / 7.0, true}, 8, 8, 4, ""});
  report.layers = summarize_layers(report.rows);
  bool identical = true;
  for (auto f : {ReportFormat::kJson, ReportFormat::kCsv}) {
    save_report(report, dir / "a", f);
    save_report(report, dir / "b", f);
    identical &= slurp(dir / "a") == slurp(dir / "b") && !slurp(dir / "a").empty();
  }
  return {ok == total && identical,
          fmt("%d/%d dumps round-trip bit-exactly; reports byte-identical: %s", ok, total, identical ? "yes" : "no")};
}

Outcome performance() {
  // (a) one protoseg + SA on 256x256x64, single thread
  SyntheticSpec spec;
  spec.seed = 1;
  spec.height = spec.width = 256;
  spec.channels = 64;
  spec.separation = 1.0;
  const auto s = gen_synthetic(spec);
  double best_ms = 1e9;
  for (int rep = 0; rep < 3; ++rep) {
    const auto t0 = Clock::now();
    const auto r = protoseg::protoseg(s.feature, s.output);
    const auto score = sa_score(r.sam.mask, s.truth);
    best_ms = std::min(best_ms, seconds_since(t0) * 1000.0);
    if (!score.defined) return {false, "undefined score"};
  }

  // (b) 18-layer encoder/decoder sweep of one 256x256 image
  const auto dir = temp_dir("acceptance_perf");
  const std::size_t channels[18] = {64, 64, 128, 128, 256, 256, 512, 512, 1024, 1024, 512, 512, 256, 256, 128, 128, 64, 64};
  const std::size_t sizes[18] = {256, 256, 128, 128, 64, 64, 32, 32, 16, 16, 32, 32, 64, 64, 128, 128, 256, 256};
  AnalysisManifest m;
  ImageEntry image;
  image.id = "perf";
  image.ground_truth = dir / "g.npy";
  image.output = dir / "b.npy";
  write_tensor(*image.ground_truth, to_dump(s.truth));
  write_tensor(image.output, to_dump(s.output));
  for (int l = 0; l < 18; ++l) {
    const auto truth = resize_mask(s.truth, sizes[l], sizes[l]);
    const std::vector<double> sep(channels[l], 0.5 + 0.1 * l);
    const auto path = dir / ("l" + std::to_string(l + 1) + ".npy");
    write_tensor(path, to_dump(synthesize_features(truth, sep, 1.0, 40 + l)));
    image.layers.push_back({l + 1, channels[l], path});
  }
  m.images.push_back(image);
  save_manifest(m, dir / "manifest.json");
  const std::size_t jobs = resolve_jobs();
  const auto t0 = Clock::now();
  const auto sweep = layer_sweep(load_manifest(dir / "manifest.json"), {jobs});
  const double sweep_s = seconds_since(t0);
  bool clean = sweep.rows.size() == 18;
  for (const auto& row : sweep.rows) clean &= row.error.empty() && row.sa.defined;
  std::filesystem::remove_all(dir);
  return {best_ms < kSingleBudgetMs && sweep_s < kSweepBudgetS && clean,
          fmt("protoseg+SA 256x256x64: %.1f ms (budget %.0f ms); 18-layer sweep: %.3f s with %zu job(s) (budget %.0f s)",
              best_ms, kSingleBudgetMs, sweep_s, jobs, kSweepBudgetS)};
}

}  // namespace

int main() {
  report("oracle-equivalence", oracle_equivalence);
  report("mask-identity-fixpoint", mask_fixpoint);
  report("softmax-normalization", softmax_normalization);
  report("affine-argmax-invariance", affine_invariance);
  report("dice-oracle", dice_oracle);
  report("gradient-check", gradient_check);
  report("separation-sensitivity", separation_sensitivity);
  report("mu-dice-correlation", mu_dice_correlation);
  report("coverage-trend", coverage_trend);
  report("noise-zero-level", noise_zero_level);
  report("unit-split", unit_split);
  report("io-round-trip", io_round_trip);
  report("performance", performance);
  std::printf("%s: %d failing criteria\n", failures ? "FAILED" : "ALL PASSED", failures);
  return failures == 0 ? 0 : 1;
}
