#include "protoseg/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "protoseg/analysis.hpp"
#include "protoseg/core.hpp"
#include "protoseg/diffkernel.hpp"
#include "protoseg/error.hpp"
#include "protoseg/manifest.hpp"
#include "protoseg/metrics.hpp"
#include "protoseg/parallel.hpp"
#include "protoseg/render.hpp"
#include "protoseg/report_io.hpp"
#include "protoseg/synthetic.hpp"
#include "protoseg/tensor_io.hpp"

namespace protoseg {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* pattern, double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, pattern, v);
  return buffer;
}

struct ReportTarget {
  std::string out;
  std::string format = "json";

  void add_to(CLI::App* cmd) {
    cmd->add_option("--out", out, "Report path (stdout if omitted)");
    cmd->add_option("--format", format, "Report format")->check(CLI::IsMember({"json", "csv"}));
  }

  template <typename Report>
  void emit(const Report& report, std::ostream& stream) const {
    const auto text = format_report(report, parse_report_format(format));
    if (out.empty()) {
      stream << text;
    } else {
      write_text(out, text);
    }
  }
};

void print_failures(const std::vector<std::string>& failures, std::ostream& err) {
  for (const auto& f : failures) err << "warning: " << f << '\n';
}

std::vector<double> parse_list_default(const std::vector<double>& given, std::vector<double> fallback) {
  return given.empty() ? fallback : given;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Prototype segmentation analysis of dumped feature maps", "protoseg"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  std::size_t jobs_flag = 0;
  const auto add_jobs = [&](CLI::App* cmd) {
    cmd->add_option("--jobs", jobs_flag, "Worker threads (default: PROTOSEG_JOBS, then logical cores)")
        ->check(CLI::PositiveNumber);
  };
  const auto jobs = [&] { return resolve_jobs(jobs_flag > 0 ? std::optional<std::size_t>(jobs_flag) : std::nullopt); };
  std::string interpolation = "bilinear";
  const auto add_interp = [&](CLI::App* cmd, const char* name) {
    cmd->add_option(name, interpolation, "Upsampling of coarse features")
        ->check(CLI::IsMember({"nearest", "bilinear"}));
  };
  const auto sweep_options = [&] { return SweepOptions{jobs(), parse_interpolation(interpolation)}; };

  std::map<CLI::App*, std::function<int()>> runners;

  // sam
  {
    auto* cmd = app.add_subcommand("sam", "Segmentation ability map of one feature dump");
    auto feature = std::make_shared<std::string>();
    auto mask = std::make_shared<std::string>();
    auto truth = std::make_shared<std::string>();
    auto sam_out = std::make_shared<std::string>();
    auto probs = std::make_shared<std::string>();
    auto soft = std::make_shared<bool>(false);
    cmd->add_option("--feature", *feature, "Feature dump (H,W,C) float32")->required();
    cmd->add_option("--mask", *mask, "Initial mask dump")->required();
    cmd->add_option("--truth", *truth, "Reference mask; prints the SA score");
    cmd->add_option("--out", *sam_out, "SAM dump to write")->required();
    cmd->add_option("--probs", *probs, "Probability map dump to write");
    cmd->add_flag("--soft", *soft, "Use the mask values in [0,1] as weights");
    add_interp(cmd, "--upsample");
    runners[cmd] = [=, &out, &interpolation] {
      const auto f = to_feature_map(read_tensor(*feature));
      const auto mode = parse_interpolation(interpolation);
      const auto dump = read_tensor(*mask);
      const auto result = *soft ? protoseg_resampled(f, to_weight_mask(dump), mode)
                                : protoseg_resampled(f, to_label_mask(dump), mode);
      write_tensor(*sam_out, to_dump(result.sam.mask));
      if (!probs->empty()) write_tensor(*probs, to_dump(result.probabilities));
      if (!truth->empty()) {
        const auto score = sa_score(result.sam.mask, to_label_mask(read_tensor(*truth)));
        out << "SA score: " << fmt("%.6f", score.value) << '\n';
      }
      return kExitOk;
    };
  }

  // layer-sweep
  {
    auto* cmd = app.add_subcommand("layer-sweep", "SA score of every layer listed in a manifest");
    auto manifest = std::make_shared<std::string>();
    auto curve = std::make_shared<std::string>();
    auto target = std::make_shared<ReportTarget>();
    cmd->add_option("--manifest", *manifest, "Analysis manifest")->required();
    cmd->add_option("--curve", *curve, "SVG chart of the per-layer mean");
    target->add_to(cmd);
    add_jobs(cmd);
    add_interp(cmd, "--interpolation");
    runners[cmd] = [=, &out, &err] {
      const auto report = layer_sweep(load_manifest(*manifest), sweep_options());
      target->emit(report, out);
      for (const auto& row : report.rows) {
        if (!row.error.empty()) err << "warning: " << row.image_id << " layer " << row.layer_index << ": " << row.error << '\n';
      }
      if (!curve->empty()) {
        CurveSeries series{"mean SA", {}};
        for (const auto& l : report.layers) {
          if (l.count > 0) series.points.emplace_back(l.layer_index, l.mean);
        }
        render_curve(std::span(&series, 1), *curve, {"SA score per layer", "layer", "mean SA score"});
      }
      return kExitOk;
    };
  }

  // unit-sweep
  {
    auto* cmd = app.add_subcommand("unit-sweep", "Per-unit SA scores of one layer");
    auto feature = std::make_shared<std::string>();
    auto mask = std::make_shared<std::string>();
    auto truth = std::make_shared<std::string>();
    auto heatmap = std::make_shared<std::string>();
    auto target = std::make_shared<ReportTarget>();
    cmd->add_option("--feature", *feature, "Layer dump (H,W,C) float32")->required();
    cmd->add_option("--mask", *mask, "Initial mask dump")->required();
    cmd->add_option("--truth", *truth, "Reference mask (default: the initial mask)");
    cmd->add_option("--heatmap", *heatmap, "PGM of the average unit SAM");
    target->add_to(cmd);
    add_jobs(cmd);
    add_interp(cmd, "--interpolation");
    runners[cmd] = [=, &out] {
      const auto f = to_feature_map(read_tensor(*feature));
      const auto init = to_label_mask(read_tensor(*mask));
      const auto g = truth->empty() ? init : to_label_mask(read_tensor(*truth));
      const auto report = unit_sweep(f, init, g, sweep_options());
      target->emit(report, out);
      if (!heatmap->empty()) render_heatmap(unit_heatmap(report.unit_sams), *heatmap);
      return kExitOk;
    };
  }

  // score
  {
    auto* cmd = app.add_subcommand("score", "Dice of a SAM against a reference mask");
    auto sam = std::make_shared<std::string>();
    auto truth = std::make_shared<std::string>();
    auto cls = std::make_shared<std::size_t>(1);
    cmd->add_option("--sam", *sam, "SAM dump")->required();
    cmd->add_option("--truth", *truth, "Reference mask dump")->required();
    cmd->add_option("--class", *cls, "Positive class")->check(CLI::Range(0, 255));
    runners[cmd] = [=, &out] {
      const std::size_t classes = std::max<std::size_t>(2, *cls + 1);
      const auto s = to_label_mask(read_tensor(*sam), std::max<std::size_t>(classes, 256));
      const auto g = to_label_mask(read_tensor(*truth), std::max<std::size_t>(classes, 256));
      out << fmt("%.6f", sa_score(s, g, *cls).value) << '\n';
      return kExitOk;
    };
  }

  // rank
  {
    auto* cmd = app.add_subcommand("rank", "Images ordered by ascending mean unit SA score");
    auto manifest = std::make_shared<std::string>();
    auto target = std::make_shared<ReportTarget>();
    cmd->add_option("--manifest", *manifest, "Analysis manifest")->required();
    target->add_to(cmd);
    add_jobs(cmd);
    add_interp(cmd, "--interpolation");
    runners[cmd] = [=, &out, &err] {
      const auto confidence = evaluate_confidence(load_manifest(*manifest), sweep_options());
      print_failures(confidence.failures, err);
      if (confidence.records.empty()) throw Error(ErrorCode::kEmptyInput, "no image produced a mean SA score");
      std::vector<ImageMu> mus;
      for (const auto& r : confidence.records) mus.push_back({r.image_id, r.mu, r.unit_count});
      target->emit(rank_images(mus), out);
      return kExitOk;
    };
  }

  // coverage
  {
    auto* cmd = app.add_subcommand("coverage", "Retained-set Dice at several coverage rates");
    auto manifest = std::make_shared<std::string>();
    auto coverages = std::make_shared<std::vector<double>>();
    auto target = std::make_shared<ReportTarget>();
    cmd->add_option("--manifest", *manifest, "Analysis manifest")->required();
    cmd->add_option("--coverages", *coverages, "Coverage percentages (default 100,90,70,50)")->delimiter(',');
    target->add_to(cmd);
    add_jobs(cmd);
    add_interp(cmd, "--interpolation");
    runners[cmd] = [=, &out, &err] {
      const auto confidence = evaluate_confidence(load_manifest(*manifest), sweep_options());
      print_failures(confidence.failures, err);
      const auto levels = parse_list_default(*coverages, {100, 90, 70, 50});
      target->emit(coverage_table(confidence.records, levels), out);
      return kExitOk;
    };
  }

  // separableness
  {
    auto* cmd = app.add_subcommand("separableness", "Gain of the network output over the raw input");
    auto manifest = std::make_shared<std::string>();
    auto target = std::make_shared<ReportTarget>();
    cmd->add_option("--manifest", *manifest, "Analysis manifest")->required();
    target->add_to(cmd);
    add_jobs(cmd);
    runners[cmd] = [=, &out, &err] {
      const auto report = separableness_sweep(load_manifest(*manifest), sweep_options());
      print_failures(report.failures, err);
      target->emit(report, out);
      if (report.mean_d) err << "m(d) = " << fmt("%.6f", *report.mean_d) << '\n';
      return kExitOk;
    };
  }

  // noise
  {
    auto* cmd = app.add_subcommand("noise", "SA difference under uniform feature noise");
    auto manifest = std::make_shared<std::string>();
    auto levels = std::make_shared<std::vector<double>>();
    auto separations = std::make_shared<std::vector<double>>();
    auto seed = std::make_shared<std::optional<std::uint64_t>>();
    auto images = std::make_shared<std::size_t>(8);
    auto target = std::make_shared<ReportTarget>();
    cmd->add_option("--manifest", *manifest, "Analysis manifest (synthetic bed if omitted)");
    cmd->add_option("--levels", *levels, "Noise levels (default 0,0.5,1,2)")->delimiter(',');
    cmd->add_option("--separations", *separations, "Synthetic layer separations (default 0.5,2,6)")->delimiter(',');
    cmd->add_option("--images", *images, "Synthetic images")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", *seed, "Global seed (overrides the manifest's)");
    target->add_to(cmd);
    add_jobs(cmd);
    add_interp(cmd, "--interpolation");
    runners[cmd] = [=, &out, &err] {
      const auto lv = parse_list_default(*levels, {0, 0.5, 1, 2});
      NoiseReport report;
      if (!manifest->empty()) {
        auto m = load_manifest(*manifest);
        if (*seed) m.global_seed = **seed;
        report = noise_sweep(m, lv, sweep_options());
      } else {
        const auto seps = parse_list_default(*separations, {0.5, 2, 6});
        const auto bed = make_noise_bed(seed->value_or(0), *images, seps);
        report = noise_sweep(bed, lv, seed->value_or(0), sweep_options());
      }
      print_failures(report.failures, err);
      target->emit(report, out);
      return kExitOk;
    };
  }

  // gradcheck
  {
    auto* cmd = app.add_subcommand("gradcheck", "Analytic vs finite-difference gradient of the ProtoSeg loss");
    auto seed = std::make_shared<std::uint64_t>(0);
    auto mode = std::make_shared<std::string>("through");
    auto h = std::make_shared<std::size_t>(4);
    auto w = std::make_shared<std::size_t>(4);
    auto c = std::make_shared<std::size_t>(3);
    auto step = std::make_shared<double>(1e-5);
    auto grad_out = std::make_shared<std::string>();
    cmd->add_option("--seed", *seed, "Seed of the random problem");
    cmd->add_option("--mode", *mode, "Gradient path")
        ->check(CLI::IsMember({"through", "detached", "through_prototypes", "detached_prototypes"}));
    cmd->add_option("--height", *h)->check(CLI::PositiveNumber);
    cmd->add_option("--width", *w)->check(CLI::PositiveNumber);
    cmd->add_option("--channels", *c)->check(CLI::PositiveNumber);
    cmd->add_option("--step", *step, "Central-difference step")->check(CLI::PositiveNumber);
    cmd->add_option("--out", *grad_out, "Gradient dump to write");
    runners[cmd] = [=, &out] {
      const auto problem = random_gradcheck_case(*seed, *h, *w, *c);
      const auto grad_mode = parse_grad_mode(*mode);
      const double error = finite_diff_check(problem.feature, problem.init_mask, problem.target, grad_mode, *step);
      if (!grad_out->empty()) {
        write_tensor(*grad_out, to_dump(protoseg_backward(problem.feature, problem.init_mask, problem.target, grad_mode)));
      }
      out << "max relative error: " << fmt("%.3e", error) << '\n';
      return error < 1e-6 ? kExitOk : kExitData;
    };
  }

  // synth
  {
    auto* cmd = app.add_subcommand("synth", "Synthetic dumps plus a manifest");
    auto dir = std::make_shared<std::string>();
    auto images = std::make_shared<std::size_t>(4);
    auto separations = std::make_shared<std::vector<double>>();
    auto seed = std::make_shared<std::uint64_t>(0);
    auto h = std::make_shared<std::size_t>(64);
    auto w = std::make_shared<std::size_t>(64);
    auto c = std::make_shared<std::size_t>(8);
    auto fraction = std::make_shared<double>(0.3);
    auto input_sep = std::make_shared<double>(1.0);
    cmd->add_option("--out-dir", *dir, "Directory for dumps and manifest.json")->required();
    cmd->add_option("--images", *images)->check(CLI::PositiveNumber);
    cmd->add_option("--separations", *separations, "One layer per separation (default 0.5,2,6)")->delimiter(',');
    cmd->add_option("--seed", *seed);
    cmd->add_option("--height", *h)->check(CLI::PositiveNumber);
    cmd->add_option("--width", *w)->check(CLI::PositiveNumber);
    cmd->add_option("--channels", *c)->check(CLI::PositiveNumber);
    cmd->add_option("--object-fraction", *fraction)->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--input-separation", *input_sep, "Separation of the single-channel input image");
    runners[cmd] = [=, &out] {
      const fs::path root = *dir;
      std::error_code ec;
      fs::create_directories(root, ec);
      if (ec) throw Error(ErrorCode::kIoFailure, "cannot create " + root.string() + ": " + ec.message());
      const auto seps = parse_list_default(*separations, {0.5, 2, 6});
      AnalysisManifest manifest;
      manifest.global_seed = *seed;
      for (std::size_t i = 0; i < *images; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "img_%03zu", i);
        const std::uint64_t image_seed = mix_seed(*seed, hash_string(id));
        SyntheticSpec spec;
        spec.seed = image_seed;
        spec.height = *h;
        spec.width = *w;
        spec.channels = 1;
        spec.separation = *input_sep;
        spec.object_fraction = *fraction;
        const auto sample = gen_synthetic(spec);
        ImageEntry image;
        image.id = id;
        image.input = root / (image.id + "_input.npy");
        image.ground_truth = root / (image.id + "_truth.npy");
        image.output = root / (image.id + "_output.npy");
        write_tensor(*image.input, to_dump(sample.feature));
        write_tensor(*image.ground_truth, to_dump(sample.truth));
        write_tensor(image.output, to_dump(sample.output));
        for (std::size_t l = 0; l < seps.size(); ++l) {
          const std::vector<double> channel_sep(*c, seps[l]);
          const auto f = synthesize_features(sample.truth, channel_sep, 1.0, mix_seed(image_seed, 100 + l));
          char name[64];
          std::snprintf(name, sizeof name, "%s_l%02zu.npy", id, l + 1);
          LayerEntry layer{static_cast<int>(l + 1), *c, root / name};
          write_tensor(layer.feature, to_dump(f));
          image.layers.push_back(std::move(layer));
        }
        manifest.images.push_back(std::move(image));
      }
      save_manifest(manifest, root / "manifest.json");
      out << (root / "manifest.json").string() << '\n';
      return kExitOk;
    };
  }

  // render
  {
    auto* cmd = app.add_subcommand("render", "PGM of a 2-D dump, or SVG of a layer/noise report");
    auto input = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto lo = std::make_shared<double>(0.0);
    auto hi = std::make_shared<double>(1.0);
    cmd->add_option("--in", *input, "Tensor dump (.npy) or JSON report")->required();
    cmd->add_option("--out", *output, "PGM or SVG path")->required();
    cmd->add_option("--min", *lo, "Value mapped to 0");
    cmd->add_option("--max", *hi, "Value mapped to 255");
    runners[cmd] = [=] {
      if (fs::path(*input).extension() == ".npy") {
        const auto dump = read_tensor(*input);
        std::vector<std::size_t> dims;
        for (auto d : dump.shape) {
          if (d != 1) dims.push_back(d);
        }
        if (dump.shape.size() < 2 || dims.size() > 2) {
          throw Error(ErrorCode::kDimMismatch, "render needs a 2-D tensor (H,W) or (H,W,1)");
        }
        RealMap map{dump.shape[0], dump.shape[1], {}};
        if (dump.dtype == Dtype::kFloat32) {
          const auto v = dump.floats();
          map.values.assign(v.begin(), v.end());
        } else {
          const auto v = dump.bytes();
          map.values.assign(v.begin(), v.end());
        }
        render_heatmap(map, *output, *lo, *hi);
        return kExitOk;
      }
      std::ifstream in(*input);
      if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + *input);
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kSchemaViolation, std::string("report is not valid JSON: ") + e.what());
      }
      const auto kind = doc.value("kind", std::string());
      std::vector<CurveSeries> series;
      CurveLabels labels;
      if (kind == "layer_sweep") {
        series.push_back({"mean SA", {}});
        for (const auto& l : doc.at("layers")) {
          if (l.at("count").get<std::size_t>() > 0) {
            series.back().points.emplace_back(l.at("layer_index").get<double>(), l.at("mean").get<double>());
          }
        }
        labels = {"SA score per layer", "layer", "mean SA score"};
      } else if (kind == "noise") {
        std::map<int, CurveSeries> by_layer;
        for (const auto& r : doc.at("rows")) {
          const int layer = r.at("layer_index").get<int>();
          auto& s = by_layer[layer];
          s.name = "layer " + std::to_string(layer);
          s.points.emplace_back(r.at("level").get<double>(), r.at("mean_difference").get<double>());
        }
        for (auto& [layer, s] : by_layer) series.push_back(std::move(s));
        labels = {"SA difference under noise", "noise level", "mean SA difference"};
      } else {
        throw Error(ErrorCode::kSchemaViolation, "render supports layer_sweep and noise reports, got '" + kind + "'");
      }
      render_curve(series, *output, labels);
      return kExitOk;
    };
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  for (auto& [cmd, run] : runners) {
    if (!cmd->parsed()) continue;
    try {
      return run();
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
      return kExitData;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kExitData;
    }
  }
  err << app.help();
  return kExitUsage;
}

int cli_dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + (argc > 0 ? 1 : 0), argv + argc);
  return cli_dispatch(args, std::cout, std::cerr);
}

}  // namespace protoseg
