// Copyright 2026 The LKD Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lkd_tools/cli.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lkd/analysis.hpp"
#include "lkd/error.hpp"
#include "lkd/gradcheck.hpp"
#include "lkd/haze.hpp"
#include "lkd/metrics.hpp"
#include "lkd/model.hpp"
#include "lkd/parallel.hpp"
#include "lkd/train.hpp"
#include "lkd_tools/run_config.hpp"

namespace lkd::tools {
namespace {

namespace fs = std::filesystem;

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

struct Options {
  int threads = 0;
  std::optional<std::uint64_t> seed;

  std::string config;
  std::string out;
  std::string data;
  std::string eval_data;
  std::string ckpt;

  std::string variant;
  std::string ablation;
  Index hw = 256;
  std::vector<Index> eq3;
  std::vector<Index> compare;
  Index K = 21;
  Index d = 3;
  Index C = 24;
  bool mask = false;

  std::string tap;
  std::string op;
  bool list = false;
};

// Subcommand bodies. Each returns an exit code; errors are thrown.
using Body = std::function<int(const Options&, std::ostream&)>;

RunConfig resolve_config(const Options& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (auto s = seed_override(o.seed)) cfg.apply_seed(*s);
  return cfg;
}

int cmd_synth(const Options& o, std::ostream& out) {
  const RunConfig cfg = resolve_config(o);
  const auto pairs = make_dataset(cfg.data);
  save_dataset(o.out, pairs);
  out << "wrote " << pairs.size() << " pairs to " << o.out << "\n";
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out) {
  const RunConfig cfg = resolve_config(o);
  const auto train_pairs = load_dataset(o.data);
  const auto eval_pairs = o.eval_data.empty() ? std::vector<HazePair>{} : load_dataset(o.eval_data);
  auto model = Model<float>::build(cfg.model, cfg.model_seed());
  const TrainResult r = train(model, train_pairs, eval_pairs, cfg.train, o.out);
  if (r.records.empty()) {
    out << "0 steps; saved the initial weights\n";
    return kExitOk;
  }
  const TrainRecord& last = r.records.back();
  out << "step " << last.step << " loss " << fmt("%.6g", last.loss) << " psnr " << fmt("%.4f", last.psnr)
      << " ssim " << fmt("%.4f", last.ssim) << "\n";
  out << "wrote " << (fs::path(o.out) / "metrics.csv").string() << " and "
      << (fs::path(o.out) / "model.ckpt").string() << "\n";
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const auto model = Model<float>::load(o.ckpt);
  const auto pairs = load_dataset(o.data);
  const EvalResult r = evaluate(model, pairs);
  out << "image,psnr,ssim,hazy_psnr\n";
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    out << i << ',' << fmt("%.6f", r.psnr[i]) << ',' << fmt("%.6f", r.ssim[i]) << ','
        << fmt("%.6f", r.hazy_psnr[i]) << "\n";
  }
  out << "mean," << fmt("%.6f", r.mean_psnr) << ',' << fmt("%.6f", r.mean_ssim) << ','
      << fmt("%.6f", r.mean_hazy_psnr) << "\n";
  return kExitOk;
}

int cmd_count(const Options& o, std::ostream& out) {
  if (!o.eq3.empty()) {
    out << formula_report(o.eq3[0], o.eq3[1], o.eq3[2], o.hw, o.hw).text();
    return kExitOk;
  }
  if (!o.compare.empty()) {
    out << comparison_csv(compare_direct_vs_decomposed(o.compare, o.d, o.C));
    return kExitOk;
  }
  if (o.hw <= 0 || o.hw % 4 != 0) throw ValidationError("--hw must be a positive multiple of 4");
  LkdConfig cfg;
  if (!o.ablation.empty()) {
    cfg = ablation_config(o.ablation);
  } else if (!o.variant.empty()) {
    cfg = variant_config(o.variant);
  } else if (!o.config.empty()) {
    cfg = resolve_config(o).model;
  } else {
    throw ValidationError("count needs one of --variant, --ablation, --config, --eq3 or --compare");
  }
  const auto model = Model<float>::build(cfg, 0);
  out << count_costs(model, o.hw, o.hw).csv();
  return kExitOk;
}

int cmd_footprint(const Options& o, std::ostream& out) {
  const Footprint f = footprint(Decomposition{o.K, o.d});
  out << f.summary() << "\n";
  if (o.mask) {
    for (Index y = 0; y < f.extent; ++y) {
      for (Index x = 0; x < f.extent; ++x) out << (f.mask[static_cast<std::size_t>(y * f.extent + x)] ? '#' : '.');
      out << "\n";
    }
  }
  return kExitOk;
}

int cmd_erf(const Options& o, std::ostream& out) {
  RunConfig cfg = resolve_config(o);
  if (!o.tap.empty()) cfg.erf.tap = parse_tap(o.tap);
  const auto model = Model<float>::load(o.ckpt);
  const ErfReport r = erf_probe(model, cfg.erf, fs::path(o.ckpt).stem().string());
  write_erf(r, o.out);
  out << r.r_table_text();
  return kExitOk;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
  if (o.list) {
    for (const auto& n : gradcheck_names()) out << n << "\n";
    return kExitOk;
  }
  GradCheckOptions opt;
  if (auto s = seed_override(o.seed)) opt.base_seed = *s;
  const auto results = run_gradchecks(o.op, opt);
  std::vector<std::string> failed;
  out << "name,seeds,checked,max_rel_error,passed,worst\n";
  for (const auto& r : results) {
    out << r.name << ',' << r.seeds << ',' << r.checked << ',' << fmt("%.3g", r.max_rel_error) << ','
        << (r.passed ? "yes" : "no") << ",\"" << r.worst << "\"\n";
    if (!r.passed) failed.push_back(r.name);
  }
  if (!failed.empty()) {
    std::string names;
    for (const auto& n : failed) names += (names.empty() ? "" : ", ") + n;
    throw NumericError("gradient check failed: " + names);
  }
  return kExitOk;
}

struct App {
  CLI::App app{"lkd: large-kernel dehazing network toolkit", "lkd"};
  Options opt;
  std::vector<std::pair<CLI::App*, Body>> commands;
};

std::unique_ptr<App> make_app() {
  auto a = std::make_unique<App>();
  CLI::App& app = a->app;
  Options& o = a->opt;
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--threads", o.threads, "Worker thread cap (0: all hardware threads)")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", o.seed, "Seed for every random choice; overrides LKD_SEED and the config file");

  auto* synth = app.add_subcommand("synth", "Synthesise hazy/clean pairs with the scattering model");
  synth->add_option("--config", o.config, "JSON run config (the data section is used)")->check(CLI::ExistingFile);
  synth->add_option("--out", o.out, "Output directory for PPM pairs and manifest.txt")->required();
  a->commands.emplace_back(synth, cmd_synth);

  auto* tr = app.add_subcommand("train", "Train a model; writes metrics.csv and model.ckpt");
  tr->add_option("--config", o.config, "JSON run config (model and train sections)")->check(CLI::ExistingFile);
  tr->add_option("--data", o.data, "Dataset directory written by synth")->required();
  tr->add_option("--eval-data", o.eval_data, "Held-out dataset directory (default: first training pairs)");
  tr->add_option("--out", o.out, "Output directory")->required();
  a->commands.emplace_back(tr, cmd_train);

  auto* ev = app.add_subcommand("eval", "Per-image and mean PSNR/SSIM as CSV");
  ev->add_option("--ckpt", o.ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", o.data, "Dataset directory written by synth")->required();
  a->commands.emplace_back(ev, cmd_eval);

  auto* count = app.add_subcommand("count", "Parameter and MAC counts, or formula values");
  count->add_option("--variant", o.variant, "Model variant: t, s, b, l or desk");
  count->add_option("--ablation", o.ablation,
                    "Ablation config: base, base+sf, base+sf+sr, base+sf+sr+dlk, base+sf+sr+cefn, full");
  count->add_option("--config", o.config, "JSON run config (model section)")->check(CLI::ExistingFile);
  count->add_option("--hw", o.hw, "Input height and width");
  count->add_option("--eq3", o.eq3, "K d C: print the parameter formula and the exact counts")
      ->expected(3)
      ->default_str("");
  count->add_option("--compare", o.compare, "Kernel sizes for the direct vs decomposed table (CSV)")->default_str("");
  count->add_option("--d", o.d, "Dilation for --compare");
  count->add_option("--C", o.C, "Channels for --compare");
  a->commands.emplace_back(count, cmd_count);

  auto* fp = app.add_subcommand("footprint", "Support of the decomposed large kernel");
  fp->add_option("--K", o.K, "Target kernel size (odd)");
  fp->add_option("--d", o.d, "Dilation");
  fp->add_flag("--mask", o.mask, "Also print the support as a # / . grid");
  a->commands.emplace_back(fp, cmd_footprint);

  auto* erf = app.add_subcommand("erf", "Effective receptive field probe");
  erf->add_option("--ckpt", o.ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  erf->add_option("--config", o.config, "JSON run config (erf section)")->check(CLI::ExistingFile);
  erf->add_option("--tap", o.tap, "Feature map to probe: bottleneck, pre_head or output (default: from config, pre_head)");
  erf->add_option("--out", o.out, "Output prefix for .lkdt, .ppm and _r.txt")->required();
  a->commands.emplace_back(erf, cmd_erf);

  auto* gc = app.add_subcommand("gradcheck", "Central finite-difference gradient suite (64-bit)");
  gc->add_option("--op", o.op, "Only run checks whose name contains this text");
  gc->add_flag("--list", o.list, "List check names and exit");
  a->commands.emplace_back(gc, cmd_gradcheck);
  return a;
}

void error_line(std::ostream& err, const char* kind, const std::string& message) {
  err << nlohmann::json{{"error", kind}, {"message", message}}.dump() << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  auto a = make_app();
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    a->app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << a->app.help();  // delegates to the selected subcommand
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << help_text();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << a->app.help();
      return kExitOk;
    }
    error_line(err, "usage", e.what());
    return kExitUsage;
  }
  for (auto& [sub, body] : a->commands) {
    if (!sub->parsed()) continue;
    try {
      if (a->opt.threads > 0) set_num_threads(a->opt.threads);
      return body(a->opt, out);
    } catch (const NumericError& e) {
      error_line(err, "numeric", e.what());
      return kExitNumeric;
    } catch (const ValidationError& e) {
      error_line(err, "validation", e.what());
      return kExitValidation;
    } catch (const Error& e) {
      error_line(err, "internal", e.what());
      return kExitValidation;
    } catch (const std::exception& e) {
      error_line(err, "internal", e.what());
      return kExitValidation;
    }
  }
  error_line(err, "usage", "no subcommand");
  return kExitUsage;
}

std::string help_text() {
  auto a = make_app();
  std::string text = a->app.help();
  for (auto& [sub, body] : a->commands) text += "\n" + sub->help();
  return text;
}

}  // namespace lkd::tools
