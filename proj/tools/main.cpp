/* Copyright 2026 The waspseg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// waspseg command-line tool. See `waspseg --help`.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "waspseg/builders.hpp"
#include "waspseg/commands.hpp"
#include "waspseg/config.hpp"
#include "waspseg/error.hpp"
#include "waspseg/netpbm.hpp"
#include "waspseg/serialize.hpp"

namespace fs = std::filesystem;
using namespace waspseg;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string output;
  bool no_gap_branch = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_path, "Configuration file (key = value lines)");
  cmd->add_option("-s,--set", c.overrides, "Override one key, as key=value (repeatable)");
  cmd->add_option("-o,--output", c.output, "Output directory (overrides output.dir)");
  cmd->add_flag("--no-gap-branch", c.no_gap_branch, "Drop the image-pooling branch of the WASP head");
}

RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config_path.empty() ? RunConfig{} : load_config(c.config_path);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set " + kv + ": expected key=value");
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
      return s;
    };
    cfg.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)), "--set");
  }
  if (!c.output.empty()) cfg.output_dir = c.output;
  if (c.no_gap_branch) cfg.head.gap_branch = false;
  cfg.validate();
  return cfg;
}

void log_line(const std::string& msg) { std::cerr << msg << "\n"; }

std::pair<ModuleGraph, Weights<float>> load_weights(const RunConfig& cfg, const std::string& flag) {
  const std::string path = flag.empty() ? cfg.weights : flag;
  if (path.empty()) throw ConfigError("no weights given (use --weights or the 'weights' key)");
  return weights_from_container(load_container(path));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Atrous segmentation heads: parameter accounting, receptive fields, toy training and CRF refinement.\n"
               "Thread count: WASPSEG_THREADS (default: all cores)."};
  app.require_subcommand(1);
  Common common;

  auto* params = app.add_subcommand("params", "Parameter count of the configured network");
  add_common(params, common);

  auto* compare = app.add_subcommand("compare", "Parameter counts, reductions vs ASPP and receptive fields");
  add_common(compare, common);
  bool compare_train = false;
  compare->add_flag("--train", compare_train, "Also train every head and report validation mIOU");

  auto* rf = app.add_subcommand("rf", "Receptive fields of the configured head");
  add_common(rf, common);

  auto* train_cmd = app.add_subcommand("train", "Train the configured network");
  add_common(train_cmd, common);

  auto* infer = app.add_subcommand("infer", "Predict label maps for PPM images");
  add_common(infer, common);
  std::string infer_weights, infer_input;
  bool infer_probs = false;
  infer->add_option("-w,--weights", infer_weights, "Weights container from 'train'");
  infer->add_option("-i,--input", infer_input, "A .ppm file, a directory of them, or a dataset directory")->required();
  infer->add_flag("--probabilities", infer_probs, "Also write softmax probabilities as .wspc containers");

  auto* eval = app.add_subcommand("eval", "mIOU of predicted label maps against ground truth");
  add_common(eval, common);
  std::string eval_pred, eval_truth;
  eval->add_option("--pred", eval_pred, "Directory of predicted .pgm label maps")->required();
  eval->add_option("--truth", eval_truth, "Directory of ground-truth .pgm label maps")->required();

  auto* crf = app.add_subcommand("crf", "Dense CRF refinement of network predictions on validation images");
  add_common(crf, common);
  std::string crf_weights, crf_probs, crf_image, crf_truth;
  bool crf_tune_flag = false;
  crf->add_option("-w,--weights", crf_weights, "Weights container from 'train'");
  crf->add_flag("--tune", crf_tune_flag, "Grid-search the CRF parameters first");
  crf->add_option("--probabilities", crf_probs, "Refine one probability container (from 'infer') instead");
  crf->add_option("--image", crf_image, "The .ppm image the probabilities belong to");
  crf->add_option("--truth", crf_truth, "Optional .pgm ground truth for the mIOU columns");

  auto* sweep = app.add_subcommand("sweep", "Train one network per dilation-rate set");
  add_common(sweep, common);

  auto* synth = app.add_subcommand("synth", "Write the synthetic training and validation sets");
  add_common(synth, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const RunConfig cfg = resolve(common);
    const fs::path out = cfg.output_dir;

    if (params->parsed()) {
      RunConfig one = cfg;
      one.compare_heads = {cfg.head.kind};
      std::cout << run_compare(one, false).table();
    } else if (compare->parsed()) {
      const auto report = run_compare(cfg, compare_train, log_line);
      write_text(out / "compare.csv", report.csv());
      std::cout << report.table();
    } else if (rf->parsed()) {
      const auto text = rf_csv(run_rf(cfg.network().head));
      write_text(out / "rf.csv", text);
      std::cout << text;
    } else if (train_cmd->parsed()) {
      const DataSplit data = load_data(cfg);
      auto outcome = train_network(cfg, cfg.network(), data, [](const TraceRow& r) {
        if (r.step % 25 == 0 || r.miou) {
          char buf[128];
          std::snprintf(buf, sizeof buf, "step %d lr %.6f loss %.4f", r.step, r.lr, r.loss);
          std::cerr << buf << (r.miou ? " mIOU " + std::to_string(*r.miou) : "") << "\n";
        }
      });
      write_text(out / "trace.csv", trace_csv(outcome.result.trace));
      save_container(out / "weights.wspc", weights_container(outcome.graph, outcome.weights));
      write_text(out / "config.cfg", serialize_config(cfg));
      std::cout << "checksum " << outcome.checksum << "\n";
      if (outcome.result.final_miou) std::cout << "miou " << *outcome.result.final_miou << "\n";
    } else if (infer->parsed()) {
      auto [graph, weights] = load_weights(cfg, infer_weights);
      std::vector<fs::path> inputs;
      if (fs::is_directory(infer_input)) {
        // A dataset directory holds its images under images/.
        const fs::path dir = fs::is_directory(fs::path(infer_input) / "images") ? fs::path(infer_input) / "images"
                                                                                 : fs::path(infer_input);
        for (const auto& e : fs::directory_iterator(dir)) {
          if (e.path().extension() == ".ppm") inputs.push_back(e.path());
        }
        std::sort(inputs.begin(), inputs.end());
      } else {
        inputs.push_back(infer_input);
      }
      fs::create_directories(out / "labels");
      for (const auto& p : inputs) {
        const Image image = read_ppm(p);
        const Tensor probs = predict_probabilities(graph, weights, image);
        write_labels(out / "labels" / p.stem().concat(".pgm"), argmax_labels(probs));
        if (infer_probs) {
          fs::create_directories(out / "probabilities");
          Container c;
          c.metadata = "probabilities " + p.filename().string();
          c.tensors.emplace_back("probabilities", probs);
          save_container(out / "probabilities" / p.stem().concat(".wspc"), c);
        }
      }
      std::cout << inputs.size() << " image(s) written to " << (out / "labels").string() << "\n";
    } else if (eval->parsed()) {
      const auto report = eval_label_dirs(eval_pred, eval_truth, cfg.num_classes).miou();
      const auto text = miou_csv(report);
      write_text(out / "eval.csv", text);
      std::cout << text;
    } else if (crf->parsed() && !crf_probs.empty()) {
      if (crf_image.empty()) throw ConfigError("--probabilities needs --image");
      const Container in = load_container(crf_probs);
      const UnaryField unary{in.get("probabilities").cast<double>(), read_ppm(crf_image)};
      const Tensor64 refined = mean_field_refine(unary, cfg.crf);
      const LabelMap before = argmax_labels(unary.probabilities);
      const LabelMap after = argmax_labels(refined);
      CrfRow row{fs::path(crf_image).stem().string(), crf_energy(before, unary, cfg.crf).total,
                 crf_energy(after, unary, cfg.crf).total, 0.0, 0.0};
      if (!crf_truth.empty()) {
        const LabelMap truth = read_labels(crf_truth);
        ConfusionMatrix cb(unary.classes()), ca(unary.classes());
        cb.accumulate(before, truth);
        ca.accumulate(after, truth);
        row.miou_before = cb.miou().miou;
        row.miou_after = ca.miou().miou;
      }
      Container out_c;
      out_c.metadata = "refined probabilities " + row.image;
      out_c.tensors.emplace_back("probabilities", refined.cast<float>());
      fs::create_directories(out);
      save_container(out / (row.image + ".crf.wspc"), out_c);
      write_labels(out / (row.image + ".crf.pgm"), after);
      const auto text = crf_csv({row});
      write_text(out / "crf.csv", text);
      std::cout << text;
    } else if (crf->parsed()) {
      auto [graph, weights] = load_weights(cfg, crf_weights);
      const DataSplit data = load_data(cfg);
      if (data.val.empty()) throw DataError("crf: no validation samples");
      const auto samples = crf_samples(graph, weights, data.val, cfg.crf_images);
      std::vector<std::string> names;
      for (std::size_t i = 0; i < samples.size(); ++i) names.push_back(data.val[i].name);
      CrfParams params = cfg.crf;
      if (crf_tune_flag) {
        CrfGrid grid;
        grid.iterations = cfg.crf.iterations;
        const auto tuned = crf_tune(grid, samples, cfg.num_classes);
        write_text(out / "crf_tune.csv", crf_tune_csv(tuned));
        params = tuned.best;
        std::cerr << "best grid point mIOU " << tuned.best_miou << "\n";
      }
      const auto text = crf_csv(run_crf(samples, names, params, cfg.num_classes));
      write_text(out / "crf.csv", text);
      std::cout << text;
    } else if (sweep->parsed()) {
      const auto text = sweep_csv(run_sweep(cfg, log_line));
      write_text(out / "sweep.csv", text);
      std::cout << text;
    } else if (synth->parsed()) {
      const DataSplit data = load_data(cfg);
      save_dataset(out / "train", data.train);
      if (!data.val.empty()) save_dataset(out / "val", data.val);
      std::cout << data.train.size() << " training and " << data.val.size() << " validation samples written to "
                << out.string() << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  }
}
