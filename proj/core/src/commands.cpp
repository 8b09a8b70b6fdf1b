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

#include "waspseg/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "waspseg/builders.hpp"
#include "waspseg/conv.hpp"
#include "waspseg/error.hpp"
#include "waspseg/netpbm.hpp"
#include "waspseg/ops.hpp"
#include "waspseg/receptive_field.hpp"

namespace waspseg {

namespace {

std::string format(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::string join_rates(const std::vector<int>& rates, char sep) {
  std::string out;
  for (std::size_t i = 0; i < rates.size(); ++i) out += (i ? std::string(1, sep) : "") + std::to_string(rates[i]);
  return out;
}

std::int64_t head_rf(const HeadConfig& head) { return receptive_field(build_head(head)).receptive_field; }

}  // namespace

DataSplit load_data(const RunConfig& config) {
  DataSplit d;
  if (!config.train_dir.empty()) {
    d.train = load_dataset(config.train_dir);
    if (!config.val_dir.empty()) d.val = load_dataset(config.val_dir);
  } else {
    d.train = make_synthetic_dataset(config.synthetic_train());
    if (config.synthetic_val_images > 0) d.val = make_synthetic_dataset(config.synthetic_val());
  }
  if (d.train.empty()) throw DataError("no training samples");
  return d;
}

TrainOutcome train_network(const RunConfig& config, const NetworkConfig& network, const DataSplit& data,
                           const std::function<void(const TraceRow&)>& on_step) {
  TrainOutcome out;
  out.graph = build_network(network);
  out.weights = init_weights(out.graph, config.seed);
  out.result = train(out.graph, out.weights, data.train, data.val.empty() ? nullptr : &data.val,
                     config.train_config(), on_step);
  out.checksum = weights_checksum(out.weights);
  return out;
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
  std::string out = "step,lr,loss,miou\n";
  for (const auto& r : trace) {
    out += std::to_string(r.step) + "," + format("%.9g", r.lr) + "," + format("%.6f", r.loss) + "," +
           (r.miou ? format("%.6f", *r.miou) : "") + "\n";
  }
  return out;
}

CompareReport run_compare(const RunConfig& config, bool train, const Log& log) {
  CompareReport report;
  std::optional<DataSplit> data;
  if (train) data = load_data(config);
  for (HeadKind kind : config.compare_heads) {
    const NetworkConfig net = config.network(kind);
    CompareRow row;
    row.name = std::string(to_string(kind));
    row.parameters = count_parameters(build_network(net));
    row.receptive_field = head_rf(net.head);
    if (train) {
      if (log) log("training " + row.name);
      auto outcome = train_network(config, net, *data);
      row.miou = outcome.result.final_miou;
      row.checksum = outcome.checksum;
      if (log) {
        log(row.name + ": mIOU " + (row.miou ? format("%.4f", *row.miou) : std::string("n/a")) + ", checksum " +
            row.checksum);
      }
    }
    report.rows.push_back(std::move(row));
  }
  const auto base = std::find_if(report.rows.begin(), report.rows.end(), [](const CompareRow& r) { return r.name == "aspp"; });
  const double baseline = static_cast<double>(base != report.rows.end() ? base->parameters : report.rows.front().parameters);
  for (auto& r : report.rows) r.reduction_percent = 100.0 * (baseline - static_cast<double>(r.parameters)) / baseline;
  return report;
}

std::string CompareReport::csv() const {
  std::string out = "architecture,parameters,reduction_percent,receptive_field,miou,checksum\n";
  for (const auto& r : rows) {
    out += r.name + "," + std::to_string(r.parameters) + "," + format("%.2f", r.reduction_percent) + "," +
           std::to_string(r.receptive_field) + "," + (r.miou ? format("%.4f", *r.miou) : "") + "," + r.checksum + "\n";
  }
  return out;
}

std::string CompareReport::table() const {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-12s %14s %10s %6s %8s\n", "architecture", "parameters", "reduction", "RF", "mIOU");
  out += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-12s %14lld %9.2f%% %6lld %8s\n", r.name.c_str(),
                  static_cast<long long>(r.parameters), r.reduction_percent, static_cast<long long>(r.receptive_field),
                  r.miou ? format("%.4f", *r.miou).c_str() : "-");
    out += buf;
  }
  return out;
}

std::vector<RfRow> run_rf(const HeadConfig& head) {
  const ModuleGraph g = build_head(head);
  const auto fields = receptive_fields(g);
  std::vector<RfRow> rows;
  for (const auto& l : g.layers()) {
    if (l.kind != LayerKind::AtrousConv) continue;
    const auto& a = std::get<ConvAttrs>(l.attrs);
    const auto& f = fields[static_cast<std::size_t>(g.at(l.name))];
    rows.push_back({l.name, a.rate, effective_kernel(a.kernel, a.rate), f.receptive_field, f.global});
  }
  const auto& out = fields[static_cast<std::size_t>(g.output())];
  rows.push_back({"output", 0, 0, out.receptive_field, out.global});
  return rows;
}

std::string rf_csv(const std::vector<RfRow>& rows) {
  std::string out = "layer,rate,effective_kernel,receptive_field,global\n";
  for (const auto& r : rows) {
    out += r.layer + "," + (r.rate ? std::to_string(r.rate) : "") + "," +
           (r.effective_kernel ? std::to_string(r.effective_kernel) : "") + "," + std::to_string(r.receptive_field) +
           "," + (r.global ? "true" : "false") + "\n";
  }
  return out;
}

std::vector<SweepRow> run_sweep(const RunConfig& config, const Log& log) {
  const DataSplit data = load_data(config);
  if (data.val.empty()) throw DataError("sweep: no validation samples");
  std::vector<SweepRow> rows;
  for (const auto& rates : config.sweep_rates) {
    NetworkConfig net = config.network();
    net.head.rates = rates;
    if (log) log("training rates {" + join_rates(rates, ',') + "}");
    auto outcome = train_network(config, net, data);
    rows.push_back({rates, count_parameters(outcome.graph), head_rf(net.head), *outcome.result.final_miou});
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "rates,parameters,receptive_field,miou\n";
  for (const auto& r : rows) {
    out += join_rates(r.rates, '-') + "," + std::to_string(r.parameters) + "," + std::to_string(r.receptive_field) +
           "," + format("%.4f", r.miou) + "\n";
  }
  return out;
}

Tensor predict_probabilities(const ModuleGraph& graph, Weights<float>& weights, const Image& image) {
  return softmax_channels(predict_logits(graph, weights, image));
}

std::vector<CrfSample> crf_samples(const ModuleGraph& graph, Weights<float>& weights, const Dataset& samples,
                                   int count) {
  std::vector<CrfSample> out;
  for (std::size_t i = 0; i < samples.size() && static_cast<int>(out.size()) < count; ++i) {
    const Tensor64 logits = predict_logits(graph, weights, samples[i].image).cast<double>();
    out.push_back({UnaryField{softmax_channels(logits), samples[i].image}, samples[i].labels});
  }
  return out;
}

std::vector<CrfRow> run_crf(const std::vector<CrfSample>& samples, const std::vector<std::string>& names,
                            const CrfParams& params, int num_classes) {
  std::vector<CrfRow> rows;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const LabelMap before = argmax_labels(s.unary.probabilities);
    const LabelMap after = argmax_labels(mean_field_refine(s.unary, params));
    ConfusionMatrix cb(num_classes), ca(num_classes);
    cb.accumulate(before, s.truth);
    ca.accumulate(after, s.truth);
    rows.push_back({i < names.size() ? names[i] : std::to_string(i), crf_energy(before, s.unary, params).total,
                    crf_energy(after, s.unary, params).total, cb.miou().miou, ca.miou().miou});
  }
  return rows;
}

std::string crf_csv(const std::vector<CrfRow>& rows) {
  std::string out = "image,energy_before,energy_after,miou_before,miou_after\n";
  for (const auto& r : rows) {
    out += r.image + "," + format("%.6f", r.energy_before) + "," + format("%.6f", r.energy_after) + "," +
           format("%.6f", r.miou_before) + "," + format("%.6f", r.miou_after) + "\n";
  }
  return out;
}

std::string crf_tune_csv(const CrfTuneResult& result) {
  std::string out = "w1,sigma_alpha,sigma_beta,w2,sigma_gamma,miou\n";
  for (const auto& r : result.rows) {
    const auto& p = r.params;
    out += format("%g", p.w1) + "," + format("%g", p.sigma_alpha) + "," + format("%g", p.sigma_beta) + "," +
           format("%g", p.w2) + "," + format("%g", p.sigma_gamma) + "," + format("%.6f", r.miou) + "\n";
  }
  return out;
}

ConfusionMatrix eval_label_dirs(const std::filesystem::path& predictions, const std::filesystem::path& truth,
                                int num_classes) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(truth)) throw DataError(truth.string() + ": not a directory");
  if (!fs::is_directory(predictions)) throw DataError(predictions.string() + ": not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(truth)) {
    if (e.path().extension() == ".pgm") files.push_back(e.path().filename());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError(truth.string() + ": no .pgm label maps");
  ConfusionMatrix conf(num_classes);
  for (const auto& f : files) {
    if (!fs::exists(predictions / f)) throw DataError((predictions / f).string() + ": missing prediction");
    conf.accumulate(read_labels(predictions / f), read_labels(truth / f));
  }
  return conf;
}

std::string miou_csv(const MiouReport& report) {
  std::string out = "class,iou\n";
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    out += std::to_string(c) + "," + (report.per_class[c] ? format("%.6f", *report.per_class[c]) : "") + "\n";
  }
  out += "mean," + format("%.6f", report.miou) + "\n";
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw DataError(path.string() + ": write failed");
}

}  // namespace waspseg
