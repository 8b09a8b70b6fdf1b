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

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "waspseg/config.hpp"
#include "waspseg/crf.hpp"
#include "waspseg/dataset.hpp"
#include "waspseg/graph.hpp"
#include "waspseg/metrics.hpp"
#include "waspseg/trainer.hpp"

namespace waspseg {

using Log = std::function<void(const std::string&)>;

struct DataSplit {
  Dataset train;
  Dataset val;
};

// Directories when data.train is set (data.val optional), otherwise the
// synthetic generator with separate training and validation seeds.
DataSplit load_data(const RunConfig& config);

struct TrainOutcome {
  ModuleGraph graph;
  Weights<float> weights;
  TrainResult result;
  std::string checksum;
};

TrainOutcome train_network(const RunConfig& config, const NetworkConfig& network, const DataSplit& data,
                           const std::function<void(const TraceRow&)>& on_step = {});

std::string trace_csv(const std::vector<TraceRow>& trace);

// One row per architecture. Reductions are relative to the ASPP row, or to
// the first row when ASPP is not among them.
struct CompareRow {
  std::string name;
  std::int64_t parameters = 0;
  double reduction_percent = 0.0;
  std::int64_t receptive_field = 0;  // head output, in head-input pixels
  std::optional<double> miou;
  std::string checksum;  // weights checksum when trained
};

struct CompareReport {
  std::vector<CompareRow> rows;

  std::string csv() const;
  std::string table() const;
};

CompareReport run_compare(const RunConfig& config, bool train, const Log& log = {});

// Per atrous layer of the configured head: rate, effective kernel and the
// receptive field of its output, then an "output" row.
struct RfRow {
  std::string layer;
  int rate = 1;
  int effective_kernel = 1;
  std::int64_t receptive_field = 1;
  bool global = false;
};

std::vector<RfRow> run_rf(const HeadConfig& head);
std::string rf_csv(const std::vector<RfRow>& rows);

// Trains and evaluates one network per rate set.
struct SweepRow {
  std::vector<int> rates;
  std::int64_t parameters = 0;
  std::int64_t receptive_field = 0;
  double miou = 0.0;
};

std::vector<SweepRow> run_sweep(const RunConfig& config, const Log& log = {});
std::string sweep_csv(const std::vector<SweepRow>& rows);

// Per-image CRF refinement of network predictions.
struct CrfRow {
  std::string image;
  double energy_before = 0.0;
  double energy_after = 0.0;
  double miou_before = 0.0;
  double miou_after = 0.0;
};

std::vector<CrfSample> crf_samples(const ModuleGraph& graph, Weights<float>& weights, const Dataset& samples,
                                   int count);
std::vector<CrfRow> run_crf(const std::vector<CrfSample>& samples, const std::vector<std::string>& names,
                            const CrfParams& params, int num_classes);
std::string crf_csv(const std::vector<CrfRow>& rows);
std::string crf_tune_csv(const CrfTuneResult& result);

// Softmax probabilities of one image, (1, C, H, W).
Tensor predict_probabilities(const ModuleGraph& graph, Weights<float>& weights, const Image& image);

// Matches P5 files by name in two directories.
ConfusionMatrix eval_label_dirs(const std::filesystem::path& predictions, const std::filesystem::path& truth,
                                int num_classes);
std::string miou_csv(const MiouReport& report);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace waspseg
