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

// Acceptance suite: one PASS/FAIL line per criterion. Exit status is 0 only
// when every selected criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "instances.hpp"
#include "waspseg/builders.hpp"
#include "waspseg/commands.hpp"
#include "waspseg/config.hpp"
#include "waspseg/conv.hpp"
#include "waspseg/crf.hpp"
#include "waspseg/gradcheck.hpp"
#include "waspseg/graph_check.hpp"
#include "waspseg/loss.hpp"
#include "waspseg/metrics.hpp"
#include "waspseg/receptive_field.hpp"
#include "waspseg/schedule.hpp"

namespace fs = std::filesystem;
using namespace waspseg;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool passed = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      passed = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t(shape);
  for (float& v : t.data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

void randomize(Weights<float>& w, std::uint64_t seed) {
  for (std::size_t i = 0; i < w.params.size(); ++i) {
    Rng rng(derive_seed(seed, i));
    for (float& v : w.params[i].data()) v = static_cast<float>(rng.uniform(-0.5, 0.5));
  }
}

// 1. Parameter accounting at the full-scale configuration.
Outcome parameter_accounting() {
  const auto t0 = Clock::now();
  Outcome o;
  RunConfig cfg = load_config(fs::path(WASPSEG_SOURCE_DIR) / "configs" / "paper.cfg");
  cfg.compare_heads = {HeadKind::Aspp, HeadKind::Res2NetSeg, HeadKind::Wasp};
  const auto report = run_compare(cfg, false);
  const auto& aspp = report.rows[0];
  const auto& res2 = report.rows[1];
  const auto& wasp = report.rows[2];
  o.require(wasp.parameters < res2.parameters && res2.parameters < aspp.parameters, "ordering WASP < Res2Net < ASPP");
  const double aspp_dev = 100.0 * (static_cast<double>(aspp.parameters) / 59.869e6 - 1.0);
  o.require(std::abs(aspp_dev) <= 5.0, "ASPP off 59.869M by " + fmt("%.2f%%", aspp_dev));
  o.require(std::abs(wasp.reduction_percent - 20.69) <= 3.0, "WASP reduction " + fmt("%.2f", wasp.reduction_percent));
  o.require(std::abs(res2.reduction_percent - 14.99) <= 3.0, "Res2Net reduction " + fmt("%.2f", res2.reduction_percent));
  const double dt = seconds_since(t0);
  o.require(dt < 1.0, "took " + fmt("%.2fs", dt));
  o.detail = "ASPP " + std::to_string(aspp.parameters) + " (width " + std::to_string(default_head_width(HeadKind::Aspp)) +
             ", " + fmt("%+.2f%%", aspp_dev) + " vs 59.869M), Res2Net-Seg " + std::to_string(res2.parameters) + " (-" +
             fmt("%.2f%%", res2.reduction_percent) + "), WASP " + std::to_string(wasp.parameters) + " (width " +
             std::to_string(default_head_width(HeadKind::Wasp)) + ", -" + fmt("%.2f%%", wasp.reduction_percent) + "), " +
             fmt("%.3fs", dt) + (o.passed ? "" : "; " + o.detail);
  return o;
}

// 2. Dilated convolution against explicit zero-stuffing.
Outcome dilated_conv() {
  const auto t0 = Clock::now();
  Outcome o;
  Rng rng(2024);
  const int rates[] = {1, 2, 3, 6, 12, 18, 24};
  int cases = 0;
  double worst = 0.0;
  bool r1_exact = true;
  for (int round = 0; round < 16; ++round) {
    for (int r : rates) {
      const int k = round % 3 == 0 ? 1 : (round % 3 == 1 ? 3 : 5);
      const int cin = rng.uniform_int(1, 3), cout = rng.uniform_int(1, 3);
      const Tensor x = random_tensor(Shape{1, cin, rng.uniform_int(4, 20), rng.uniform_int(4, 20)}, rng);
      const Tensor w = random_tensor(Shape{cout, cin, k, k}, rng);
      const Tensor b = random_tensor(Shape{1, 1, 1, cout}, rng);
      const ConvGeometry g = ConvGeometry::same(k, r);
      const Tensor y = conv2d(x, w, std::span<const float>(b.data()), g);
      const Tensor stuffed = zero_stuff(w, Pair2::square(r));
      ConvGeometry g1 = g;
      g1.dilation = {1, 1};
      const Tensor z = conv2d(x, stuffed, std::span<const float>(b.data()), g1);
      if (y.shape() != z.shape()) {
        o.require(false, "shape mismatch at r=" + std::to_string(r));
        continue;
      }
      for (std::size_t i = 0; i < y.size(); ++i) worst = std::max(worst, static_cast<double>(std::abs(y[i] - z[i])));
      if (r == 1) r1_exact = r1_exact && y.vector() == z.vector() && stuffed.vector() == w.vector();
      ++cases;
    }
  }
  const double dt = seconds_since(t0);
  o.require(cases >= 100, "only " + std::to_string(cases) + " cases");
  o.require(worst <= 1e-5, "max abs diff " + fmt("%.3g", worst));
  o.require(r1_exact, "r=1 not exact");
  o.require(dt < 30.0, "took " + fmt("%.1fs", dt));
  o.detail = std::to_string(cases) + " cases over r in {1,2,3,6,12,18,24}, max abs diff " + fmt("%.3g", worst) +
             ", r=1 " + (r1_exact ? "exact" : "NOT exact") + ", " + fmt("%.2fs", dt) + (o.passed ? "" : "; " + o.detail);
  return o;
}

// 3. Finite-difference checks of every differentiable op and the four heads.
Outcome gradient_suite() {
  const auto t0 = Clock::now();
  Outcome o;
  int checks = 0;
  double worst = 0.0;

  auto check_graph = [&](const std::string& name, const ModuleGraph& g, Shape input, Mode mode) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      auto w = init_weights(g, seed);
      randomize(w, seed + 100);
      Rng rng(seed + 200);
      std::vector<Tensor> xs;
      for (int id : g.inputs()) {
        Shape s = input;
        s.c = g.layer(id).channels;
        xs.push_back(random_tensor(s, rng));
      }
      GraphCheckOptions opt;
      opt.mode = mode;
      opt.check.seed = seed;
      opt.check.max_coordinates = 48;
      const auto r = grad_check_graph(g, w, xs, opt);
      ++checks;
      worst = std::max(worst, r.max_relative_error);
      o.require(r.passed, name + " seed " + std::to_string(seed) + " err " + fmt("%.3g", r.max_relative_error));
    }
  };
  auto single = [&](const std::string& name, LayerKind kind, LayerAttrs attrs, int in_ch, Mode mode = Mode::Eval,
                    int inputs = 1) {
    ModuleGraph g(name);
    std::vector<int> ids;
    for (int i = 0; i < inputs; ++i) ids.push_back(g.add_input("x" + std::to_string(i), in_ch));
    g.add(kind, name, ids, attrs);
    check_graph(name, g, Shape{2, in_ch, 7, 6}, mode);
  };

  single("conv", LayerKind::Conv, ConvAttrs{3, 4, 3, 1, 1, 1, true}, 3);
  single("conv-strided", LayerKind::Conv, ConvAttrs{3, 2, 3, 2, 1, 1, true}, 3);
  for (int r : {2, 3, 6}) single("atrous-r" + std::to_string(r), LayerKind::AtrousConv, ConvAttrs{2, 3, 3, 1, r, r, true}, 2);
  single("relu", LayerKind::Relu, {}, 3);
  single("batchnorm-train", LayerKind::BatchNorm, BatchNormAttrs{3}, 3, Mode::Train);
  single("batchnorm-eval", LayerKind::BatchNorm, BatchNormAttrs{3}, 3, Mode::Eval);
  single("dropout", LayerKind::Dropout, DropoutAttrs{0.3}, 3, Mode::Train);
  single("bilinear-x2", LayerKind::Bilinear, BilinearAttrs{2}, 2);
  single("global-avg-pool", LayerKind::GlobalAvgPool, {}, 3);
  single("se-gate", LayerKind::SeGate, SeGateAttrs{4, 2}, 4);
  single("concat", LayerKind::Concat, {}, 2, Mode::Eval, 3);
  single("sum", LayerKind::Sum, {}, 2, Mode::Eval, 3);
  single("split", LayerKind::Split, SplitAttrs{1, 3}, 4);
  single("softmax", LayerKind::Softmax, {}, 4);
  single("max-pool", LayerKind::MaxPool, PoolAttrs{3, 2, 1}, 2);
  {
    ModuleGraph g("broadcast");
    const int gap = g.add_input("pooled", 3);
    const int ref = g.add_input("ref", 3);
    g.add(LayerKind::Bilinear, "broadcast", {gap, ref}, BilinearAttrs{0});
    // A 1x1 map broadcast to the reference extent.
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      Rng rng(seed);
      const std::vector<Tensor> xs{random_tensor(Shape{2, 3, 1, 1}, rng), random_tensor(Shape{2, 3, 5, 4}, rng)};
      GraphCheckOptions opt;
      opt.check.seed = seed;
      const auto r = grad_check_graph(g, init_weights(g, 1), xs, opt);
      ++checks;
      worst = std::max(worst, r.max_relative_error);
      o.require(r.passed, "bilinear-broadcast seed " + std::to_string(seed));
    }
  }
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed + 300);
    std::vector<std::uint8_t> labels(2 * 4 * 4);
    for (auto& l : labels) l = rng.bernoulli(0.2) ? kIgnoreLabel : static_cast<std::uint8_t>(rng.uniform_int(0, 2));
    labels[0] = 0;
    ScalarFunction f;
    f.value = [&](std::span<const Tensor64> x) { return cross_entropy(x[0], labels).loss; };
    f.gradient = [&](std::span<const Tensor64> x) { return std::vector<Tensor64>{cross_entropy(x[0], labels).grad}; };
    const std::vector<Tensor64> in{random_tensor(Shape{2, 3, 4, 4}, rng).cast<double>()};
    const auto r = grad_check(f, in);
    ++checks;
    worst = std::max(worst, r.max_relative_error);
    o.require(r.passed, "cross-entropy seed " + std::to_string(seed));
  }
  for (HeadKind kind : {HeadKind::Aspp, HeadKind::Cascade, HeadKind::Res2NetSeg, HeadKind::Wasp}) {
    HeadConfig c;
    c.kind = kind;
    c.in_channels = 8;
    c.out_channels = 4;
    c.width = 4;
    c.rates = {1, 2, 3, 4};
    c.res2net_rates = {1, 2, 3};
    c.gap_channels = 4;
    c.se_reduction = 4;
    check_graph("head " + std::string(to_string(kind)), build_head(c), Shape{1, 8, 16, 16}, Mode::Eval);
  }
  const double dt = seconds_since(t0);
  o.require(dt < 300.0, "took " + fmt("%.0fs", dt));
  const std::string summary = std::to_string(checks) + " checks (18 op graphs + loss + 4 heads, 5 seeds each), worst rel err " +
                              fmt("%.3g", worst) + " at tol 1e-4, eps 1e-3, " + fmt("%.1fs", dt);
  o.detail = o.passed ? summary : summary + "; " + o.detail;
  return o;
}

// 4. Receptive fields of the two heads at rates {6,12,18,24}.
Outcome receptive_field_claim() {
  const auto t0 = Clock::now();
  Outcome o;
  HeadConfig c;
  c.kind = HeadKind::Aspp;
  const auto aspp = run_rf(c);
  c.kind = HeadKind::Wasp;
  const auto wasp = run_rf(c);
  std::vector<int> kernels;
  for (const auto& r : aspp) {
    if (r.layer != "output") kernels.push_back(r.effective_kernel);
  }
  const auto aspp_rf = aspp.back().receptive_field;
  const auto wasp_rf = wasp.back().receptive_field;
  o.require(kernels == std::vector<int>{13, 25, 37, 49}, "branch kernels differ from {13,25,37,49}");
  o.require(aspp_rf == 49, "ASPP RF " + std::to_string(aspp_rf));
  o.require(wasp_rf == 121, "WASP RF " + std::to_string(wasp_rf));
  const double dt = seconds_since(t0);
  o.require(dt < 1.0, "took " + fmt("%.2fs", dt));
  const std::string summary = "WASP " + std::to_string(wasp_rf) + " > ASPP " + std::to_string(aspp_rf) +
                              ", branch kernels {13,25,37,49}, " + fmt("%.3fs", dt);
  o.detail = o.passed ? summary : summary + "; " + o.detail;
  return o;
}

// 5. Poly learning-rate schedule.
Outcome poly_lr() {
  Outcome o;
  const double base = 0.007;
  const PolySchedule s{base, 1000, 0.9};
  o.require(s.lr(0) == base, "lr(0) != base");
  o.require(s.lr(1000) == 0.0, "lr(max) != 0");
  o.require(std::abs(s.lr(500) - base * std::pow(0.5, 0.9)) <= 1e-12, "midpoint");
  bool monotone = true;
  double max_err = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    if (i > 0) monotone = monotone && s.lr(i) < s.lr(i - 1);
    max_err = std::max(max_err, std::abs(s.lr(i) - base * std::pow(1.0 - i / 1000.0, 0.9)));
  }
  o.require(monotone, "not strictly decreasing");
  o.require(max_err <= 1e-12, "closed-form error " + fmt("%.3g", max_err));
  const std::string summary = "lr(0)=base, lr(max)=0, midpoint base*0.5^0.9, strictly decreasing over 1001 points, max err " +
                              fmt("%.3g", max_err);
  o.detail = o.passed ? summary : summary + "; " + o.detail;
  return o;
}

// 6. Confusion-matrix mIOU against per-pixel set arithmetic.
Outcome miou_oracle() {
  Outcome o;
  Rng rng(606);
  int instances = 0;
  double worst = 0.0;
  bool counts_equal = true;
  while (instances < 60) {
    const int classes = rng.uniform_int(2, 8);
    const int w = rng.uniform_int(1, 24), h = rng.uniform_int(1, 24);
    const LabelMap truth = testing::random_labels(w, h, classes, 0.1, rng);
    const LabelMap pred = testing::random_labels(w, h, classes - (instances % 3 == 0 ? 1 : 0), 0.0, rng);
    bool scored = false;
    for (auto l : truth.labels) scored |= l != kIgnoreLabel;
    if (!scored) continue;
    ConfusionMatrix conf(classes);
    conf.accumulate(pred, truth);
    const auto oracle = testing::set_oracle({pred}, {truth}, classes);
    for (int c = 0; c < classes; ++c) {
      counts_equal = counts_equal && conf.tp(c) == oracle.tp[c] && conf.fp(c) == oracle.fp[c] && conf.fn(c) == oracle.fn[c];
    }
    worst = std::max(worst, std::abs(conf.miou().miou - oracle.miou));
    ++instances;
  }
  o.require(counts_equal, "TP/FP/FN mismatch");
  o.require(worst <= 1e-12, "mIOU differs by " + fmt("%.3g", worst));
  const std::string summary = std::to_string(instances) + " random label maps, TP/FP/FN " +
                              (counts_equal ? "identical" : "DIFFER") + ", max mIOU diff " + fmt("%.3g", worst);
  o.detail = o.passed ? summary : summary + "; " + o.detail;
  return o;
}

// 7. CRF properties. `csv` receives the per-instance report for criterion 9.
Outcome crf_checks(std::string* csv) {
  const auto t0 = Clock::now();
  Outcome o;
  const CrfParams defaults;

  // Zero-weight identity and normalisation on random fields.
  Rng rng(707);
  double norm_err = 0.0;
  bool identity = true;
  for (int k = 0; k < 5; ++k) {
    UnaryField u;
    u.probabilities = Tensor64(Shape{1, 3, 6, 7});
    for (int y = 0; y < 6; ++y) {
      for (int x = 0; x < 7; ++x) {
        double s = 0.0;
        for (int c = 0; c < 3; ++c) s += u.probabilities.at(0, c, y, x) = rng.uniform(0.05, 1.0);
        for (int c = 0; c < 3; ++c) u.probabilities.at(0, c, y, x) /= s;
      }
    }
    u.image = Image(7, 6, 3);
    for (auto& v : u.image.pixels) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    CrfParams zero = defaults;
    zero.w1 = zero.w2 = 0.0;
    identity = identity && mean_field_refine(u, zero).vector() == u.probabilities.vector();
    const Tensor64 q = mean_field_refine(u, defaults);
    for (int y = 0; y < 6; ++y) {
      for (int x = 0; x < 7; ++x) {
        double s = 0.0;
        for (int c = 0; c < 3; ++c) s += q.at(0, c, y, x);
        norm_err = std::max(norm_err, std::abs(s - 1.0));
      }
    }
  }
  o.require(identity, "zero-weight refinement is not the identity");
  o.require(norm_err <= 1e-5, "normalisation error " + fmt("%.3g", norm_err));

  // Two-region instances.
  std::vector<CrfSample> samples;
  std::vector<std::string> names;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    samples.push_back(testing::two_region_instance(seed));
    names.push_back("seed" + std::to_string(seed));
  }
  const auto rows = run_crf(samples, names, defaults, 2);
  int not_worse = 0, better = 0;
  for (const auto& r : rows) {
    not_worse += r.miou_after >= r.miou_before;
    better += r.miou_after > r.miou_before;
  }
  o.require(not_worse == 20, std::to_string(20 - not_worse) + " instances got worse");
  if (csv != nullptr) *csv = crf_csv(rows);

  // Two-pixel energy by hand.
  UnaryField u;
  u.probabilities = Tensor64(Shape{1, 2, 1, 2}, {0.7, 0.2, 0.3, 0.8});
  u.image = Image(2, 1, 3);
  u.image.pixels = {10, 20, 30, 13, 24, 30};
  LabelMap split(2, 1);
  split.labels = {0, 1};
  const double hand = -std::log(0.7) - std::log(0.8) + 4.0 * std::exp(-1.0 / 7200.0 - 25.0 / 50.0) +
                      3.0 * std::exp(-1.0 / 18.0);
  const double energy_err = std::abs(crf_energy(split, u, defaults).total - hand);
  o.require(energy_err <= 1e-9, "2-pixel energy error " + fmt("%.3g", energy_err));

  const double dt = seconds_since(t0);
  o.require(dt < 60.0, "took " + fmt("%.1fs", dt));
  const std::string summary = std::string("identity ") + (identity ? "exact" : "BROKEN") + ", normalisation err " +
                              fmt("%.2g", norm_err) + ", " + std::to_string(not_worse) + "/20 instances not worse (" +
                              std::to_string(better) + " improved), 2-pixel energy err " + fmt("%.2g", energy_err) +
                              ", " + fmt("%.2fs", dt);
  o.detail = o.passed ? summary : summary + "; " + o.detail;
  return o;
}

// 8. Toy end-to-end training of all four heads.
Outcome toy_end_to_end(std::string* csv, bool verbose) {
  const auto t0 = Clock::now();
  Outcome o;
  const RunConfig cfg = load_config(fs::path(WASPSEG_SOURCE_DIR) / "configs" / "toy.cfg");
  const auto report = run_compare(cfg, true, [&](const std::string& m) {
    if (verbose) std::cerr << "  [" << fmt("%.0fs", seconds_since(t0)) << "] " << m << "\n";
  });
  if (csv != nullptr) *csv = report.csv();
  std::cout << report.table();
  std::string wasp;
  for (const auto& r : report.rows) {
    o.require(r.miou.has_value(), r.name + " has no validation mIOU");
    if (r.name == "wasp" && r.miou) {
      wasp = fmt("%.4f", *r.miou);
      o.require(*r.miou >= 0.85, "WASP mIOU " + wasp + " < 0.85");
    }
  }
  o.require(!wasp.empty(), "WASP row missing");
  const double dt = seconds_since(t0);
  o.require(dt <= 900.0, "took " + fmt("%.0fs", dt));
  const std::string summary = cfg.backbone.str() + " + WASP + decoder, " + std::to_string(cfg.train.steps) +
                              " steps, batch " + std::to_string(cfg.train.batch_size) + ", " +
                              std::to_string(cfg.synthetic_images) + " synthetic " + std::to_string(cfg.num_classes) +
                              "-class images: val mIOU " + wasp + " (>= 0.85); 4 heads in " + fmt("%.0fs", dt);
  o.detail = o.passed ? summary : summary + "; " + o.detail;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"waspseg acceptance suite"};
  std::vector<int> only;
  bool verbose = false;
  app.add_option("--only", only, "Run only these criteria (1-9)")->check(CLI::Range(1, 9));
  app.add_flag("-v,--verbose", verbose, "Progress messages on stderr");
  CLI11_PARSE(app, argc, argv);
  const std::set<int> selected(only.begin(), only.end());
  auto want = [&](int k) { return selected.empty() || selected.count(k) > 0; };

  int failed = 0;
  auto report = [&](int k, const std::string& name, const Outcome& o) {
    std::cout << (o.passed ? "[PASS] " : "[FAIL] ") << k << ". " << name << ": " << o.detail << std::endl;
    failed += o.passed ? 0 : 1;
  };
  auto guarded = [&](int k, const std::string& name, const std::function<Outcome()>& f) {
    if (!want(k)) return;
    try {
      report(k, name, f());
    } catch (const std::exception& e) {
      report(k, name, Outcome{false, std::string("exception: ") + e.what()});
    }
  };

  std::string crf_csv_1, toy_csv_1;
  guarded(1, "parameter accounting", parameter_accounting);
  guarded(2, "dilated convolution", dilated_conv);
  guarded(3, "gradient suite", gradient_suite);
  guarded(4, "receptive field", receptive_field_claim);
  guarded(5, "poly learning rate", poly_lr);
  guarded(6, "mIOU oracle", miou_oracle);
  guarded(7, "dense CRF", [&] { return crf_checks(&crf_csv_1); });
  guarded(8, "toy end-to-end", [&] { return toy_end_to_end(&toy_csv_1, verbose); });
  guarded(9, "determinism", [&] {
    Outcome o;
    if (crf_csv_1.empty()) crf_checks(&crf_csv_1);
    if (toy_csv_1.empty()) toy_end_to_end(&toy_csv_1, verbose);
    std::string crf_csv_2, toy_csv_2;
    crf_checks(&crf_csv_2);
    toy_end_to_end(&toy_csv_2, verbose);
    o.require(crf_csv_1 == crf_csv_2, "CRF CSV differs");
    o.require(toy_csv_1 == toy_csv_2, "compare CSV (mIOU and weight checksums) differs");
    if (o.passed) o.detail = "second runs of criteria 7 and 8 reproduce both CSVs byte for byte, including weight checksums";
    return o;
  });
  return failed == 0 ? 0 : 1;
}
