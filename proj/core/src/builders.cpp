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

#include "waspseg/builders.hpp"

#include <algorithm>
#include <charconv>
#include <string>

#include "waspseg/error.hpp"

namespace waspseg {
namespace {

ConvAttrs conv_attrs(int in, int out, int kernel, int stride = 1, bool bias = true) {
  return ConvAttrs{in, out, kernel, stride, 1, (kernel - 1) / 2, bias};
}

ConvAttrs atrous_attrs(int in, int out, int rate) {
  // Padding r(k-1)/2 keeps the spatial extent for k = 3.
  return ConvAttrs{in, out, 3, 1, rate, rate, true};
}

void require_rates(const std::vector<int>& rates, std::string_view who) {
  if (rates.empty()) throw ConfigError(std::string(who) + ": rates must not be empty");
  for (int r : rates) {
    if (r < 1) throw ConfigError(std::string(who) + ": rate " + std::to_string(r) + " must be >= 1");
  }
}

void require_positive(int v, std::string_view what) {
  if (v < 1) throw ConfigError(std::string(what) + " must be positive, got " + std::to_string(v));
}

// gap(in) -> 1x1 -> ReLU -> broadcast to the spatial extent of `like`.
int add_gap_branch(ModuleGraph& g, int in, int like, int in_ch, int out_ch) {
  const int pooled = g.add(LayerKind::GlobalAvgPool, "gap.pool", {in});
  const int proj = g.add(LayerKind::Conv, "gap.conv", {pooled}, conv_attrs(in_ch, out_ch, 1));
  const int act = g.add(LayerKind::Relu, "gap.relu", {proj});
  return g.add(LayerKind::Bilinear, "gap.broadcast", {act, like}, BilinearAttrs{0});
}

std::string join_rates(const std::vector<int>& rates) {
  std::string s;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(rates[i]);
  }
  return s;
}

}  // namespace

std::string_view to_string(HeadKind kind) noexcept {
  switch (kind) {
    case HeadKind::Aspp:
      return "aspp";
    case HeadKind::Cascade:
      return "cascade";
    case HeadKind::Res2NetSeg:
      return "res2net-seg";
    case HeadKind::Wasp:
      return "wasp";
  }
  return "unknown";
}

std::string_view to_string(Fusion fusion) noexcept { return fusion == Fusion::Sum ? "sum" : "concat"; }

HeadKind parse_head_kind(std::string_view text) {
  for (HeadKind k : {HeadKind::Aspp, HeadKind::Cascade, HeadKind::Res2NetSeg, HeadKind::Wasp}) {
    if (to_string(k) == text) return k;
  }
  throw ConfigError("unknown head kind '" + std::string(text) + "' (expected aspp, cascade, res2net-seg or wasp)");
}

Fusion parse_fusion(std::string_view text) {
  if (text == "sum") return Fusion::Sum;
  if (text == "concat") return Fusion::Concat;
  throw ConfigError("unknown fusion '" + std::string(text) + "' (expected sum or concat)");
}

ModuleGraph build_aspp(const AsppOptions& o) {
  require_rates(o.rates, "aspp");
  require_positive(o.in_channels, "aspp input channels");
  require_positive(o.branch_channels, "aspp branch channels");
  require_positive(o.out_channels, "aspp output channels");
  ModuleGraph g("aspp");
  const int in = g.add_input("input", o.in_channels);
  std::vector<int> ends;
  for (std::size_t i = 0; i < o.rates.size(); ++i) {
    const std::string p = "branch" + std::to_string(i + 1) + ".";
    int x = g.add(LayerKind::AtrousConv, p + "atrous", {in}, atrous_attrs(o.in_channels, o.branch_channels, o.rates[i]));
    x = g.add(LayerKind::Relu, p + "relu1", {x});
    x = g.add(LayerKind::Conv, p + "fc1", {x}, conv_attrs(o.branch_channels, o.branch_channels, 1));
    x = g.add(LayerKind::Relu, p + "relu2", {x});
    ends.push_back(g.add(LayerKind::Conv, p + "fc2", {x}, conv_attrs(o.branch_channels, o.out_channels, 1)));
  }
  if (ends.size() > 1) {
    if (o.fusion == Fusion::Sum) {
      g.add(LayerKind::Sum, "fuse", ends);
    } else {
      const int cat = g.add(LayerKind::Concat, "concat", ends);
      g.add(LayerKind::Conv, "fuse", {cat},
            conv_attrs(o.out_channels * static_cast<int>(ends.size()), o.out_channels, 1));
    }
  }
  g.metadata()["head"] = "aspp";
  g.metadata()["rates"] = join_rates(o.rates);
  return g;
}

ModuleGraph build_cascade(const CascadeOptions& o) {
  require_rates(o.rates, "cascade");
  for (std::size_t i = 1; i < o.rates.size(); ++i) {
    if (o.rates[i] <= o.rates[i - 1]) {
      throw ConfigError("cascade: rates must be strictly increasing, got " + join_rates(o.rates));
    }
  }
  require_positive(o.in_channels, "cascade input channels");
  require_positive(o.width, "cascade width");
  require_positive(o.out_channels, "cascade output channels");
  ModuleGraph g("cascade");
  int x = g.add_input("input", o.in_channels);
  int ch = o.in_channels;
  for (std::size_t i = 0; i < o.rates.size(); ++i) {
    const std::string p = "stage" + std::to_string(i + 1) + ".";
    x = g.add(LayerKind::AtrousConv, p + "atrous", {x}, atrous_attrs(ch, o.width, o.rates[i]));
    x = g.add(LayerKind::Relu, p + "relu", {x});
    ch = o.width;
  }
  g.add(LayerKind::Conv, "project", {x}, conv_attrs(o.width, o.out_channels, 1));
  g.metadata()["head"] = "cascade";
  g.metadata()["rates"] = join_rates(o.rates);
  return g;
}

ModuleGraph build_res2net_seg(const Res2NetSegOptions& o) {
  require_positive(o.scales, "res2net-seg scales");
  require_positive(o.in_channels, "res2net-seg input channels");
  require_positive(o.gap_channels, "res2net-seg pooling channels");
  require_positive(o.out_channels, "res2net-seg output channels");
  if (o.scales < 2) throw ConfigError("res2net-seg: at least 2 scales are required");
  if (o.in_channels % o.scales != 0) {
    throw ConfigError("res2net-seg: " + std::to_string(o.in_channels) + " channels are not divisible into " +
                      std::to_string(o.scales) + " scales");
  }
  require_rates(o.rates, "res2net-seg");
  if (static_cast<int>(o.rates.size()) != o.scales - 1) {
    throw ConfigError("res2net-seg: " + std::to_string(o.scales) + " scales need " + std::to_string(o.scales - 1) +
                      " rates, got " + join_rates(o.rates));
  }
  const int group = o.in_channels / o.scales;
  ModuleGraph g("res2net-seg");
  const int in = g.add_input("input", o.in_channels);
  std::vector<int> parts;
  int prev = -1;
  for (int s = 0; s < o.scales; ++s) {
    const std::string p = "scale" + std::to_string(s + 1) + ".";
    const int xs = g.add(LayerKind::Split, p + "split", {in}, SplitAttrs{s * group, (s + 1) * group});
    if (s == 0) {
      prev = xs;
    } else {
      const int mixed = g.add(LayerKind::Sum, p + "add", {xs, prev});
      const int conv = g.add(LayerKind::AtrousConv, p + "atrous", {mixed},
                             atrous_attrs(group, group, o.rates[static_cast<std::size_t>(s - 1)]));
      prev = g.add(LayerKind::Relu, p + "relu", {conv});
    }
    parts.push_back(prev);
  }
  parts.push_back(add_gap_branch(g, in, in, o.in_channels, o.gap_channels));
  const int fused_ch = o.in_channels + o.gap_channels;
  const int cat = g.add(LayerKind::Concat, "concat", parts);
  const int se = g.add(LayerKind::SeGate, "se", {cat}, SeGateAttrs{fused_ch, o.se_reduction});
  g.add(LayerKind::Conv, "project", {se}, conv_attrs(fused_ch, o.out_channels, 1));
  g.metadata()["head"] = "res2net-seg";
  g.metadata()["rates"] = join_rates(o.rates);
  return g;
}

ModuleGraph build_wasp(const WaspOptions& o) {
  require_rates(o.rates, "wasp");
  for (std::size_t i = 1; i < o.rates.size(); ++i) {
    if (o.rates[i] < o.rates[i - 1]) {
      throw ConfigError("wasp: rates must be non-decreasing, got " + join_rates(o.rates));
    }
  }
  require_positive(o.in_channels, "wasp input channels");
  require_positive(o.width, "wasp width");
  require_positive(o.out_channels, "wasp output channels");
  ModuleGraph g("wasp");
  const int in = g.add_input("input", o.in_channels);
  std::vector<int> taps;
  int x = in;
  int ch = o.in_channels;
  for (std::size_t i = 0; i < o.rates.size(); ++i) {
    const std::string p = "branch" + std::to_string(i + 1) + ".";
    x = g.add(LayerKind::AtrousConv, p + "atrous", {x}, atrous_attrs(ch, o.width, o.rates[i]));
    x = g.add(LayerKind::Relu, p + "relu", {x});
    ch = o.width;
    int t = g.add(LayerKind::Conv, p + "tap1", {x}, conv_attrs(o.width, o.width, 1));
    t = g.add(LayerKind::Relu, p + "tap1.relu", {t});
    t = g.add(LayerKind::Conv, p + "tap2", {t}, conv_attrs(o.width, o.out_channels, 1));
    taps.push_back(g.add(LayerKind::Relu, p + "tap2.relu", {t}));
  }
  if (o.gap_branch) taps.push_back(add_gap_branch(g, in, in, o.in_channels, o.out_channels));
  const int cat = g.add(LayerKind::Concat, "concat", taps);
  g.add(LayerKind::Conv, "fuse", {cat}, conv_attrs(o.out_channels * static_cast<int>(taps.size()), o.out_channels, 1));
  g.metadata()["head"] = "wasp";
  g.metadata()["rates"] = join_rates(o.rates);
  return g;
}

int default_head_width(HeadKind kind) noexcept {
  switch (kind) {
    case HeadKind::Aspp:
      return AsppOptions{}.branch_channels;
    case HeadKind::Cascade:
      return CascadeOptions{}.width;
    case HeadKind::Wasp:
      return WaspOptions{}.width;
    case HeadKind::Res2NetSeg:
      return 0;
  }
  return 0;
}

ModuleGraph build_head(const HeadConfig& c) {
  const int width = c.width > 0 ? c.width : default_head_width(c.kind);
  switch (c.kind) {
    case HeadKind::Aspp:
      return build_aspp({c.in_channels, width, c.out_channels, c.rates, c.fusion});
    case HeadKind::Cascade:
      return build_cascade({c.in_channels, width, c.out_channels, c.rates});
    case HeadKind::Res2NetSeg:
      return build_res2net_seg({c.in_channels, c.scales, c.res2net_rates, c.gap_channels, c.se_reduction, c.out_channels});
    case HeadKind::Wasp:
      return build_wasp({c.in_channels, width, c.out_channels, c.rates, c.gap_branch});
  }
  throw ConfigError("unknown head kind");
}

ModuleGraph build_decoder(const DecoderOptions& o) {
  require_positive(o.score_channels, "decoder score channels");
  require_positive(o.lowlevel_channels, "decoder low-level channels");
  require_positive(o.width, "decoder width");
  require_positive(o.num_classes, "number of classes");
  ModuleGraph g("decoder");
  const int score = g.add_input("score", o.score_channels);
  const int low = g.add_input("lowlevel", o.lowlevel_channels);
  const int up = g.add(LayerKind::Bilinear, "upsample2", {score}, BilinearAttrs{2});
  int x = g.add(LayerKind::Concat, "concat", {up, low});
  x = g.add(LayerKind::Conv, "conv1", {x}, conv_attrs(o.score_channels + o.lowlevel_channels, o.width, 3));
  x = g.add(LayerKind::Relu, "relu1", {x});
  x = g.add(LayerKind::Dropout, "dropout1", {x}, DropoutAttrs{o.dropout});
  x = g.add(LayerKind::Conv, "conv2", {x}, conv_attrs(o.width, o.width, 3));
  x = g.add(LayerKind::Relu, "relu2", {x});
  x = g.add(LayerKind::Dropout, "dropout2", {x}, DropoutAttrs{o.dropout});
  x = g.add(LayerKind::Conv, "classifier", {x}, conv_attrs(o.width, o.num_classes, 1));
  g.add(LayerKind::Bilinear, "upsample4", {x}, BilinearAttrs{4});
  return g;
}

BackboneDescriptor BackboneDescriptor::parse(std::string_view text) {
  auto trim = [](std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    return s;
  };
  text = trim(text);
  BackboneDescriptor d;
  if (text == "resnet101-counting") {
    d.family = Family::ResNet101Counting;
    return d;
  }
  constexpr std::string_view kToy = "toy-resnet";
  if (text.starts_with(kToy)) {
    std::string_view rest = trim(text.substr(kToy.size()));
    if (rest.empty()) return d;
    if (rest.front() == '(' && rest.back() == ')') {
      rest = rest.substr(1, rest.size() - 2);
      const auto comma = rest.find(',');
      if (comma != std::string_view::npos) {
        auto parse_int = [](std::string_view s, int& out) {
          const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
          return r.ec == std::errc{} && r.ptr == s.data() + s.size();
        };
        if (parse_int(trim(rest.substr(0, comma)), d.depth) && parse_int(trim(rest.substr(comma + 1)), d.width) &&
            d.depth >= 0 && d.width >= 1) {
          return d;
        }
      }
    }
  }
  throw ConfigError("unknown backbone descriptor '" + std::string(text) +
                    "' (expected resnet101-counting or toy-resnet(depth, width))");
}

std::string BackboneDescriptor::str() const {
  if (family == Family::ResNet101Counting) return "resnet101-counting";
  return "toy-resnet(" + std::to_string(depth) + "," + std::to_string(width) + ")";
}

namespace {

int conv_bn(ModuleGraph& g, const std::string& name, int x, int in, int out, int kernel, int stride, int rate,
            bool act) {
  const int pad = rate * (kernel - 1) / 2;
  const LayerKind kind = rate > 1 ? LayerKind::AtrousConv : LayerKind::Conv;
  x = g.add(kind, name, {x}, ConvAttrs{in, out, kernel, stride, rate, pad, false});
  x = g.add(LayerKind::BatchNorm, name + ".bn", {x}, BatchNormAttrs{out});
  if (act) x = g.add(LayerKind::Relu, name + ".relu", {x});
  return x;
}

int bottleneck(ModuleGraph& g, const std::string& p, int x, int in, int width, int stride, int rate,
               const std::string& out_name) {
  const int out = width * 4;
  int y = conv_bn(g, p + ".conv1", x, in, width, 1, 1, 1, true);
  y = conv_bn(g, p + ".conv2", y, width, width, 3, stride, rate, true);
  y = conv_bn(g, p + ".conv3", y, width, out, 1, 1, 1, false);
  int shortcut = x;
  if (in != out || stride != 1) shortcut = conv_bn(g, p + ".down", x, in, out, 1, stride, 1, false);
  const int sum = g.add(LayerKind::Sum, p + ".add", {y, shortcut});
  return g.add(LayerKind::Relu, out_name.empty() ? p + ".relu" : out_name, {sum});
}

int basic_block(ModuleGraph& g, const std::string& p, int x, int ch, const std::string& out_name) {
  int y = conv_bn(g, p + ".conv1", x, ch, ch, 3, 1, 1, true);
  y = conv_bn(g, p + ".conv2", y, ch, ch, 3, 1, 1, false);
  const int sum = g.add(LayerKind::Sum, p + ".add", {y, x});
  return g.add(LayerKind::Relu, out_name.empty() ? p + ".relu" : out_name, {sum});
}

}  // namespace

Backbone build_backbone(const BackboneDescriptor& d) {
  Backbone b;
  ModuleGraph& g = b.graph;
  g.set_name(d.str());
  int x = g.add_input("image", 3);
  if (d.family == BackboneDescriptor::Family::ResNet101Counting) {
    // Output stride 8: stages 3 and 4 keep their resolution and dilate
    // instead (rates 2 and 4).
    x = conv_bn(g, "stem", x, 3, 64, 7, 2, 1, true);
    x = g.add(LayerKind::MaxPool, "stem.pool", {x}, PoolAttrs{3, 2, 1});
    struct Stage {
      int width, blocks, stride, rate;
    };
    constexpr Stage stages[] = {{64, 3, 1, 1}, {128, 4, 2, 1}, {256, 23, 1, 2}, {512, 3, 1, 4}};
    int in = 64;
    for (int s = 0; s < 4; ++s) {
      const Stage& st = stages[s];
      for (int j = 0; j < st.blocks; ++j) {
        const std::string p = "layer" + std::to_string(s + 1) + "." + std::to_string(j);
        const bool tap = s == 0 && j == st.blocks - 1;
        x = bottleneck(g, p, x, in, st.width, j == 0 ? st.stride : 1, st.rate, tap ? "lowlevel" : "");
        in = st.width * 4;
      }
    }
    b.lowlevel_channels = 256;
    b.out_channels = in;
  } else {
    const int w = d.width;
    x = conv_bn(g, "stem", x, 3, w, 3, 2, 1, true);
    x = conv_bn(g, "down1", x, w, w, 3, 2, 1, true);
    if (d.depth == 0) x = g.add(LayerKind::Relu, "lowlevel", {x});
    for (int j = 0; j < d.depth; ++j) {
      x = basic_block(g, "block1." + std::to_string(j), x, w, j == d.depth - 1 ? "lowlevel" : "");
    }
    x = conv_bn(g, "down2", x, w, 2 * w, 3, 2, 1, true);
    for (int j = 0; j < d.depth; ++j) x = basic_block(g, "block2." + std::to_string(j), x, 2 * w, "");
    b.lowlevel_channels = w;
    b.out_channels = 2 * w;
  }
  g.set_output(x);
  g.metadata()["backbone"] = d.str();
  return b;
}

ModuleGraph build_network(const NetworkConfig& config) {
  const Backbone backbone = build_backbone(config.backbone);
  HeadConfig head_cfg = config.head;
  head_cfg.in_channels = backbone.out_channels;
  const ModuleGraph head = build_head(head_cfg);
  DecoderOptions dec_cfg = config.decoder;
  dec_cfg.score_channels = head_cfg.out_channels;
  dec_cfg.lowlevel_channels = backbone.lowlevel_channels;
  const ModuleGraph decoder = build_decoder(dec_cfg);

  ModuleGraph net(std::string(to_string(head_cfg.kind)) + "-net");
  const int image = net.add_input("image", 3);
  const int bind_image[] = {image};
  const auto bmap = net.append(backbone.graph, bind_image, "backbone.");
  const int features = bmap[static_cast<std::size_t>(backbone.graph.output())];
  const int lowlevel = bmap[static_cast<std::size_t>(backbone.graph.at("lowlevel"))];
  const int bind_head[] = {features};
  const auto hmap = net.append(head, bind_head, "head.");
  const int score = hmap[static_cast<std::size_t>(head.output())];
  const int bind_dec[] = {score, lowlevel};
  const auto dmap = net.append(decoder, bind_dec, "decoder.");
  net.set_output(dmap[static_cast<std::size_t>(decoder.output())]);

  net.metadata() = head.metadata();
  net.metadata()["backbone"] = config.backbone.str();
  net.metadata()["classes"] = std::to_string(dec_cfg.num_classes);
  return net;
}

}  // namespace waspseg
