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

#include "waspseg/graph.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "waspseg/conv.hpp"
#include "waspseg/error.hpp"
#include "waspseg/rng.hpp"

namespace waspseg {
namespace {

constexpr std::pair<LayerKind, std::string_view> kKindNames[] = {
    {LayerKind::Input, "input"},
    {LayerKind::Conv, "conv"},
    {LayerKind::AtrousConv, "atrous-conv"},
    {LayerKind::Relu, "relu"},
    {LayerKind::BatchNorm, "batchnorm"},
    {LayerKind::Dropout, "dropout"},
    {LayerKind::Bilinear, "bilinear"},
    {LayerKind::GlobalAvgPool, "global-avg-pool"},
    {LayerKind::SeGate, "se-gate"},
    {LayerKind::Concat, "concat"},
    {LayerKind::Sum, "sum"},
    {LayerKind::Split, "split"},
    {LayerKind::Softmax, "softmax"},
    {LayerKind::MaxPool, "max-pool"},
};

[[noreturn]] void layer_error(const std::string& layer, const std::string& what) {
  throw ConfigError("layer '" + layer + "': " + what);
}

template <class A>
const A& attrs_of(const LayerSpec& l) {
  const A* a = std::get_if<A>(&l.attrs);
  if (a == nullptr) layer_error(l.name, "attributes do not match kind " + std::string(to_string(l.kind)));
  return *a;
}

ConvGeometry geometry_of(const ConvAttrs& a) {
  return {{a.stride, a.stride}, {a.rate, a.rate}, {a.pad, a.pad}};
}

std::uint64_t fnv_mix(std::uint64_t h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffu;
    h *= 0x100000001b3ull;
  }
  return h;
}

template <class T>
void accumulate(std::span<T> dst, std::span<const T> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <class T>
void accumulate_grad(std::optional<BasicTensor<T>>& slot, BasicTensor<T> g) {
  if (!slot) {
    slot = std::move(g);
  } else {
    accumulate<T>(slot->data(), std::as_const(g).data());
  }
}

}  // namespace

std::string_view to_string(LayerKind kind) noexcept {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

LayerKind parse_layer_kind(std::string_view text) {
  for (const auto& [k, name] : kKindNames) {
    if (name == text) return k;
  }
  throw ConfigError("unknown layer kind '" + std::string(text) + "'");
}

int ModuleGraph::add_param(std::string name, Shape shape, ParamInit init, int fan_in) {
  params_.push_back({std::move(name), shape, init, fan_in});
  return static_cast<int>(params_.size()) - 1;
}

int ModuleGraph::add_buffer(std::string name, Shape shape, ParamInit init) {
  buffers_.push_back({std::move(name), shape, init, 1});
  return static_cast<int>(buffers_.size()) - 1;
}

int ModuleGraph::add_input(std::string name, int channels) {
  if (channels < 1) layer_error(name, "input needs at least one channel");
  if (by_name_.contains(name)) layer_error(name, "duplicate layer name");
  LayerSpec l;
  l.kind = LayerKind::Input;
  l.name = std::move(name);
  l.channels = channels;
  const int id = static_cast<int>(layers_.size());
  by_name_.emplace(l.name, id);
  layers_.push_back(std::move(l));
  inputs_.push_back(id);
  return id;
}

int ModuleGraph::add(LayerKind kind, std::string name, std::vector<int> inputs, LayerAttrs attrs) {
  if (kind == LayerKind::Input) layer_error(name, "use add_input() for inputs");
  if (by_name_.contains(name)) layer_error(name, "duplicate layer name");
  const int id = static_cast<int>(layers_.size());
  for (int in : inputs) {
    if (in < 0 || in >= id) layer_error(name, "input id " + std::to_string(in) + " is not an earlier layer");
  }
  LayerSpec l;
  l.kind = kind;
  l.name = std::move(name);
  l.inputs = std::move(inputs);
  l.attrs = std::move(attrs);

  auto in_channels = [&](std::size_t i) { return layers_[static_cast<std::size_t>(l.inputs[i])].channels; };
  auto need_inputs = [&](std::size_t lo, std::size_t hi) {
    if (l.inputs.size() < lo || l.inputs.size() > hi) {
      layer_error(l.name, std::string(to_string(kind)) + " takes " + std::to_string(lo) +
                              (lo == hi ? "" : "+") + " inputs, got " + std::to_string(l.inputs.size()));
    }
  };

  switch (kind) {
    case LayerKind::Conv:
    case LayerKind::AtrousConv: {
      need_inputs(1, 1);
      const auto& a = attrs_of<ConvAttrs>(l);
      if (a.in_ch != in_channels(0)) {
        layer_error(l.name, "inconsistent channels: expects " + std::to_string(a.in_ch) +
                                " but input provides " + std::to_string(in_channels(0)));
      }
      if (a.out_ch < 1 || a.kernel < 1 || a.stride < 1 || a.pad < 0) {
        layer_error(l.name, "invalid convolution attributes");
      }
      if (a.rate < 1) layer_error(l.name, "dilation rate must be >= 1");
      if (kind == LayerKind::Conv && a.rate != 1) {
        layer_error(l.name, "plain conv must have rate 1; use atrous-conv");
      }
      l.channels = a.out_ch;
      l.params.push_back(add_param(l.name + ".weight", Shape{a.out_ch, a.in_ch, a.kernel, a.kernel},
                                   ParamInit::HeNormal, a.in_ch * a.kernel * a.kernel));
      if (a.bias) l.params.push_back(add_param(l.name + ".bias", Shape{a.out_ch, 1, 1, 1}, ParamInit::Zeros, 1));
      break;
    }
    case LayerKind::Relu:
    case LayerKind::Softmax:
    case LayerKind::GlobalAvgPool:
      need_inputs(1, 1);
      l.channels = in_channels(0);
      break;
    case LayerKind::Dropout: {
      need_inputs(1, 1);
      const auto& a = attrs_of<DropoutAttrs>(l);
      if (!(a.p >= 0.0 && a.p < 1.0)) layer_error(l.name, "dropout probability must lie in [0, 1)");
      l.channels = in_channels(0);
      break;
    }
    case LayerKind::MaxPool: {
      need_inputs(1, 1);
      const auto& a = attrs_of<PoolAttrs>(l);
      if (a.kernel < 1 || a.stride < 1 || a.pad < 0) layer_error(l.name, "invalid pooling attributes");
      l.channels = in_channels(0);
      break;
    }
    case LayerKind::BatchNorm: {
      need_inputs(1, 1);
      const auto& a = attrs_of<BatchNormAttrs>(l);
      if (a.channels != in_channels(0)) layer_error(l.name, "inconsistent channels for batchnorm");
      l.channels = a.channels;
      const Shape s{a.channels, 1, 1, 1};
      l.params.push_back(add_param(l.name + ".gamma", s, ParamInit::Ones, 1));
      l.params.push_back(add_param(l.name + ".beta", s, ParamInit::Zeros, 1));
      l.buffers.push_back(add_buffer(l.name + ".running_mean", s, ParamInit::Zeros));
      l.buffers.push_back(add_buffer(l.name + ".running_var", s, ParamInit::Ones));
      break;
    }
    case LayerKind::Bilinear: {
      const auto& a = attrs_of<BilinearAttrs>(l);
      if (a.scale < 0) layer_error(l.name, "bilinear scale must be >= 0");
      if (a.scale > 0) {
        need_inputs(1, 1);
      } else {
        need_inputs(2, 2);
      }
      l.channels = in_channels(0);
      break;
    }
    case LayerKind::SeGate: {
      need_inputs(1, 1);
      const auto& a = attrs_of<SeGateAttrs>(l);
      if (a.channels != in_channels(0)) layer_error(l.name, "inconsistent channels for se-gate");
      if (a.reduction < 1) layer_error(l.name, "se-gate reduction must be >= 1");
      const int hidden = a.hidden();
      l.channels = a.channels;
      l.params.push_back(add_param(l.name + ".fc1.weight", Shape{hidden, a.channels, 1, 1}, ParamInit::HeNormal, a.channels));
      l.params.push_back(add_param(l.name + ".fc1.bias", Shape{hidden, 1, 1, 1}, ParamInit::Zeros, 1));
      l.params.push_back(add_param(l.name + ".fc2.weight", Shape{a.channels, hidden, 1, 1}, ParamInit::HeNormal, hidden));
      l.params.push_back(add_param(l.name + ".fc2.bias", Shape{a.channels, 1, 1, 1}, ParamInit::Zeros, 1));
      break;
    }
    case LayerKind::Concat: {
      need_inputs(1, 1024);
      int total = 0;
      for (std::size_t i = 0; i < l.inputs.size(); ++i) total += in_channels(i);
      l.channels = total;
      break;
    }
    case LayerKind::Sum: {
      need_inputs(1, 1024);
      for (std::size_t i = 1; i < l.inputs.size(); ++i) {
        if (in_channels(i) != in_channels(0)) layer_error(l.name, "sum requires equal channel counts");
      }
      l.channels = in_channels(0);
      break;
    }
    case LayerKind::Split: {
      need_inputs(1, 1);
      const auto& a = attrs_of<SplitAttrs>(l);
      if (a.begin < 0 || a.end <= a.begin || a.end > in_channels(0)) {
        layer_error(l.name, "split range [" + std::to_string(a.begin) + ", " + std::to_string(a.end) +
                                ") outside " + std::to_string(in_channels(0)) + " channels");
      }
      l.channels = a.end - a.begin;
      break;
    }
    case LayerKind::Input:
      break;
  }
  by_name_.emplace(l.name, id);
  layers_.push_back(std::move(l));
  output_ = id;
  return id;
}

void ModuleGraph::set_output(int node) {
  if (node < 0 || node >= static_cast<int>(layers_.size())) {
    throw ConfigError("set_output: no layer " + std::to_string(node));
  }
  output_ = node;
}

int ModuleGraph::output() const {
  if (output_ < 0) throw ConfigError("graph '" + name_ + "' has no output layer");
  return output_;
}

std::optional<int> ModuleGraph::find(std::string_view name) const {
  const auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

int ModuleGraph::at(std::string_view name) const {
  const auto id = find(name);
  if (!id) throw ConfigError("graph '" + name_ + "' has no layer '" + std::string(name) + "'");
  return *id;
}

std::vector<int> ModuleGraph::append(const ModuleGraph& sub, std::span<const int> bindings,
                                     std::string_view prefix) {
  if (bindings.size() != sub.inputs().size()) {
    throw ConfigError("append: graph '" + sub.name() + "' has " + std::to_string(sub.inputs().size()) +
                      " inputs, " + std::to_string(bindings.size()) + " bound");
  }
  std::vector<int> map(sub.size(), -1);
  for (std::size_t i = 0; i < bindings.size(); ++i) {
    const int src = sub.inputs()[i];
    const int dst = bindings[i];
    if (layer(dst).channels != sub.layer(src).channels) {
      layer_error(sub.layer(src).name, "bound to '" + layer(dst).name + "' with " +
                                           std::to_string(layer(dst).channels) + " channels, expected " +
                                           std::to_string(sub.layer(src).channels));
    }
    map[static_cast<std::size_t>(src)] = dst;
  }
  for (std::size_t id = 0; id < sub.size(); ++id) {
    const LayerSpec& l = sub.layers()[id];
    if (l.kind == LayerKind::Input) continue;
    std::vector<int> ins;
    ins.reserve(l.inputs.size());
    for (int in : l.inputs) ins.push_back(map[static_cast<std::size_t>(in)]);
    map[id] = add(l.kind, std::string(prefix) + l.name, std::move(ins), l.attrs);
  }
  return map;
}

std::int64_t count_parameters(const ModuleGraph& graph) {
  std::int64_t total = 0;
  for (const auto& p : graph.params()) total += static_cast<std::int64_t>(p.shape.numel());
  return total;
}

Weights<float> init_weights(const ModuleGraph& graph, std::uint64_t seed) {
  Weights<float> w;
  w.params.reserve(graph.params().size());
  for (std::size_t i = 0; i < graph.params().size(); ++i) {
    const ParamInfo& info = graph.params()[i];
    Tensor t(info.shape);
    switch (info.init) {
      case ParamInit::HeNormal: {
        Rng rng(derive_seed(seed, i));
        const double stddev = std::sqrt(2.0 / static_cast<double>(std::max(1, info.fan_in)));
        for (float& v : t.data()) v = static_cast<float>(rng.normal() * stddev);
        break;
      }
      case ParamInit::Ones:
        t.fill(1.0f);
        break;
      case ParamInit::Zeros:
        break;
    }
    w.params.push_back(std::move(t));
  }
  for (const auto& info : graph.buffers()) {
    w.buffers.emplace_back(info.shape, info.init == ParamInit::Ones ? 1.0f : 0.0f);
  }
  return w;
}

template <class T>
void check_weights(const ModuleGraph& graph, const Weights<T>& weights) {
  if (weights.params.size() != graph.params().size() || weights.buffers.size() != graph.buffers().size()) {
    throw ShapeError("weights: expected " + std::to_string(graph.params().size()) + " parameters and " +
                     std::to_string(graph.buffers().size()) + " buffers, got " +
                     std::to_string(weights.params.size()) + " and " + std::to_string(weights.buffers.size()));
  }
  for (std::size_t i = 0; i < weights.params.size(); ++i) {
    require_same_shape(weights.params[i].shape(), graph.params()[i].shape, graph.params()[i].name);
  }
  for (std::size_t i = 0; i < weights.buffers.size(); ++i) {
    require_same_shape(weights.buffers[i].shape(), graph.buffers()[i].shape, graph.buffers()[i].name);
  }
}

std::vector<Shape> infer_shapes(const ModuleGraph& graph, std::span<const Shape> inputs) {
  if (inputs.size() != graph.inputs().size()) {
    throw ShapeError("graph '" + graph.name() + "' expects " + std::to_string(graph.inputs().size()) +
                     " inputs, got " + std::to_string(inputs.size()));
  }
  std::vector<Shape> shapes(graph.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& l = graph.layer(graph.inputs()[i]);
    if (inputs[i].c != l.channels) {
      throw ShapeError("layer '" + l.name + "': input has " + std::to_string(inputs[i].c) +
                       " channels, expected " + std::to_string(l.channels));
    }
    shapes[static_cast<std::size_t>(graph.inputs()[i])] = inputs[i];
  }
  for (std::size_t id = 0; id < graph.size(); ++id) {
    const LayerSpec& l = graph.layers()[id];
    if (l.kind == LayerKind::Input) continue;
    const Shape in = shapes[static_cast<std::size_t>(l.inputs[0])];
    Shape out = in;
    out.c = l.channels;
    try {
      switch (l.kind) {
        case LayerKind::Conv:
        case LayerKind::AtrousConv: {
          const auto& a = std::get<ConvAttrs>(l.attrs);
          out.h = conv_output_extent(in.h, a.kernel, a.stride, a.rate, a.pad);
          out.w = conv_output_extent(in.w, a.kernel, a.stride, a.rate, a.pad);
          break;
        }
        case LayerKind::MaxPool: {
          const auto& a = std::get<PoolAttrs>(l.attrs);
          out.h = (in.h + 2 * a.pad - a.kernel) / a.stride + 1;
          out.w = (in.w + 2 * a.pad - a.kernel) / a.stride + 1;
          if (out.h < 1 || out.w < 1) throw ShapeError("degenerate pooling output");
          break;
        }
        case LayerKind::GlobalAvgPool:
          out.h = out.w = 1;
          break;
        case LayerKind::Bilinear: {
          const auto& a = std::get<BilinearAttrs>(l.attrs);
          if (a.scale > 0) {
            out.h = in.h * a.scale;
            out.w = in.w * a.scale;
          } else {
            const Shape ref = shapes[static_cast<std::size_t>(l.inputs[1])];
            out.h = ref.h;
            out.w = ref.w;
          }
          break;
        }
        case LayerKind::Concat:
        case LayerKind::Sum:
          for (int src : l.inputs) {
            const Shape s = shapes[static_cast<std::size_t>(src)];
            if (s.n != in.n || s.h != in.h || s.w != in.w) {
              throw ShapeError("resolution mismatch: " + in.str() + " vs " + s.str() + " from '" +
                               graph.layer(src).name + "'");
            }
          }
          break;
        default:
          break;
      }
    } catch (const ShapeError& e) {
      throw ShapeError("layer '" + l.name + "': " + e.what());
    }
    shapes[id] = out;
  }
  return shapes;
}

template <class T>
std::uint64_t Tape<T>::region_signature(const ModuleGraph& graph) const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t id = 0; id < graph.size(); ++id) {
    const LayerSpec& l = graph.layers()[id];
    if (l.kind == LayerKind::Relu) {
      const auto& x = values[static_cast<std::size_t>(l.inputs[0])];
      std::uint64_t word = 0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        word = (word << 1) | (x[i] > T{0} ? 1u : 0u);
        if ((i & 63u) == 63u) {
          h = fnv_mix(h, word);
          word = 0;
        }
      }
      h = fnv_mix(h, word);
    } else if (l.kind == LayerKind::MaxPool) {
      for (std::size_t a : caches[id].argmax) h = fnv_mix(h, a);
    } else if (l.kind == LayerKind::SeGate) {
      for (double z : caches[id].se_hidden_pre) h = fnv_mix(h, z > 0.0 ? 1u : 0u);
    }
  }
  return h;
}

template <class T>
Tape<T> forward(const ModuleGraph& graph, Weights<T>& weights, std::span<const BasicTensor<T>> inputs,
                const ForwardOptions& options) {
  check_weights(graph, weights);
  if (inputs.size() != graph.inputs().size()) {
    throw ShapeError("graph '" + graph.name() + "' expects " + std::to_string(graph.inputs().size()) +
                     " inputs, got " + std::to_string(inputs.size()));
  }
  Tape<T> tape;
  tape.mode = options.mode;
  tape.values.resize(graph.size());
  tape.caches.resize(graph.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const int id = graph.inputs()[i];
    const LayerSpec& l = graph.layer(id);
    if (inputs[i].c() != l.channels) {
      throw ShapeError("layer '" + l.name + "': input has " + std::to_string(inputs[i].c()) +
                       " channels, expected " + std::to_string(l.channels));
    }
    if (options.check_finite) require_finite(inputs[i], "layer '" + l.name + "'");
    tape.values[static_cast<std::size_t>(id)] = inputs[i];
  }

  for (std::size_t id = 0; id < graph.size(); ++id) {
    const LayerSpec& l = graph.layers()[id];
    if (l.kind == LayerKind::Input) continue;
    const auto& x = tape.values[static_cast<std::size_t>(l.inputs[0])];
    auto& cache = tape.caches[id];
    BasicTensor<T> y;
    try {
      switch (l.kind) {
        case LayerKind::Conv:
        case LayerKind::AtrousConv: {
          const auto& a = std::get<ConvAttrs>(l.attrs);
          const auto& kernel = weights.params[static_cast<std::size_t>(l.params[0])];
          std::span<const T> bias;
          if (a.bias) bias = std::as_const(weights.params[static_cast<std::size_t>(l.params[1])]).data();
          y = conv2d(x, kernel, bias, geometry_of(a));
          break;
        }
        case LayerKind::Relu:
          y = relu(x);
          break;
        case LayerKind::Softmax:
          y = softmax_channels(x);
          break;
        case LayerKind::GlobalAvgPool:
          y = global_avg_pool(x);
          break;
        case LayerKind::Dropout: {
          const auto& a = std::get<DropoutAttrs>(l.attrs);
          y = dropout(x, a.p, options.mode, derive_seed(options.seed, id), &cache.mask);
          break;
        }
        case LayerKind::MaxPool: {
          const auto& a = std::get<PoolAttrs>(l.attrs);
          y = max_pool2d(x, a.kernel, a.stride, a.pad, &cache.argmax);
          break;
        }
        case LayerKind::BatchNorm: {
          const auto& a = std::get<BatchNormAttrs>(l.attrs);
          auto& gamma = weights.params[static_cast<std::size_t>(l.params[0])];
          auto& beta = weights.params[static_cast<std::size_t>(l.params[1])];
          auto& mean = weights.buffers[static_cast<std::size_t>(l.buffers[0])];
          auto& var = weights.buffers[static_cast<std::size_t>(l.buffers[1])];
          y = batchnorm(x, std::as_const(gamma).data(), std::as_const(beta).data(), mean.data(), var.data(),
                        options.mode, a.momentum, a.eps, &cache.batchnorm);
          break;
        }
        case LayerKind::Bilinear: {
          const auto& a = std::get<BilinearAttrs>(l.attrs);
          if (a.scale > 0) {
            y = bilinear_resize(x, x.h() * a.scale, x.w() * a.scale);
          } else {
            const auto& ref = tape.values[static_cast<std::size_t>(l.inputs[1])];
            y = bilinear_resize(x, ref.h(), ref.w());
          }
          break;
        }
        case LayerKind::SeGate: {
          const auto& a = std::get<SeGateAttrs>(l.attrs);
          const int c_n = a.channels;
          const int h_n = a.hidden();
          const auto w1 = std::as_const(weights.params[static_cast<std::size_t>(l.params[0])]).data();
          const auto b1 = std::as_const(weights.params[static_cast<std::size_t>(l.params[1])]).data();
          const auto w2 = std::as_const(weights.params[static_cast<std::size_t>(l.params[2])]).data();
          const auto b2 = std::as_const(weights.params[static_cast<std::size_t>(l.params[3])]).data();
          const std::size_t hw = x.shape().plane();
          cache.se_pooled.assign(static_cast<std::size_t>(x.n()) * c_n, 0.0);
          cache.se_hidden_pre.assign(static_cast<std::size_t>(x.n()) * h_n, 0.0);
          cache.se_gate.assign(static_cast<std::size_t>(x.n()) * c_n, 0.0);
          y = BasicTensor<T>(x.shape());
          for (int n = 0; n < x.n(); ++n) {
            double* s = cache.se_pooled.data() + static_cast<std::size_t>(n) * c_n;
            double* z = cache.se_hidden_pre.data() + static_cast<std::size_t>(n) * h_n;
            double* g = cache.se_gate.data() + static_cast<std::size_t>(n) * c_n;
            for (int c = 0; c < c_n; ++c) {
              double acc = 0.0;
              for (T v : x.plane(n, c)) acc += v;
              s[c] = acc / static_cast<double>(hw);
            }
            for (int j = 0; j < h_n; ++j) {
              double acc = b1[j];
              for (int c = 0; c < c_n; ++c) acc += static_cast<double>(w1[static_cast<std::size_t>(j) * c_n + c]) * s[c];
              z[j] = acc;
            }
            for (int c = 0; c < c_n; ++c) {
              double acc = b2[c];
              for (int j = 0; j < h_n; ++j) {
                acc += static_cast<double>(w2[static_cast<std::size_t>(c) * h_n + j]) * std::max(0.0, z[j]);
              }
              g[c] = 1.0 / (1.0 + std::exp(-acc));
              const auto src = x.plane(n, c);
              auto dst = y.plane(n, c);
              for (std::size_t q = 0; q < hw; ++q) dst[q] = static_cast<T>(src[q] * g[c]);
            }
          }
          break;
        }
        case LayerKind::Concat: {
          Shape s = x.shape();
          s.c = l.channels;
          y = BasicTensor<T>(s);
          int offset = 0;
          for (int src_id : l.inputs) {
            const auto& src = tape.values[static_cast<std::size_t>(src_id)];
            if (src.n() != s.n || src.h() != s.h || src.w() != s.w) {
              throw ShapeError("resolution mismatch: " + x.shape().str() + " vs " + src.shape().str() +
                               " from '" + graph.layer(src_id).name + "'");
            }
            for (int n = 0; n < s.n; ++n) {
              for (int c = 0; c < src.c(); ++c) {
                const auto from = src.plane(n, c);
                std::copy(from.begin(), from.end(), y.plane(n, offset + c).begin());
              }
            }
            offset += src.c();
          }
          break;
        }
        case LayerKind::Sum: {
          y = x;
          for (std::size_t i = 1; i < l.inputs.size(); ++i) {
            const auto& src = tape.values[static_cast<std::size_t>(l.inputs[i])];
            require_same_shape(src.shape(), x.shape(), "sum");
            accumulate<T>(y.data(), src.data());
          }
          break;
        }
        case LayerKind::Split: {
          const auto& a = std::get<SplitAttrs>(l.attrs);
          y = BasicTensor<T>(Shape{x.n(), a.end - a.begin, x.h(), x.w()});
          for (int n = 0; n < x.n(); ++n) {
            for (int c = a.begin; c < a.end; ++c) {
              const auto from = x.plane(n, c);
              std::copy(from.begin(), from.end(), y.plane(n, c - a.begin).begin());
            }
          }
          break;
        }
        case LayerKind::Input:
          break;
      }
    } catch (const ShapeError& e) {
      throw ShapeError("layer '" + l.name + "': " + e.what());
    }
    if (options.check_finite) require_finite(y, "layer '" + l.name + "'");
    tape.values[id] = std::move(y);
  }
  return tape;
}

template <class T>
BasicTensor<T> run(const ModuleGraph& graph, Weights<T>& weights, const BasicTensor<T>& input,
                   const ForwardOptions& options) {
  auto tape = forward(graph, weights, std::span<const BasicTensor<T>>(&input, 1), options);
  return std::move(tape.values[static_cast<std::size_t>(graph.output())]);
}

template <class T>
std::vector<BasicTensor<T>> backward(const ModuleGraph& graph, Weights<T>& weights, const Tape<T>& tape,
                                     const BasicTensor<T>& grad_output) {
  const int out_id = graph.output();
  require_same_shape(grad_output.shape(), tape.value(out_id).shape(), "backward: grad_output");
  std::vector<std::optional<BasicTensor<T>>> grads(graph.size());
  grads[static_cast<std::size_t>(out_id)] = grad_output;

  auto param = [&](const LayerSpec& l, std::size_t k) -> BasicTensor<T>& {
    return weights.params[static_cast<std::size_t>(l.params[k])];
  };

  for (std::size_t id = graph.size(); id-- > 0;) {
    const LayerSpec& l = graph.layers()[id];
    if (l.kind == LayerKind::Input || !grads[id]) continue;
    const BasicTensor<T>& g = *grads[id];
    const auto& x = tape.values[static_cast<std::size_t>(l.inputs[0])];
    const auto& cache = tape.caches[id];
    auto& gx = grads[static_cast<std::size_t>(l.inputs[0])];
    switch (l.kind) {
      case LayerKind::Conv:
      case LayerKind::AtrousConv: {
        const auto& a = std::get<ConvAttrs>(l.attrs);
        auto cg = conv2d_backward(x, param(l, 0), a.bias, geometry_of(a), g);
        accumulate<T>(param(l, 0).grad(), std::as_const(cg.kernel).data());
        if (a.bias) accumulate<T>(param(l, 1).grad(), std::span<const T>(cg.bias));
        accumulate_grad(gx, std::move(cg.input));
        break;
      }
      case LayerKind::Relu:
        accumulate_grad(gx, relu_backward(x, g));
        break;
      case LayerKind::Softmax:
        accumulate_grad(gx, softmax_channels_backward(tape.values[id], g));
        break;
      case LayerKind::GlobalAvgPool:
        accumulate_grad(gx, global_avg_pool_backward(g, x.shape()));
        break;
      case LayerKind::Dropout:
        accumulate_grad(gx, dropout_backward<T>(cache.mask, g));
        break;
      case LayerKind::MaxPool:
        accumulate_grad(gx, max_pool2d_backward<T>(cache.argmax, g, x.shape()));
        break;
      case LayerKind::BatchNorm: {
        auto bg = batchnorm_backward(cache.batchnorm, std::as_const(param(l, 0)).data(), g);
        accumulate<T>(param(l, 0).grad(), std::span<const T>(bg.gamma));
        accumulate<T>(param(l, 1).grad(), std::span<const T>(bg.beta));
        accumulate_grad(gx, std::move(bg.input));
        break;
      }
      case LayerKind::Bilinear:
        accumulate_grad(gx, bilinear_resize_backward(g, x.shape()));
        break;
      case LayerKind::SeGate: {
        const auto& a = std::get<SeGateAttrs>(l.attrs);
        const int c_n = a.channels;
        const int h_n = a.hidden();
        const auto w1 = std::as_const(param(l, 0)).data();
        const auto w2 = std::as_const(param(l, 2)).data();
        auto gw1 = param(l, 0).grad();
        auto gb1 = param(l, 1).grad();
        auto gw2 = param(l, 2).grad();
        auto gb2 = param(l, 3).grad();
        const std::size_t hw = x.shape().plane();
        BasicTensor<T> dx(x.shape());
        std::vector<double> du(static_cast<std::size_t>(c_n));
        std::vector<double> dz(static_cast<std::size_t>(h_n));
        for (int n = 0; n < x.n(); ++n) {
          const double* s = cache.se_pooled.data() + static_cast<std::size_t>(n) * c_n;
          const double* z = cache.se_hidden_pre.data() + static_cast<std::size_t>(n) * h_n;
          const double* gate = cache.se_gate.data() + static_cast<std::size_t>(n) * c_n;
          for (int c = 0; c < c_n; ++c) {
            double dg = 0.0;
            const auto gy = g.plane(n, c);
            const auto xs = x.plane(n, c);
            for (std::size_t q = 0; q < hw; ++q) dg += static_cast<double>(gy[q]) * xs[q];
            du[c] = dg * gate[c] * (1.0 - gate[c]);
            gb2[c] += static_cast<T>(du[c]);
            for (int j = 0; j < h_n; ++j) {
              gw2[static_cast<std::size_t>(c) * h_n + j] += static_cast<T>(du[c] * std::max(0.0, z[j]));
            }
          }
          for (int j = 0; j < h_n; ++j) {
            double da = 0.0;
            for (int c = 0; c < c_n; ++c) da += static_cast<double>(w2[static_cast<std::size_t>(c) * h_n + j]) * du[c];
            dz[j] = z[j] > 0.0 ? da : 0.0;
            gb1[j] += static_cast<T>(dz[j]);
            for (int c = 0; c < c_n; ++c) gw1[static_cast<std::size_t>(j) * c_n + c] += static_cast<T>(dz[j] * s[c]);
          }
          for (int c = 0; c < c_n; ++c) {
            double ds = 0.0;
            for (int j = 0; j < h_n; ++j) ds += static_cast<double>(w1[static_cast<std::size_t>(j) * c_n + c]) * dz[j];
            const double spread = ds / static_cast<double>(hw);
            const auto gy = g.plane(n, c);
            auto out = dx.plane(n, c);
            for (std::size_t q = 0; q < hw; ++q) out[q] = static_cast<T>(gy[q] * gate[c] + spread);
          }
        }
        accumulate_grad(gx, std::move(dx));
        break;
      }
      case LayerKind::Concat: {
        int offset = 0;
        for (int src_id : l.inputs) {
          const auto& src = tape.values[static_cast<std::size_t>(src_id)];
          BasicTensor<T> part(src.shape());
          for (int n = 0; n < src.n(); ++n) {
            for (int c = 0; c < src.c(); ++c) {
              const auto from = g.plane(n, offset + c);
              std::copy(from.begin(), from.end(), part.plane(n, c).begin());
            }
          }
          offset += src.c();
          accumulate_grad(grads[static_cast<std::size_t>(src_id)], std::move(part));
        }
        break;
      }
      case LayerKind::Sum:
        for (int src_id : l.inputs) accumulate_grad(grads[static_cast<std::size_t>(src_id)], BasicTensor<T>(g));
        break;
      case LayerKind::Split: {
        const auto& a = std::get<SplitAttrs>(l.attrs);
        BasicTensor<T> full(x.shape());
        for (int n = 0; n < x.n(); ++n) {
          for (int c = a.begin; c < a.end; ++c) {
            const auto from = g.plane(n, c - a.begin);
            std::copy(from.begin(), from.end(), full.plane(n, c).begin());
          }
        }
        accumulate_grad(gx, std::move(full));
        break;
      }
      case LayerKind::Input:
        break;
    }
  }

  std::vector<BasicTensor<T>> result;
  result.reserve(graph.inputs().size());
  for (int in : graph.inputs()) {
    auto& slot = grads[static_cast<std::size_t>(in)];
    result.push_back(slot ? std::move(*slot) : BasicTensor<T>(tape.value(in).shape()));
  }
  return result;
}

#define WASPSEG_INSTANTIATE_GRAPH(T)                                                              \
  template void check_weights(const ModuleGraph&, const Weights<T>&);                             \
  template struct Tape<T>;                                                                        \
  template Tape<T> forward(const ModuleGraph&, Weights<T>&, std::span<const BasicTensor<T>>,      \
                           const ForwardOptions&);                                                \
  template BasicTensor<T> run(const ModuleGraph&, Weights<T>&, const BasicTensor<T>&,             \
                              const ForwardOptions&);                                             \
  template std::vector<BasicTensor<T>> backward(const ModuleGraph&, Weights<T>&, const Tape<T>&, \
                                                const BasicTensor<T>&);

WASPSEG_INSTANTIATE_GRAPH(float)
WASPSEG_INSTANTIATE_GRAPH(double)

#undef WASPSEG_INSTANTIATE_GRAPH

}  // namespace waspseg
