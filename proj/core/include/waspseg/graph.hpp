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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "waspseg/ops.hpp"
#include "waspseg/tensor.hpp"

namespace waspseg {

enum class LayerKind {
  Input,
  Conv,
  AtrousConv,
  Relu,
  BatchNorm,
  Dropout,
  Bilinear,
  GlobalAvgPool,
  SeGate,
  Concat,
  Sum,
  Split,
  Softmax,
  MaxPool,
};

std::string_view to_string(LayerKind kind) noexcept;
LayerKind parse_layer_kind(std::string_view text);

struct ConvAttrs {
  int in_ch = 0;
  int out_ch = 0;
  int kernel = 1;
  int stride = 1;
  int rate = 1;
  int pad = 0;
  bool bias = true;
};

struct BatchNormAttrs {
  int channels = 0;
  double eps = 1e-5;
  double momentum = 0.1;
};

struct DropoutAttrs {
  double p = 0.5;
};

// scale > 0 multiplies both spatial extents; scale == 0 resizes the first
// input to the spatial extent of the second.
struct BilinearAttrs {
  int scale = 0;
};

// Channel slice [begin, end).
struct SplitAttrs {
  int begin = 0;
  int end = 0;
};

// Squeeze-and-excitation: pool -> 1x1 (C -> C / reduction) -> ReLU ->
// 1x1 (-> C) -> sigmoid -> channel-wise scale.
struct SeGateAttrs {
  int channels = 0;
  int reduction = 16;
  int hidden() const noexcept { return channels / reduction > 0 ? channels / reduction : 1; }
};

struct PoolAttrs {
  int kernel = 3;
  int stride = 2;
  int pad = 1;
};

using LayerAttrs = std::variant<std::monostate, ConvAttrs, BatchNormAttrs, DropoutAttrs,
                                BilinearAttrs, SplitAttrs, SeGateAttrs, PoolAttrs>;

enum class ParamInit { HeNormal, Zeros, Ones };

struct ParamInfo {
  std::string name;
  Shape shape;
  ParamInit init = ParamInit::Zeros;
  int fan_in = 1;
};

struct LayerSpec {
  LayerKind kind = LayerKind::Input;
  std::string name;
  std::vector<int> inputs;
  LayerAttrs attrs;
  int channels = 0;          // output channels
  std::vector<int> params;   // indices into ModuleGraph::params()
  std::vector<int> buffers;  // indices into ModuleGraph::buffers()
};

// A DAG of layers held in topological order: every layer's inputs have
// smaller ids. Parameters are described (name, shape) but not stored; see
// Weights. Channel arithmetic is checked as layers are added.
class ModuleGraph {
 public:
  ModuleGraph() = default;
  explicit ModuleGraph(std::string name) : name_(std::move(name)) {}

  const std::string& name() const noexcept { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }

  int add_input(std::string name, int channels);
  int add(LayerKind kind, std::string name, std::vector<int> inputs, LayerAttrs attrs = {});

  void set_output(int node);
  int output() const;
  const std::vector<int>& inputs() const noexcept { return inputs_; }

  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  const LayerSpec& layer(int id) const { return layers_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const noexcept { return layers_.size(); }
  std::optional<int> find(std::string_view name) const;
  // Like find() but throws ConfigError for unknown names.
  int at(std::string_view name) const;

  const std::vector<ParamInfo>& params() const noexcept { return params_; }
  const std::vector<ParamInfo>& buffers() const noexcept { return buffers_; }

  std::map<std::string, std::string>& metadata() noexcept { return metadata_; }
  const std::map<std::string, std::string>& metadata() const noexcept { return metadata_; }

  // Copies every non-input layer of `sub` into this graph, renaming with
  // `prefix`. sub's inputs are bound, in order, to the given node ids.
  // Returns the id mapping (sub id -> id in this graph).
  std::vector<int> append(const ModuleGraph& sub, std::span<const int> bindings,
                          std::string_view prefix = {});

 private:
  int add_param(std::string name, Shape shape, ParamInit init, int fan_in);
  int add_buffer(std::string name, Shape shape, ParamInit init);

  std::string name_;
  std::vector<LayerSpec> layers_;
  std::vector<int> inputs_;
  int output_ = -1;
  std::vector<ParamInfo> params_;
  std::vector<ParamInfo> buffers_;
  std::map<std::string, int, std::less<>> by_name_;
  std::map<std::string, std::string> metadata_;
};

// Exact number of trainable scalars: the sum of all parameter element counts.
// Buffers (batch-norm running statistics) are not parameters.
std::int64_t count_parameters(const ModuleGraph& graph);

// Parameter and buffer values for a graph, in the graph's declaration order.
template <class T>
struct Weights {
  std::vector<BasicTensor<T>> params;
  std::vector<BasicTensor<T>> buffers;

  template <class U>
  Weights<U> cast() const {
    Weights<U> out;
    out.params.reserve(params.size());
    for (const auto& p : params) out.params.push_back(p.template cast<U>());
    out.buffers.reserve(buffers.size());
    for (const auto& b : buffers) out.buffers.push_back(b.template cast<U>());
    return out;
  }

  void zero_grad() {
    for (auto& p : params) p.zero_grad();
  }
};

// He-normal convolution weights, zero biases, unit batch-norm scale.
Weights<float> init_weights(const ModuleGraph& graph, std::uint64_t seed);

// Throws ShapeError if weights do not match the graph's declarations.
template <class T>
void check_weights(const ModuleGraph& graph, const Weights<T>& weights);

struct ForwardOptions {
  Mode mode = Mode::Eval;
  std::uint64_t seed = 0;  // dropout masks
  bool check_finite = true;
};

template <class T>
struct NodeCache {
  BatchNormCache<T> batchnorm;
  std::vector<T> mask;                // dropout
  std::vector<std::size_t> argmax;    // max pool
  std::vector<double> se_pooled;      // (n, C)
  std::vector<double> se_hidden_pre;  // (n, hidden)
  std::vector<double> se_gate;        // (n, C)
};

// Every node's output plus whatever the backward pass needs.
template <class T>
struct Tape {
  std::vector<BasicTensor<T>> values;
  std::vector<NodeCache<T>> caches;
  Mode mode = Mode::Eval;

  const BasicTensor<T>& value(int node) const { return values.at(static_cast<std::size_t>(node)); }
  // Fingerprint of all piecewise-linear decisions (ReLU signs, pool winners).
  std::uint64_t region_signature(const ModuleGraph& graph) const;
};

template <class T>
Tape<T> forward(const ModuleGraph& graph, Weights<T>& weights,
                std::span<const BasicTensor<T>> inputs, const ForwardOptions& options = {});

// Convenience for single-input graphs; returns the output node's value.
template <class T>
BasicTensor<T> run(const ModuleGraph& graph, Weights<T>& weights, const BasicTensor<T>& input,
                   const ForwardOptions& options = {});

// Backpropagates grad_output from the output node. Parameter gradients are
// accumulated into weights.params[i].grad(); the returned vector holds the
// gradient for each graph input.
template <class T>
std::vector<BasicTensor<T>> backward(const ModuleGraph& graph, Weights<T>& weights,
                                     const Tape<T>& tape, const BasicTensor<T>& grad_output);

// Output shape of every node for the given input shapes, without computing
// anything. Throws ShapeError naming the first inconsistent layer.
std::vector<Shape> infer_shapes(const ModuleGraph& graph, std::span<const Shape> inputs);

}  // namespace waspseg
