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

#include "waspseg/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "waspseg/error.hpp"

namespace waspseg {

namespace {

using nlohmann::json;

json attrs_to_json(const LayerAttrs& attrs) {
  return std::visit(
      [](const auto& a) -> json {
        using A = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<A, ConvAttrs>) {
          return {{"in", a.in_ch}, {"out", a.out_ch}, {"kernel", a.kernel}, {"stride", a.stride},
                  {"rate", a.rate}, {"pad", a.pad}, {"bias", a.bias}};
        } else if constexpr (std::is_same_v<A, BatchNormAttrs>) {
          return {{"channels", a.channels}, {"eps", a.eps}, {"momentum", a.momentum}};
        } else if constexpr (std::is_same_v<A, DropoutAttrs>) {
          return {{"p", a.p}};
        } else if constexpr (std::is_same_v<A, BilinearAttrs>) {
          return {{"scale", a.scale}};
        } else if constexpr (std::is_same_v<A, SplitAttrs>) {
          return {{"begin", a.begin}, {"end", a.end}};
        } else if constexpr (std::is_same_v<A, SeGateAttrs>) {
          return {{"channels", a.channels}, {"reduction", a.reduction}};
        } else if constexpr (std::is_same_v<A, PoolAttrs>) {
          return {{"kernel", a.kernel}, {"stride", a.stride}, {"pad", a.pad}};
        } else {
          return json::object();
        }
      },
      attrs);
}

LayerAttrs attrs_from_json(LayerKind kind, const json& j) {
  switch (kind) {
    case LayerKind::Conv:
    case LayerKind::AtrousConv:
      return ConvAttrs{j.at("in").get<int>(),     j.at("out").get<int>(),  j.at("kernel").get<int>(),
                       j.at("stride").get<int>(), j.at("rate").get<int>(), j.at("pad").get<int>(),
                       j.at("bias").get<bool>()};
    case LayerKind::BatchNorm:
      return BatchNormAttrs{j.at("channels").get<int>(), j.at("eps").get<double>(),
                            j.at("momentum").get<double>()};
    case LayerKind::Dropout:
      return DropoutAttrs{j.at("p").get<double>()};
    case LayerKind::Bilinear:
      return BilinearAttrs{j.at("scale").get<int>()};
    case LayerKind::Split:
      return SplitAttrs{j.at("begin").get<int>(), j.at("end").get<int>()};
    case LayerKind::SeGate:
      return SeGateAttrs{j.at("channels").get<int>(), j.at("reduction").get<int>()};
    case LayerKind::MaxPool:
      return PoolAttrs{j.at("kernel").get<int>(), j.at("stride").get<int>(), j.at("pad").get<int>()};
    default:
      return {};
  }
}

template <class U>
void put(std::ostream& out, U value) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

class Reader {
 public:
  Reader(std::istream& in, const std::string& source) : in_(in), source_(source) {}

  [[noreturn]] void fail(const std::string& msg) const {
    throw DataError(source_ + ": byte " + std::to_string(offset_) + ": " + msg);
  }

  void bytes(void* dst, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) fail(std::string("truncated ") + what);
    offset_ += n;
  }

  template <class U>
  U get(const char* what) {
    U v;
    bytes(&v, sizeof v, what);
    return v;
  }

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::istream& in_;
  const std::string& source_;
  std::size_t offset_ = 0;
};

}  // namespace

std::string graph_to_json(const ModuleGraph& graph) {
  json layers = json::array();
  for (const auto& l : graph.layers()) {
    json entry = {{"kind", std::string(to_string(l.kind))}, {"name", l.name}, {"inputs", l.inputs}};
    if (l.kind == LayerKind::Input) {
      entry["channels"] = l.channels;
    } else {
      entry["attrs"] = attrs_to_json(l.attrs);
    }
    layers.push_back(std::move(entry));
  }
  json j = {{"name", graph.name()},
            {"inputs", graph.inputs()},
            {"output", graph.output()},
            {"metadata", graph.metadata()},
            {"layers", std::move(layers)}};
  return j.dump(1);
}

ModuleGraph graph_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("graph: invalid JSON: ") + e.what());
  }
  try {
    ModuleGraph g(j.at("name").get<std::string>());
    for (const auto& l : j.at("layers")) {
      const LayerKind kind = parse_layer_kind(l.at("kind").get<std::string>());
      const auto name = l.at("name").get<std::string>();
      if (kind == LayerKind::Input) {
        g.add_input(name, l.at("channels").get<int>());
      } else {
        g.add(kind, name, l.at("inputs").get<std::vector<int>>(), attrs_from_json(kind, l.at("attrs")));
      }
    }
    if (j.at("inputs").get<std::vector<int>>() != g.inputs()) throw DataError("graph: input list does not match layers");
    g.set_output(j.at("output").get<int>());
    g.metadata() = j.at("metadata").get<std::map<std::string, std::string>>();
    return g;
  } catch (const json::exception& e) {
    throw DataError(std::string("graph: ") + e.what());
  }
}

const Tensor& Container::get(std::string_view name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw DataError("container: no tensor named '" + std::string(name) + "'");
}

void write_container(std::ostream& out, const Container& container) {
  out.write("WSPC", 4);
  put<std::uint32_t>(out, kContainerVersion);
  put<std::uint64_t>(out, container.metadata.size());
  out.write(container.metadata.data(), static_cast<std::streamsize>(container.metadata.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(container.tensors.size()));
  for (const auto& [name, t] : container.tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    for (int d : {t.n(), t.c(), t.h(), t.w()}) put<std::int32_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
  }
  if (!out) throw DataError("container: write failed");
}

Container read_container(std::istream& in, const std::string& source) {
  Reader r(in, source);
  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, "WSPC", 4) != 0) {
    throw DataError(source + ": byte 0: bad magic, expected WSPC");
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kContainerVersion) r.fail("unsupported version " + std::to_string(version));
  Container c;
  const auto meta_len = r.get<std::uint64_t>("metadata length");
  if (meta_len > (1ull << 32)) r.fail("implausible metadata length");
  c.metadata.resize(meta_len);
  r.bytes(c.metadata.data(), meta_len, "metadata");
  const auto count = r.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint32_t>("name length");
    if (name_len > 4096) r.fail("implausible name length");
    std::string name(name_len, '\0');
    r.bytes(name.data(), name_len, "name");
    Shape s;
    s.n = r.get<std::int32_t>("shape");
    s.c = r.get<std::int32_t>("shape");
    s.h = r.get<std::int32_t>("shape");
    s.w = r.get<std::int32_t>("shape");
    if (!s.valid()) r.fail("negative extent in shape of '" + name + "'");
    if (s.numel() > (1ull << 31)) r.fail("implausible tensor size for '" + name + "'");
    Tensor t(s);
    r.bytes(t.data().data(), t.size() * sizeof(float), "tensor data");
    c.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (in.peek() != std::char_traits<char>::eof()) r.fail("trailing bytes");
  return c;
}

void save_container(const std::filesystem::path& path, const Container& container) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  write_container(out, container);
}

Container load_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open");
  return read_container(in, path.string());
}

Container weights_container(const ModuleGraph& graph, const Weights<float>& weights) {
  check_weights(graph, weights);
  Container c;
  c.metadata = graph_to_json(graph);
  for (std::size_t i = 0; i < weights.params.size(); ++i) {
    Tensor t(weights.params[i].shape(), weights.params[i].vector());
    c.tensors.emplace_back(graph.params()[i].name, std::move(t));
  }
  for (std::size_t i = 0; i < weights.buffers.size(); ++i) {
    c.tensors.emplace_back(graph.buffers()[i].name, weights.buffers[i]);
  }
  return c;
}

std::pair<ModuleGraph, Weights<float>> weights_from_container(const Container& container) {
  ModuleGraph g = graph_from_json(container.metadata);
  Weights<float> w;
  for (const auto& p : g.params()) w.params.push_back(container.get(p.name));
  for (const auto& b : g.buffers()) w.buffers.push_back(container.get(b.name));
  if (container.tensors.size() != w.params.size() + w.buffers.size()) {
    throw DataError("container: tensor count does not match the graph");
  }
  check_weights(g, w);
  return {std::move(g), std::move(w)};
}

}  // namespace waspseg
