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

#include "waspseg/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "waspseg/error.hpp"

namespace waspseg {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto p = s.find(sep, start);
    out.push_back(trim(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start)));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return out;
}

template <class N>
N parse_number(std::string_view v) {
  N out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("invalid number '" + std::string(v) + "'");
  }
  return out;
}

bool parse_bool(std::string_view v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("expected true or false, got '" + std::string(v) + "'");
}

std::vector<int> parse_ints(std::string_view v) {
  std::vector<int> out;
  if (v.empty()) return out;
  for (auto part : split(v, ',')) out.push_back(parse_number<int>(part));
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string fmt(bool v) { return v ? "true" : "false"; }

std::string fmt(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct Key {
  std::string name;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define WS_INT(key, field)                                                                  \
  Key{key, [](RunConfig& c, std::string_view v) { c.field = parse_number<int>(v); },        \
      [](const RunConfig& c) { return std::to_string(c.field); }}
#define WS_DOUBLE(key, field)                                                               \
  Key{key, [](RunConfig& c, std::string_view v) { c.field = parse_number<double>(v); },     \
      [](const RunConfig& c) { return fmt(c.field); }}
#define WS_BOOL(key, field)                                                                 \
  Key{key, [](RunConfig& c, std::string_view v) { c.field = parse_bool(v); },               \
      [](const RunConfig& c) { return fmt(c.field); }}
#define WS_STRING(key, field)                                                               \
  Key{key, [](RunConfig& c, std::string_view v) { c.field = std::string(v); },              \
      [](const RunConfig& c) { return c.field; }}
#define WS_INTS(key, field)                                                                 \
  Key{key, [](RunConfig& c, std::string_view v) { c.field = parse_ints(v); },               \
      [](const RunConfig& c) { return fmt(c.field); }}

const std::vector<Key>& key_table() {
  static const std::vector<Key> table = {
      Key{"seed", [](RunConfig& c, std::string_view v) { c.seed = parse_number<std::uint64_t>(v); },
          [](const RunConfig& c) { return std::to_string(c.seed); }},
      WS_INT("num_classes", num_classes),
      Key{"backbone", [](RunConfig& c, std::string_view v) { c.backbone = BackboneDescriptor::parse(v); },
          [](const RunConfig& c) { return c.backbone.str(); }},
      Key{"head", [](RunConfig& c, std::string_view v) { c.head.kind = parse_head_kind(v); },
          [](const RunConfig& c) { return std::string(to_string(c.head.kind)); }},
      WS_INTS("head.rates", head.rates),
      WS_INT("head.width", head.width),
      WS_INT("head.out_channels", head.out_channels),
      Key{"head.fusion", [](RunConfig& c, std::string_view v) { c.head.fusion = parse_fusion(v); },
          [](const RunConfig& c) { return std::string(to_string(c.head.fusion)); }},
      WS_BOOL("head.gap_branch", head.gap_branch),
      WS_INT("head.scales", head.scales),
      WS_INTS("head.res2net_rates", head.res2net_rates),
      WS_INT("head.gap_channels", head.gap_channels),
      WS_INT("head.se_reduction", head.se_reduction),
      WS_INT("decoder.width", decoder.width),
      WS_DOUBLE("decoder.dropout", decoder.dropout),
      WS_STRING("data.train", train_dir),
      WS_STRING("data.val", val_dir),
      WS_INT("synthetic.images", synthetic_images),
      WS_INT("synthetic.val_images", synthetic_val_images),
      WS_INT("synthetic.size", synthetic_size),
      WS_INT("train.steps", train.steps),
      WS_INT("train.batch_size", train.batch_size),
      WS_DOUBLE("train.base_lr", train.base_lr),
      WS_DOUBLE("train.power", train.power),
      WS_DOUBLE("train.momentum", train.momentum),
      WS_DOUBLE("train.weight_decay", train.weight_decay),
      WS_BOOL("train.augment", train.augment),
      WS_DOUBLE("train.scale_min", train.augment_config.scale_min),
      WS_DOUBLE("train.scale_max", train.augment_config.scale_max),
      WS_INT("train.crop", train.crop),
      WS_INT("train.eval_every", train.eval_every),
      WS_DOUBLE("crf.w1", crf.w1),
      WS_DOUBLE("crf.w2", crf.w2),
      WS_DOUBLE("crf.sigma_alpha", crf.sigma_alpha),
      WS_DOUBLE("crf.sigma_beta", crf.sigma_beta),
      WS_DOUBLE("crf.sigma_gamma", crf.sigma_gamma),
      WS_INT("crf.iterations", crf.iterations),
      WS_INT("crf.images", crf_images),
      Key{"compare.heads",
          [](RunConfig& c, std::string_view v) {
            c.compare_heads.clear();
            for (auto part : split(v, ',')) c.compare_heads.push_back(parse_head_kind(part));
          },
          [](const RunConfig& c) {
            std::string out;
            for (std::size_t i = 0; i < c.compare_heads.size(); ++i) {
              out += (i ? "," : "") + std::string(to_string(c.compare_heads[i]));
            }
            return out;
          }},
      Key{"sweep.rates",
          [](RunConfig& c, std::string_view v) {
            c.sweep_rates.clear();
            for (auto part : split(v, ';')) c.sweep_rates.push_back(parse_ints(part));
          },
          [](const RunConfig& c) {
            std::string out;
            for (std::size_t i = 0; i < c.sweep_rates.size(); ++i) out += (i ? "; " : "") + fmt(c.sweep_rates[i]);
            return out;
          }},
      WS_STRING("output.dir", output_dir),
      WS_STRING("weights", weights),
  };
  return table;
}

#undef WS_INT
#undef WS_DOUBLE
#undef WS_BOOL
#undef WS_STRING
#undef WS_INTS

}  // namespace

RunConfig::RunConfig() {
  backbone = BackboneDescriptor{BackboneDescriptor::Family::ToyResNet, 1, 16};
  head.width = 32;
  head.out_channels = 32;
  head.rates = {1, 2, 3, 4};
  head.res2net_rates = {1, 2, 3};
  head.gap_channels = 32;
  head.se_reduction = 4;
  decoder.width = 32;
  decoder.dropout = 0.1;
  train.base_lr = 0.02;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& k : key_table()) out.push_back(k.name);
    return out;
  }();
  return names;
}

void RunConfig::set(std::string_view key, std::string_view value, const std::string& where) {
  for (const auto& k : key_table()) {
    if (k.name != key) continue;
    try {
      k.set(*this, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + std::string(key) + ": " + e.what());
    }
    return;
  }
  throw ConfigError(where + ": unknown key '" + std::string(key) + "'");
}

NetworkConfig RunConfig::network() const { return network(head.kind); }

NetworkConfig RunConfig::network(HeadKind kind) const {
  NetworkConfig n;
  n.backbone = backbone;
  n.head = head;
  n.head.kind = kind;
  n.decoder = decoder;
  n.decoder.num_classes = num_classes;
  return n;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t = train;
  t.num_classes = num_classes;
  t.seed = seed;
  return t;
}

SyntheticConfig RunConfig::synthetic_train() const {
  return SyntheticConfig{synthetic_images, synthetic_size, num_classes, derive_seed(seed, 0x7a11ull)};
}

SyntheticConfig RunConfig::synthetic_val() const {
  return SyntheticConfig{synthetic_val_images, synthetic_size, num_classes, derive_seed(seed, 0x7a12ull)};
}

void RunConfig::validate() const {
  if (num_classes < 2 || num_classes > 254) throw ConfigError("num_classes must lie in [2, 254]");
  if (synthetic_images < 1) throw ConfigError("synthetic.images must be >= 1");
  if (synthetic_val_images < 0) throw ConfigError("synthetic.val_images must be >= 0");
  if (crf_images < 1) throw ConfigError("crf.images must be >= 1");
  if (compare_heads.empty()) throw ConfigError("compare.heads must not be empty");
  if (sweep_rates.empty()) throw ConfigError("sweep.rates must not be empty");
  if (output_dir.empty()) throw ConfigError("output.dir must not be empty");
  if (train_dir.empty()) synthetic_train().validate();
  train_config().validate();
  crf.validate();
  if (!(decoder.dropout >= 0.0 && decoder.dropout < 1.0)) throw ConfigError("decoder.dropout must lie in [0, 1)");
  for (HeadKind k : compare_heads) build_network(network(k));
  for (const auto& rates : sweep_rates) {
    NetworkConfig n = network();
    n.head.rates = rates;
    build_network(n);
  }
  build_network(network());
}

RunConfig parse_config(std::string_view text, const std::string& source) {
  RunConfig c;
  std::set<std::string, std::less<>> seen;
  int line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = trim(line.substr(0, hash));
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": missing key");
    if (!seen.insert(std::string(key)).second) throw ConfigError(where + ": repeated key '" + std::string(key) + "'");
    c.set(key, value, where);
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  for (const auto& k : key_table()) out += k.name + " = " + k.get(config) + "\n";
  return out;
}

}  // namespace waspseg
