// Copyright 2026 The cfx Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cfx/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "cfx/error.h"

namespace cfx {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload assumes a little-endian host");

void write_container(const std::filesystem::path& path, const std::string& kind,
                     const ModelConfig& cfg, const Vocabulary& vocab,
                     const ConstNamedTensors& tensors, const nlohmann::ordered_json& run_config) {
  nlohmann::ordered_json h;
  h["format_version"] = kCheckpointVersion;
  h["kind"] = kind;
  h["config"] = model_config_to_json(cfg);
  nlohmann::ordered_json v;
  v["tokens"] = vocab.tokens();
  std::vector<std::size_t> freqs;
  for (std::size_t i = 0; i < vocab.size(); ++i) freqs.push_back(vocab.frequency(static_cast<int>(i)));
  v["frequencies"] = freqs;
  h["vocabulary"] = v;
  nlohmann::ordered_json manifest = nlohmann::ordered_json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : tensors) {
    nlohmann::ordered_json e;
    e["name"] = name;
    e["shape"] = t->shape();
    e["offset"] = offset;
    manifest.push_back(e);
    offset += t->size();
  }
  h["tensors"] = manifest;
  h["run_config"] = run_config;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << h.dump() << '\n';
  for (const auto& [name, t] : tensors) {
    auto vals = t->values();
    out.write(reinterpret_cast<const char*>(vals.data()),
              static_cast<std::streamsize>(vals.size() * sizeof(double)));
  }
  if (!out) throw InputError("failed writing " + path.string());
}

struct Container {
  nlohmann::json header;
  std::vector<char> payload;
};

Container read_container(const std::filesystem::path& path, const std::string& kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  Container c;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing checkpoint header", 1);
  try {
    c.header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed checkpoint header: ") + e.what(), 1);
  }
  c.payload.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  try {
    if (c.header.at("format_version").get<int>() != kCheckpointVersion) {
      throw SchemaError("unsupported checkpoint format_version " +
                        c.header.at("format_version").dump());
    }
    const std::string got = c.header.at("kind").get<std::string>();
    if (got != kind) throw SchemaError("checkpoint kind '" + got + "', expected '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("checkpoint header: ") + e.what());
  }
  return c;
}

void fill_tensors(const Container& c, const NamedTensors& targets) {
  std::map<std::string, Tensor*> by_name(targets.begin(), targets.end());
  const std::size_t total = c.payload.size() / sizeof(double);
  if (c.payload.size() % sizeof(double) != 0) throw SchemaError("truncated checkpoint payload");
  std::size_t filled = 0;
  try {
    for (const auto& e : c.header.at("tensors")) {
      const std::string name = e.at("name").get<std::string>();
      auto it = by_name.find(name);
      if (it == by_name.end()) throw SchemaError("unexpected tensor '" + name + "'");
      Tensor* t = it->second;
      const Shape shape = e.at("shape").get<Shape>();
      if (shape != t->shape()) {
        throw SchemaError("tensor '" + name + "' has shape " + shape_to_string(shape) +
                          ", config implies " + shape_to_string(t->shape()));
      }
      const std::size_t offset = e.at("offset").get<std::size_t>();
      if (offset + t->size() > total) throw SchemaError("tensor '" + name + "' past payload end");
      std::memcpy(t->values().data(), c.payload.data() + offset * sizeof(double),
                  t->size() * sizeof(double));
      by_name.erase(it);
      filled += t->size();
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("checkpoint manifest: ") + e.what());
  }
  if (!by_name.empty()) throw SchemaError("missing tensor '" + by_name.begin()->first + "'");
  if (filled != total) throw SchemaError("checkpoint payload has trailing data");
}

Vocabulary read_vocab(const nlohmann::json& h) {
  try {
    const auto& v = h.at("vocabulary");
    return Vocabulary::from_tokens(v.at("tokens").get<std::vector<std::string>>(),
                                   v.at("frequencies").get<std::vector<std::size_t>>());
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("checkpoint vocabulary: ") + e.what());
  }
}

nlohmann::ordered_json read_run_config(const nlohmann::json& h) {
  if (!h.contains("run_config")) return nlohmann::ordered_json::object();
  return nlohmann::ordered_json::parse(h["run_config"].dump());
}

}  // namespace

nlohmann::ordered_json model_config_to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["d"] = c.d;
  j["heads"] = c.heads;
  j["layers"] = c.layers;
  j["d_ff"] = c.d_ff;
  j["max_len"] = c.max_len;
  j["vocab_size"] = c.vocab_size;
  j["n_classes"] = c.n_classes;
  j["dropout"] = c.dropout;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.d = j.at("d").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.layers = j.at("layers").get<std::size_t>();
    c.d_ff = j.at("d_ff").get<std::size_t>();
    c.max_len = j.at("max_len").get<std::size_t>();
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.n_classes = j.at("n_classes").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

void save_classifier(const std::filesystem::path& path, const ModelParams& params,
                     const Vocabulary& vocab, const nlohmann::ordered_json& run_config) {
  if (params.config.vocab_size != vocab.size()) {
    throw SchemaError("vocabulary size does not match the model config");
  }
  write_container(path, "classifier", params.config, vocab, params.named_tensors(), run_config);
}

ClassifierCheckpoint load_classifier(const std::filesystem::path& path) {
  Container c = read_container(path, "classifier");
  ClassifierCheckpoint out;
  out.vocab = read_vocab(c.header);
  const ModelConfig cfg = model_config_from_json(c.header.value("config", nlohmann::json::object()));
  if (cfg.vocab_size != out.vocab.size()) throw SchemaError("vocabulary size mismatch");
  out.params = zeros_like(init_model(cfg, 0));
  fill_tensors(c, out.params.named_tensors());
  out.run_config = read_run_config(c.header);
  return out;
}

void save_mlm(const std::filesystem::path& path, const MlmParams& params, const Vocabulary& vocab,
              const nlohmann::ordered_json& run_config) {
  if (params.config.vocab_size != vocab.size()) {
    throw SchemaError("vocabulary size does not match the model config");
  }
  write_container(path, "mlm", params.config, vocab, params.named_tensors(), run_config);
}

MlmCheckpoint load_mlm(const std::filesystem::path& path) {
  Container c = read_container(path, "mlm");
  MlmCheckpoint out;
  out.vocab = read_vocab(c.header);
  const ModelConfig cfg = model_config_from_json(c.header.value("config", nlohmann::json::object()));
  if (cfg.vocab_size != out.vocab.size()) throw SchemaError("vocabulary size mismatch");
  out.params = init_mlm(cfg, 0);
  fill_tensors(c, out.params.named_tensors());
  out.run_config = read_run_config(c.header);
  return out;
}

}  // namespace cfx
