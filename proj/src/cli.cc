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

#include "cfx/cli.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cfx/advtrain.h"
#include "cfx/cfgen.h"
#include "cfx/checkpoint.h"
#include "cfx/config.h"
#include "cfx/corpus.h"
#include "cfx/error.h"
#include "cfx/mlm.h"
#include "cfx/parallel.h"
#include "cfx/scd.h"
#include "json.hpp"

namespace cfx {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// Bad or missing flags and unreadable inputs named on the command line.
class UsageError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

struct Common {
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::string out;
  std::string config;
};

struct ModelOpts {
  std::size_t d = 64, heads = 4, layers = 2, d_ff = 128, max_len = kMaxSequenceLength;
  double dropout = 0.1;
  std::size_t min_freq = 2;

  ModelConfig config() const {
    ModelConfig c;
    c.d = d;
    c.heads = heads;
    c.layers = layers;
    c.d_ff = d_ff;
    c.max_len = max_len;
    c.dropout = dropout;
    return c;
  }
};

struct TrainOpts {
  std::size_t epochs = 20, batch_size = 32;
  double lr = 1e-3, lr_decay = 0.95, token_mask_rate = 0.15;
};

struct AdvOpts {
  std::string mode = "none";
  double epsilon = 0.1, alpha = 0.03, adv_weight = 1.0;
  std::size_t pgd_steps = 3;

  AdvConfig config() const {
    AdvConfig a;
    a.mode = parse_adv_mode(mode);
    a.epsilon = epsilon;
    a.alpha = alpha;
    a.steps = pgd_steps;
    a.adv_weight = adv_weight;
    return a;
  }
};

struct DataOpts {
  std::string corpus;
  std::string splits = "2000-2018,2019-2021,2022-2024";
  std::uint64_t split_seed = 0;
  std::string split = "test";
};

struct ScdOpts {
  std::size_t beta = 5;
  std::string negations;
};

struct CfOpts {
  std::size_t k = 20;
  std::size_t max_edits = 0;      // 0: derive from document length
  std::string rm_max_edits;       // empty: same as max_edits; "unbounded"
  std::string methods = "REP,RM,INS";
  bool hotflip = false;
};

// Everything the command handlers need, bound to CLI11 options.
struct Options {
  Common common;
  ModelOpts model;
  TrainOpts train;
  AdvOpts adv;
  DataOpts data;
  ScdOpts scd;
  CfOpts cf;
  // gen-corpus
  std::size_t n_docs = 4000;
  std::uint64_t gen_seed = 42;
  double noise = 0.05;
  int year_start = 2000, year_end = 2024;
  // model inputs
  std::string model_path, mlm_path, lexicon_path, log_path;
  std::string text, doc_id;
  // ablation
  std::size_t seeds = 5;
  std::string modes = "none,fgm,pgd";
  std::size_t ablation_epochs = 3;
  // train-mlm
  std::size_t mlm_epochs = 6;
  double mlm_lr = 5e-3, mask_rate = 0.15;
};

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

SplitPolicy parse_splits(const std::string& s) {
  const auto parts = split_list(s, ',');
  if (parts.size() != 3) throw UsageError("--splits needs three year ranges, e.g. 2000-2018,2019-2021,2022-2024");
  YearRange r[3];
  for (int i = 0; i < 3; ++i) {
    int a = 0, b = 0;
    char dash = 0, tail = 0;
    std::istringstream in(parts[static_cast<std::size_t>(i)]);
    if (!(in >> a >> dash >> b) || dash != '-' || (in >> tail) || a > b) {
      throw UsageError("bad year range '" + parts[static_cast<std::size_t>(i)] + "'");
    }
    r[i] = {a, b};
  }
  return {r[0], r[1], r[2]};
}

void require_flag(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

void require_file(const std::string& path, const char* flag) {
  require_flag(path, flag);
  if (!fs::is_regular_file(path)) throw UsageError(std::string(flag) + ": no such file '" + path + "'");
}

// Values that look numeric or boolean are echoed as such.
ordered_json typed_value(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  if (!s.empty()) {
    try {
      std::size_t used = 0;
      if (s.find_first_of(".eE") == std::string::npos) {
        const long long v = std::stoll(s, &used);
        if (used == s.size()) return v;
      } else {
        const double v = std::stod(s, &used);
        if (used == s.size()) return v;
      }
    } catch (const std::exception&) {
    }
  }
  return s;
}

ordered_json effective_config(CLI::App* sub) {
  ordered_json j;
  j["command"] = sub->get_name();
  for (CLI::Option* o : sub->get_options()) {
    if (o->get_lnames().empty()) continue;
    const std::string name = o->get_lnames().front();
    if (name == "help" || name == "config") continue;
    if (o->get_type_size() == 0) {  // flag
      j[name] = o->count() > 0;
      continue;
    }
    const auto& res = o->results();
    j[name] = typed_value(res.empty() ? o->get_default_str() : res.front());
  }
  return j;
}

// Fills options that were not given on the command line from the config file.
void apply_config_file(CLI::App* sub, const std::string& path) {
  if (path.empty()) return;
  require_file(path, "--config");
  FlatConfig cfg = load_flat_config(path);
  std::map<std::string, CLI::Option*> by_name;
  for (CLI::Option* o : sub->get_options()) {
    if (!o->get_lnames().empty()) by_name[o->get_lnames().front()] = o;
  }
  for (const auto& [key, value] : cfg) {
    auto it = by_name.find(key);
    if (it == by_name.end() || key == "config" || key == "help") {
      throw UsageError("config file: unknown key '" + key + "' for " + sub->get_name());
    }
    CLI::Option* o = it->second;
    if (o->count() > 0) continue;  // the flag wins
    if (o->get_type_size() == 0) {
      if (value == "true") o->add_result("true");
      else if (value != "false") throw UsageError("config file: '" + key + "' expects true or false");
      else continue;
    } else {
      o->add_result(value);
    }
    try {
      o->run_callback();
    } catch (const CLI::Error& e) {
      throw UsageError("config file: " + key + ": " + e.what());
    }
  }
}

void write_text(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << content;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path);
  f << content;
  if (!f) throw InputError("failed writing " + path);
}

void write_sidecar(const std::string& path, const ordered_json& cfg) {
  if (path.empty() || path == "-") return;
  std::ofstream f(path + ".config.json", std::ios::binary);
  if (!f) throw InputError("cannot write " + path + ".config.json");
  f << cfg.dump(2) << '\n';
}

ordered_json metrics_json(const Metrics& m) {
  ordered_json j;
  j["mcc"] = m.mcc;
  j["accuracy"] = m.accuracy;
  j["f1"] = m.f1;
  j["mcc_degenerate"] = m.mcc_degenerate;
  j["f1_degenerate"] = m.f1_degenerate;
  j["tp"] = m.tp;
  j["tn"] = m.tn;
  j["fp"] = m.fp;
  j["fn"] = m.fn;
  return j;
}

SplitDataset load_split(const Options& o) {
  require_file(o.data.corpus, "--corpus");
  return preprocess_split(load_corpus(o.data.corpus), parse_splits(o.data.splits),
                          o.data.split_seed);
}

const std::vector<Document>& pick_split(const SplitDataset& d, const std::string& name) {
  if (name == "train") return d.train;
  if (name == "validation") return d.validation;
  if (name == "test") return d.test;
  throw UsageError("--split must be train, validation or test");
}

ScdConfig scd_config(const Options& o) {
  ScdConfig c;
  c.beta = o.scd.beta;
  c.seed = o.common.seed;
  if (!o.scd.negations.empty()) {
    require_file(o.scd.negations, "--negations");
    c.negations = load_negation_list(o.scd.negations);
  }
  c.validate();
  return c;
}

CfConfig cf_config(const Options& o) {
  CfConfig c;
  c.k = o.cf.k;
  if (o.cf.max_edits > 0) c.max_edits = o.cf.max_edits;
  if (o.cf.rm_max_edits == "unbounded") {
    c.rm_max_edits = kUnboundedEdits;
  } else if (!o.cf.rm_max_edits.empty()) {
    try {
      c.rm_max_edits = static_cast<std::size_t>(std::stoull(o.cf.rm_max_edits));
    } catch (const std::exception&) {
      throw UsageError("--rm-max-edits must be a count or 'unbounded'");
    }
  }
  c.methods.clear();
  for (const auto& m : split_list(o.cf.methods, ',')) c.methods.insert(parse_cf_method(m));
  c.validate();
  return c;
}

// Commands -----------------------------------------------------------------

int cmd_gen_corpus(const Options& o, const ordered_json& cfg, std::ostream& out) {
  SynthConfig sc;
  sc.n_docs = o.n_docs;
  sc.seed = o.gen_seed;
  sc.noise_rate = o.noise;
  sc.year_range = {o.year_start, o.year_end};
  sc.validate();
  const auto docs = generate_synthetic(sc);
  if (o.common.out.empty() || o.common.out == "-") {
    for (const auto& d : docs) out << document_to_json(d) << '\n';
  } else {
    save_corpus(docs, o.common.out);
    write_sidecar(o.common.out, cfg);
  }
  return kExitOk;
}

int cmd_train(const Options& o, const ordered_json& cfg, std::ostream& out, std::ostream& err) {
  require_flag(o.common.out, "--out");
  const SplitDataset data = load_split(o);
  TrainConfig tc;
  tc.epochs = o.train.epochs;
  tc.batch_size = o.train.batch_size;
  tc.learning_rate = o.train.lr;
  tc.lr_decay = o.train.lr_decay;
  tc.token_mask_rate = o.train.token_mask_rate;
  tc.seed = o.common.seed;
  const AdvConfig ac = o.adv.config();
  const Vocabulary vocab = build_vocabulary(data.train, o.model.min_freq);
  const std::string log_path = o.log_path.empty() ? o.common.out + ".log.jsonl" : o.log_path;

  auto write_log = [&](const std::vector<EpochLog>& log) {
    std::string s;
    for (const auto& e : log) s += epoch_log_json(e) + "\n";
    write_text(log_path, s, out);
    write_sidecar(log_path, cfg);
  };
  try {
    TrainResult r = train(data, vocab, o.model.config(), tc, ac);
    save_classifier(o.common.out, r.params, r.vocab, cfg);
    write_log(r.log);
    if (!r.log.empty()) {
      const auto& last = r.log.back();
      out << "epoch " << last.epoch << " val_acc " << last.validation.accuracy << " val_mcc "
          << last.validation.mcc << '\n';
    }
  } catch (const DivergenceError& e) {
    save_classifier(o.common.out, e.last_good(), vocab, cfg);
    write_log(e.log());
    err << "error: " << e.what() << " (last good parameters written to " << o.common.out << ")\n";
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_train_mlm(const Options& o, const ordered_json& cfg, std::ostream& out) {
  require_flag(o.common.out, "--out");
  const SplitDataset data = load_split(o);
  Vocabulary vocab;
  if (!o.model_path.empty()) {
    require_file(o.model_path, "--model");
    vocab = load_classifier(o.model_path).vocab;
  } else {
    vocab = build_vocabulary(data.train, o.model.min_freq);
  }
  MlmTrainConfig mc;
  mc.model = o.model.config();
  mc.train.epochs = o.mlm_epochs;
  mc.train.batch_size = o.train.batch_size;
  mc.train.learning_rate = o.mlm_lr;
  mc.train.lr_decay = o.train.lr_decay;
  mc.train.seed = o.common.seed;
  mc.mask_rate = o.mask_rate;
  // Duplicates from oversampling add nothing for the MLM.
  std::vector<Document> unique;
  std::set<std::string> seen;
  for (const auto& d : data.train)
    if (seen.insert(d.id).second) unique.push_back(d);
  const auto tr = encode_documents(unique, vocab, mc.model.max_len);
  const auto va = encode_documents(data.validation, vocab, mc.model.max_len);
  MlmTrainResult r = train_mlm(tr, va, vocab.size(), mc);
  save_mlm(o.common.out, r.params, vocab, cfg);
  const std::string log_path = o.log_path.empty() ? o.common.out + ".log.jsonl" : o.log_path;
  std::string s;
  for (const auto& e : r.log) s += mlm_epoch_log_json(e) + "\n";
  write_text(log_path, s, out);
  write_sidecar(log_path, cfg);
  return kExitOk;
}

std::vector<TokenSequence> tokenize_all(const std::vector<Document>& docs, const Vocabulary& v,
                                        std::size_t max_len) {
  std::vector<TokenSequence> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(tokenize(d.text, v, max_len));
  return out;
}

int cmd_build_lexicons(const Options& o, const ordered_json& cfg) {
  require_flag(o.common.out, "--out");
  require_file(o.model_path, "--model");
  const ScdConfig sc = scd_config(o);
  const SplitDataset data = load_split(o);
  const ClassifierCheckpoint ck = load_classifier(o.model_path);
  const auto& docs = pick_split(data, o.data.split);
  if (docs.empty()) throw DataError("split '" + o.data.split + "' is empty");
  const auto seqs = tokenize_all(docs, ck.vocab, ck.params.config.max_len);
  const Lexicons lex = build_lexicons(seqs, ck.params, ck.vocab, sc, o.common.threads);
  save_lexicons(lex, o.common.out);
  write_sidecar(o.common.out, cfg);
  return kExitOk;
}

// The document to explain: --text, or --doc-id looked up in the corpus.
struct Target {
  std::string id;
  std::string text;
};

Target resolve_target(const Options& o, const SplitDataset* data) {
  if (!o.text.empty() && !o.doc_id.empty()) throw UsageError("give --text or --doc-id, not both");
  if (!o.text.empty()) return {"text", o.text};
  if (o.doc_id.empty() || !data) throw UsageError("--text or --doc-id with --corpus is required");
  for (const auto* split : {&data->train, &data->validation, &data->test}) {
    for (const auto& d : *split)
      if (d.id == o.doc_id) return {d.id, d.text};
  }
  throw DataError("document '" + o.doc_id + "' not found after preprocessing");
}

int cmd_importance(const Options& o, const ordered_json& cfg, std::ostream& out) {
  require_file(o.model_path, "--model");
  const ScdConfig sc = scd_config(o);
  const ClassifierCheckpoint ck = load_classifier(o.model_path);
  std::optional<SplitDataset> data;
  if (!o.data.corpus.empty()) data = load_split(o);
  const Target t = resolve_target(o, data ? &*data : nullptr);
  const TokenSequence doc = tokenize(t.text, ck.vocab, ck.params.config.max_len);
  if (doc.empty()) throw InputError("document has no tokens");
  std::optional<ScdPool> pool;
  if (data) {
    pool.emplace(tokenize_all(pick_split(*data, o.data.split), ck.vocab, ck.params.config.max_len),
                 ck.params, ck.vocab, o.common.threads);
  }
  const ImportanceProfile p = importance(doc, ck.params, pool ? &*pool : nullptr, ck.vocab, sc);
  const Prediction pred = predict_ids(doc.ids, ck.params);

  ordered_json j;
  j["config"] = cfg;
  j["id"] = t.id;
  j["text"] = t.text;
  j["prediction"] = label_name(pred.label);
  j["logits"] = pred.logits;
  ordered_json words = ordered_json::array();
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const SpanScore& s = p.spans[p.span_index[i]];
    ordered_json w;
    w["position"] = i;
    w["word"] = doc.surface[i];
    w["score"] = p.scores[i];
    w["span"] = {s.span.start, s.span.end};
    w["negated"] = s.span.is_negated;
    w["samples"] = s.samples;
    w["fallback"] = s.fallback;
    words.push_back(w);
  }
  j["words"] = words;
  write_text(o.common.out, j.dump(2) + "\n", out);
  return kExitOk;
}

ordered_json counterfactual_json(const Counterfactual& cf, const MlmParams& mlm) {
  ordered_json c;
  c["method"] = cf_method_name(cf.method);
  c["revised_text"] = detokenize(cf.revised);
  ordered_json edits = ordered_json::array();
  for (const auto& e : cf.edits) {
    ordered_json x;
    x["position"] = e.position;
    x["op"] = edit_op_name(e.op);
    x["old"] = e.old_text;
    x["new"] = e.new_text;
    edits.push_back(x);
  }
  c["edits"] = edits;
  c["n_edits"] = cf.n_edits();
  c["revised_logits"] = cf.revised_logits;
  const Plausibility pl = plausibility_proxy(cf, mlm);
  c["plausibility_proxy"] = pl.empty ? ordered_json(nullptr) : ordered_json(pl.value);
  return c;
}

ordered_json explain_one(const std::string& id, const std::string& text, const TokenSequence& doc,
                         const ClassifierCheckpoint& ck, const MlmCheckpoint& mk,
                         const Lexicons& lex, const ScdPool* pool, const ScdConfig& sc,
                         const CfConfig& cc, bool hotflip) {
  const ImportanceProfile prof = importance(doc, ck.params, pool, ck.vocab, sc);
  const CounterfactualSet set = generate(doc, ck.params, mk.params, ck.vocab, lex, prof, cc);
  ordered_json j;
  j["id"] = id;
  j["original_text"] = text;
  j["prediction"] = label_name(set.original.label);
  ordered_json cfs = ordered_json::array();
  for (const auto& cf : set.items) cfs.push_back(counterfactual_json(cf, mk.params));
  if (hotflip) {
    CfConfig hc = cc;
    hc.methods = {CfMethod::kRep};
    if (auto hf = hotflip_baseline(doc, ck.params, ck.vocab, hc)) {
      cfs.push_back(counterfactual_json(*hf, mk.params));
    }
  }
  j["counterfactuals"] = cfs;
  return j;
}

int cmd_explain(const Options& o, const ordered_json& cfg, std::ostream& out) {
  require_file(o.model_path, "--model");
  require_file(o.mlm_path, "--mlm");
  require_file(o.lexicon_path, "--lexicons");
  const ScdConfig sc = scd_config(o);
  const CfConfig cc = cf_config(o);
  const ClassifierCheckpoint ck = load_classifier(o.model_path);
  const MlmCheckpoint mk = load_mlm(o.mlm_path);
  if (mk.vocab.tokens() != ck.vocab.tokens()) {
    throw SchemaError("classifier and MLM checkpoints use different vocabularies");
  }
  const Lexicons lex = load_lexicons(o.lexicon_path);
  const std::size_t max_len = ck.params.config.max_len;

  std::optional<SplitDataset> data;
  if (!o.data.corpus.empty()) data = load_split(o);
  std::optional<ScdPool> pool;
  if (data) {
    pool.emplace(tokenize_all(pick_split(*data, o.data.split), ck.vocab, max_len), ck.params,
                 ck.vocab, o.common.threads);
  }

  if (!o.text.empty() || !o.doc_id.empty()) {
    const Target t = resolve_target(o, data ? &*data : nullptr);
    const TokenSequence doc = tokenize(t.text, ck.vocab, max_len);
    if (doc.empty()) throw InputError("document has no tokens");
    const ordered_json j = explain_one(t.id, t.text, doc, ck, mk, lex, pool ? &*pool : nullptr,
                                       sc, cc, o.cf.hotflip);
    write_text(o.common.out, j.dump(2) + "\n", out);
    write_sidecar(o.common.out, cfg);
    return kExitOk;
  }
  if (!data) throw UsageError("explain needs --text, --doc-id or --corpus");

  // Whole split, one JSON line per document ordered by id.
  std::vector<Document> docs = pick_split(*data, o.data.split);
  std::sort(docs.begin(), docs.end(),
            [](const Document& a, const Document& b) { return a.id < b.id; });
  docs.erase(std::unique(docs.begin(), docs.end(),
                         [](const Document& a, const Document& b) { return a.id == b.id; }),
             docs.end());
  std::vector<std::string> lines(docs.size());
  parallel_for(docs.size(), o.common.threads, [&](std::size_t i) {
    const TokenSequence doc = tokenize(docs[i].text, ck.vocab, max_len);
    lines[i] = explain_one(docs[i].id, docs[i].text, doc, ck, mk, lex, &*pool, sc, cc,
                           o.cf.hotflip)
                   .dump();
  });
  std::string s;
  for (const auto& l : lines) s += l + "\n";
  write_text(o.common.out, s, out);
  write_sidecar(o.common.out, cfg);
  return kExitOk;
}

int cmd_evaluate(const Options& o, const ordered_json& cfg, std::ostream& out) {
  require_file(o.model_path, "--model");
  const SplitDataset data = load_split(o);
  const ClassifierCheckpoint ck = load_classifier(o.model_path);
  const auto& docs = pick_split(data, o.data.split);
  if (docs.empty()) throw DataError("split '" + o.data.split + "' is empty");
  const auto enc = encode_documents(docs, ck.vocab, ck.params.config.max_len);
  const Metrics m = evaluate(ck.params, enc, o.common.threads);
  ordered_json j;
  j["config"] = cfg;
  j["split"] = o.data.split;
  j["n_docs"] = docs.size();
  j["metrics"] = metrics_json(m);
  write_text(o.common.out, j.dump(2) + "\n", out);
  return kExitOk;
}

int cmd_ablation(const Options& o, const ordered_json& cfg, std::ostream& out) {
  const SplitDataset data = load_split(o);
  if (o.seeds == 0) throw UsageError("--seeds must be >= 1");
  std::vector<AdvMode> modes;
  for (const auto& m : split_list(o.modes, ',')) modes.push_back(parse_adv_mode(m));
  if (modes.empty()) throw UsageError("--modes is empty");
  const Vocabulary vocab = build_vocabulary(data.train, o.model.min_freq);
  const auto test = encode_documents(data.test, vocab, o.model.max_len);

  ordered_json runs = ordered_json::array();
  std::map<AdvMode, std::vector<Metrics>> by_mode;
  for (std::size_t s = 0; s < o.seeds; ++s) {
    for (AdvMode mode : modes) {
      TrainConfig tc;
      tc.epochs = o.ablation_epochs;
      tc.batch_size = o.train.batch_size;
      tc.learning_rate = o.train.lr;
      tc.lr_decay = o.train.lr_decay;
      tc.token_mask_rate = o.train.token_mask_rate;
      tc.seed = o.common.seed + s;
      AdvConfig ac = o.adv.config();
      ac.mode = mode;
      const TrainResult r = train(data, vocab, o.model.config(), tc, ac);
      const Metrics m = evaluate(r.params, test, o.common.threads);
      by_mode[mode].push_back(m);
      ordered_json run;
      run["mode"] = adv_mode_name(mode);
      run["seed"] = tc.seed;
      run["test"] = metrics_json(m);
      ordered_json log = ordered_json::array();
      for (const auto& e : r.log) log.push_back(ordered_json::parse(epoch_log_json(e)));
      run["log"] = log;
      runs.push_back(run);
    }
  }
  ordered_json summary;
  for (AdvMode mode : modes) {
    const auto& ms = by_mode[mode];
    double mcc = 0, acc = 0, f1 = 0;
    for (const auto& m : ms) {
      mcc += m.mcc;
      acc += m.accuracy;
      f1 += m.f1;
    }
    const double n = static_cast<double>(ms.size());
    ordered_json e;
    e["mean_mcc"] = mcc / n;
    e["mean_accuracy"] = acc / n;
    e["mean_f1"] = f1 / n;
    summary[adv_mode_name(mode)] = e;
  }
  ordered_json j;
  j["config"] = cfg;
  j["runs"] = runs;
  j["summary"] = summary;
  write_text(o.common.out, j.dump(2) + "\n", out);
  return kExitOk;
}

// Option wiring ------------------------------------------------------------

void add_common(CLI::App* sub, Options& o, std::uint64_t* seed = nullptr) {
  sub->add_option("--seed", seed ? *seed : o.common.seed, "Random seed")->capture_default_str();
  sub->add_option("--threads", o.common.threads, "Worker threads for per-document work")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--out", o.common.out, "Output file ('-' or omitted: stdout where allowed)");
  sub->add_option("--config", o.common.config, "Flat key = value file; flags take precedence");
}

void add_data(CLI::App* sub, Options& o, bool with_split) {
  sub->add_option("--corpus", o.data.corpus, "JSONL corpus");
  sub->add_option("--splits", o.data.splits, "Train,validation,test year ranges")
      ->capture_default_str();
  sub->add_option("--split-seed", o.data.split_seed, "Seed for training-set oversampling")
      ->capture_default_str();
  if (with_split) {
    sub->add_option("--split", o.data.split, "Split to use: train, validation or test")
        ->capture_default_str();
  }
}

void add_model(CLI::App* sub, Options& o) {
  sub->add_option("--d", o.model.d, "Model width")->capture_default_str();
  sub->add_option("--heads", o.model.heads, "Attention heads")->capture_default_str();
  sub->add_option("--layers", o.model.layers, "Encoder layers")->capture_default_str();
  sub->add_option("--d-ff", o.model.d_ff, "Feed-forward width")->capture_default_str();
  sub->add_option("--max-len", o.model.max_len, "Maximum tokens per document")
      ->capture_default_str();
  sub->add_option("--dropout", o.model.dropout, "Dropout rate")->capture_default_str();
  sub->add_option("--min-freq", o.model.min_freq, "Minimum token count for the vocabulary")
      ->capture_default_str();
}

void add_train(CLI::App* sub, Options& o, bool with_epochs) {
  if (with_epochs) {
    sub->add_option("--epochs", o.train.epochs, "Training epochs")->capture_default_str();
  }
  sub->add_option("--batch-size", o.train.batch_size, "Mini-batch size")->capture_default_str();
  sub->add_option("--lr", o.train.lr, "Adam learning rate")->capture_default_str();
  sub->add_option("--lr-decay", o.train.lr_decay, "Per-epoch learning-rate factor")
      ->capture_default_str();
  sub->add_option("--token-mask-rate", o.train.token_mask_rate,
                  "Fraction of training tokens replaced by MASK")
      ->capture_default_str();
}

void add_adv(CLI::App* sub, Options& o, bool with_mode) {
  if (with_mode) {
    sub->add_option("--mode", o.adv.mode, "Adversarial mode: none, fgm or pgd")
        ->capture_default_str();
  }
  sub->add_option("--epsilon", o.adv.epsilon, "L2 perturbation budget")->capture_default_str();
  sub->add_option("--alpha", o.adv.alpha, "PGD step size")->capture_default_str();
  sub->add_option("--pgd-steps", o.adv.pgd_steps, "PGD iterations")->capture_default_str();
  sub->add_option("--adv-weight", o.adv.adv_weight, "Weight of the adversarial loss")
      ->capture_default_str();
}

void add_scd(CLI::App* sub, Options& o) {
  sub->add_option("--beta", o.scd.beta, "Documents sampled per phrase")->capture_default_str();
  sub->add_option("--negations", o.scd.negations, "Negation word list, one per line");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"cfx: adversarially trained text classifier with counterfactual explanations"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen-corpus", "Write a synthetic JSONL corpus");
  add_common(gen, o, &o.gen_seed);
  gen->add_option("--n-docs", o.n_docs, "Number of documents")->capture_default_str();
  gen->add_option("--noise", o.noise, "Distractor-word rate")->capture_default_str();
  gen->add_option("--year-start", o.year_start, "First publication year")->capture_default_str();
  gen->add_option("--year-end", o.year_end, "Last publication year")->capture_default_str();

  auto* tr = app.add_subcommand("train", "Train the classifier");
  add_common(tr, o);
  add_data(tr, o, false);
  add_model(tr, o);
  add_train(tr, o, true);
  add_adv(tr, o, true);
  tr->add_option("--log", o.log_path, "Per-epoch JSONL log (default <out>.log.jsonl)");

  auto* tm = app.add_subcommand("train-mlm", "Train the masked language model");
  add_common(tm, o);
  add_data(tm, o, false);
  add_model(tm, o);
  tm->add_option("--model", o.model_path, "Classifier checkpoint whose vocabulary to share");
  tm->add_option("--epochs", o.mlm_epochs, "Training epochs")->capture_default_str();
  tm->add_option("--lr", o.mlm_lr, "Adam learning rate")->capture_default_str();
  tm->add_option("--batch-size", o.train.batch_size, "Mini-batch size")->capture_default_str();
  tm->add_option("--lr-decay", o.train.lr_decay, "Per-epoch learning-rate factor")
      ->capture_default_str();
  tm->add_option("--mask-rate", o.mask_rate, "Fraction of positions masked")
      ->capture_default_str();
  tm->add_option("--log", o.log_path, "Per-epoch JSONL log (default <out>.log.jsonl)");

  auto* bl = app.add_subcommand("build-lexicons", "Build the POS/NEG lexicon TSV");
  add_common(bl, o);
  add_data(bl, o, true);
  add_scd(bl, o);
  bl->add_option("--model", o.model_path, "Classifier checkpoint");

  auto* im = app.add_subcommand("importance", "Per-word importance scores for one document");
  add_common(im, o);
  add_data(im, o, true);
  add_scd(im, o);
  im->add_option("--model", o.model_path, "Classifier checkpoint");
  im->add_option("--text", o.text, "Document text");
  im->add_option("--doc-id", o.doc_id, "Document id in --corpus");

  auto* ex = app.add_subcommand("explain", "Counterfactual explanations");
  add_common(ex, o);
  add_data(ex, o, true);
  add_scd(ex, o);
  ex->add_option("--model", o.model_path, "Classifier checkpoint");
  ex->add_option("--mlm", o.mlm_path, "MLM checkpoint");
  ex->add_option("--lexicons", o.lexicon_path, "Lexicon TSV");
  ex->add_option("--text", o.text, "Document text");
  ex->add_option("--doc-id", o.doc_id, "Document id in --corpus");
  ex->add_option("--k", o.cf.k, "MLM candidates per slot")->capture_default_str();
  ex->add_option("--max-edits", o.cf.max_edits, "Edit budget (0: min(10, ceil(0.2 n)))")
      ->capture_default_str();
  ex->add_option("--rm-max-edits", o.cf.rm_max_edits, "Removal budget, or 'unbounded'");
  ex->add_option("--methods", o.cf.methods, "Comma-separated REP,RM,INS")->capture_default_str();
  ex->add_flag("--hotflip", o.cf.hotflip, "Also run the gradient substitution baseline");

  auto* ev = app.add_subcommand("evaluate", "Metrics of a classifier on a split");
  add_common(ev, o);
  add_data(ev, o, true);
  ev->add_option("--model", o.model_path, "Classifier checkpoint");

  auto* ab = app.add_subcommand("ablation", "Adversarial-training ablation over seeds");
  add_common(ab, o);
  add_data(ab, o, false);
  add_model(ab, o);
  add_train(ab, o, false);
  add_adv(ab, o, false);
  ab->add_option("--epochs", o.ablation_epochs, "Training epochs per run")->capture_default_str();
  ab->add_option("--seeds", o.seeds, "Seeds per mode (seed, seed+1, ...)")->capture_default_str();
  ab->add_option("--modes", o.modes, "Comma-separated modes")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    apply_config_file(sub, o.common.config);
  } catch (const Error& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }
  try {
    const ordered_json cfg = effective_config(sub);
    const std::string name = sub->get_name();
    if (name == "gen-corpus") return cmd_gen_corpus(o, cfg, out);
    if (name == "train") return cmd_train(o, cfg, out, err);
    if (name == "train-mlm") return cmd_train_mlm(o, cfg, out);
    if (name == "build-lexicons") return cmd_build_lexicons(o, cfg);
    if (name == "importance") return cmd_importance(o, cfg, out);
    if (name == "explain") return cmd_explain(o, cfg, out);
    if (name == "evaluate") return cmd_evaluate(o, cfg, out);
    if (name == "ablation") return cmd_ablation(o, cfg, out);
    throw UsageError("unknown command " + name);
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace cfx
