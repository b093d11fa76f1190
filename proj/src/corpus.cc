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

#include "cfx/corpus.h"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "cfx/error.h"
#include "cfx/random.h"
#include "cfx/text.h"
#include "json.hpp"

namespace cfx {
namespace {

using namespace std::chrono;

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[uniform_index(rng, v.size())];
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

struct Slots {
  std::string acquirer;
  std::string target;
};

std::string fill(std::string pattern, const TemplateBank& bank, const Slots& slots, Rng& rng) {
  replace_all(pattern, "{acq}", capitalize(slots.acquirer));
  replace_all(pattern, "{tgt}", capitalize(slots.target));
  // Each placeholder draws independently.
  const std::pair<const char*, const std::vector<std::string>*> pools[] = {
      {"{money}", &bank.amounts}, {"{day}", &bank.days},         {"{adv}", &bank.adverbs},
      {"{city}", &bank.cities},   {"{industry}", &bank.industries}};
  for (const auto& [key, pool] : pools) {
    std::size_t pos;
    while ((pos = pattern.find(key)) != std::string::npos) {
      pattern.replace(pos, std::char_traits<char>::length(key), pick(*pool, rng));
    }
  }
  std::size_t pos;
  while ((pos = pattern.find("{pct}")) != std::string::npos) {
    pattern.replace(pos, 5, std::to_string(2 + uniform_index(rng, 14)));
  }
  return pattern;
}

std::set<std::string> words_of(const std::vector<std::string>& phrases) {
  std::set<std::string> out;
  for (const auto& p : phrases)
    for (auto& w : lowercase_words(p)) out.insert(w);
  return out;
}

}  // namespace

const char* label_name(Label l) { return l == Label::kCompleted ? "completed" : "rumour"; }

Label parse_label(const std::string& s) {
  if (s == "completed") return Label::kCompleted;
  if (s == "rumour") return Label::kRumour;
  throw SchemaError("unknown label '" + s + "'");
}

std::string format_date(Date d) {
  const year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

Date parse_date(const std::string& s) {
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  if (s.size() != 10 || std::sscanf(s.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3) {
    throw InputError("malformed date '" + s + "'");
  }
  const year_month_day ymd{year{y}, month{m}, day{d}};
  if (!ymd.ok()) throw InputError("invalid date '" + s + "'");
  return sys_days{ymd};
}

int year_of(Date d) { return static_cast<int>(year_month_day{d}.year()); }

// ---------------------------------------------------------------------------
// Templates

std::set<std::string> TemplateBank::positive_cues() const {
  std::set<std::string> out;
  for (const auto& t : cue_templates) out.merge(words_of(t.completed_fills));
  return out;
}

std::set<std::string> TemplateBank::negative_cues() const {
  std::set<std::string> out;
  for (const auto& t : cue_templates) out.merge(words_of(t.rumour_fills));
  for (const auto& w : positive_cues()) out.erase(w);
  return out;
}

TemplateBank default_template_bank() {
  TemplateBank b;
  b.cue_templates = {
      {"{acq} is {cue} a merger with {tgt}",
       {"announcing", "finalizing", "completing"},
       {"considering", "exploring", "weighing", "discussing"}},
      {"{acq} is {cue} {tgt} for {money}",
       {"buying", "acquiring"},
       {"potentially buying", "potentially acquiring", "possibly buying", "possibly acquiring",
        "eyeing", "courting"}},
      {"{acq} {cue} the acquisition of {tgt} on {day}",
       {"announced", "completed", "finalized", "closed"},
       {"mulled", "contemplated", "weighed"}},
      {"{acq} and {tgt} are in {cue} over a deal",
       {"agreement"},
       {"talks", "discussions", "negotiations"}},
      {"the deal is {cue} {adv}", {"closing"}, {"not closing"}},
      {"sources said there can be {cue} a deal will complete", {"certainty"}, {"no certainty"}},
      {"the board {cue} the proposed transaction",
       {"approved", "signed", "ratified"},
       {"questioned", "postponed", "reconsidered"}},
  };
  b.filler_templates = {
      "{acq} is a {industry} company based in {city}",
      "shares of {tgt} rose {pct} percent on {day}",
      "{tgt} reported revenue of {money} last year",
      "the companies declined to comment on {day}",
      "{tgt} has offices in {city} and employs staff across the {industry} sector",
      "analysts expect the {industry} sector to grow next year",
  };
  b.distractors = {"reuters", "update", "exclusive", "report", "newswire", "editor"};
  b.companies = {"acme",    "globex",   "initech",  "umbrella", "hooli",   "vandelay",
                 "stark",   "wayne",    "tyrell",   "cyberdyne", "soylent", "wonka",
                 "gringotts", "oscorp", "massive",  "aperture", "monarch", "nakatomi",
                 "pendant", "dunder",   "sterling", "prestige", "virtucon", "zorg",
                 "paper",   "axiom",    "oceanic",  "dharma",   "rekall",  "veridian"};
  b.cities = {"boston", "chicago", "houston", "denver", "seattle",
              "atlanta", "miami", "austin", "phoenix", "dallas"};
  b.industries = {"software", "retail", "energy", "biotech", "media",
                  "banking", "insurance", "logistics", "mining", "telecom"};
  b.amounts = {"usd 1.5 billion", "usd 2.4 billion", "usd 3.2 billion", "usd 500 million",
               "usd 750 million", "usd 8.1 billion", "usd 12 billion", "usd 40 million"};
  b.days = {"monday", "tuesday", "wednesday", "thursday", "friday"};
  b.adverbs = {"currently", "soon", "this week", "next month"};
  return b;
}

void SynthConfig::validate() const {
  if (n_docs < 10) throw ConfigError("n_docs must be at least 10");
  if (!(noise_rate >= 0.0 && noise_rate < 1.0)) throw ConfigError("noise_rate must be in [0, 1)");
  if (year_range.first > year_range.second) throw ConfigError("year_range is reversed");
  if (template_bank.cue_templates.empty()) throw ConfigError("template bank has no cue templates");
  for (const auto& t : template_bank.cue_templates) {
    if (t.completed_fills.empty() || t.rumour_fills.empty() ||
        t.pattern.find("{cue}") == std::string::npos) {
      throw ConfigError("cue template '" + t.pattern + "' needs a {cue} slot and both fills");
    }
  }
  if (template_bank.companies.size() < 2) throw ConfigError("need at least two companies");
}

// ---------------------------------------------------------------------------
// Generation

std::vector<Document> generate_synthetic(const SynthConfig& config) {
  config.validate();
  const TemplateBank& bank = config.template_bank;
  Rng rng(config.seed);
  std::vector<Document> docs;
  docs.reserve(config.n_docs);
  const int n_years = config.year_range.second - config.year_range.first + 1;
  const NegationList negations = default_negation_list();

  // Templates with at least one rumour fill sharing no word with the
  // completed fills. Only these can carry a Completed document on their own.
  std::vector<std::size_t> contrastive;
  for (std::size_t k = 0; k < bank.cue_templates.size(); ++k) {
    const auto pos = words_of(bank.cue_templates[k].completed_fills);
    for (const auto& fill : bank.cue_templates[k].rumour_fills) {
      const auto words = lowercase_words(fill);
      if (std::none_of(words.begin(), words.end(),
                       [&](const std::string& w) { return pos.count(w) > 0; })) {
        contrastive.push_back(k);
        break;
      }
    }
  }
  if (contrastive.empty()) {
    throw ConfigError("template bank needs a cue template whose fills share no word");
  }

  for (std::size_t i = 0; i < config.n_docs; ++i) {
    Document doc;
    char idbuf[32];
    std::snprintf(idbuf, sizeof idbuf, "doc-%06zu", i);
    doc.id = idbuf;
    doc.label = i % 2 == 0 ? Label::kCompleted : Label::kRumour;

    Slots slots;
    slots.acquirer = pick(bank.companies, rng);
    do {
      slots.target = pick(bank.companies, rng);
    } while (slots.target == slots.acquirer);
    doc.acquirer = slots.acquirer;
    doc.target = slots.target;

    // One or two distinct cue sentences of the document's class plus one or
    // two neutral sentences, in random order. A Completed document's first
    // cue comes from a contrastive template: a lone "closing" says nothing
    // that the absence of "not" does not already say.
    std::vector<std::size_t> cue_ids;
    if (doc.label == Label::kCompleted) {
      cue_ids.push_back(pick(contrastive, rng));
    } else {
      cue_ids.push_back(uniform_index(rng, bank.cue_templates.size()));
    }
    std::vector<std::size_t> rest;
    for (std::size_t k = 0; k < bank.cue_templates.size(); ++k)
      if (k != cue_ids[0]) rest.push_back(k);
    if (!rest.empty() && uniform_index(rng, 2) == 1) cue_ids.push_back(pick(rest, rng));
    const std::size_t n_cues = cue_ids.size();
    const std::size_t n_fillers = bank.filler_templates.empty() ? 0 : 1 + uniform_index(rng, 2);

    std::vector<std::string> sentences;
    for (std::size_t k = 0; k < n_cues; ++k) {
      const CueTemplate& t = bank.cue_templates[cue_ids[k]];
      const auto& fills = doc.label == Label::kCompleted ? t.completed_fills : t.rumour_fills;
      std::string s = t.pattern;
      replace_all(s, "{cue}", pick(fills, rng));
      sentences.push_back(fill(std::move(s), bank, slots, rng));
    }
    for (std::size_t k = 0; k < n_fillers; ++k) {
      sentences.push_back(fill(pick(bank.filler_templates, rng), bank, slots, rng));
    }
    shuffle(sentences, rng);

    std::string text;
    for (const auto& s : sentences) {
      std::istringstream words(s);
      std::string w;
      bool first = true;
      while (words >> w) {
        if (!text.empty()) text.push_back(' ');
        text += first ? capitalize(w) : w;
        first = false;
        // Never split a negation word from the word it scopes over.
        if (config.noise_rate > 0.0 && !bank.distractors.empty() && !negations.count(w) &&
            uniform01(rng) < config.noise_rate) {
          text.push_back(' ');
          text += pick(bank.distractors, rng);
        }
      }
      text.push_back('.');
    }
    doc.text = std::move(text);

    const int yr = config.year_range.first + static_cast<int>(uniform_index(rng, n_years));
    const Date jan1 = sys_days{year{yr} / January / 1};
    doc.published = jan1 + days{static_cast<int>(uniform_index(rng, 365))};
    if (year_of(doc.published) != yr) doc.published = jan1;
    if (doc.label == Label::kCompleted) {
      doc.announce = doc.published + days{static_cast<int>(uniform_index(rng, 124)) - 3};
    }
    doc.acquirer_us = uniform01(rng) < 0.7;
    doc.target_us = uniform01(rng) < 0.7;
    docs.push_back(std::move(doc));
  }
  return docs;
}

// ---------------------------------------------------------------------------
// Preprocessing

SplitDataset preprocess_split(const std::vector<Document>& docs, const SplitPolicy& policy,
                              std::uint64_t seed) {
  SplitDataset out;
  out.policy = policy;
  std::map<int, std::vector<const Document*>> train_by_year;
  for (const Document& doc : docs) {
    if (!doc.acquirer_us && !doc.target_us) continue;
    if (doc.announce && (*doc.announce - doc.published).count() < 1) continue;
    const int y = year_of(doc.published);
    if (policy.train.contains(y)) {
      train_by_year[y].push_back(&doc);
    } else if (policy.validation.contains(y)) {
      out.validation.push_back(doc);
    } else if (policy.test.contains(y)) {
      out.test.push_back(doc);
    } else {
      throw DataError("document " + doc.id + " published in " + std::to_string(y) +
                      ", outside every split range");
    }
  }

  Rng rng = derive_rng(seed, {0x0a5a});
  for (auto& [y, year_docs] : train_by_year) {
    std::vector<const Document*> by_class[2];
    for (const Document* d : year_docs) by_class[to_index(d->label)].push_back(d);
    for (const Document* d : year_docs) out.train.push_back(*d);
    const std::size_t target = std::max(by_class[0].size(), by_class[1].size());
    for (auto& cls : by_class) {
      if (cls.empty()) {
        throw DataError("training year " + std::to_string(y) +
                        " has no documents of one class; cannot oversample");
      }
      for (std::size_t k = cls.size(); k < target; ++k) {
        out.train.push_back(*cls[uniform_index(rng, cls.size())]);
      }
    }
  }

  if (out.train.empty()) throw DataError("train split is empty after filtering");
  if (out.validation.empty()) throw DataError("validation split is empty after filtering");
  if (out.test.empty()) throw DataError("test split is empty after filtering");
  return out;
}

// ---------------------------------------------------------------------------
// JSONL

namespace {

using ojson = nlohmann::ordered_json;

const char* const kFields[] = {"id",       "text",   "label",       "published", "announce",
                               "acquirer", "target", "acquirer_us", "target_us"};

Document document_from_json(const nlohmann::json& j, std::size_t line) {
  if (!j.is_object()) throw ParseError("record is not a JSON object", line);
  for (const char* f : kFields) {
    if (!j.contains(f)) throw ParseError(std::string("missing field \"") + f + "\"", line);
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find_if(std::begin(kFields), std::end(kFields),
                     [&](const char* f) { return it.key() == f; }) == std::end(kFields)) {
      throw SchemaError("line " + std::to_string(line) + ": unexpected field \"" + it.key() +
                        "\"");
    }
  }
  Document d;
  try {
    d.id = j.at("id").get<std::string>();
    d.text = j.at("text").get<std::string>();
    d.label = parse_label(j.at("label").get<std::string>());
    d.published = parse_date(j.at("published").get<std::string>());
    if (!j.at("announce").is_null()) d.announce = parse_date(j.at("announce").get<std::string>());
    d.acquirer = j.at("acquirer").get<std::string>();
    d.target = j.at("target").get<std::string>();
    d.acquirer_us = j.at("acquirer_us").get<bool>();
    d.target_us = j.at("target_us").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(e.what(), line);
  } catch (const InputError& e) {
    throw ParseError(e.what(), line);
  }
  return d;
}

}  // namespace

std::string document_to_json(const Document& doc) {
  ojson j;
  j["id"] = doc.id;
  j["text"] = doc.text;
  j["label"] = label_name(doc.label);
  j["published"] = format_date(doc.published);
  j["announce"] = doc.announce ? ojson(format_date(*doc.announce)) : ojson(nullptr);
  j["acquirer"] = doc.acquirer;
  j["target"] = doc.target;
  j["acquirer_us"] = doc.acquirer_us;
  j["target_us"] = doc.target_us;
  return j.dump();
}

std::vector<Document> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<Document> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(e.what(), lineno);
    }
    docs.push_back(document_from_json(j, lineno));
  }
  return docs;
}

void save_corpus(const std::vector<Document>& docs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& d : docs) out << document_to_json(d) << '\n';
}

}  // namespace cfx
