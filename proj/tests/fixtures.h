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

#ifndef CFX_TESTS_FIXTURES_H_
#define CFX_TESTS_FIXTURES_H_

#include <filesystem>
#include <set>
#include <string>
#include <unistd.h>

#include "cfx/advtrain.h"
#include "cfx/checkpoint.h"
#include "cfx/corpus.h"
#include "cfx/mlm.h"

namespace cfx::testing {

// A classifier and MLM of the default size (shorter max_len) trained on a
// 1500-document synthetic corpus.
// Training takes several seconds, and ctest runs every test in its own
// process, so the checkpoints are cached next to the test binary.
struct Trained {
  SplitDataset data;
  ClassifierCheckpoint clf;
  MlmCheckpoint mlm;
};

inline ModelConfig small_model() {
  ModelConfig m;
  m.max_len = 128;
  return m;
}

inline const Trained& trained() {
  static const Trained t = [] {
    SynthConfig sc;
    sc.n_docs = 1500;
    sc.seed = 11;
    Trained out{preprocess_split(generate_synthetic(sc), SplitPolicy{}, 0), {}, {}};
    const std::filesystem::path dir = CFX_TEST_CACHE_DIR;
    std::filesystem::create_directories(dir);
    const auto clf_path = dir / "small_clf_v2.ckpt", mlm_path = dir / "small_mlm_v2.ckpt";
    const std::string tmp_suffix = ".tmp" + std::to_string(::getpid());
    if (!std::filesystem::exists(clf_path)) {
      TrainConfig tc;
      tc.epochs = 3;
      tc.learning_rate = 3e-3;
      const TrainResult r = train(out.data, small_model(), tc, AdvConfig{});
      save_classifier(clf_path.string() + tmp_suffix, r.params, r.vocab);
      std::filesystem::rename(clf_path.string() + tmp_suffix, clf_path);
    }
    out.clf = load_classifier(clf_path);
    if (!std::filesystem::exists(mlm_path)) {
      std::vector<Document> unique;
      std::set<std::string> seen;
      for (const auto& d : out.data.train)
        if (seen.insert(d.id).second) unique.push_back(d);
      MlmTrainConfig mc;
      mc.model = small_model();
      mc.train.epochs = 10;
      const auto tr = encode_documents(unique, out.clf.vocab, 128);
      const auto r = train_mlm(tr, {}, out.clf.vocab.size(), mc);
      save_mlm(mlm_path.string() + tmp_suffix, r.params, out.clf.vocab);
      std::filesystem::rename(mlm_path.string() + tmp_suffix, mlm_path);
    }
    out.mlm = load_mlm(mlm_path);
    return out;
  }();
  return t;
}

}  // namespace cfx::testing

#endif  // CFX_TESTS_FIXTURES_H_
