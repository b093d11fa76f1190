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

#ifndef CFX_CHECKPOINT_H_
#define CFX_CHECKPOINT_H_

#include <filesystem>
#include <string>

#include "json.hpp"

#include "cfx/mlm.h"
#include "cfx/model.h"
#include "cfx/text.h"

namespace cfx {

// Container: one JSON header line (format_version, kind, config, vocabulary,
// tensor manifest with element offsets, run_config) followed by the raw
// little-endian float64 payload. Round trips are bit-exact.
inline constexpr int kCheckpointVersion = 1;

nlohmann::ordered_json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);  // SchemaError

struct ClassifierCheckpoint {
  ModelParams params;
  Vocabulary vocab;
  nlohmann::ordered_json run_config;
};

struct MlmCheckpoint {
  MlmParams params;
  Vocabulary vocab;
  nlohmann::ordered_json run_config;
};

void save_classifier(const std::filesystem::path& path, const ModelParams& params,
                     const Vocabulary& vocab,
                     const nlohmann::ordered_json& run_config = nlohmann::ordered_json::object());
ClassifierCheckpoint load_classifier(const std::filesystem::path& path);

void save_mlm(const std::filesystem::path& path, const MlmParams& params, const Vocabulary& vocab,
              const nlohmann::ordered_json& run_config = nlohmann::ordered_json::object());
MlmCheckpoint load_mlm(const std::filesystem::path& path);

}  // namespace cfx

#endif  // CFX_CHECKPOINT_H_
