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

#ifndef CFX_CONFIG_H_
#define CFX_CONFIG_H_

#include <filesystem>
#include <map>
#include <string>

namespace cfx {

// Flat "key = value" files. Blank lines and lines starting with '#' are
// skipped; underscores in keys are read as dashes so "pgd_steps" and
// "pgd-steps" name the same setting.
using FlatConfig = std::map<std::string, std::string>;

FlatConfig parse_flat_config(const std::string& text);  // ParseError
FlatConfig load_flat_config(const std::filesystem::path& path);

}  // namespace cfx

#endif  // CFX_CONFIG_H_
