// Copyright 2026 The W2SR Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "w2sr/corpus.hpp"
#include "w2sr/distillery.hpp"
#include "w2sr/inference.hpp"

namespace w2sr {

inline constexpr std::string_view kToolVersion = "0.3.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitPartial = 2,
  kExitTotalFailure = 3,
};

struct CorpusSource {
  std::string name;
  std::filesystem::path path;
  BenchmarkAdapter adapter = BenchmarkAdapter::kGenericJsonl;
  std::optional<int> min_level;
  std::optional<int> max_level;
  LoadOptions load;
};

// Project configuration file (JSON). Relative paths resolve against the
// directory holding the file. Example:
//
//   {"output_dir": "out", "seed": 1234,
//    "corpora": [{"path": "data/math.jsonl", "adapter": "math",
//                 "min_level": 3, "max_level": 5}],
//    "teacher": {"base_url": "http://127.0.0.1:8000/v1", "model": "qwen2.5-1.5b"},
//    "student": {"base_url": "http://127.0.0.1:8001/v1", "model": "qwen2.5-14b"},
//    "profiles": {"eval": {"n_samples": 4}},
//    "templates": {"teacher": "auto", "student": "auto", "strict": false},
//    "training": {"preset": "default"}}
struct ProjectConfig {
  std::filesystem::path output_dir = "out";
  std::int64_t seed = 42;
  std::vector<CorpusSource> corpora;
  EndpointConfig teacher;
  EndpointConfig student;
  SamplingProfile distill_profile = SamplingProfile::distill();
  SamplingProfile eval_profile = SamplingProfile::eval(1);
  std::string teacher_template = "auto";
  std::string student_template = "auto";
  bool strict_templates = false;
  std::optional<std::filesystem::path> template_dir;
  TrainingConfig training;

  static ProjectConfig from_json(const json& j, const std::filesystem::path& base_dir);
  static ProjectConfig load(const std::filesystem::path& path);

  // Referenced input files must exist.
  void validate() const;
};

// Entry point shared by the w2sr binary and the tests. `args` excludes the
// program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace w2sr
