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

// Teacher trajectory generation, the all / correct-only / incorrect-only
// split, and SFT dataset plus training-config emission.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "w2sr/corpus.hpp"
#include "w2sr/grading.hpp"
#include "w2sr/inference.hpp"
#include "w2sr/prompts.hpp"

namespace w2sr {

struct TrajectoryRecord {
  std::string problem_id;
  int sample_index = 0;
  std::string teacher;
  TemplateId prompt_template_id = TemplateId::kSimple;
  // Fully rendered prompt as a single string; becomes SftExample.instruction.
  std::string instruction;
  std::string completion;
  ExtractedAnswer extracted;
  // Empty until graded.
  std::optional<Verdict> verdict;
  FinishReason finish_reason = FinishReason::kStop;
  std::optional<long long> completion_tokens;

  json to_json() const;
  static TrajectoryRecord from_json(const json& j);
};

void save_trajectories(const std::vector<TrajectoryRecord>& records, const std::filesystem::path& path);
std::vector<TrajectoryRecord> load_trajectories(const std::filesystem::path& path);

// Grades one generation against its problem. Generation errors become
// unextractable records that keep finish_reason=error.
TrajectoryRecord make_trajectory(const ProblemRecord& problem, const GenerationResult& generation,
                                 const std::string& teacher, const PromptTemplate& tmpl);

struct DistillOptions {
  // Refuses profiles with n_samples != 1 unless cleared.
  bool require_single_sample = true;
  BatchOptions batch;
  // Trajectory file rewritten after generation; sorted by (problem_id, sample).
  std::optional<std::filesystem::path> output;
};

std::vector<TrajectoryRecord> distill(const Corpus& corpus, const EndpointConfig& teacher,
                                      const SamplingProfile& profile, const PromptTemplate& tmpl,
                                      const DistillOptions& options = {}, BatchStats* stats = nullptr);

enum class SftVariant { kW2sr, kW2srP, kW2srN };

std::string_view to_string(SftVariant v);
SftVariant sft_variant_from_string(std::string_view s);

struct PartitionSet {
  std::vector<TrajectoryRecord> all;
  std::vector<TrajectoryRecord> positive;
  std::vector<TrajectoryRecord> negative;

  const std::vector<TrajectoryRecord>& subset(SftVariant v) const;
  json summary() const;
};

// Throws ValidationError when any record lacks a verdict.
PartitionSet partition(const std::vector<TrajectoryRecord>& records);

struct EmissionStats {
  std::size_t examples = 0;
  std::size_t skipped_empty = 0;
  std::size_t bytes = 0;
  std::string sha256;
};

// One {"instruction","response"} line per trajectory in the chosen subset,
// ordered by (problem_id, sample_index). Throws ValidationError on an empty
// subset, IoError on an unwritable path.
EmissionStats emit_sft(const PartitionSet& partition, SftVariant variant, const std::filesystem::path& out);

struct TrainingConfig {
  double learning_rate = 1e-5;
  int epochs = 5;
  int global_batch_size = 128;
  std::string optimizer = "adamw";
  std::string lr_scheduler = "cosine";
  int max_seq_len = 4096;
  std::int64_t seed = 42;

  // Same hyperparameters with the 10-epoch schedule.
  static TrainingConfig ten_epoch_preset();
  static TrainingConfig preset(std::string_view name);

  void validate() const;
};

// Flat "key=value" file, one pair per line, '#' comments:
//   learning_rate, epochs, global_batch_size, optimizer, lr_scheduler,
//   max_seq_len, seed, dataset_path
std::string training_config_text(const TrainingConfig& config, const std::filesystem::path& dataset_path);

std::filesystem::path emit_training_config(const TrainingConfig& config, const std::filesystem::path& dataset_path,
                                           const std::filesystem::path& out);

TrainingConfig parse_training_config(std::string_view text, std::filesystem::path* dataset_path = nullptr);

}  // namespace w2sr
