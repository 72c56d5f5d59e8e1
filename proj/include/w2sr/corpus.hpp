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

// Benchmark ingestion. Every supported source is mapped onto ProblemRecord by
// an adapter; field mappings per adapter:
//
//   math           {problem, solution, level:"Level N", unique_id?, answer?}
//                  gold = answer if present, else last \boxed{} in solution.
//   math500        {problem, answer, level:int|"Level N", unique_id?}
//   olympiadbench  {id, question, final_answer:[..]|str, subset?|source?,
//                   image/images/modality?}  multimodal records are skipped;
//                  `olympiad_subset` keeps only records whose subset matches.
//   minerva        {problem|question, answer?|solution}
//   amc23          {id?, question|problem, answer}
//   gpqa_diamond   {question, choices:[4], answer:letter|choice text} or the
//                  raw release schema {Question, Correct Answer,
//                  Incorrect Answer 1..3, Record ID?}
//   generic_jsonl  {id?, question, answer, level?, choices?}
//
// Missing ids become "<adapter>-<line>" with the 1-based line number padded
// to six digits, which keeps lexicographic order equal to file order.

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "w2sr/common.hpp"

namespace w2sr {

enum class AnswerKind { kFreeFormMath, kMultipleChoice };

std::string_view to_string(AnswerKind kind);
AnswerKind answer_kind_from_string(std::string_view s);

struct ProblemRecord {
  std::string id;
  std::string source;
  std::string question;
  std::string gold_answer;
  AnswerKind answer_kind = AnswerKind::kFreeFormMath;
  std::optional<int> difficulty;
  std::vector<std::string> choices;

  // Throws ValidationError when a record invariant is broken.
  void validate() const;

  json to_json() const;
  static ProblemRecord from_json(const json& j);

  friend bool operator==(const ProblemRecord&, const ProblemRecord&) = default;
};

struct Corpus {
  std::vector<ProblemRecord> records;
  std::vector<std::string> source_manifest;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  const ProblemRecord* find(std::string_view id) const;
};

enum class BenchmarkAdapter {
  kMath,
  kMath500,
  kOlympiadBench,
  kMinerva,
  kAmc23,
  kGpqaDiamond,
  kGenericJsonl,
};

std::string_view to_string(BenchmarkAdapter adapter);
BenchmarkAdapter adapter_from_string(std::string_view s);

struct LoadOptions {
  // Number of malformed records tolerated before loading fails.
  std::size_t max_malformed = 0;
  // OlympiadBench only: keep records whose `subset` (or `source`) equals this.
  std::optional<std::string> olympiad_subset;
};

struct SkipNote {
  std::size_t line = 0;
  std::string reason;
  bool malformed = false;
};

struct LoadReport {
  std::size_t lines_read = 0;
  std::size_t loaded = 0;
  std::vector<SkipNote> skipped;

  std::size_t malformed_count() const;
  std::string to_log() const;
};

// Throws IoError on unreadable files, ValidationError when the malformed
// count exceeds `options.max_malformed`.
Corpus load_benchmark(const std::filesystem::path& path, BenchmarkAdapter adapter,
                      const LoadOptions& options = {}, LoadReport* report = nullptr);

struct FilterResult {
  Corpus corpus;
  std::size_t missing_difficulty = 0;
};

// Keeps records with difficulty in [min_level, max_level], order preserved.
// Records without a difficulty are dropped and counted.
FilterResult filter_difficulty(const Corpus& corpus, int min_level, int max_level);

// Canonical corpus file written by `ingest` and read by later stages.
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);

}  // namespace w2sr
