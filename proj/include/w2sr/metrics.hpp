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

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "w2sr/common.hpp"
#include "w2sr/inference.hpp"

namespace w2sr {

/// Per-problem sample count `n` and number of correct samples `c`.
struct SampleTally {
  std::string problem_id;
  long long n = 1;
  long long c = 0;

  void validate() const;
  json to_json() const;
  static SampleTally from_json(const json& j);
};

std::vector<SampleTally> load_tallies(const std::filesystem::path& path);

/// Mean over problems of 1 - C(n-c, k) / C(n, k).
///
/// The binomial ratio is evaluated as the product of (1 - k/j) for
/// j = n-c+1 .. n, which stays in [0, 1] and never overflows.
double pass_at_k(std::span<const SampleTally> tallies, long long k);

/// Pass@1 percentages of the weak teacher, the weak-to-strong student and
/// the RL-trained strong student, all in [0, 100].
struct RgrInputs {
  double weak = 0;
  double w2s = 0;
  double strong = 0;

  void validate() const;
};

/// Reasoning Gap Recovered as a signed percentage. Empty when the RL student
/// matches the weak teacher (zero denominator): "inapplicable" is a value,
/// not an error.
using RgrValue = std::optional<double>;

RgrValue rgr(const RgrInputs& inputs);

/// Fixed two-decimal rendering, "–" for inapplicable.
std::string format_rgr(const RgrValue& value);
std::string format_fixed2(double value);

enum class LengthSource { kEndpointUsage, kWhitespaceFallback };

std::string_view to_string(LengthSource source);

struct LengthStats {
  std::size_t count = 0;
  double mean_tokens = 0;
  LengthSource source = LengthSource::kEndpointUsage;

  json to_json() const;
};

// Uses endpoint token counts when every result carries one; otherwise counts
// whitespace-delimited tokens for all of them.
LengthStats length_stats(std::span<const GenerationResult> results);

std::size_t whitespace_token_count(std::string_view text);

struct ReportRow {
  std::string benchmark;
  std::string method;
  double pass_at_1 = 0;
  // Absent: no RGR for this row. Present but empty: inapplicable.
  std::optional<RgrValue> rgr;
  std::optional<double> mean_length;

  static ReportRow from_json(const json& j);
};

struct Report {
  std::string markdown;
  std::string csv;
  std::vector<std::string> warnings;
};

// Rows are grouped by method in first-seen order; each method lists every
// benchmark seen anywhere, in first-seen order, blank when missing.
Report build_report(std::span<const ReportRow> rows);

void write_report(const Report& report, const std::filesystem::path& markdown_path,
                  const std::filesystem::path& csv_path);

}  // namespace w2sr
