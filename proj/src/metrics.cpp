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

#include "w2sr/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>

namespace w2sr {

namespace {

constexpr std::string_view kInapplicable = "\xE2\x80\x93";  // U+2013 EN DASH

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string md_field(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

void SampleTally::validate() const {
  if (n < 1) throw ValidationError("tally " + problem_id + ": n must be >= 1");
  if (c < 0 || c > n) throw ValidationError("tally " + problem_id + ": c must lie in [0, n]");
}

json SampleTally::to_json() const { return json{{"problem_id", problem_id}, {"n", n}, {"c", c}}; }

SampleTally SampleTally::from_json(const json& j) {
  SampleTally t{j.at("problem_id").get<std::string>(), j.at("n").get<long long>(), j.at("c").get<long long>()};
  t.validate();
  return t;
}

std::vector<SampleTally> load_tallies(const std::filesystem::path& path) {
  std::vector<SampleTally> out;
  for (const auto& row : read_jsonl(path)) out.push_back(SampleTally::from_json(row));
  return out;
}

double pass_at_k(std::span<const SampleTally> tallies, long long k) {
  if (tallies.empty()) throw ValidationError("pass_at_k: no tallies");
  if (k < 1) throw ValidationError("pass_at_k: k must be >= 1");
  long double total = 0;
  for (const auto& t : tallies) {
    t.validate();
    if (t.n < k) {
      throw ValidationError("pass_at_k: problem " + t.problem_id + " has n=" + std::to_string(t.n) + " < k=" +
                            std::to_string(k));
    }
    if (t.n - t.c < k) {
      total += 1;
      continue;
    }
    // C(n-c, k) / C(n, k) = prod_{j=n-c+1}^{n} (1 - k/j)
    long double miss = 1;
    for (long long j = t.n - t.c + 1; j <= t.n; ++j) {
      miss *= 1.0L - static_cast<long double>(k) / static_cast<long double>(j);
    }
    total += 1.0L - miss;
  }
  return static_cast<double>(total / static_cast<long double>(tallies.size()));
}

void RgrInputs::validate() const {
  for (double v : {weak, w2s, strong}) {
    if (!(v >= 0 && v <= 100)) throw ValidationError("RGR inputs must be percentages in [0, 100]");
  }
}

RgrValue rgr(const RgrInputs& inputs) {
  inputs.validate();
  const double gap = inputs.strong - inputs.weak;
  if (gap == 0) return std::nullopt;
  return 100.0 * ((inputs.w2s - inputs.weak) / gap);
}

std::string format_fixed2(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", value);
  std::string s(buf);
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string format_rgr(const RgrValue& value) { return value ? format_fixed2(*value) : std::string(kInapplicable); }

std::string_view to_string(LengthSource source) {
  return source == LengthSource::kEndpointUsage ? "endpoint_usage" : "whitespace_fallback";
}

json LengthStats::to_json() const {
  return json{{"count", count}, {"mean_tokens", mean_tokens}, {"source", to_string(source)}};
}

std::size_t whitespace_token_count(std::string_view text) {
  std::size_t n = 0;
  bool in_token = false;
  for (unsigned char c : text) {
    const bool space = std::isspace(c) != 0;
    if (!space && !in_token) ++n;
    in_token = !space;
  }
  return n;
}

LengthStats length_stats(std::span<const GenerationResult> results) {
  if (results.empty()) throw ValidationError("length_stats: no results");
  const bool all_usage =
      std::all_of(results.begin(), results.end(), [](const auto& r) { return r.completion_tokens.has_value(); });
  long double sum = 0;
  for (const auto& r : results) {
    sum += all_usage ? static_cast<long double>(*r.completion_tokens)
                     : static_cast<long double>(whitespace_token_count(r.text));
  }
  LengthStats s;
  s.count = results.size();
  s.mean_tokens = static_cast<double>(sum / static_cast<long double>(results.size()));
  s.source = all_usage ? LengthSource::kEndpointUsage : LengthSource::kWhitespaceFallback;
  return s;
}

ReportRow ReportRow::from_json(const json& j) {
  ReportRow r;
  r.benchmark = j.at("benchmark").get<std::string>();
  r.method = j.at("method").get<std::string>();
  r.pass_at_1 = j.at("pass_at_1").get<double>();
  if (j.contains("weak") && j.contains("strong")) {
    r.rgr = w2sr::rgr(RgrInputs{j.at("weak").get<double>(), r.pass_at_1, j.at("strong").get<double>()});
  } else if (j.contains("rgr")) {
    const json& v = j.at("rgr");
    if (v.is_null() || (v.is_string() && v.get<std::string>() == "inapplicable")) {
      r.rgr = RgrValue{};
    } else {
      r.rgr = RgrValue{v.get<double>()};
    }
  }
  if (j.contains("mean_length") && !j["mean_length"].is_null()) r.mean_length = j["mean_length"].get<double>();
  return r;
}

Report build_report(std::span<const ReportRow> rows) {
  if (rows.empty()) throw ValidationError("build_report: no rows");
  std::vector<std::string> methods;
  std::vector<std::string> benchmarks;
  std::map<std::pair<std::string, std::string>, const ReportRow*> cells;
  Report report;
  for (const auto& row : rows) {
    if (std::find(methods.begin(), methods.end(), row.method) == methods.end()) methods.push_back(row.method);
    if (std::find(benchmarks.begin(), benchmarks.end(), row.benchmark) == benchmarks.end()) {
      benchmarks.push_back(row.benchmark);
    }
    if (!cells.emplace(std::make_pair(row.method, row.benchmark), &row).second) {
      report.warnings.push_back("duplicate row for " + row.method + " / " + row.benchmark + "; first kept");
    }
  }

  report.markdown = "| Benchmark | Method | Pass@1 | RGR | MeanLength |\n|---|---|---:|---:|---:|\n";
  report.csv = "Benchmark,Method,Pass@1,RGR,MeanLength\n";
  for (const auto& method : methods) {
    for (const auto& bench : benchmarks) {
      std::string pass;
      std::string gap;
      std::string length;
      if (auto it = cells.find({method, bench}); it != cells.end()) {
        const ReportRow& r = *it->second;
        pass = format_fixed2(r.pass_at_1);
        if (r.rgr) gap = format_rgr(*r.rgr);
        if (r.mean_length) length = format_fixed2(*r.mean_length);
      } else {
        report.warnings.push_back("method " + method + " has no result for benchmark " + bench);
      }
      report.markdown += "| " + md_field(bench) + " | " + md_field(method) + " | " + pass + " | " + gap + " | " +
                         length + " |\n";
      report.csv += csv_field(bench) + "," + csv_field(method) + "," + pass + "," + gap + "," + length + "\n";
    }
  }
  return report;
}

void write_report(const Report& report, const std::filesystem::path& markdown_path,
                  const std::filesystem::path& csv_path) {
  write_file_atomic(markdown_path, report.markdown);
  write_file_atomic(csv_path, report.csv);
}

}  // namespace w2sr
