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

#include "w2sr/distillery.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <tuple>

namespace w2sr {

namespace {

bool by_problem(const TrajectoryRecord& a, const TrajectoryRecord& b) {
  return std::tie(a.problem_id, a.sample_index) < std::tie(b.problem_id, b.sample_index);
}

// Shortest round-trip form with the exponent's leading zeros removed, so
// 1e-5 is written as "1e-5" rather than "1e-05".
std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, ptr);
  if (auto e = s.find('e'); e != std::string::npos) {
    std::size_t digits = e + 1;
    if (digits < s.size() && (s[digits] == '-' || s[digits] == '+')) {
      if (s[digits] == '+') {
        s.erase(digits, 1);
      } else {
        ++digits;
      }
    }
    while (digits + 1 < s.size() && s[digits] == '0') s.erase(digits, 1);
  }
  return s;
}

}  // namespace

json TrajectoryRecord::to_json() const {
  json j{{"problem_id", problem_id},
         {"sample_index", sample_index},
         {"teacher", teacher},
         {"prompt_template_id", to_string(prompt_template_id)},
         {"instruction", instruction},
         {"completion", completion},
         {"extracted", extracted.to_json()},
         {"verdict", verdict ? verdict->to_json() : json()},
         {"finish_reason", to_string(finish_reason)}};
  if (completion_tokens) j["completion_tokens"] = *completion_tokens;
  return j;
}

TrajectoryRecord TrajectoryRecord::from_json(const json& j) {
  TrajectoryRecord r;
  r.problem_id = j.at("problem_id").get<std::string>();
  r.sample_index = j.value("sample_index", 0);
  r.teacher = j.value("teacher", "");
  r.prompt_template_id = template_id_from_string(j.at("prompt_template_id").get<std::string>());
  r.instruction = j.at("instruction").get<std::string>();
  r.completion = j.at("completion").get<std::string>();
  r.extracted = ExtractedAnswer::from_json(j.at("extracted"));
  if (j.contains("verdict") && !j["verdict"].is_null()) r.verdict = Verdict::from_json(j["verdict"]);
  r.finish_reason = finish_reason_from_string(j.at("finish_reason").get<std::string>());
  if (j.contains("completion_tokens")) r.completion_tokens = j["completion_tokens"].get<long long>();
  return r;
}

void save_trajectories(const std::vector<TrajectoryRecord>& records, const std::filesystem::path& path) {
  std::vector<json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(r.to_json());
  write_file_atomic(path, to_jsonl(rows));
}

std::vector<TrajectoryRecord> load_trajectories(const std::filesystem::path& path) {
  std::vector<TrajectoryRecord> out;
  for (const auto& row : read_jsonl(path)) out.push_back(TrajectoryRecord::from_json(row));
  return out;
}

TrajectoryRecord make_trajectory(const ProblemRecord& problem, const GenerationResult& generation,
                                 const std::string& teacher, const PromptTemplate& tmpl) {
  TrajectoryRecord t;
  t.problem_id = problem.id;
  t.sample_index = generation.sample_index;
  t.teacher = teacher;
  t.prompt_template_id = tmpl.id();
  t.instruction = render(tmpl, problem.question).completion_text();
  t.completion = generation.text;
  t.finish_reason = generation.finish_reason;
  t.completion_tokens = generation.completion_tokens;
  if (generation.finish_reason == FinishReason::kError) {
    t.verdict = Verdict{false, VerdictReason::kUnextractable};
    return t;
  }
  t.verdict = grade(generation.text, problem.gold_answer, problem.answer_kind, &t.extracted);
  return t;
}

std::vector<TrajectoryRecord> distill(const Corpus& corpus, const EndpointConfig& teacher,
                                      const SamplingProfile& profile, const PromptTemplate& tmpl,
                                      const DistillOptions& options, BatchStats* stats) {
  if (options.require_single_sample && profile.n_samples != 1) {
    throw ValidationError("distill: profile must request exactly one sample per problem");
  }
  const auto generations = generate_batch(corpus, teacher, profile, tmpl, options.batch, stats);
  std::map<std::string, const ProblemRecord*> problems;
  for (const auto& p : corpus.records) problems[p.id] = &p;

  std::vector<TrajectoryRecord> out;
  out.reserve(generations.size());
  for (const auto& g : generations) {
    out.push_back(make_trajectory(*problems.at(g.record_id), g, teacher.model, tmpl));
  }
  std::stable_sort(out.begin(), out.end(), by_problem);
  if (options.output) save_trajectories(out, *options.output);
  return out;
}

std::string_view to_string(SftVariant v) {
  switch (v) {
    case SftVariant::kW2sr: return "w2sr";
    case SftVariant::kW2srP: return "w2sr_p";
    case SftVariant::kW2srN: return "w2sr_n";
  }
  return "w2sr";
}

SftVariant sft_variant_from_string(std::string_view s) {
  if (s == "w2sr") return SftVariant::kW2sr;
  if (s == "w2sr_p" || s == "w2sr-p") return SftVariant::kW2srP;
  if (s == "w2sr_n" || s == "w2sr-n") return SftVariant::kW2srN;
  throw ValidationError("unknown SFT variant: " + std::string(s));
}

const std::vector<TrajectoryRecord>& PartitionSet::subset(SftVariant v) const {
  switch (v) {
    case SftVariant::kW2srP: return positive;
    case SftVariant::kW2srN: return negative;
    case SftVariant::kW2sr: break;
  }
  return all;
}

json PartitionSet::summary() const {
  auto ids = [](const std::vector<TrajectoryRecord>& v) {
    json arr = json::array();
    for (const auto& r : v) arr.push_back(r.problem_id + "#" + std::to_string(r.sample_index));
    return arr;
  };
  auto count_reason = [&](FinishReason f) {
    return std::count_if(all.begin(), all.end(), [&](const auto& r) { return r.finish_reason == f; });
  };
  return json{{"counts", {{"all", all.size()}, {"positive", positive.size()}, {"negative", negative.size()}}},
              {"finish_reasons",
               {{"stop", count_reason(FinishReason::kStop)},
                {"length", count_reason(FinishReason::kLength)},
                {"error", count_reason(FinishReason::kError)}}},
              {"positive", ids(positive)},
              {"negative", ids(negative)}};
}

PartitionSet partition(const std::vector<TrajectoryRecord>& records) {
  PartitionSet p;
  p.all = records;
  std::stable_sort(p.all.begin(), p.all.end(), by_problem);
  for (const auto& r : p.all) {
    if (!r.verdict) throw ValidationError("partition: trajectory " + r.problem_id + " is ungraded");
    (r.verdict->is_correct ? p.positive : p.negative).push_back(r);
  }
  return p;
}

EmissionStats emit_sft(const PartitionSet& partition, SftVariant variant, const std::filesystem::path& out) {
  const auto& subset = partition.subset(variant);
  if (subset.empty()) {
    throw ValidationError("emit_sft: subset " + std::string(to_string(variant)) + " is empty");
  }
  std::vector<const TrajectoryRecord*> ordered;
  for (const auto& r : subset) ordered.push_back(&r);
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) { return by_problem(*a, *b); });

  std::string bytes;
  std::size_t examples = 0;
  std::size_t skipped = 0;
  for (const auto* r : ordered) {
    // An errored generation has no response to learn from.
    if (r->completion.empty()) {
      ++skipped;
      continue;
    }
    bytes += json{{"instruction", r->instruction}, {"response", r->completion}}.dump();
    bytes += '\n';
    ++examples;
  }
  if (examples == 0) {
    throw ValidationError("emit_sft: subset " + std::string(to_string(variant)) + " has no nonempty responses");
  }
  write_file_atomic(out, bytes);
  return EmissionStats{examples, skipped, bytes.size(), sha256_hex(bytes)};
}

TrainingConfig TrainingConfig::ten_epoch_preset() {
  TrainingConfig c;
  c.epochs = 10;
  return c;
}

TrainingConfig TrainingConfig::preset(std::string_view name) {
  if (name == "default" || name == "epochs5") return TrainingConfig{};
  if (name == "epochs10") return ten_epoch_preset();
  throw ValidationError("unknown training preset: " + std::string(name) + " (expected default, epochs5, epochs10)");
}

void TrainingConfig::validate() const {
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) {
    throw ValidationError("training config: learning_rate must be positive");
  }
  if (epochs < 1) throw ValidationError("training config: epochs must be >= 1");
  if (global_batch_size < 1) throw ValidationError("training config: global_batch_size must be >= 1");
  if (max_seq_len < 1) throw ValidationError("training config: max_seq_len must be >= 1");
  if (optimizer.empty() || lr_scheduler.empty()) {
    throw ValidationError("training config: optimizer and lr_scheduler must be named");
  }
}

std::string training_config_text(const TrainingConfig& config, const std::filesystem::path& dataset_path) {
  config.validate();
  std::string out = "# w2sr training config v1\n";
  out += "learning_rate=" + format_real(config.learning_rate) + "\n";
  out += "epochs=" + std::to_string(config.epochs) + "\n";
  out += "global_batch_size=" + std::to_string(config.global_batch_size) + "\n";
  out += "optimizer=" + config.optimizer + "\n";
  out += "lr_scheduler=" + config.lr_scheduler + "\n";
  out += "max_seq_len=" + std::to_string(config.max_seq_len) + "\n";
  out += "seed=" + std::to_string(config.seed) + "\n";
  out += "dataset_path=" + dataset_path.string() + "\n";
  return out;
}

std::filesystem::path emit_training_config(const TrainingConfig& config, const std::filesystem::path& dataset_path,
                                           const std::filesystem::path& out) {
  write_file_atomic(out, training_config_text(config, dataset_path));
  return out;
}

TrainingConfig parse_training_config(std::string_view text, std::filesystem::path* dataset_path) {
  TrainingConfig c;
  std::map<std::string, std::string> kv;
  for_each_line(text, [&](std::size_t n, std::string_view raw) {
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') return;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError("training config line " + std::to_string(n) + ": missing '='");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  });
  auto need = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw ValidationError(std::string("training config: missing ") + key);
    return it->second;
  };
  try {
    c.learning_rate = std::stod(need("learning_rate"));
    c.epochs = std::stoi(need("epochs"));
    c.global_batch_size = std::stoi(need("global_batch_size"));
    c.optimizer = need("optimizer");
    c.lr_scheduler = need("lr_scheduler");
    c.max_seq_len = std::stoi(need("max_seq_len"));
    c.seed = std::stoll(need("seed"));
  } catch (const std::logic_error& e) {
    throw ValidationError(std::string("training config: bad number: ") + e.what());
  }
  if (dataset_path != nullptr) *dataset_path = need("dataset_path");
  c.validate();
  return c;
}

}  // namespace w2sr
