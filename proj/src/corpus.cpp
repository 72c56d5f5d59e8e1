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

#include "w2sr/corpus.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include "w2sr/grading.hpp"

namespace w2sr {

namespace {

// Raised while mapping a single line; turned into a malformed skip note.
struct MalformedRecord {
  std::string reason;
};

// Raised for records that are well formed but intentionally not ingested.
struct ExcludedRecord {
  std::string reason;
};

std::string scalar_text(const json& v, const char* field) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return v.dump();
  throw MalformedRecord{std::string("field '") + field + "' is not a string or number"};
}

const json* find_field(const json& j, std::initializer_list<const char*> names) {
  for (const char* name : names) {
    auto it = j.find(name);
    if (it != j.end() && !it->is_null()) return &*it;
  }
  return nullptr;
}

std::string required_text(const json& j, std::initializer_list<const char*> names) {
  const json* v = find_field(j, names);
  if (v == nullptr) throw MalformedRecord{std::string("missing field '") + *names.begin() + "'"};
  return scalar_text(*v, *names.begin());
}

std::optional<int> parse_level(const json& j) {
  const json* v = find_field(j, {"level", "difficulty"});
  if (v == nullptr) return std::nullopt;
  int level = 0;
  if (v->is_number_integer()) {
    level = v->get<int>();
  } else if (v->is_string()) {
    // MATH stores "Level 3"; "Level ?" occurs in the raw release.
    std::string s = v->get<std::string>();
    auto digit = std::find_if(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
    if (digit == s.end()) return std::nullopt;
    level = *digit - '0';
  } else {
    throw MalformedRecord{"field 'level' has unsupported type"};
  }
  if (level < 1 || level > 5) throw MalformedRecord{"level out of range [1,5]"};
  return level;
}

std::string line_id(BenchmarkAdapter adapter, std::size_t line) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06zu", line);
  return std::string(to_string(adapter)) + "-" + buf;
}

std::string optional_id(const json& j, std::initializer_list<const char*> names,
                        BenchmarkAdapter adapter, std::size_t line) {
  const json* v = find_field(j, names);
  if (v == nullptr) return line_id(adapter, line);
  return scalar_text(*v, *names.begin());
}

std::string strip_dollars(std::string s) {
  s = trim(s);
  while (s.size() >= 2 && s.front() == '$' && s.back() == '$') s = trim(s.substr(1, s.size() - 2));
  return s;
}

std::string choice_label(std::size_t index) { return std::string(1, static_cast<char>('A' + index)); }

// Accepts a letter, "(B)" style label, or the verbatim text of one choice.
std::string resolve_choice_answer(const std::string& answer, const std::vector<std::string>& choices) {
  std::string a = trim(answer);
  if (a.size() == 3 && a.front() == '(' && a.back() == ')') a = a.substr(1, 1);
  if (a.size() == 1) {
    char c = static_cast<char>(std::toupper(static_cast<unsigned char>(a[0])));
    if (c >= 'A' && static_cast<std::size_t>(c - 'A') < choices.size()) return std::string(1, c);
  }
  for (std::size_t i = 0; i < choices.size(); ++i) {
    if (trim(choices[i]) == a) return choice_label(i);
  }
  throw MalformedRecord{"answer '" + answer + "' matches no choice"};
}

ProblemRecord map_gpqa(const json& j, std::size_t line) {
  ProblemRecord r;
  r.source = "gpqa_diamond";
  r.answer_kind = AnswerKind::kMultipleChoice;
  if (j.contains("Correct Answer")) {
    r.id = optional_id(j, {"Record ID", "id"}, BenchmarkAdapter::kGpqaDiamond, line);
    r.question = required_text(j, {"Question"});
    std::vector<std::string> options = {trim(required_text(j, {"Correct Answer"})),
                                        trim(required_text(j, {"Incorrect Answer 1"})),
                                        trim(required_text(j, {"Incorrect Answer 2"})),
                                        trim(required_text(j, {"Incorrect Answer 3"}))};
    // The raw release always lists the correct option first; a permutation
    // seeded from the record id keeps labels stable without leaking position.
    std::array<std::size_t, 4> order{0, 1, 2, 3};
    std::mt19937_64 rng(fnv1a64(r.id));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      r.choices.push_back(options[order[pos]]);
      if (order[pos] == 0) r.gold_answer = choice_label(pos);
    }
    return r;
  }
  r.id = optional_id(j, {"id"}, BenchmarkAdapter::kGpqaDiamond, line);
  r.question = required_text(j, {"question", "Question"});
  const json* choices = find_field(j, {"choices", "options"});
  if (choices == nullptr || !choices->is_array()) throw MalformedRecord{"missing array field 'choices'"};
  for (const auto& c : *choices) r.choices.push_back(trim(scalar_text(c, "choices")));
  if (r.choices.empty() || r.choices.size() > 26) throw MalformedRecord{"choices must have 1-26 entries"};
  r.gold_answer = resolve_choice_answer(required_text(j, {"answer"}), r.choices);
  return r;
}

ProblemRecord map_record(const json& j, BenchmarkAdapter adapter, std::size_t line,
                         const LoadOptions& options) {
  if (!j.is_object()) throw MalformedRecord{"record is not a JSON object"};
  ProblemRecord r;
  r.source = std::string(to_string(adapter));
  switch (adapter) {
    case BenchmarkAdapter::kMath: {
      r.id = optional_id(j, {"unique_id", "id"}, adapter, line);
      r.question = required_text(j, {"problem", "question"});
      if (const json* a = find_field(j, {"answer"}); a != nullptr) {
        r.gold_answer = scalar_text(*a, "answer");
      } else {
        auto boxed = last_boxed(required_text(j, {"solution"}));
        if (!boxed) throw MalformedRecord{"solution has no \\boxed{} answer"};
        r.gold_answer = *boxed;
      }
      r.difficulty = parse_level(j);
      break;
    }
    case BenchmarkAdapter::kMath500:
      r.id = optional_id(j, {"unique_id", "id"}, adapter, line);
      r.question = required_text(j, {"problem", "question"});
      r.gold_answer = required_text(j, {"answer"});
      r.difficulty = parse_level(j);
      break;
    case BenchmarkAdapter::kOlympiadBench: {
      for (const char* f : {"image", "images", "image_1"}) {
        const json* v = find_field(j, {f});
        if (v != nullptr && !(v->is_array() && v->empty()) && !(v->is_string() && v->get<std::string>().empty())) {
          throw ExcludedRecord{"multimodal record"};
        }
      }
      if (const json* m = find_field(j, {"modality"}); m != nullptr && m->is_string() &&
                                                        to_lower(m->get<std::string>()) != "text") {
        throw ExcludedRecord{"multimodal record"};
      }
      if (options.olympiad_subset) {
        const json* s = find_field(j, {"subset", "source"});
        if (s == nullptr || scalar_text(*s, "subset") != *options.olympiad_subset) {
          throw ExcludedRecord{"not in subset " + *options.olympiad_subset};
        }
      }
      r.id = optional_id(j, {"id"}, adapter, line);
      r.question = required_text(j, {"question", "problem"});
      const json* fa = find_field(j, {"final_answer", "answer"});
      if (fa == nullptr) throw MalformedRecord{"missing field 'final_answer'"};
      if (fa->is_array()) {
        std::string joined;
        for (const auto& part : *fa) {
          if (!joined.empty()) joined += ", ";
          joined += strip_dollars(scalar_text(part, "final_answer"));
        }
        r.gold_answer = joined;
      } else {
        r.gold_answer = strip_dollars(scalar_text(*fa, "final_answer"));
      }
      break;
    }
    case BenchmarkAdapter::kMinerva: {
      r.id = optional_id(j, {"id", "unique_id"}, adapter, line);
      r.question = required_text(j, {"problem", "question"});
      if (const json* a = find_field(j, {"answer"}); a != nullptr) {
        r.gold_answer = scalar_text(*a, "answer");
      } else {
        auto boxed = last_boxed(required_text(j, {"solution"}));
        if (!boxed) throw MalformedRecord{"solution has no \\boxed{} answer"};
        r.gold_answer = *boxed;
      }
      break;
    }
    case BenchmarkAdapter::kAmc23:
      r.id = optional_id(j, {"id"}, adapter, line);
      r.question = required_text(j, {"question", "problem"});
      r.gold_answer = required_text(j, {"answer"});
      break;
    case BenchmarkAdapter::kGpqaDiamond:
      r = map_gpqa(j, line);
      break;
    case BenchmarkAdapter::kGenericJsonl: {
      r.id = optional_id(j, {"id"}, adapter, line);
      r.question = required_text(j, {"question"});
      if (const json* c = find_field(j, {"choices"}); c != nullptr) {
        if (!c->is_array()) throw MalformedRecord{"field 'choices' is not an array"};
        for (const auto& choice : *c) r.choices.push_back(trim(scalar_text(choice, "choices")));
      }
      if (r.choices.empty()) {
        r.gold_answer = required_text(j, {"answer"});
      } else {
        r.answer_kind = AnswerKind::kMultipleChoice;
        r.gold_answer = resolve_choice_answer(required_text(j, {"answer"}), r.choices);
      }
      r.difficulty = parse_level(j);
      if (const json* s = find_field(j, {"source"}); s != nullptr) r.source = scalar_text(*s, "source");
      break;
    }
  }
  r.gold_answer = trim(r.gold_answer);
  try {
    r.validate();
  } catch (const ValidationError& e) {
    throw MalformedRecord{e.what()};
  }
  return r;
}

}  // namespace

std::string_view to_string(AnswerKind kind) {
  return kind == AnswerKind::kMultipleChoice ? "multiple_choice" : "free_form_math";
}

AnswerKind answer_kind_from_string(std::string_view s) {
  if (s == "free_form_math") return AnswerKind::kFreeFormMath;
  if (s == "multiple_choice") return AnswerKind::kMultipleChoice;
  throw ValidationError("unknown answer kind: " + std::string(s));
}

void ProblemRecord::validate() const {
  if (id.empty()) throw ValidationError("record id is empty");
  if (trim(gold_answer).empty()) throw ValidationError("record " + id + ": gold_answer is empty");
  if (difficulty && (*difficulty < 1 || *difficulty > 5)) {
    throw ValidationError("record " + id + ": difficulty out of range [1,5]");
  }
  if (answer_kind == AnswerKind::kMultipleChoice) {
    if (choices.empty()) throw ValidationError("record " + id + ": multiple_choice without choices");
    bool label_ok = gold_answer.size() == 1 && gold_answer[0] >= 'A' &&
                    static_cast<std::size_t>(gold_answer[0] - 'A') < choices.size();
    if (!label_ok) throw ValidationError("record " + id + ": gold_answer is not a choice label");
  }
}

json ProblemRecord::to_json() const {
  json j{{"id", id},
         {"source", source},
         {"question", question},
         {"gold_answer", gold_answer},
         {"answer_kind", to_string(answer_kind)}};
  if (difficulty) j["difficulty"] = *difficulty;
  if (!choices.empty()) j["choices"] = choices;
  return j;
}

ProblemRecord ProblemRecord::from_json(const json& j) {
  ProblemRecord r;
  r.id = j.at("id").get<std::string>();
  r.source = j.value("source", "");
  r.question = j.at("question").get<std::string>();
  r.gold_answer = j.at("gold_answer").get<std::string>();
  r.answer_kind = answer_kind_from_string(j.value("answer_kind", "free_form_math"));
  if (j.contains("difficulty")) r.difficulty = j.at("difficulty").get<int>();
  if (j.contains("choices")) r.choices = j.at("choices").get<std::vector<std::string>>();
  r.validate();
  return r;
}

const ProblemRecord* Corpus::find(std::string_view id) const {
  auto it = std::find_if(records.begin(), records.end(), [&](const auto& r) { return r.id == id; });
  return it == records.end() ? nullptr : &*it;
}

std::string_view to_string(BenchmarkAdapter adapter) {
  switch (adapter) {
    case BenchmarkAdapter::kMath: return "math";
    case BenchmarkAdapter::kMath500: return "math500";
    case BenchmarkAdapter::kOlympiadBench: return "olympiadbench";
    case BenchmarkAdapter::kMinerva: return "minerva";
    case BenchmarkAdapter::kAmc23: return "amc23";
    case BenchmarkAdapter::kGpqaDiamond: return "gpqa_diamond";
    case BenchmarkAdapter::kGenericJsonl: return "generic_jsonl";
  }
  return "generic_jsonl";
}

BenchmarkAdapter adapter_from_string(std::string_view s) {
  for (auto a : {BenchmarkAdapter::kMath, BenchmarkAdapter::kMath500, BenchmarkAdapter::kOlympiadBench,
                 BenchmarkAdapter::kMinerva, BenchmarkAdapter::kAmc23, BenchmarkAdapter::kGpqaDiamond,
                 BenchmarkAdapter::kGenericJsonl}) {
    if (to_string(a) == s) return a;
  }
  throw ValidationError("unknown benchmark adapter: " + std::string(s));
}

std::size_t LoadReport::malformed_count() const {
  return static_cast<std::size_t>(
      std::count_if(skipped.begin(), skipped.end(), [](const SkipNote& n) { return n.malformed; }));
}

std::string LoadReport::to_log() const {
  std::ostringstream out;
  out << "lines=" << lines_read << " loaded=" << loaded << " skipped=" << skipped.size()
      << " malformed=" << malformed_count() << '\n';
  for (const auto& note : skipped) {
    out << "  line " << note.line << (note.malformed ? " [malformed] " : " [excluded] ") << note.reason << '\n';
  }
  return out.str();
}

Corpus load_benchmark(const std::filesystem::path& path, BenchmarkAdapter adapter,
                      const LoadOptions& options, LoadReport* report) {
  const std::string text = read_file(path);
  Corpus corpus;
  LoadReport local;
  std::unordered_set<std::string> seen;

  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (trim(line).empty()) return;
    ++local.lines_read;
    try {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error&) {
        throw MalformedRecord{"invalid JSON"};
      }
      ProblemRecord r = map_record(j, adapter, line_no, options);
      if (!seen.insert(r.id).second) throw MalformedRecord{"duplicate id " + r.id};
      corpus.records.push_back(std::move(r));
    } catch (const MalformedRecord& m) {
      local.skipped.push_back({line_no, m.reason, true});
    } catch (const ExcludedRecord& x) {
      local.skipped.push_back({line_no, x.reason, false});
    }
  });
  local.loaded = corpus.records.size();

  corpus.source_manifest.push_back(std::string(to_string(adapter)) + " <- " + path.string() + " (" +
                                   std::to_string(local.loaded) + " records, sha256 " +
                                   sha256_hex(text).substr(0, 16) + ")");
  if (report != nullptr) *report = local;
  if (local.malformed_count() > options.max_malformed) {
    const SkipNote& first = *std::find_if(local.skipped.begin(), local.skipped.end(),
                                          [](const SkipNote& n) { return n.malformed; });
    throw ValidationError(path.string() + ": " + std::to_string(local.malformed_count()) +
                          " malformed records (tolerated " + std::to_string(options.max_malformed) +
                          "); first at line " + std::to_string(first.line) + ": " + first.reason);
  }
  return corpus;
}

FilterResult filter_difficulty(const Corpus& corpus, int min_level, int max_level) {
  if (min_level < 1 || max_level > 5) throw ValidationError("difficulty bounds must lie in [1,5]");
  if (min_level > max_level) throw ValidationError("difficulty filter: min > max");
  FilterResult out;
  out.corpus.source_manifest = corpus.source_manifest;
  out.corpus.source_manifest.push_back("filter_difficulty[" + std::to_string(min_level) + "," +
                                       std::to_string(max_level) + "]");
  for (const auto& r : corpus.records) {
    if (!r.difficulty) {
      ++out.missing_difficulty;
      continue;
    }
    if (*r.difficulty >= min_level && *r.difficulty <= max_level) out.corpus.records.push_back(r);
  }
  return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::vector<json> rows;
  rows.reserve(corpus.records.size());
  for (const auto& r : corpus.records) rows.push_back(r.to_json());
  write_file_atomic(path, to_jsonl(rows));
}

Corpus load_corpus(const std::filesystem::path& path) {
  Corpus corpus;
  std::unordered_set<std::string> seen;
  for (const auto& row : read_jsonl(path)) {
    ProblemRecord r = ProblemRecord::from_json(row);
    if (!seen.insert(r.id).second) throw ValidationError("duplicate id in corpus file: " + r.id);
    corpus.records.push_back(std::move(r));
  }
  corpus.source_manifest.push_back("corpus <- " + path.string());
  return corpus;
}

}  // namespace w2sr
