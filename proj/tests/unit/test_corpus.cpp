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


#include <algorithm>
#include <set>

#include "doctest.h"
#include "test_support.hpp"
#include "w2sr/corpus.hpp"

using namespace w2sr;
using w2sr::testing::TempDir;
using w2sr::testing::write_rows;
using w2sr::testing::write_text;

namespace {

std::vector<json> math500_rows(int n) {
  std::vector<json> rows;
  for (int i = 0; i < n; ++i) {
    rows.push_back(json{{"problem", "Compute " + std::to_string(i) + " + 1."},
                        {"solution", "It is $\\boxed{" + std::to_string(i + 1) + "}$."},
                        {"answer", std::to_string(i + 1)},
                        {"subject", "Algebra"},
                        {"level", 1 + i % 5},
                        {"unique_id", "test/algebra/" + std::to_string(i) + ".json"}});
  }
  return rows;
}

std::vector<json> gpqa_raw_rows(int n) {
  std::vector<json> rows;
  for (int i = 0; i < n; ++i) {
    rows.push_back(json{{"Record ID", "rec" + std::to_string(i)},
                        {"Question", "Which particle is number " + std::to_string(i) + "?"},
                        {"Correct Answer", "right " + std::to_string(i)},
                        {"Incorrect Answer 1", "wrong a" + std::to_string(i)},
                        {"Incorrect Answer 2", "wrong b" + std::to_string(i)},
                        {"Incorrect Answer 3", "wrong c" + std::to_string(i)}});
  }
  return rows;
}

Corpus leveled_corpus(const std::vector<std::optional<int>>& levels) {
  Corpus c;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    ProblemRecord r;
    r.id = "q" + std::to_string(i);
    r.question = "question " + std::to_string(i);
    r.gold_answer = "1";
    r.difficulty = levels[i];
    c.records.push_back(r);
  }
  return c;
}

}  // namespace

TEST_CASE("math500 file yields 500 records") {
  TempDir dir;
  write_rows(dir / "math500.jsonl", math500_rows(500));
  LoadReport report;
  Corpus c = load_benchmark(dir / "math500.jsonl", BenchmarkAdapter::kMath500, {}, &report);
  CHECK(c.size() == 500);
  CHECK(report.loaded == 500);
  CHECK(report.malformed_count() == 0);
  CHECK(c.records[7].gold_answer == "8");
  CHECK(c.records[7].difficulty == 3);
  CHECK(c.records[7].id == "test/algebra/7.json");
}

TEST_CASE("amc23 file yields 40 records") {
  TempDir dir;
  std::vector<json> rows;
  for (int i = 0; i < 40; ++i) rows.push_back(json{{"id", i}, {"question", "AMC " + std::to_string(i)}, {"answer", 10 + i}});
  write_rows(dir / "amc23.jsonl", rows);
  Corpus c = load_benchmark(dir / "amc23.jsonl", BenchmarkAdapter::kAmc23);
  CHECK(c.size() == 40);
  CHECK(c.records[0].id == "0");
  CHECK(c.records[3].gold_answer == "13");
  CHECK(c.records[3].answer_kind == AnswerKind::kFreeFormMath);
}

TEST_CASE("gpqa_diamond raw file yields 198 multiple-choice records") {
  TempDir dir;
  write_rows(dir / "gpqa.jsonl", gpqa_raw_rows(198));
  Corpus c = load_benchmark(dir / "gpqa.jsonl", BenchmarkAdapter::kGpqaDiamond);
  REQUIRE(c.size() == 198);
  std::set<std::string> labels;
  for (const auto& r : c.records) {
    CHECK(r.answer_kind == AnswerKind::kMultipleChoice);
    REQUIRE(r.choices.size() == 4);
    const std::size_t idx = static_cast<std::size_t>(r.gold_answer[0] - 'A');
    CHECK(r.choices[idx].rfind("right ", 0) == 0);
    labels.insert(r.gold_answer);
  }
  // The correct option does not always sit in slot A.
  CHECK(labels.size() == 4);
}

TEST_CASE("gpqa choices form keeps source order") {
  TempDir dir;
  write_rows(dir / "g.jsonl", {json{{"id", "g1"}, {"question", "Q?"}, {"choices", {"x", "y", "z"}}, {"answer", "z"}}});
  Corpus c = load_benchmark(dir / "g.jsonl", BenchmarkAdapter::kGpqaDiamond);
  CHECK(c.records[0].choices == std::vector<std::string>{"x", "y", "z"});
  CHECK(c.records[0].gold_answer == "C");
}

TEST_CASE("empty file yields empty corpus") {
  TempDir dir;
  write_text(dir / "empty.jsonl", "");
  for (auto a : {BenchmarkAdapter::kMath500, BenchmarkAdapter::kAmc23, BenchmarkAdapter::kGpqaDiamond,
                 BenchmarkAdapter::kGenericJsonl}) {
    CHECK(load_benchmark(dir / "empty.jsonl", a).empty());
  }
}

TEST_CASE("load is deterministic") {
  TempDir dir;
  write_rows(dir / "g.jsonl", gpqa_raw_rows(30));
  Corpus a = load_benchmark(dir / "g.jsonl", BenchmarkAdapter::kGpqaDiamond);
  Corpus b = load_benchmark(dir / "g.jsonl", BenchmarkAdapter::kGpqaDiamond);
  CHECK(a.records == b.records);
  save_corpus(a, dir / "a.jsonl");
  save_corpus(b, dir / "b.jsonl");
  CHECK(read_file(dir / "a.jsonl") == read_file(dir / "b.jsonl"));
  CHECK(load_corpus(dir / "a.jsonl").records == a.records);
}

TEST_CASE("MATH adapter parses level strings and falls back to the boxed solution") {
  TempDir dir;
  write_rows(dir / "math.jsonl",
             {json{{"problem", "P1"}, {"solution", "so \\boxed{\\frac{1}{2}}"}, {"level", "Level 4"}},
              json{{"problem", "P2"}, {"solution", "so \\boxed{3}"}, {"level", "Level ?"}}});
  Corpus c = load_benchmark(dir / "math.jsonl", BenchmarkAdapter::kMath);
  REQUIRE(c.size() == 2);
  CHECK(c.records[0].gold_answer == "\\frac{1}{2}");
  CHECK(c.records[0].difficulty == 4);
  CHECK_FALSE(c.records[1].difficulty.has_value());
  CHECK(c.records[0].id == "math-000001");
}

TEST_CASE("olympiadbench drops multimodal records and honors the subset selector") {
  TempDir dir;
  write_rows(dir / "ob.jsonl",
             {json{{"id", 1}, {"question", "Q1"}, {"final_answer", {"$3$"}}, {"subset", "OE_TO_maths_en_COMP"}},
              json{{"id", 2}, {"question", "Q2"}, {"final_answer", {"4"}}, {"image_1", "fig.png"}},
              json{{"id", 3}, {"question", "Q3"}, {"final_answer", {"1", "2"}}, {"subset", "other"}}});
  LoadReport report;
  Corpus all = load_benchmark(dir / "ob.jsonl", BenchmarkAdapter::kOlympiadBench, {}, &report);
  CHECK(all.size() == 2);
  CHECK(report.malformed_count() == 0);
  CHECK(all.records[0].gold_answer == "3");
  CHECK(all.records[1].gold_answer == "1, 2");
  LoadOptions o;
  o.olympiad_subset = "OE_TO_maths_en_COMP";
  CHECK(load_benchmark(dir / "ob.jsonl", BenchmarkAdapter::kOlympiadBench, o).size() == 1);
}

TEST_CASE("minerva adapter") {
  TempDir dir;
  write_rows(dir / "m.jsonl", {json{{"problem", "How fast?"}, {"solution", "Speed is \\boxed{3e8}."}}});
  Corpus c = load_benchmark(dir / "m.jsonl", BenchmarkAdapter::kMinerva);
  CHECK(c.records.at(0).gold_answer == "3e8");
}

TEST_CASE("malformed records are counted against the threshold") {
  TempDir dir;
  write_text(dir / "bad.jsonl",
             "{\"question\":\"ok\",\"answer\":\"1\"}\nnot json\n{\"question\":\"no answer\"}\n"
             "{\"question\":\"ok2\",\"answer\":\"2\"}\n");
  CHECK_THROWS_AS(load_benchmark(dir / "bad.jsonl", BenchmarkAdapter::kGenericJsonl), ValidationError);
  LoadOptions o;
  o.max_malformed = 2;
  LoadReport report;
  Corpus c = load_benchmark(dir / "bad.jsonl", BenchmarkAdapter::kGenericJsonl, o, &report);
  CHECK(c.size() == 2);
  CHECK(report.malformed_count() == 2);
  CHECK(report.to_log().find("line 2") != std::string::npos);
}

TEST_CASE("duplicate ids are malformed") {
  TempDir dir;
  write_rows(dir / "d.jsonl", {json{{"id", "a"}, {"question", "x"}, {"answer", "1"}},
                               json{{"id", "a"}, {"question", "y"}, {"answer", "2"}}});
  CHECK_THROWS_AS(load_benchmark(dir / "d.jsonl", BenchmarkAdapter::kGenericJsonl), ValidationError);
}

TEST_CASE("filter_difficulty keeps the inclusive band") {
  Corpus c = leveled_corpus({1, 2, 3, 4, 5, 3});
  FilterResult f = filter_difficulty(c, 3, 5);
  REQUIRE(f.corpus.size() == 4);
  for (const auto& r : f.corpus.records) CHECK(*r.difficulty >= 3);
  CHECK(f.missing_difficulty == 0);
}

TEST_CASE("full range filter is the identity") {
  Corpus c = leveled_corpus({5, 1, 4, 2, 3});
  CHECK(filter_difficulty(c, 1, 5).corpus.records == c.records);
}

TEST_CASE("filter with no matching level is empty") {
  CHECK(filter_difficulty(leveled_corpus({1, 3, 4}), 2, 2).corpus.empty());
}

TEST_CASE("records without difficulty are dropped and counted") {
  FilterResult f = filter_difficulty(leveled_corpus({3, std::nullopt, 4}), 1, 5);
  CHECK(f.corpus.size() == 2);
  CHECK(f.missing_difficulty == 1);
}

TEST_CASE("filter rejects bad bounds") {
  Corpus c = leveled_corpus({1});
  CHECK_THROWS_AS(filter_difficulty(c, 4, 3), ValidationError);
  CHECK_THROWS_AS(filter_difficulty(c, 0, 3), ValidationError);
}

TEST_CASE("ProblemRecord validation") {
  ProblemRecord r;
  r.id = "x";
  r.question = "q";
  r.gold_answer = "";
  CHECK_THROWS_AS(r.validate(), ValidationError);
  r.gold_answer = "E";
  r.answer_kind = AnswerKind::kMultipleChoice;
  r.choices = {"a", "b"};
  CHECK_THROWS_AS(r.validate(), ValidationError);
  r.gold_answer = "B";
  CHECK_NOTHROW(r.validate());
  CHECK(ProblemRecord::from_json(r.to_json()) == r);
}
