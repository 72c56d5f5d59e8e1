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


// Acceptance gate. Prints one PASS/FAIL line per primary criterion and exits
// nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "test_support.hpp"
#include "w2sr/cli.hpp"
#include "w2sr/grading.hpp"
#include "w2sr/metrics.hpp"
#include "w2sr/mock_server.hpp"
#include "w2sr/prompts.hpp"

using namespace w2sr;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome pass_at_k_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1000);
  std::vector<SampleTally> tallies;
  for (int i = 0; i < 1000; ++i) {
    const int n = 1 + static_cast<int>(rng() % 12);
    const int c = static_cast<int>(rng() % static_cast<unsigned>(n + 1));
    tallies.push_back({"t" + std::to_string(i), n, c});
  }
  double worst = 0;
  std::size_t checks = 0;
  for (const auto& t : tallies) {
    for (int k = 1; k <= t.n; ++k) {
      const double got = pass_at_k(std::span<const SampleTally>(&t, 1), k);
      const double want = testing::pass_at_k_by_enumeration(static_cast<int>(t.n), static_cast<int>(t.c), k);
      worst = std::max(worst, std::abs(got - want));
      ++checks;
    }
  }
  // Whole-list mean for every k valid across all tallies.
  long long min_n = 12;
  for (const auto& t : tallies) min_n = std::min(min_n, t.n);
  for (int k = 1; k <= min_n; ++k) {
    double sum = 0;
    for (const auto& t : tallies) {
      sum += testing::pass_at_k_by_enumeration(static_cast<int>(t.n), static_cast<int>(t.c), k);
    }
    worst = std::max(worst, std::abs(pass_at_k(tallies, k) - sum / static_cast<double>(tallies.size())));
    ++checks;
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && secs < 10.0,
          std::to_string(checks) + " comparisons, max |err| " + fmt("%.3g", worst) + ", " + fmt("%.3f", secs) + " s"};
}

Outcome rgr_table() {
  const auto t0 = Clock::now();
  struct Row {
    RgrInputs in;
    double published;
  };
  const Row rows[] = {{{59.00, 79.00, 80.20}, 94.34},
                      {{27.50, 62.50, 57.50}, 116.67},
                      {{25.76, 33.33, 28.28}, 300.40},
                      {{28.79, 28.28, 40.40}, -4.39}};
  bool ok = true;
  std::string detail;
  for (const auto& r : rows) {
    const RgrValue v = rgr(r.in);
    const std::string shown = format_rgr(v);
    ok = ok && v && std::abs(std::stod(shown) - r.published) <= 0.01 + 1e-9;
    detail += shown + " ";
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 1.0, detail + "(" + fmt("%.4f", secs) + " s)"};
}

std::size_t emitted_lines(const PartitionSet& p, SftVariant v, const fs::path& out) {
  if (p.subset(v).empty()) return 0;
  emit_sft(p, v, out);
  std::size_t n = 0;
  for_each_line(read_file(out), [&](std::size_t, std::string_view l) { n += l.empty() ? 0 : 1; });
  return n;
}

Outcome partition_law() {
  testing::TempDir dir;
  std::mt19937_64 rng(424242);
  using Key = std::pair<std::string, int>;
  std::size_t violations = 0;
  std::size_t records = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    auto input = testing::random_graded_trajectories(rng, 30);
    records += input.size();
    PartitionSet p = partition(input);
    std::multiset<Key> d, dp, dn;
    for (const auto& r : input) d.emplace(r.problem_id, r.sample_index);
    std::multiset<Key> d_out;
    for (const auto& r : p.all) d_out.emplace(r.problem_id, r.sample_index);
    for (const auto& r : p.positive) {
      dp.emplace(r.problem_id, r.sample_index);
      if (!r.verdict->is_correct) ++violations;
    }
    for (const auto& r : p.negative) {
      dn.emplace(r.problem_id, r.sample_index);
      if (r.verdict->is_correct) ++violations;
    }
    for (const auto& k : dp) {
      if (dn.count(k) != 0) ++violations;
    }
    std::multiset<Key> uni = dp;
    uni.insert(dn.begin(), dn.end());
    if (uni != d || d_out != d) ++violations;
    const std::size_t all = emitted_lines(p, SftVariant::kW2sr, dir / "all.jsonl");
    const std::size_t pos = emitted_lines(p, SftVariant::kW2srP, dir / "p.jsonl");
    const std::size_t neg = emitted_lines(p, SftVariant::kW2srN, dir / "n.jsonl");
    if (all != pos + neg || all != input.size()) ++violations;
  }
  return {violations == 0,
          "10000 sets, " + std::to_string(records) + " trajectories, " + std::to_string(violations) + " violations"};
}

Outcome prompt_fidelity() {
  const std::string remainder = "Find the remainder when $2^{10}$ is divided by $7$.";
  const auto simple = PromptTemplate::builtin(TemplateId::kSimple);
  const auto complex = PromptTemplate::builtin(TemplateId::kComplex);
  const std::pair<std::string, std::string> cases[] = {
      {render(simple, "Q").completion_text(), "simple_Q.txt"},
      {render(complex, "Q").completion_text(), "complex_Q.txt"},
      {render(simple, remainder).completion_text(), "simple_remainder.txt"},
      {render(complex, remainder).completion_text(), "complex_remainder.txt"},
  };
  std::size_t matched = 0;
  for (const auto& [text, file] : cases) matched += text == read_file(testing::golden_dir() / file) ? 1 : 0;
  const bool messages_ok =
      render(complex, "Q").messages_json() == json::parse(read_file(testing::golden_dir() / "complex_Q.messages.json"));
  const bool phrases = cases[0].first.find("Let's think step by step.") != std::string::npos &&
                       cases[1].first.find("put your final answer within \\boxed{}") != std::string::npos;
  return {matched == 4 && messages_ok && phrases,
          std::to_string(matched) + "/4 golden renderings, chat messages " + (messages_ok ? "match" : "differ")};
}

int run(const std::vector<std::string>& args, std::string* out = nullptr) {
  std::ostringstream o, e;
  const int code = run_cli(args, o, e);
  if (out) *out = o.str();
  if (code != 0) std::cerr << "  [w2sr " << args.front() << " exited " << code << "] " << e.str();
  return code;
}

// One pass of distill -> partition -> emit-sft -> metrics -> report.
bool pipeline(const std::string& cfg, const fs::path& out) {
  bool ok = run({"ingest", "--config", cfg}) == 0 && run({"distill", "--config", cfg}) == 0 &&
            run({"partition", "--config", cfg}) == 0 &&
            run({"emit-sft", "--config", cfg, "--variant", "w2sr", "--variant", "w2sr_p", "--variant", "w2sr_n"}) == 0 &&
            run({"emit-config", "--config", cfg}) == 0 &&
            run({"metrics", "pass-at-k", "--config", cfg, "--tallies", (out / "distill_tallies.jsonl").string()}) == 0 &&
            run({"metrics", "lengths", "--config", cfg}) == 0;
  if (!ok) return false;
  const double p1 = json::parse(read_file(out / "metrics_pass_at_1.json"))["pass_at_k"].get<double>();
  const double len = json::parse(read_file(out / "metrics_lengths.json"))["mean_tokens"].get<double>();
  testing::write_text(out / "report_rows.jsonl",
                      json{{"benchmark", "e2e"}, {"method", "teacher"}, {"pass_at_1", 100.0 * p1}, {"mean_length", len}}
                              .dump() + "\n");
  return run({"report", "--config", cfg, "--rows", (out / "report_rows.jsonl").string()}) == 0 &&
         run({"eval", "--config", cfg}) == 0;
}

struct EndToEnd {
  Outcome determinism;
  Outcome profiles;
};

EndToEnd end_to_end() {
  EndToEnd result;
  const auto t0 = Clock::now();
  testing::TempDir dir;
  auto fx = testing::write_e2e_fixture(dir.path());
  const fs::path log_path = dir / "requests.jsonl";
  const fs::path out = dir / "out";
  std::map<std::string, std::string> first, second;
  json counts;
  bool ran = false;
  {
    MockServer server(ResponseScript::load(fx.script), {"127.0.0.1", 0, log_path});
    server.start();
    const std::string cfg = testing::write_project_config(dir.path(), fx, server.base_url(), out).string();
    if (pipeline(cfg, out)) {
      first = testing::snapshot_dir(out);
      counts = json::parse(read_file(out / "partition.json"))["counts"];
      fs::remove_all(out);
      ran = pipeline(cfg, out);
      if (ran) second = testing::snapshot_dir(out);
    }
    server.stop();
  }
  const double secs = seconds_since(t0);

  std::size_t differing = 0;
  for (const auto& [name, bytes] : first) {
    auto it = second.find(name);
    if (it == second.end() || it->second != bytes) {
      ++differing;
      std::cerr << "  artifact differs: " << name << '\n';
    }
  }
  const bool sizes = ran && counts == json{{"all", 20}, {"positive", 12}, {"negative", 8}};
  result.determinism = {ran && sizes && differing == 0 && first.size() == second.size() && secs < 30.0,
                        std::to_string(first.size()) + " artifacts, " + std::to_string(differing) +
                            " differing, partition " + (ran ? counts.dump() : "n/a") + ", " + fmt("%.2f", secs) + " s"};

  std::size_t distill_n = 0, eval_n = 0, bad = 0;
  for (const auto& e : load_request_log(log_path)) {
    const json b = json::parse(e.request_body);
    const auto t = b.value("temperature", -1.0), p = b.value("top_p", -1.0);
    const auto m = b.value("max_tokens", -1), n = b.value("n", -1);
    if (b["model"] == fx.teacher_model) {
      ++distill_n;
      if (!(t == 0.0 && p == 1.0 && m == 4096 && n == 1)) ++bad;
    } else {
      ++eval_n;
      if (!(t == 0.6 && p == 0.95 && m == 32768)) ++bad;
    }
  }
  result.profiles = {ran && bad == 0 && distill_n == 40 && eval_n == 40,
                     std::to_string(distill_n) + " distill and " + std::to_string(eval_n) + " eval requests, " +
                         std::to_string(bad) + " off-profile"};
  return result;
}

Outcome grading_corpus() {
  const auto cases = testing::load_grading_corpus(testing::data_dir() / "grading_corpus.jsonl");
  std::size_t agree = 0;
  for (const auto& c : cases) {
    const bool got = grade(c.completion, c.gold, c.kind).is_correct;
    if (got == c.expected) {
      ++agree;
    } else {
      std::cerr << "  disagreement (" << c.note << "): gold [" << c.gold << "] expected " << c.expected
                << "\n    " << c.completion << '\n';
    }
  }
  std::mt19937_64 rng(99);
  std::size_t not_idempotent = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::string x = testing::random_expression(rng);
    const std::string once = normalize(x);
    if (normalize(once) != once) ++not_idempotent;
  }
  const double rate = cases.empty() ? 0 : static_cast<double>(agree) / static_cast<double>(cases.size());
  return {cases.size() >= 200 && rate >= 0.95 && not_idempotent == 0,
          std::to_string(agree) + "/" + std::to_string(cases.size()) + " agree (" + fmt("%.2f", 100 * rate) +
              "%), " + std::to_string(not_idempotent) + "/10000 non-idempotent"};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](const char* name, const Outcome& o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << "  [" << o.detail << "]" << std::endl;
    if (!o.pass) ++failures;
  };
  auto guarded = [](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return Outcome{false, std::string("exception: ") + e.what()};
    }
  };
  report("pass@k oracle equivalence (1000 tallies, n<=12, tol 1e-12, <10 s)", guarded(pass_at_k_oracle));
  report("RGR reproduces published table values (+-0.01, <1 s)", guarded(rgr_table));
  report("partition law and emit-sft counts (10000 random sets)", guarded(partition_law));
  report("prompt fidelity against golden transcriptions", guarded(prompt_fidelity));
  EndToEnd e2e;
  try {
    e2e = end_to_end();
  } catch (const std::exception& e) {
    e2e.determinism = e2e.profiles = Outcome{false, std::string("exception: ") + e.what()};
  }
  report("end-to-end determinism, partition (20,12,8), <30 s", e2e.determinism);
  report("grading corpus >=95% agreement and normalize idempotence (10000 inputs)", guarded(grading_corpus));
  report("sampling profiles in mock request log (0,1.0,4096,1) / (0.6,0.95,32768)", e2e.profiles);
  std::cout << (failures == 0 ? "all acceptance criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
