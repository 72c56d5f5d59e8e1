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


#include <chrono>
#include <csignal>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "test_support.hpp"
#include "w2sr/cli.hpp"
#include "w2sr/mock_server.hpp"

using namespace w2sr;
using w2sr::testing::TempDir;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

}  // namespace

TEST_CASE("metrics rgr prints the two-decimal value") {
  auto r = cli({"metrics", "rgr", "--weak", "59.00", "--w2s", "79.00", "--strong", "80.20"});
  CHECK(r.code == 0);
  CHECK(r.out == "94.34\n");
  r = cli({"metrics", "rgr", "--weak", "40", "--w2s", "50", "--strong", "40"});
  CHECK(r.out == "\xE2\x80\x93\n");
}

TEST_CASE("usage errors exit 1") {
  auto r = cli({"metrics", "rgr", "--weak", "1", "--w2s", "2", "--strong", "3", "--frobnicate"});
  CHECK(r.code == 1);
  CHECK(r.err.find("frobnicate") != std::string::npos);
  CHECK(cli({}).code == 1);
  CHECK(cli({"distill", "--config", "/nonexistent/cfg.json"}).code == 1);
  CHECK(cli({"emit-sft"}).code == 1);
  CHECK(cli({"metrics", "rgr", "--weak", "120", "--w2s", "2", "--strong", "3"}).code == 1);
}

TEST_CASE("help exits 0") {
  auto r = cli({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("distill") != std::string::npos);
  CHECK(cli({"eval", "--help"}).code == 0);
}

TEST_CASE("bad config contents exit 1") {
  TempDir dir;
  testing::write_text(dir / "cfg.json", "{not json");
  CHECK(cli({"partition", "--config", (dir / "cfg.json").string()}).code == 1);
  testing::write_text(dir / "cfg2.json", R"({"corpora": [{"path": "missing.jsonl"}]})");
  auto r = cli({"ingest", "--config", (dir / "cfg2.json").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("missing.jsonl") != std::string::npos);
}

TEST_CASE("pipeline over the mock server") {
  TempDir dir;
  auto fx = testing::write_e2e_fixture(dir.path());
  MockServer server(ResponseScript::load(fx.script), {});
  server.start();
  const auto out = dir / "out";
  const auto cfg = testing::write_project_config(dir.path(), fx, server.base_url(), out).string();

  REQUIRE(cli({"ingest", "--config", cfg}).code == 0);
  CHECK(load_corpus(out / "corpus.jsonl").size() == 20);
  auto r = cli({"distill", "--config", cfg});
  REQUIRE(r.code == 0);
  r = cli({"partition", "--config", cfg});
  REQUIRE(r.code == 0);
  CHECK(r.out == "D=20 D_p=12 D_n=8\n");
  r = cli({"emit-sft", "--config", cfg, "--variant", "w2sr_p"});
  REQUIRE(r.code == 0);
  CHECK(read_jsonl(out / "sft_w2sr_p.jsonl").size() == 12);
  for (const char* f : {"trajectories.jsonl", "partition.json", "sft_w2sr_p.jsonl", "manifests/distill.json",
                        "manifests/partition.json", "manifests/emit-sft-w2sr_p.json", "manifests/ingest.json"}) {
    CHECK_MESSAGE(std::filesystem::exists(out / f), f);
  }
  const json m = json::parse(read_file(out / "manifests/emit-sft-w2sr_p.json"));
  CHECK(m["version"] == std::string(kToolVersion));
  CHECK(m["seed"] == 1234);
  CHECK(m["outputs"][0]["sha256"] == sha256_hex(read_file(out / "sft_w2sr_p.jsonl")));
  CHECK(m["config"]["sha256"] == sha256_hex(read_file(cfg)));

  // Teacher requests used the greedy profile and the project seed.
  for (const auto& e : server.requests()) {
    const json body = json::parse(e.request_body);
    CHECK(body["temperature"] == 0.0);
    CHECK(body["seed"] == 1234);
  }

  r = cli({"emit-config", "--config", cfg, "--preset", "epochs10", "--dataset", (out / "sft_w2sr_p.jsonl").string()});
  REQUIRE(r.code == 0);
  const std::string tc = read_file(out / "train_config.txt");
  CHECK(tc.find("epochs=10\n") != std::string::npos);
  CHECK(tc.find("seed=1234\n") != std::string::npos);
  CHECK(tc.find("dataset_path=sft_w2sr_p.jsonl\n") != std::string::npos);

  r = cli({"eval", "--config", cfg});
  REQUIRE(r.code == 0);
  const json summary = json::parse(read_file(out / "eval_summary.json"));
  // Student tallies: c=2 on 10 problems, c=1 on 5, c=0 on 5, n=2.
  CHECK(summary["pass_at_1"].get<double>() == doctest::Approx(12.5 / 20));
  CHECK(summary["pass_at_n"].get<double>() == doctest::Approx(15.0 / 20));

  r = cli({"metrics", "pass-at-k", "--config", cfg, "--tallies", (out / "eval_tallies.jsonl").string(), "--k", "2"});
  CHECK(r.code == 0);
  CHECK(r.out == "75.00\n");
  r = cli({"metrics", "lengths", "--config", cfg});
  CHECK(r.code == 0);
  CHECK(r.out.find("endpoint_usage") != std::string::npos);

  // Replay reruns the recorded command and confirms identical outputs.
  r = cli({"replay", (out / "manifests/partition.json").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("DIFFERENT") == std::string::npos);
}

TEST_CASE("flags override the config file") {
  TempDir dir;
  auto fx = testing::write_e2e_fixture(dir.path());
  const auto cfg = testing::write_project_config(dir.path(), fx, "http://127.0.0.1:9/v1", dir / "cfg_out").string();
  REQUIRE(cli({"ingest", "--config", cfg, "--output-dir", (dir / "flag_out").string(), "--min-level", "3"}).code == 0);
  CHECK_FALSE(std::filesystem::exists(dir / "cfg_out" / "corpus.jsonl"));
  const Corpus c = load_corpus(dir / "flag_out" / "corpus.jsonl");
  CHECK(c.size() == 12);
}

TEST_CASE("distill exit codes for partial and total failure") {
  TempDir dir;
  auto fx = testing::write_e2e_fixture(dir.path());
  httplib::Server http;
  http.Post("/v1/chat/completions", [](const httplib::Request& req, httplib::Response& res) {
    if (req.body.find("[id:e2e-01]") != std::string::npos) {
      res.status = 500;
      return;
    }
    res.set_content(R"({"choices":[{"index":0,"message":{"role":"assistant","content":"\\boxed{1}"},)"
                    R"("finish_reason":"stop"}]})",
                    "application/json");
  });
  const int port = http.bind_to_any_port("127.0.0.1");
  std::thread t([&] { http.listen_after_bind(); });
  http.wait_until_ready();
  const std::string url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  const auto cfg = testing::write_project_config(dir.path(), fx, url, dir / "out").string();
  REQUIRE(cli({"ingest", "--config", cfg}).code == 0);
  auto r = cli({"distill", "--config", cfg});
  CHECK(r.code == 2);
  CHECK(read_jsonl(dir / "out" / "trajectories.jsonl").size() == 20);
  http.stop();
  t.join();

  MockServer other(ResponseScript::load(fx.script), {});
  other.start();
  r = cli({"distill", "--config", cfg, "--teacher-url", other.base_url(), "--teacher-model", "unknown-model"});
  CHECK(r.code == 3);
}

TEST_CASE("report subcommand") {
  TempDir dir;
  testing::write_text(dir / "rows.jsonl",
                      "{\"benchmark\":\"MATH\",\"method\":\"W2SR-P\",\"pass_at_1\":79.0,\"weak\":59.0,\"strong\":80.2}\n");
  auto r = cli({"report", "--rows", (dir / "rows.jsonl").string(), "--output-dir", (dir / "out").string()});
  CHECK(r.code == 0);
  CHECK(read_file(dir / "out" / "report.csv") == "Benchmark,Method,Pass@1,RGR,MeanLength\nMATH,W2SR-P,79.00,94.34,\n");
}

TEST_CASE("mock-serve answers until interrupted") {
  TempDir dir;
  auto fx = testing::write_e2e_fixture(dir.path());
  Run r;
  std::thread server([&] {
    r = cli({"mock-serve", "--script", fx.script.string(), "--port", "0", "--log", (dir / "log.jsonl").string(),
             "--ready-file", (dir / "ready").string()});
  });
  for (int i = 0; i < 200 && !std::filesystem::exists(dir / "ready"); ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  REQUIRE(std::filesystem::exists(dir / "ready"));
  const std::string url = trim(read_file(dir / "ready"));
  const auto port = std::stoi(url.substr(url.rfind(':') + 1));
  httplib::Client client("127.0.0.1", port);
  auto res = client.Post("/v1/chat/completions",
                         R"({"model":"qwen2.5-1.5b-instruct","messages":[{"role":"user","content":"[id:e2e-01] q"}]})",
                         "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  std::raise(SIGINT);
  server.join();
  CHECK(r.code == 0);
  CHECK(load_request_log(dir / "log.jsonl").size() == 1);
}
