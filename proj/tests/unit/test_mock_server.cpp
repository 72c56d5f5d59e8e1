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


#include "doctest.h"
#include "httplib.h"
#include "test_support.hpp"
#include "w2sr/mock_server.hpp"

using namespace w2sr;
using w2sr::testing::TempDir;

namespace {

ResponseScript sample_script() {
  std::vector<json> rows = {
      json{{"model", "modelX"}, {"match", "default"}, {"text", "fallback"}},
      json{{"model", "modelX"}, {"match", "id:p1"}, {"text", "scripted p1"}, {"completion_tokens", 11}},
      json{{"model", "modelX"}, {"match", "id:p2"}, {"sample_index", 1}, {"text", "p2 second"}},
      json{{"model", "modelX"}, {"match", "id:p2"}, {"text", "p2 any"}},
      json{{"model", "modelX"}, {"match", "id:p3"}, {"text", "cut"}, {"finish_reason", "length"}},
  };
  std::vector<ScriptEntry> entries;
  for (const auto& r : rows) entries.push_back(ScriptEntry::from_json(r));
  return ResponseScript(entries);
}

std::string chat_request(const std::string& model, const std::string& content, int n = 1) {
  return json{{"model", model},
              {"messages", {{{"role", "user"}, {"content", content}}}},
              {"temperature", 0.0},
              {"n", n}}
      .dump();
}

json choices_of(const MockResponse& r) { return json::parse(r.body).at("choices"); }

}  // namespace

TEST_CASE("scripted prompt returns the exact text") {
  auto r = respond(sample_script(), "/v1/chat/completions", chat_request("modelX", "[id:p1] question"));
  REQUIRE(r.status == 200);
  auto c = choices_of(r);
  REQUIRE(c.size() == 1);
  CHECK(c[0]["message"]["content"] == "scripted p1");
  CHECK(c[0]["finish_reason"] == "stop");
  CHECK(json::parse(r.body)["usage"]["completion_tokens"] == 11);
}

TEST_CASE("n=3 returns index-ordered choices with per-index variants") {
  auto c = choices_of(respond(sample_script(), "/v1/chat/completions", chat_request("modelX", "[id:p2] q", 3)));
  REQUIRE(c.size() == 3);
  CHECK(c[0]["index"] == 0);
  CHECK(c[0]["message"]["content"] == "p2 any");
  CHECK(c[1]["message"]["content"] == "p2 second");
  CHECK(c[2]["message"]["content"] == "p2 any");
  auto same = choices_of(respond(sample_script(), "/v1/chat/completions", chat_request("modelX", "[id:p1] q", 3)));
  for (const auto& ch : same) CHECK(ch["message"]["content"] == "scripted p1");
}

TEST_CASE("unscripted prompt gets the default entry") {
  auto c = choices_of(respond(sample_script(), "/v1/chat/completions", chat_request("modelX", "no tag here")));
  CHECK(c[0]["message"]["content"] == "fallback");
}

TEST_CASE("truncation is reported through finish_reason") {
  auto c = choices_of(respond(sample_script(), "/v1/chat/completions", chat_request("modelX", "[id:p3]")));
  CHECK(c[0]["finish_reason"] == "length");
}

TEST_CASE("hash keys match whitespace-normalized prompt text") {
  json req = json::parse(chat_request("modelX", "What   is\n 2+2?"));
  const std::string key = "hash:" + prompt_hash(req);
  CHECK(prompt_hash(json::parse(chat_request("modelX", "What is 2+2?"))) == prompt_hash(req));
  std::vector<ScriptEntry> entries{ScriptEntry::from_json(json{{"match", "default"}, {"text", "d"}}),
                                   ScriptEntry::from_json(json{{"match", key}, {"text", "four"}})};
  ResponseScript script(entries);
  auto c = choices_of(respond(script, "/v1/chat/completions", chat_request("any", "What is 2+2?")));
  CHECK(c[0]["message"]["content"] == "four");
}

TEST_CASE("malformed requests get 400, unknown models and paths 404") {
  auto s = sample_script();
  CHECK(respond(s, "/v1/chat/completions", "{not json").status == 400);
  CHECK(respond(s, "/v1/chat/completions", "{\"model\":\"modelX\"}").status == 400);
  CHECK(respond(s, "/v1/chat/completions", "{\"model\":\"modelX\",\"messages\":[],\"n\":1}").status == 400);
  CHECK(respond(s, "/v1/chat/completions",
                "{\"model\":\"modelX\",\"messages\":[{\"role\":\"user\",\"content\":\"x\"}],\"temperature\":\"hot\"}")
            .status == 400);
  auto unknown = respond(s, "/v1/chat/completions", chat_request("nope", "x"));
  CHECK(unknown.status == 404);
  CHECK(json::parse(unknown.body).contains("error"));
  CHECK(respond(s, "/v1/embeddings", chat_request("modelX", "x")).status == 404);
}

TEST_CASE("completions endpoint returns text choices") {
  std::string body = json{{"model", "modelX"}, {"prompt", "[id:p1] q"}}.dump();
  auto c = choices_of(respond(sample_script(), "/v1/completions", body));
  CHECK(c[0]["text"] == "scripted p1");
}

TEST_CASE("script validation") {
  CHECK_THROWS_AS(ResponseScript({ScriptEntry::from_json(json{{"model", "m"}, {"match", "id:x"}, {"text", "t"}})}),
                  ValidationError);
  CHECK_THROWS_AS(ResponseScript({ScriptEntry::from_json(
                      json{{"match", "default"}, {"text", "t"}, {"finish_reason", "error"}})}),
                  ValidationError);
  CHECK_THROWS_AS(ResponseScript({ScriptEntry::from_json(json{{"match", "prefix:x"}, {"text", "t"}})}), ValidationError);
}

TEST_CASE("problem id tags") {
  CHECK(problem_id_tag("abc [id:math/12.json] def") == std::nullopt);
  CHECK(problem_id_tag("abc [id:e2e-01] def") == "e2e-01");
  CHECK_FALSE(problem_id_tag("no tag").has_value());
}

TEST_CASE("server responses are pure and the request log replays byte-for-byte") {
  TempDir dir;
  const auto log_path = dir / "log.jsonl";
  {
    MockServer server(sample_script(), {"127.0.0.1", 0, log_path});
    server.start();
    httplib::Client client("127.0.0.1", server.port());
    std::vector<std::string> bodies;
    for (const std::string& req : {chat_request("modelX", "[id:p1] a"), chat_request("modelX", "[id:p2] b", 2),
                                   chat_request("modelX", "[id:p1] a"), chat_request("ghost", "x"),
                                   std::string("{broken")}) {
      auto res = client.Post("/v1/chat/completions", req, "application/json");
      REQUIRE(res);
      bodies.push_back(res->body);
    }
    CHECK(bodies[0] == bodies[2]);
    server.stop();
  }
  auto log = load_request_log(log_path);
  REQUIRE(log.size() == 5);
  CHECK(log[3].status == 404);
  CHECK(log[4].status == 400);
  for (const auto& e : log) {
    auto again = respond(sample_script(), e.path, e.request_body);
    CHECK(again.status == e.status);
    CHECK(again.body == e.response_body);
  }
}
