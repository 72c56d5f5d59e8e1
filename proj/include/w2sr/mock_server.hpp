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

// Deterministic stand-in for an OpenAI-compatible inference server.
//
// Script file: JSONL, one entry per line:
//
//   {"model": "teacher" | "*",
//    "match": "id:<problem id>" | "hash:<16 hex digits>" | "default",
//    "sample_index": 0,              (optional; entry applies to that index)
//    "text": "...",
//    "finish_reason": "stop" | "length",
//    "completion_tokens": 12,        (optional)
//    "latency_ms": 0}                (optional)
//
// A request is matched on the first "[id:XYZ]" tag found in its prompt text,
// then on the prompt hash, then on the default entry. Model-specific entries
// win over "*", index-specific entries over index-free ones.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "w2sr/common.hpp"

namespace w2sr {

struct ScriptEntry {
  std::string model;
  std::string match;
  std::optional<int> sample_index;
  std::string text;
  std::string finish_reason = "stop";
  std::optional<long long> completion_tokens;
  int latency_ms = 0;

  static ScriptEntry from_json(const json& j);
  json to_json() const;
};

class ResponseScript {
 public:
  // Throws ValidationError when an entry is invalid or a declared model has
  // no reachable default entry.
  explicit ResponseScript(std::vector<ScriptEntry> entries);

  static ResponseScript load(const std::filesystem::path& path);

  // Empty when the script only has "*" entries (any model accepted).
  const std::set<std::string>& models() const { return models_; }
  bool accepts_model(const std::string& model) const;

  const ScriptEntry& lookup(const std::string& model, const std::string& prompt_text, int sample_index) const;

  const std::vector<ScriptEntry>& entries() const { return entries_; }

 private:
  const ScriptEntry* find(const std::string& model, const std::string& key, int sample_index) const;

  std::vector<ScriptEntry> entries_;
  std::set<std::string> models_;
};

// Whitespace-collapsed prompt text used for "hash:" keys. Chat requests join
// message contents with "\n".
std::string normalized_prompt_text(const json& request);
std::string prompt_hash(const json& request);
std::optional<std::string> problem_id_tag(std::string_view prompt_text);

struct MockResponse {
  int status = 200;
  std::string body;
  int latency_ms = 0;
};

// Pure function of (path, request body, script).
MockResponse respond(const ResponseScript& script, std::string_view path, std::string_view request_body);

struct RequestLogEntry {
  std::size_t seq = 0;
  std::string path;
  std::string request_body;
  int status = 0;
  std::string response_body;

  json to_json() const;
  static RequestLogEntry from_json(const json& j);
};

std::vector<RequestLogEntry> load_request_log(const std::filesystem::path& path);

class MockServer {
 public:
  struct Options {
    std::string host = "127.0.0.1";
    int port = 0;  // 0 binds an ephemeral port
    std::optional<std::filesystem::path> log_path;
  };

  MockServer(ResponseScript script, Options options);
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  // Binds and starts serving on a background thread. Throws IoError when the
  // port cannot be bound.
  void start();
  // Stops serving and writes the request log, if configured. Idempotent.
  void stop();
  // Blocks until stop() is called from another thread.
  void wait();

  int port() const { return port_; }
  std::string base_url() const;

  std::vector<RequestLogEntry> requests() const;

 private:
  class Impl;

  ResponseScript script_;
  Options options_;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  int port_ = 0;
  bool stopped_ = false;
  mutable std::mutex log_mu_;
  std::vector<RequestLogEntry> log_;
};

}  // namespace w2sr
