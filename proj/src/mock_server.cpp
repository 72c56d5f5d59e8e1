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

#include "w2sr/mock_server.hpp"

#include "httplib.h"

#include <algorithm>
#include <chrono>
#include <regex>

namespace w2sr {

namespace {

constexpr int kMaxChoices = 128;
constexpr std::string_view kChatPath = "/v1/chat/completions";
constexpr std::string_view kCompletionsPath = "/v1/completions";

std::string error_body(std::string_view message, std::string_view type) {
  return json{{"error", {{"message", message}, {"type", type}}}}.dump();
}

std::size_t word_count(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    bool space = std::isspace(c) != 0;
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

// Throws std::invalid_argument with a client-facing message.
void check_number(const json& body, const char* field) {
  if (body.contains(field) && !body[field].is_number()) {
    throw std::invalid_argument(std::string("'") + field + "' must be a number");
  }
}

}  // namespace

ScriptEntry ScriptEntry::from_json(const json& j) {
  ScriptEntry e;
  e.model = j.value("model", "*");
  e.match = j.value("match", "default");
  if (j.contains("sample_index")) e.sample_index = j.at("sample_index").get<int>();
  e.text = j.at("text").get<std::string>();
  e.finish_reason = j.value("finish_reason", "stop");
  if (j.contains("completion_tokens")) e.completion_tokens = j.at("completion_tokens").get<long long>();
  e.latency_ms = j.value("latency_ms", 0);
  return e;
}

json ScriptEntry::to_json() const {
  json j{{"model", model}, {"match", match}, {"text", text}, {"finish_reason", finish_reason}};
  if (sample_index) j["sample_index"] = *sample_index;
  if (completion_tokens) j["completion_tokens"] = *completion_tokens;
  if (latency_ms != 0) j["latency_ms"] = latency_ms;
  return j;
}

ResponseScript::ResponseScript(std::vector<ScriptEntry> entries) : entries_(std::move(entries)) {
  bool wildcard_default = false;
  std::set<std::string> models_with_default;
  for (const auto& e : entries_) {
    if (e.finish_reason != "stop" && e.finish_reason != "length") {
      throw ValidationError("script entry finish_reason must be stop or length, got " + e.finish_reason);
    }
    if (e.match != "default" && e.match.rfind("id:", 0) != 0 && e.match.rfind("hash:", 0) != 0) {
      throw ValidationError("script entry match must be default, id:<id> or hash:<hex>, got " + e.match);
    }
    if (e.latency_ms < 0) throw ValidationError("script entry latency_ms must be >= 0");
    if (e.sample_index && *e.sample_index < 0) throw ValidationError("script entry sample_index must be >= 0");
    if (e.model.empty()) throw ValidationError("script entry model is empty");
    if (e.model != "*") models_.insert(e.model);
    if (e.match == "default" && !e.sample_index) {
      if (e.model == "*") {
        wildcard_default = true;
      } else {
        models_with_default.insert(e.model);
      }
    }
  }
  if (!wildcard_default) {
    if (models_.empty()) throw ValidationError("script has no default entry");
    for (const auto& m : models_) {
      if (!models_with_default.contains(m)) throw ValidationError("script has no default entry for model " + m);
    }
  }
}

ResponseScript ResponseScript::load(const std::filesystem::path& path) {
  std::vector<ScriptEntry> entries;
  for (const auto& row : read_jsonl(path)) entries.push_back(ScriptEntry::from_json(row));
  return ResponseScript(std::move(entries));
}

bool ResponseScript::accepts_model(const std::string& model) const {
  return models_.empty() || models_.contains(model);
}

const ScriptEntry* ResponseScript::find(const std::string& model, const std::string& key, int sample_index) const {
  const ScriptEntry* best = nullptr;
  int best_rank = -1;
  for (const auto& e : entries_) {
    if (e.match != key) continue;
    if (e.model != model && e.model != "*") continue;
    if (e.sample_index && *e.sample_index != sample_index) continue;
    int rank = (e.model == model ? 2 : 0) + (e.sample_index ? 1 : 0);
    // First entry wins among equals.
    if (rank > best_rank) {
      best = &e;
      best_rank = rank;
    }
  }
  return best;
}

const ScriptEntry& ResponseScript::lookup(const std::string& model, const std::string& prompt_text,
                                          int sample_index) const {
  if (auto tag = problem_id_tag(prompt_text)) {
    if (const ScriptEntry* e = find(model, "id:" + *tag, sample_index)) return *e;
  }
  json probe{{"prompt", prompt_text}};
  if (const ScriptEntry* e = find(model, "hash:" + prompt_hash(probe), sample_index)) return *e;
  if (const ScriptEntry* e = find(model, "default", sample_index)) return *e;
  throw ValidationError("script has no default entry for model " + model);
}

std::string normalized_prompt_text(const json& request) {
  std::string raw;
  if (request.contains("messages")) {
    for (const auto& m : request.at("messages")) {
      if (!raw.empty()) raw += '\n';
      raw += m.at("content").get<std::string>();
    }
  } else {
    raw = request.at("prompt").get<std::string>();
  }
  std::string out;
  bool pending_space = false;
  for (unsigned char c : raw) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(c);
  }
  return out;
}

std::string prompt_hash(const json& request) { return hex64(fnv1a64(normalized_prompt_text(request))); }

std::optional<std::string> problem_id_tag(std::string_view prompt_text) {
  static const std::regex tag(R"(\[id:([A-Za-z0-9_.:\-]+)\])");
  std::match_results<std::string_view::const_iterator> m;
  if (std::regex_search(prompt_text.begin(), prompt_text.end(), m, tag)) return m[1].str();
  return std::nullopt;
}

MockResponse respond(const ResponseScript& script, std::string_view path, std::string_view request_body) {
  const bool chat = path == kChatPath;
  if (!chat && path != kCompletionsPath) return {404, error_body("unknown path", "not_found"), 0};

  json body = json::parse(request_body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) return {400, error_body("body is not a JSON object", "invalid_request_error"), 0};
  int n = 1;
  try {
    if (!body.contains("model") || !body["model"].is_string()) throw std::invalid_argument("'model' is required");
    if (chat) {
      if (!body.contains("messages") || !body["messages"].is_array() || body["messages"].empty()) {
        throw std::invalid_argument("'messages' must be a nonempty array");
      }
      for (const auto& m : body["messages"]) {
        if (!m.is_object() || !m.contains("role") || !m["role"].is_string() || !m.contains("content") ||
            !m["content"].is_string()) {
          throw std::invalid_argument("each message needs string 'role' and 'content'");
        }
      }
    } else if (!body.contains("prompt") || !body["prompt"].is_string()) {
      throw std::invalid_argument("'prompt' must be a string");
    }
    for (const char* f : {"temperature", "top_p", "max_tokens", "seed"}) check_number(body, f);
    if (body.contains("n")) {
      if (!body["n"].is_number_integer()) throw std::invalid_argument("'n' must be an integer");
      n = body["n"].get<int>();
      if (n < 1 || n > kMaxChoices) throw std::invalid_argument("'n' out of range");
    }
  } catch (const std::invalid_argument& e) {
    return {400, error_body(e.what(), "invalid_request_error"), 0};
  }

  const std::string model = body["model"].get<std::string>();
  if (!script.accepts_model(model)) {
    return {404, error_body("The model '" + model + "' does not exist", "not_found_error"), 0};
  }

  const std::string prompt = normalized_prompt_text(body);
  json choices = json::array();
  long long completion_tokens = 0;
  int latency = 0;
  for (int i = 0; i < n; ++i) {
    const ScriptEntry& e = script.lookup(model, prompt, i);
    json choice{{"index", i}};
    if (chat) {
      choice["message"] = {{"role", "assistant"}, {"content", e.text}};
    } else {
      choice["text"] = e.text;
    }
    choice["finish_reason"] = e.finish_reason;
    choices.push_back(std::move(choice));
    completion_tokens += e.completion_tokens.value_or(static_cast<long long>(word_count(e.text)));
    latency = std::max(latency, e.latency_ms);
  }
  const long long prompt_tokens = static_cast<long long>(word_count(prompt));
  json response{{"id", "mock-" + hex64(fnv1a64(body.dump()))},
                {"object", chat ? "chat.completion" : "text_completion"},
                {"created", 0},
                {"model", model},
                {"choices", std::move(choices)},
                {"usage",
                 {{"prompt_tokens", prompt_tokens},
                  {"completion_tokens", completion_tokens},
                  {"total_tokens", prompt_tokens + completion_tokens}}}};
  return {200, response.dump(), latency};
}

json RequestLogEntry::to_json() const {
  json j{{"seq", seq}, {"path", path}, {"status", status}};
  json parsed = json::parse(request_body, nullptr, false);
  if (parsed.is_discarded()) {
    j["request_raw"] = request_body;
  } else {
    j["request"] = std::move(parsed);
  }
  j["response"] = response_body;
  return j;
}

RequestLogEntry RequestLogEntry::from_json(const json& j) {
  RequestLogEntry e;
  e.seq = j.at("seq").get<std::size_t>();
  e.path = j.at("path").get<std::string>();
  e.status = j.at("status").get<int>();
  e.request_body = j.contains("request") ? j.at("request").dump() : j.at("request_raw").get<std::string>();
  e.response_body = j.at("response").get<std::string>();
  return e;
}

std::vector<RequestLogEntry> load_request_log(const std::filesystem::path& path) {
  std::vector<RequestLogEntry> out;
  for (const auto& row : read_jsonl(path)) out.push_back(RequestLogEntry::from_json(row));
  return out;
}

class MockServer::Impl {
 public:
  httplib::Server server;
};

MockServer::MockServer(ResponseScript script, Options options)
    : script_(std::move(script)), options_(std::move(options)), impl_(std::make_unique<Impl>()) {}

MockServer::~MockServer() {
  try {
    stop();
  } catch (...) {
  }
}

void MockServer::start() {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    MockResponse out = respond(script_, req.path, req.body);
    if (out.latency_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(out.latency_ms));
    {
      std::lock_guard lock(log_mu_);
      log_.push_back({log_.size(), req.path, req.body, out.status, out.body});
    }
    res.status = out.status;
    res.set_content(out.body, "application/json");
  };
  impl_->server.Post(std::string(kChatPath), handler);
  impl_->server.Post(std::string(kCompletionsPath), handler);

  port_ = options_.port == 0 ? impl_->server.bind_to_any_port(options_.host)
                             : (impl_->server.bind_to_port(options_.host, options_.port) ? options_.port : -1);
  if (port_ <= 0) throw IoError("mock server: cannot bind " + options_.host + ":" + std::to_string(options_.port));
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void MockServer::stop() {
  if (stopped_) return;
  stopped_ = true;
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
  if (options_.log_path) {
    std::vector<json> rows;
    for (const auto& e : requests()) rows.push_back(e.to_json());
    write_file_atomic(*options_.log_path, to_jsonl(rows));
  }
}

void MockServer::wait() {
  if (thread_.joinable()) thread_.join();
}

std::string MockServer::base_url() const { return "http://" + options_.host + ":" + std::to_string(port_) + "/v1"; }

std::vector<RequestLogEntry> MockServer::requests() const {
  std::lock_guard lock(log_mu_);
  return log_;
}

}  // namespace w2sr
