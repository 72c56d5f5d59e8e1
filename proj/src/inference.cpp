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

#include "w2sr/inference.hpp"

#include "httplib.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <thread>
#include <tuple>

namespace w2sr {

namespace {

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path_prefix;
};

ParsedUrl parse_base_url(const std::string& url) {
  const std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("base_url needs a scheme: " + url);
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw ValidationError("unsupported scheme in base_url: " + url);
  const std::size_t path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  out.scheme_host_port = url.substr(0, path_start);
  if (path_start != std::string::npos) out.path_prefix = url.substr(path_start);
  while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  return out;
}

// Outcome of one request attempt sequence for a single record.
struct CallOutcome {
  std::vector<GenerationResult> results;
  bool failed = false;
};

class EndpointCaller {
 public:
  EndpointCaller(const EndpointConfig& endpoint, const SamplingProfile& profile,
                 std::atomic<std::size_t>& in_flight, std::atomic<std::size_t>& max_in_flight)
      : endpoint_(endpoint),
        profile_(profile),
        url_(parse_base_url(endpoint.base_url)),
        client_(url_.scheme_host_port),
        in_flight_(in_flight),
        max_in_flight_(max_in_flight) {
    const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::duration<double>(endpoint.timeout_s));
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usecs = (timeout - secs).count();
    client_.set_connection_timeout(secs.count(), usecs);
    client_.set_read_timeout(secs.count(), usecs);
    client_.set_write_timeout(secs.count(), usecs);
    client_.set_keep_alive(true);
    if (!endpoint.auth_token_ref.empty()) {
      if (const char* token = std::getenv(endpoint.auth_token_ref.c_str()); token != nullptr && *token != '\0') {
        client_.set_bearer_token_auth(token);
      }
    }
    path_ = url_.path_prefix + (endpoint.api == ApiStyle::kChat ? "/chat/completions" : "/completions");
  }

  CallOutcome call(const ProblemRecord& record, const json& body) {
    std::mt19937_64 jitter_rng(fnv1a64(record.id) ^ static_cast<std::uint64_t>(profile_.seed.value_or(0)));
    const std::string payload = body.dump();
    std::string last_error;
    for (int attempt = 0; attempt <= endpoint_.max_retries; ++attempt) {
      if (attempt > 0) backoff(attempt - 1, jitter_rng);
      httplib::Result res = post(payload);
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        return fail(record, "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
      }
      try {
        return CallOutcome{parse_response(record, json::parse(res->body)), false};
      } catch (const std::exception& e) {
        return fail(record, std::string("malformed response: ") + e.what());
      }
    }
    return fail(record, last_error + " (after " + std::to_string(endpoint_.max_retries) + " retries)");
  }

 private:
  httplib::Result post(const std::string& payload) {
    std::size_t now = ++in_flight_;
    std::size_t seen = max_in_flight_.load();
    while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
    }
    httplib::Result res = client_.Post(path_, payload, "application/json");
    --in_flight_;
    return res;
  }

  void backoff(int retry, std::mt19937_64& rng) const {
    const double base = endpoint_.retry_base_ms;
    std::uniform_real_distribution<double> jitter(0.0, base);
    const double delay_ms = base * std::pow(2.0, retry) + jitter(rng);
    std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay_ms));
  }

  CallOutcome fail(const ProblemRecord& record, const std::string& detail) const {
    CallOutcome out;
    out.failed = true;
    for (int i = 0; i < profile_.n_samples; ++i) out.results.push_back(GenerationResult::failure(record.id, i, detail));
    return out;
  }

  std::vector<GenerationResult> parse_response(const ProblemRecord& record, const json& response) const {
    const json& choices = response.at("choices");
    std::vector<std::optional<GenerationResult>> slots(static_cast<std::size_t>(profile_.n_samples));
    std::size_t position = 0;
    for (const auto& choice : choices) {
      const std::size_t index = choice.contains("index") ? choice.at("index").get<std::size_t>() : position;
      ++position;
      if (index >= slots.size()) continue;
      GenerationResult r;
      r.record_id = record.id;
      r.sample_index = static_cast<int>(index);
      if (endpoint_.api == ApiStyle::kChat) {
        const json& content = choice.at("message").at("content");
        r.text = content.is_null() ? "" : content.get<std::string>();
      } else {
        r.text = choice.at("text").get<std::string>();
      }
      const json fr = choice.value("finish_reason", json());
      r.finish_reason = (fr.is_string() && fr.get<std::string>() == "length") ? FinishReason::kLength
                                                                               : FinishReason::kStop;
      slots[index] = std::move(r);
    }
    // Aggregate usage is only attributable to a single choice.
    if (profile_.n_samples == 1 && slots[0] && response.contains("usage") &&
        response["usage"].contains("completion_tokens") && response["usage"]["completion_tokens"].is_number()) {
      slots[0]->completion_tokens = response["usage"]["completion_tokens"].get<long long>();
    }
    std::vector<GenerationResult> out;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      out.push_back(slots[i] ? std::move(*slots[i])
                             : GenerationResult::failure(record.id, static_cast<int>(i), "endpoint returned no choice"));
    }
    return out;
  }

  const EndpointConfig& endpoint_;
  const SamplingProfile& profile_;
  ParsedUrl url_;
  httplib::Client client_;
  std::string path_;
  std::atomic<std::size_t>& in_flight_;
  std::atomic<std::size_t>& max_in_flight_;
};

std::string checkpoint_fingerprint(const EndpointConfig& endpoint, const SamplingProfile& profile,
                                   const PromptTemplate& tmpl) {
  json j{{"model", endpoint.model},
         {"api", to_string(endpoint.api)},
         {"profile", profile.to_json()},
         {"template", to_string(tmpl.id())},
         {"system", tmpl.system_text().value_or("")},
         {"body", tmpl.body()}};
  return sha256_hex(j.dump());
}

// Records fully generated by a previous run. Truncated trailing lines (an
// interrupted write) are ignored.
std::map<std::string, std::vector<GenerationResult>> read_checkpoint(const std::filesystem::path& path,
                                                                     const std::string& fingerprint, int n_samples) {
  std::map<std::string, std::vector<GenerationResult>> done;
  if (!std::filesystem::exists(path)) return done;
  const std::string text = read_file(path);
  bool header_ok = false;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) return;
    if (line_no == 1) {
      header_ok = j.is_object() && j.value("checkpoint", "") == fingerprint;
      return;
    }
    if (!header_ok) return;
    try {
      std::vector<GenerationResult> results;
      for (const auto& r : j.at("results")) results.push_back(GenerationResult::from_json(r));
      if (static_cast<int>(results.size()) != n_samples) return;
      done[j.at("record_id").get<std::string>()] = std::move(results);
    } catch (const std::exception&) {
    }
  });
  if (!header_ok) done.clear();
  return done;
}

}  // namespace

std::string_view to_string(ApiStyle style) { return style == ApiStyle::kChat ? "chat" : "completions"; }

ApiStyle api_style_from_string(std::string_view s) {
  if (s == "chat") return ApiStyle::kChat;
  if (s == "completions") return ApiStyle::kCompletions;
  throw ValidationError("unknown api style: " + std::string(s));
}

void EndpointConfig::validate() const {
  if (model.empty()) throw ValidationError("endpoint: model is empty");
  if (max_parallel < 1) throw ValidationError("endpoint: max_parallel must be >= 1");
  if (!(timeout_s > 0)) throw ValidationError("endpoint: timeout must be > 0");
  if (max_retries < 0) throw ValidationError("endpoint: max_retries must be >= 0");
  if (retry_base_ms < 0) throw ValidationError("endpoint: retry_base_ms must be >= 0");
  parse_base_url(base_url);
}

json EndpointConfig::to_json() const {
  return json{{"base_url", base_url},   {"model", model},           {"auth_token_ref", auth_token_ref},
              {"timeout_s", timeout_s}, {"max_parallel", max_parallel}, {"max_retries", max_retries},
              {"api", to_string(api)},  {"retry_base_ms", retry_base_ms}};
}

EndpointConfig EndpointConfig::from_json(const json& j) {
  EndpointConfig c;
  c.base_url = j.value("base_url", c.base_url);
  c.model = j.value("model", c.model);
  c.auth_token_ref = j.value("auth_token_ref", c.auth_token_ref);
  c.timeout_s = j.value("timeout_s", c.timeout_s);
  c.max_parallel = j.value("max_parallel", c.max_parallel);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.retry_base_ms = j.value("retry_base_ms", c.retry_base_ms);
  if (j.contains("api")) c.api = api_style_from_string(j.at("api").get<std::string>());
  return c;
}

SamplingProfile SamplingProfile::distill() {
  SamplingProfile p;
  p.name = "distill";
  p.temperature = 0.0;
  p.top_p = 1.0;
  p.max_tokens = 4096;
  p.n_samples = 1;
  return p;
}

SamplingProfile SamplingProfile::eval(int k) {
  SamplingProfile p;
  p.name = "eval";
  p.temperature = 0.6;
  p.top_p = 0.95;
  p.max_tokens = 32768;
  p.n_samples = k;
  return p;
}

SamplingProfile SamplingProfile::named(std::string_view name, int k) {
  if (name == "distill") return distill();
  if (name == "eval") return eval(k);
  throw ValidationError("unknown sampling profile: " + std::string(name));
}

void SamplingProfile::validate() const {
  if (!(temperature >= 0)) throw ValidationError("profile: temperature must be >= 0");
  if (!(top_p > 0 && top_p <= 1)) throw ValidationError("profile: top_p must lie in (0,1]");
  if (max_tokens < 1) throw ValidationError("profile: max_tokens must be positive");
  if (n_samples < 1) throw ValidationError("profile: n_samples must be positive");
}

json SamplingProfile::to_json() const {
  json j{{"name", name}, {"temperature", temperature}, {"top_p", top_p}, {"max_tokens", max_tokens},
         {"n_samples", n_samples}};
  if (seed) j["seed"] = *seed;
  return j;
}

void SamplingProfile::apply_overrides(const json& j) {
  temperature = j.value("temperature", temperature);
  top_p = j.value("top_p", top_p);
  max_tokens = j.value("max_tokens", max_tokens);
  n_samples = j.value("n_samples", n_samples);
  if (j.contains("seed")) {
    if (j["seed"].is_null()) {
      seed.reset();
    } else {
      seed = j["seed"].get<std::int64_t>();
    }
  }
}

std::string_view to_string(FinishReason r) {
  switch (r) {
    case FinishReason::kStop: return "stop";
    case FinishReason::kLength: return "length";
    case FinishReason::kError: return "error";
  }
  return "error";
}

FinishReason finish_reason_from_string(std::string_view s) {
  if (s == "stop") return FinishReason::kStop;
  if (s == "length") return FinishReason::kLength;
  if (s == "error") return FinishReason::kError;
  throw ValidationError("unknown finish_reason: " + std::string(s));
}

GenerationResult GenerationResult::failure(std::string record_id, int sample_index, std::string detail) {
  GenerationResult r;
  r.record_id = std::move(record_id);
  r.sample_index = sample_index;
  r.finish_reason = FinishReason::kError;
  r.error_detail = std::move(detail);
  return r;
}

json GenerationResult::to_json() const {
  json j{{"record_id", record_id}, {"sample_index", sample_index}, {"text", text},
         {"finish_reason", to_string(finish_reason)}};
  if (completion_tokens) j["completion_tokens"] = *completion_tokens;
  if (error_detail) j["error_detail"] = *error_detail;
  return j;
}

GenerationResult GenerationResult::from_json(const json& j) {
  GenerationResult r;
  r.record_id = j.at("record_id").get<std::string>();
  r.sample_index = j.at("sample_index").get<int>();
  r.text = j.value("text", "");
  r.finish_reason = finish_reason_from_string(j.at("finish_reason").get<std::string>());
  if (j.contains("completion_tokens")) r.completion_tokens = j.at("completion_tokens").get<long long>();
  if (j.contains("error_detail")) r.error_detail = j.at("error_detail").get<std::string>();
  if (r.finish_reason == FinishReason::kError && (!r.text.empty() || !r.error_detail)) {
    throw ValidationError("error result must have empty text and an error_detail");
  }
  return r;
}

void save_generations(const std::vector<GenerationResult>& results, const std::filesystem::path& path) {
  std::vector<json> rows;
  rows.reserve(results.size());
  for (const auto& r : results) rows.push_back(r.to_json());
  write_file_atomic(path, to_jsonl(rows));
}

std::vector<GenerationResult> load_generations(const std::filesystem::path& path) {
  std::vector<GenerationResult> out;
  for (const auto& row : read_jsonl(path)) out.push_back(GenerationResult::from_json(row));
  return out;
}

json build_request_body(const EndpointConfig& endpoint, const SamplingProfile& profile,
                        const RenderedPrompt& prompt) {
  json body{{"model", endpoint.model}};
  if (endpoint.api == ApiStyle::kChat) {
    body["messages"] = prompt.messages_json();
  } else {
    body["prompt"] = prompt.completion_text();
  }
  body["temperature"] = profile.temperature;
  body["top_p"] = profile.top_p;
  body["max_tokens"] = profile.max_tokens;
  body["n"] = profile.n_samples;
  if (profile.seed) body["seed"] = *profile.seed;
  return body;
}

std::vector<GenerationResult> generate_batch(const Corpus& corpus, const EndpointConfig& endpoint,
                                             const SamplingProfile& profile, const PromptTemplate& tmpl,
                                             const BatchOptions& options, BatchStats* stats) {
  if (corpus.empty()) throw ValidationError("generate_batch: corpus is empty");
  endpoint.validate();
  profile.validate();

  const std::string fingerprint = checkpoint_fingerprint(endpoint, profile, tmpl);
  std::map<std::string, std::vector<GenerationResult>> done;
  std::ofstream checkpoint;
  if (options.checkpoint) {
    done = read_checkpoint(*options.checkpoint, fingerprint, profile.n_samples);
    std::vector<json> keep;
    keep.push_back(json{{"checkpoint", fingerprint}});
    for (const auto& [id, results] : done) {
      if (corpus.find(id) == nullptr) continue;
      json line{{"record_id", id}, {"results", json::array()}};
      for (const auto& r : results) line["results"].push_back(r.to_json());
      keep.push_back(std::move(line));
    }
    // Rewrite so a torn trailing line never sits in front of new appends.
    write_file_atomic(*options.checkpoint, to_jsonl(keep));
    checkpoint.open(*options.checkpoint, std::ios::binary | std::ios::app);
    if (!checkpoint) throw IoError("cannot append to checkpoint " + options.checkpoint->string());
  }

  std::vector<const ProblemRecord*> pending;
  std::vector<GenerationResult> all;
  BatchStats local;
  local.records = corpus.size();
  for (const auto& record : corpus.records) {
    if (auto it = done.find(record.id); it != done.end()) {
      all.insert(all.end(), it->second.begin(), it->second.end());
      ++local.resumed;
    } else {
      pending.push_back(&record);
    }
  }

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> in_flight{0};
  std::atomic<std::size_t> max_in_flight{0};
  std::size_t completed = local.resumed;

  auto worker = [&]() {
    EndpointCaller caller(endpoint, profile, in_flight, max_in_flight);
    for (std::size_t i = next++; i < pending.size(); i = next++) {
      const ProblemRecord& record = *pending[i];
      const json body = build_request_body(endpoint, profile, render(tmpl, record.question));
      CallOutcome outcome = caller.call(record, body);
      std::lock_guard lock(mu);
      if (outcome.failed) {
        ++local.errored_records;
      } else if (checkpoint.is_open()) {
        json line{{"record_id", record.id}, {"results", json::array()}};
        for (const auto& r : outcome.results) line["results"].push_back(r.to_json());
        checkpoint << line.dump() << '\n';
        checkpoint.flush();
      }
      all.insert(all.end(), std::make_move_iterator(outcome.results.begin()),
                 std::make_move_iterator(outcome.results.end()));
      ++completed;
      if (options.on_progress) options.on_progress(completed, corpus.size());
    }
  };

  const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(endpoint.max_parallel), pending.size());
  std::vector<std::thread> threads;
  threads.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  local.requested = pending.size();
  local.max_in_flight = max_in_flight.load();
  if (stats != nullptr) *stats = local;

  std::sort(all.begin(), all.end(), [](const GenerationResult& a, const GenerationResult& b) {
    return std::tie(a.record_id, a.sample_index) < std::tie(b.record_id, b.sample_index);
  });
  if (checkpoint.is_open()) {
    // Appends arrive in completion order; settle on a stable order.
    checkpoint.close();
    std::vector<json> lines{json{{"checkpoint", fingerprint}}};
    for (std::size_t i = 0; i < all.size();) {
      std::size_t j = i;
      bool failed = false;
      json line{{"record_id", all[i].record_id}, {"results", json::array()}};
      for (; j < all.size() && all[j].record_id == all[i].record_id; ++j) {
        failed = failed || all[j].finish_reason == FinishReason::kError;
        line["results"].push_back(all[j].to_json());
      }
      if (!failed) lines.push_back(std::move(line));
      i = j;
    }
    write_file_atomic(*options.checkpoint, to_jsonl(lines));
  }
  if (local.errored_records == corpus.size()) {
    throw BatchFailure("all " + std::to_string(corpus.size()) + " records failed; first error: " +
                       all.front().error_detail.value_or("unknown"));
  }
  return all;
}

}  // namespace w2sr
