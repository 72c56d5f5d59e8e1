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

// Client side of the OpenAI-compatible completions wire.
//
// One request per problem; the request's `n` field asks for all samples at
// once and choices are mapped onto sample indices by their `index`.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "w2sr/common.hpp"
#include "w2sr/corpus.hpp"
#include "w2sr/prompts.hpp"

namespace w2sr {

enum class ApiStyle { kChat, kCompletions };

std::string_view to_string(ApiStyle style);
ApiStyle api_style_from_string(std::string_view s);

struct EndpointConfig {
  std::string base_url = "http://127.0.0.1:8000/v1";
  std::string model;
  // Name of the environment variable holding the bearer token. Empty or unset
  // variable: no Authorization header.
  std::string auth_token_ref;
  double timeout_s = 600;
  int max_parallel = 8;
  int max_retries = 3;
  ApiStyle api = ApiStyle::kChat;
  // First backoff delay; attempt i waits base * 2^i plus up to base of jitter.
  int retry_base_ms = 500;

  void validate() const;
  json to_json() const;
  static EndpointConfig from_json(const json& j);
};

struct SamplingProfile {
  std::string name;
  double temperature = 0;
  double top_p = 1.0;
  int max_tokens = 4096;
  int n_samples = 1;
  std::optional<std::int64_t> seed;

  // Greedy teacher decoding: temperature 0, top-p 1, 4096 tokens, one sample.
  static SamplingProfile distill();
  // Student evaluation: temperature 0.6, top-p 0.95, 32768 tokens, k samples.
  static SamplingProfile eval(int k = 1);
  static SamplingProfile named(std::string_view name, int k = 1);

  void validate() const;
  json to_json() const;
  // Fields absent from `j` keep the values already in `*this`.
  void apply_overrides(const json& j);
};

enum class FinishReason { kStop, kLength, kError };

std::string_view to_string(FinishReason r);
FinishReason finish_reason_from_string(std::string_view s);

struct GenerationResult {
  std::string record_id;
  int sample_index = 0;
  std::string text;
  FinishReason finish_reason = FinishReason::kStop;
  std::optional<long long> completion_tokens;
  std::optional<std::string> error_detail;

  static GenerationResult failure(std::string record_id, int sample_index, std::string detail);

  json to_json() const;
  static GenerationResult from_json(const json& j);
  friend bool operator==(const GenerationResult&, const GenerationResult&) = default;
};

void save_generations(const std::vector<GenerationResult>& results, const std::filesystem::path& path);
std::vector<GenerationResult> load_generations(const std::filesystem::path& path);

// Body sent to the endpoint for one rendered prompt.
json build_request_body(const EndpointConfig& endpoint, const SamplingProfile& profile,
                        const RenderedPrompt& prompt);

struct BatchOptions {
  // Completed records are appended here as they finish and skipped on rerun.
  std::optional<std::filesystem::path> checkpoint;
  // Invoked after each record completes (any thread, serialized).
  std::function<void(std::size_t done, std::size_t total)> on_progress;
};

struct BatchStats {
  std::size_t records = 0;
  std::size_t resumed = 0;
  std::size_t requested = 0;
  std::size_t errored_records = 0;
  std::size_t max_in_flight = 0;
};

class BatchFailure : public Error {
 public:
  using Error::Error;
};

// Blocking; returns exactly `profile.n_samples` results per record sorted by
// (record_id, sample_index). Throws BatchFailure only when every record failed.
std::vector<GenerationResult> generate_batch(const Corpus& corpus, const EndpointConfig& endpoint,
                                             const SamplingProfile& profile, const PromptTemplate& tmpl,
                                             const BatchOptions& options = {}, BatchStats* stats = nullptr);

}  // namespace w2sr
