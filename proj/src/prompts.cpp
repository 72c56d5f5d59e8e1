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

#include "w2sr/prompts.hpp"

#include "w2sr/prompt_resources.hpp"

namespace w2sr {

namespace {

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t n = 0;
  for (std::size_t pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

}  // namespace

std::string_view to_string(TemplateId id) { return id == TemplateId::kSimple ? "simple" : "complex"; }

TemplateId template_id_from_string(std::string_view s) {
  if (s == "simple") return TemplateId::kSimple;
  if (s == "complex") return TemplateId::kComplex;
  throw ValidationError("unknown prompt template: " + std::string(s));
}

PromptTemplate::PromptTemplate(TemplateId id, std::optional<std::string> system_text, std::string body)
    : id_(id), system_text_(std::move(system_text)), body_(std::move(body)) {
  if (count_occurrences(body_, kQuestionPlaceholder) != 1) {
    throw ValidationError("template '" + std::string(to_string(id_)) + "' must contain exactly one " +
                          std::string(kQuestionPlaceholder) + " placeholder");
  }
}

PromptTemplate PromptTemplate::builtin(TemplateId id) {
  if (id == TemplateId::kSimple) {
    return PromptTemplate(id, std::nullopt, std::string(resources::kSimpleUser));
  }
  return PromptTemplate(id, std::string(resources::kComplexSystem), std::string(resources::kComplexUser));
}

PromptTemplate PromptTemplate::from_directory(const std::filesystem::path& dir, TemplateId id) {
  const std::string stem(to_string(id));
  std::optional<std::string> system;
  if (auto sys = dir / (stem + ".system.txt"); std::filesystem::exists(sys)) system = read_file(sys);
  return PromptTemplate(id, std::move(system), read_file(dir / (stem + ".user.txt")));
}

std::string RenderedPrompt::completion_text() const {
  if (template_id == TemplateId::kSimple) {
    std::string out;
    for (const auto& m : messages) out += m.content;
    return out;
  }
  std::string out;
  for (const auto& m : messages) {
    out += "<|im_start|>" + m.role + "\n" + m.content + "<|im_end|>\n";
  }
  out += "<|im_start|>assistant\n";
  return out;
}

json RenderedPrompt::messages_json() const {
  json arr = json::array();
  for (const auto& m : messages) arr.push_back(json{{"role", m.role}, {"content", m.content}});
  return arr;
}

RenderedPrompt render(const PromptTemplate& tmpl, std::string_view question) {
  if (question.empty()) throw ValidationError("render: question is empty");
  const std::string& body = tmpl.body();
  const std::size_t at = body.find(kQuestionPlaceholder);
  std::string user;
  user.reserve(body.size() + question.size());
  user.append(body, 0, at);
  user.append(question);
  user.append(body, at + kQuestionPlaceholder.size());

  RenderedPrompt out;
  out.template_id = tmpl.id();
  if (tmpl.system_text()) out.messages.push_back({"system", *tmpl.system_text()});
  out.messages.push_back({"user", std::move(user)});
  return out;
}

TemplateSelector::TemplateSelector() : TemplateSelector(false) {}

TemplateSelector::TemplateSelector(bool strict) : strict_(strict) {
  for (const char* name : {"qwen2.5-0.5b", "qwen2.5-1.5b", "qwen2.5-0.5b-instruct", "qwen2.5-1.5b-instruct"}) {
    table_[name] = TemplateId::kSimple;
  }
  for (const char* name : {"qwen2.5-7b", "qwen2.5-14b", "qwen2.5-32b", "qwen2.5-math-7b", "qwen2.5-7b-instruct",
                           "qwen2.5-14b-instruct", "qwen2.5-32b-instruct"}) {
    table_[name] = TemplateId::kComplex;
  }
}

void TemplateSelector::assign(std::string_view model, TemplateId id) { table_[to_lower(model)] = id; }

TemplateId TemplateSelector::select(std::string_view model_profile) const {
  const std::string key = to_lower(model_profile);
  if (auto it = table_.find(key); it != table_.end()) return it->second;
  if (strict_) throw ValidationError("no prompt template configured for model '" + std::string(model_profile) + "'");
  if (key.find("0.5b") != std::string::npos || key.find("1.5b") != std::string::npos) return TemplateId::kSimple;
  return TemplateId::kComplex;
}

TemplateId select_template(std::string_view model_profile) { return TemplateSelector().select(model_profile); }

}  // namespace w2sr
