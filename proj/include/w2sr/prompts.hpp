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

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "w2sr/common.hpp"

namespace w2sr {

enum class TemplateId { kSimple, kComplex };

std::string_view to_string(TemplateId id);
TemplateId template_id_from_string(std::string_view s);

inline constexpr std::string_view kQuestionPlaceholder = "{input}";

class PromptTemplate {
 public:
  // Throws ValidationError unless `body` holds exactly one placeholder.
  PromptTemplate(TemplateId id, std::optional<std::string> system_text, std::string body);

  // Copies built from resources/prompts/ at configure time.
  static PromptTemplate builtin(TemplateId id);

  // Reads <dir>/<id>.user.txt and, if present, <dir>/<id>.system.txt.
  static PromptTemplate from_directory(const std::filesystem::path& dir, TemplateId id);

  TemplateId id() const { return id_; }
  const std::optional<std::string>& system_text() const { return system_text_; }
  const std::string& body() const { return body_; }

 private:
  TemplateId id_;
  std::optional<std::string> system_text_;
  std::string body_;
};

struct ChatMessage {
  std::string role;  // "system" or "user"
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct RenderedPrompt {
  TemplateId template_id = TemplateId::kSimple;
  std::vector<ChatMessage> messages;

  // Single-string form for completion-style endpoints. The simple template is
  // its user text; the complex one uses the chat markup it was written for,
  // ending with an open assistant turn.
  std::string completion_text() const;

  json messages_json() const;
};

// Replaces the placeholder with `question` verbatim. Throws ValidationError on
// an empty question.
RenderedPrompt render(const PromptTemplate& tmpl, std::string_view question);

// Maps model names to templates. Lookup is case-insensitive. Outside strict
// mode, names mentioning a 0.5B/1.5B size fall back to the simple template and
// everything else to the complex one.
class TemplateSelector {
 public:
  TemplateSelector();
  explicit TemplateSelector(bool strict);

  void assign(std::string_view model, TemplateId id);
  bool strict() const { return strict_; }

  // Throws ValidationError for unmapped names in strict mode.
  TemplateId select(std::string_view model_profile) const;

 private:
  bool strict_ = false;
  std::map<std::string, TemplateId> table_;
};

TemplateId select_template(std::string_view model_profile);

}  // namespace w2sr
