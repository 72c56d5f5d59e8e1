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

// Final-answer extraction and equivalence.
//
// Equivalence is deliberately shallow: normalized string equality, exact
// rational equality, element-wise comparison of top-level tuples, and a 1e-6
// relative tolerance for decimal answers that are not exact rationals (for
// example scientific notation with \times 10^{n}). No symbolic algebra.

#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "w2sr/corpus.hpp"

namespace w2sr {

enum class ExtractionMethod { kBoxed, kAnswerMarker, kFinalExpression, kChoiceLetter, kNone };

std::string_view to_string(ExtractionMethod m);
ExtractionMethod extraction_method_from_string(std::string_view s);

struct ExtractedAnswer {
  std::string raw_span;
  std::string normalized;
  ExtractionMethod method = ExtractionMethod::kNone;

  json to_json() const;
  static ExtractedAnswer from_json(const json& j);
  friend bool operator==(const ExtractedAnswer&, const ExtractedAnswer&) = default;
};

enum class VerdictReason {
  kExactMatch,
  kNumericEqual,
  kRationalEqual,
  kChoiceMatch,
  kMismatch,
  kUnextractable,
};

std::string_view to_string(VerdictReason r);
VerdictReason verdict_reason_from_string(std::string_view s);

struct Verdict {
  bool is_correct = false;
  VerdictReason reason = VerdictReason::kUnextractable;

  json to_json() const;
  static Verdict from_json(const json& j);
  friend bool operator==(const Verdict&, const Verdict&) = default;
};

// Content of the last \boxed{...} (or \fbox{...}) in `text`, braces balanced.
std::optional<std::string> last_boxed(std::string_view text);

ExtractedAnswer extract_answer(std::string_view text, AnswerKind kind);

// Idempotent canonical form. For multiple_choice, reduces to an upper-case
// choice letter when one can be identified.
std::string normalize(std::string_view expr, AnswerKind kind = AnswerKind::kFreeFormMath);

// LaTeX wrapper stripping and rewriting only; no numeric canonicalization.
std::string strip_latex(std::string_view expr);

// Canonical "p/q" (or "p") when `expr` denotes an exact rational number:
// integers, decimals, e-notation, percentages and a/b over those.
std::optional<std::string> canonical_rational(std::string_view expr);

Verdict is_equivalent(const ExtractedAnswer& pred, std::string_view gold, AnswerKind kind);

// Convenience: extract, then compare.
Verdict grade(std::string_view completion, std::string_view gold, AnswerKind kind,
              ExtractedAnswer* extracted = nullptr);

}  // namespace w2sr
