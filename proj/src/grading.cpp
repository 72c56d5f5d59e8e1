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

#include "w2sr/grading.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <regex>
#include <vector>

namespace w2sr {

namespace {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

constexpr int kMaxFixpointPasses = 32;
constexpr int kMaxExponent = 400;
constexpr double kRelativeTolerance = 1e-6;

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

// Reads a brace group starting at s[pos] == '{'. Returns the inner text and
// sets `end` one past the closing brace. Unbalanced groups yield nullopt.
std::optional<std::string> brace_group(std::string_view s, std::size_t pos, std::size_t& end) {
  if (pos >= s.size() || s[pos] != '{') return std::nullopt;
  int depth = 0;
  for (std::size_t i = pos; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      ++i;
      continue;
    }
    if (s[i] == '{') ++depth;
    if (s[i] == '}' && --depth == 0) {
      end = i + 1;
      return std::string(s.substr(pos + 1, i - pos - 1));
    }
  }
  return std::nullopt;
}

// A macro argument: either a brace group or a single character.
std::optional<std::string> macro_arg(std::string_view s, std::size_t pos, std::size_t& end) {
  while (pos < s.size() && s[pos] == ' ') ++pos;
  if (pos >= s.size()) return std::nullopt;
  if (s[pos] == '{') return brace_group(s, pos, end);
  if (s[pos] == '\\' || s[pos] == '}') return std::nullopt;
  end = pos + 1;
  return std::string(1, s[pos]);
}

bool macro_at(std::string_view s, std::size_t pos, std::string_view name) {
  if (!starts_with(s.substr(pos), name)) return false;
  std::size_t after = pos + name.size();
  // "\left" must not match "\leftarrow".
  return after >= s.size() || !is_alpha(s[after]);
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  if (from.empty()) return;
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

bool is_atom(std::string_view s) {
  if (s.empty()) return false;
  std::size_t i = (s[0] == '-') ? 1 : 0;
  if (i == s.size()) return false;
  for (; i < s.size(); ++i) {
    if (!(std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '.')) return false;
  }
  return true;
}

std::string wrap(const std::string& s) { return is_atom(s) ? s : "(" + s + ")"; }

// One left-to-right pass over wrapper macros: \text{} family, \boxed{},
// \frac{}{} and \sqrt{}.
std::string rewrite_macros(std::string_view s) {
  static constexpr std::string_view kUnwrap[] = {"\\text",   "\\textbf", "\\textit", "\\textrm", "\\mathrm",
                                                 "\\mathbf", "\\mathit", "\\mbox",   "\\boxed",  "\\fbox",
                                                 "\\operatorname"};
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '\\') {
      out += s[i++];
      continue;
    }
    bool handled = false;
    for (std::string_view name : kUnwrap) {
      if (!macro_at(s, i, name)) continue;
      std::size_t p = i + name.size();
      while (p < s.size() && s[p] == ' ') ++p;
      std::size_t end = 0;
      if (auto arg = brace_group(s, p, end)) {
        out += rewrite_macros(*arg);
        i = end;
        handled = true;
      }
      break;
    }
    if (handled) continue;
    for (std::string_view name : {std::string_view("\\dfrac"), std::string_view("\\tfrac"),
                                  std::string_view("\\frac")}) {
      if (!macro_at(s, i, name)) continue;
      std::size_t e1 = 0;
      std::size_t e2 = 0;
      auto num = macro_arg(s, i + name.size(), e1);
      auto den = num ? macro_arg(s, e1, e2) : std::nullopt;
      if (num && den) {
        out += wrap(rewrite_macros(*num)) + "/" + wrap(rewrite_macros(*den));
        i = e2;
        handled = true;
      }
      break;
    }
    if (handled) continue;
    if (starts_with(s.substr(i), "\\sqrt")) {
      std::size_t e = 0;
      std::size_t p = i + 5;
      if (auto arg = macro_arg(s, p, e)) {
        out += "sqrt(" + rewrite_macros(*arg) + ")";
        i = e;
        continue;
      }
    }
    out += s[i++];
  }
  return out;
}

const std::regex& thousands_re() {
  static const std::regex re(R"(^[-+]?\d{1,3}(,\d{3})+(\.\d+)?$)");
  return re;
}

std::string strip_once(std::string_view in) {
  std::string s = trim(in);

  // Math-mode delimiters around the whole answer.
  for (bool changed = true; changed;) {
    changed = false;
    for (auto [open, close] : {std::pair<std::string_view, std::string_view>{"$$", "$$"},
                               {"$", "$"},
                               {"\\(", "\\)"},
                               {"\\[", "\\]"}}) {
      if (s.size() >= open.size() + close.size() && starts_with(s, open) &&
          s.compare(s.size() - close.size(), close.size(), close) == 0) {
        s = trim(std::string_view(s).substr(open.size(), s.size() - open.size() - close.size()));
        changed = true;
        break;
      }
    }
  }
  replace_all(s, "$", "");

  // Sizing and spacing commands that carry no value.
  std::string cleaned;
  cleaned.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    bool dropped = false;
    for (std::string_view name : {std::string_view("\\left"), std::string_view("\\right"),
                                  std::string_view("\\displaystyle"), std::string_view("\\bigl"),
                                  std::string_view("\\bigr"), std::string_view("\\Bigl"),
                                  std::string_view("\\Bigr")}) {
      if (macro_at(s, i, name)) {
        i += name.size();
        dropped = true;
        break;
      }
    }
    if (dropped) continue;
    if (s[i] == '\\' && i + 1 < s.size() &&
        (s[i + 1] == '!' || s[i + 1] == ',' || s[i + 1] == ';' || s[i + 1] == ':' || s[i + 1] == ' ')) {
      i += 2;
      continue;
    }
    cleaned += s[i++];
  }
  s = rewrite_macros(cleaned);

  replace_all(s, "^{\\circ}", "");
  replace_all(s, "^\\circ", "");
  replace_all(s, "\\degree", "");
  replace_all(s, "\\%", "%");
  replace_all(s, "{,}", ",");
  replace_all(s, "\\cdot", "*");
  replace_all(s, "\\times", "*");

  s.erase(std::remove_if(s.begin(), s.end(), is_space), s.end());

  // x^{2} -> x^2 for single-character exponents and subscripts.
  for (std::size_t pos = 0; (pos = s.find('{', pos)) != std::string::npos;) {
    if (pos > 0 && (s[pos - 1] == '^' || s[pos - 1] == '_') && pos + 2 < s.size() && s[pos + 2] == '}' &&
        std::isalnum(static_cast<unsigned char>(s[pos + 1]))) {
      s.erase(pos + 2, 1);
      s.erase(pos, 1);
    } else {
      ++pos;
    }
  }

  // A single outer brace group carries no meaning.
  if (s.size() >= 2 && s.front() == '{') {
    std::size_t end = 0;
    if (brace_group(s, 0, end) && end == s.size()) s = s.substr(1, s.size() - 2);
  }

  while (!s.empty() && s.back() == '.') s.pop_back();
  while (!s.empty() && s.front() == '+') s.erase(0, 1);

  // "x=5" -> "5" when the left side is a lone variable.
  if (s.size() > 2 && is_alpha(s[0]) && s[1] == '=' && s.find('=', 2) == std::string::npos) s = s.substr(2);

  if (std::regex_match(s, thousands_re())) s.erase(std::remove(s.begin(), s.end(), ','), s.end());
  return s;
}

std::string strip_fixpoint(std::string_view in) {
  std::string s(in);
  for (int pass = 0; pass < kMaxFixpointPasses; ++pass) {
    std::string next = strip_once(s);
    if (next == s) break;
    s = std::move(next);
  }
  return s;
}

std::optional<Rational> parse_decimal(std::string_view s) {
  if (s.size() >= 2 && s.front() == '(' && s.back() == ')') s = s.substr(1, s.size() - 2);
  std::size_t i = 0;
  bool negative = false;
  if (i < s.size() && (s[i] == '-' || s[i] == '+')) negative = s[i++] == '-';
  BigInt mantissa = 0;
  int digits = 0;
  int frac_digits = 0;
  while (i < s.size() && is_digit(s[i])) {
    mantissa = mantissa * 10 + (s[i++] - '0');
    ++digits;
  }
  if (i < s.size() && s[i] == '.') {
    ++i;
    while (i < s.size() && is_digit(s[i])) {
      mantissa = mantissa * 10 + (s[i++] - '0');
      ++digits;
      ++frac_digits;
    }
  }
  if (digits == 0) return std::nullopt;
  int exponent = 0;
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    ++i;
    bool exp_negative = false;
    if (i < s.size() && (s[i] == '-' || s[i] == '+')) exp_negative = s[i++] == '-';
    int exp_digits = 0;
    while (i < s.size() && is_digit(s[i])) {
      exponent = exponent * 10 + (s[i++] - '0');
      if (++exp_digits > 4) return std::nullopt;
    }
    if (exp_digits == 0) return std::nullopt;
    if (exp_negative) exponent = -exponent;
  }
  if (i != s.size()) return std::nullopt;
  exponent -= frac_digits;
  if (std::abs(exponent) > kMaxExponent) return std::nullopt;
  BigInt scale = boost::multiprecision::pow(BigInt(10), std::abs(exponent));
  Rational value = exponent >= 0 ? Rational(mantissa * scale) : Rational(mantissa, scale);
  return negative ? -value : value;
}

std::optional<Rational> parse_rational(std::string_view s) {
  if (s.empty()) return std::nullopt;
  bool percent = false;
  if (s.back() == '%') {
    percent = true;
    s.remove_suffix(1);
  }
  if (s.size() >= 2 && s.front() == '(' && s.back() == ')' && s.find('(', 1) == std::string_view::npos) {
    s = s.substr(1, s.size() - 2);
  }
  std::optional<Rational> value;
  std::size_t slash = s.find('/');
  if (slash == std::string_view::npos) {
    value = parse_decimal(s);
  } else {
    if (s.find('/', slash + 1) != std::string_view::npos) return std::nullopt;
    auto num = parse_decimal(s.substr(0, slash));
    auto den = parse_decimal(s.substr(slash + 1));
    if (!num || !den || *den == 0) return std::nullopt;
    value = *num / *den;
  }
  if (value && percent) *value /= 100;
  return value;
}

std::string rational_text(const Rational& r) {
  BigInt num = boost::multiprecision::numerator(r);
  BigInt den = boost::multiprecision::denominator(r);
  std::string out = num.str();
  if (den != 1) out += "/" + den.str();
  return out;
}

// Splits at commas outside any bracket. `outer_open`/`outer_close` receive a
// bracket pair enclosing the whole string, if any.
std::vector<std::string> split_tuple(const std::string& s, std::string& outer_open, std::string& outer_close) {
  std::string_view inner = s;
  outer_open.clear();
  outer_close.clear();
  if (s.size() >= 2 && (s.front() == '(' || s.front() == '[') && (s.back() == ')' || s.back() == ']')) {
    int depth = 0;
    bool encloses = true;
    for (std::size_t i = 0; i < s.size(); ++i) {
      char c = s[i];
      if (c == '(' || c == '[' || c == '{') ++depth;
      if (c == ')' || c == ']' || c == '}') --depth;
      if (depth == 0 && i + 1 < s.size()) {
        encloses = false;
        break;
      }
    }
    if (encloses) {
      outer_open = s.substr(0, 1);
      outer_close = s.substr(s.size() - 1);
      inner = std::string_view(s).substr(1, s.size() - 2);
    }
  }
  std::vector<std::string> parts;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < inner.size(); ++i) {
    char c = inner[i];
    if (c == '(' || c == '[' || c == '{') ++depth;
    if (c == ')' || c == ']' || c == '}') --depth;
    if (c == ',' && depth == 0) {
      parts.emplace_back(inner.substr(start, i - start));
      start = i + 1;
    }
  }
  parts.emplace_back(inner.substr(start));
  return parts;
}

std::string normalize_math_once(std::string_view expr) {
  std::string s = strip_fixpoint(expr);
  if (auto r = parse_rational(s)) return rational_text(*r);
  std::string open;
  std::string close;
  auto parts = split_tuple(s, open, close);
  if (parts.size() > 1) {
    std::string joined = open;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i > 0) joined += ',';
      joined += normalize_math_once(parts[i]);
    }
    return joined + close;
  }
  return s;
}

std::optional<char> choice_letter_of(std::string_view s) {
  std::string t = strip_fixpoint(s);
  if (t.size() >= 3 && (t.front() == '(' || t.front() == '[') && (t.back() == ')' || t.back() == ']')) {
    t = t.substr(1, t.size() - 2);
  }
  while (!t.empty() && (t.back() == ':' || t.back() == ')')) t.pop_back();
  if (t.size() == 1 && is_alpha(t[0])) return static_cast<char>(std::toupper(static_cast<unsigned char>(t[0])));
  // "B)answer text" or "B:answer text"
  if (t.size() > 2 && is_alpha(t[0]) && (t[1] == ')' || t[1] == ':')) {
    return static_cast<char>(std::toupper(static_cast<unsigned char>(t[0])));
  }
  return std::nullopt;
}

std::optional<double> parse_float(std::string_view in) {
  std::string s(in);
  // 3*10^{8}, 3*10^8 -> 3e8
  static const std::regex sci(R"(^([-+]?[0-9]*\.?[0-9]+)\*10\^\{?([-+]?[0-9]+)\}?$)");
  std::smatch m;
  if (std::regex_match(s, m, sci)) s = m[1].str() + "e" + m[2].str();
  if (!s.empty() && s.back() == '%') return std::nullopt;
  if (!s.empty() && s.front() == '+') s.erase(0, 1);
  double value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::string clean_marker_span(std::string_view span) {
  std::string s = trim(span);
  while (!s.empty() && (s.front() == ':' || s.front() == '*')) s = trim(std::string_view(s).substr(1));
  while (!s.empty() && (s.back() == '.' || s.back() == '*')) s.pop_back();
  return trim(s);
}

std::optional<std::string> answer_marker_span(std::string_view text) {
  const std::string lower = to_lower(text);
  std::size_t best = std::string::npos;
  std::size_t best_len = 0;
  for (std::string_view marker : {std::string_view("answer:"), std::string_view("answer is")}) {
    std::size_t pos = lower.rfind(marker);
    if (pos != std::string::npos && (best == std::string::npos || pos > best)) {
      best = pos;
      best_len = marker.size();
    }
  }
  if (best == std::string::npos) return std::nullopt;
  std::size_t start = best + best_len;
  std::size_t end = text.find('\n', start);
  std::string span = clean_marker_span(text.substr(start, end == std::string_view::npos ? end : end - start));
  if (span.empty()) return std::nullopt;
  return span;
}

std::optional<std::string> final_expression(std::string_view text) {
  std::string last;
  for_each_line(text, [&](std::size_t, std::string_view line) {
    if (!trim(line).empty()) last = trim(line);
  });
  if (last.empty()) return std::nullopt;

  // Last inline math segment.
  std::size_t close = last.rfind('$');
  if (close != std::string::npos && close > 0) {
    std::size_t open = last.rfind('$', close - 1);
    if (open != std::string::npos) {
      std::string seg = trim(std::string_view(last).substr(open + 1, close - open - 1));
      std::size_t eq = seg.rfind('=');
      if (eq != std::string::npos && eq + 1 < seg.size()) seg = trim(std::string_view(seg).substr(eq + 1));
      if (!seg.empty()) return seg;
    }
  }
  std::size_t eq = last.rfind('=');
  if (eq != std::string::npos && eq + 1 < last.size()) {
    std::string rhs = clean_marker_span(std::string_view(last).substr(eq + 1));
    if (!rhs.empty()) return rhs;
  }
  static const std::regex number(R"([-+]?\d[\d,]*(\.\d+)?(/\d+)?)");
  std::string found;
  for (std::sregex_iterator it(last.begin(), last.end(), number), end; it != end; ++it) found = it->str();
  if (!found.empty()) return found;
  return std::nullopt;
}

std::optional<std::string> last_choice_letter(std::string_view text) {
  static const std::regex labeled(R"(\(([A-Da-d])\)|\b([A-D])\))");
  static const std::regex bare(R"(\b([A-D])\b)");
  std::string s(text);
  auto last_match = [&](const std::regex& re) -> std::optional<std::string> {
    std::optional<std::string> out;
    for (std::sregex_iterator it(s.begin(), s.end(), re), end; it != end; ++it) {
      const auto& m = *it;
      for (std::size_t g = 1; g < m.size(); ++g) {
        if (m[g].matched) out = m[g].str();
      }
    }
    return out;
  };
  if (auto l = last_match(labeled)) return l;
  return last_match(bare);
}

bool is_choice_letter(const std::string& s) { return s.size() == 1 && s[0] >= 'A' && s[0] <= 'Z'; }

}  // namespace

std::string_view to_string(ExtractionMethod m) {
  switch (m) {
    case ExtractionMethod::kBoxed: return "boxed";
    case ExtractionMethod::kAnswerMarker: return "answer_marker";
    case ExtractionMethod::kFinalExpression: return "final_expression";
    case ExtractionMethod::kChoiceLetter: return "choice_letter";
    case ExtractionMethod::kNone: return "none";
  }
  return "none";
}

ExtractionMethod extraction_method_from_string(std::string_view s) {
  for (auto m : {ExtractionMethod::kBoxed, ExtractionMethod::kAnswerMarker, ExtractionMethod::kFinalExpression,
                 ExtractionMethod::kChoiceLetter, ExtractionMethod::kNone}) {
    if (to_string(m) == s) return m;
  }
  throw ValidationError("unknown extraction method: " + std::string(s));
}

std::string_view to_string(VerdictReason r) {
  switch (r) {
    case VerdictReason::kExactMatch: return "exact_match";
    case VerdictReason::kNumericEqual: return "numeric_equal";
    case VerdictReason::kRationalEqual: return "rational_equal";
    case VerdictReason::kChoiceMatch: return "choice_match";
    case VerdictReason::kMismatch: return "mismatch";
    case VerdictReason::kUnextractable: return "unextractable";
  }
  return "mismatch";
}

VerdictReason verdict_reason_from_string(std::string_view s) {
  for (auto r : {VerdictReason::kExactMatch, VerdictReason::kNumericEqual, VerdictReason::kRationalEqual,
                 VerdictReason::kChoiceMatch, VerdictReason::kMismatch, VerdictReason::kUnextractable}) {
    if (to_string(r) == s) return r;
  }
  throw ValidationError("unknown verdict reason: " + std::string(s));
}

json ExtractedAnswer::to_json() const {
  return json{{"raw_span", raw_span}, {"normalized", normalized}, {"method", to_string(method)}};
}

ExtractedAnswer ExtractedAnswer::from_json(const json& j) {
  ExtractedAnswer a;
  a.raw_span = j.at("raw_span").get<std::string>();
  a.normalized = j.at("normalized").get<std::string>();
  a.method = extraction_method_from_string(j.at("method").get<std::string>());
  return a;
}

json Verdict::to_json() const { return json{{"is_correct", is_correct}, {"reason", to_string(reason)}}; }

Verdict Verdict::from_json(const json& j) {
  Verdict v;
  v.is_correct = j.at("is_correct").get<bool>();
  v.reason = verdict_reason_from_string(j.at("reason").get<std::string>());
  if (v.reason == VerdictReason::kUnextractable && v.is_correct) {
    throw ValidationError("verdict: unextractable answers cannot be correct");
  }
  return v;
}

std::optional<std::string> last_boxed(std::string_view text) {
  std::size_t pos = std::string_view::npos;
  std::size_t name_len = 0;
  for (std::string_view name : {std::string_view("\\boxed"), std::string_view("\\fbox")}) {
    std::size_t p = text.rfind(name);
    if (p != std::string_view::npos && (pos == std::string_view::npos || p > pos)) {
      pos = p;
      name_len = name.size();
    }
  }
  while (pos != std::string_view::npos) {
    std::size_t p = pos + name_len;
    while (p < text.size() && text[p] == ' ') ++p;
    std::size_t end = 0;
    if (p < text.size() && text[p] == '{') {
      if (auto inner = brace_group(text, p, end)) return inner;
    } else if (p > pos + name_len) {
      // "\boxed 5"
      std::size_t e = p;
      while (e < text.size() && !is_space(text[e]) && text[e] != '$') ++e;
      if (e > p) return std::string(text.substr(p, e - p));
    }
    if (pos == 0) break;
    std::size_t prev_boxed = text.rfind("\\boxed", pos - 1);
    std::size_t prev_fbox = text.rfind("\\fbox", pos - 1);
    if (prev_boxed == std::string_view::npos && prev_fbox == std::string_view::npos) break;
    if (prev_fbox == std::string_view::npos || (prev_boxed != std::string_view::npos && prev_boxed > prev_fbox)) {
      pos = prev_boxed;
      name_len = 6;
    } else {
      pos = prev_fbox;
      name_len = 5;
    }
  }
  return std::nullopt;
}

std::string strip_latex(std::string_view expr) { return strip_fixpoint(expr); }

std::optional<std::string> canonical_rational(std::string_view expr) {
  auto r = parse_rational(strip_fixpoint(expr));
  if (!r) return std::nullopt;
  return rational_text(*r);
}

std::string normalize(std::string_view expr, AnswerKind kind) {
  if (kind == AnswerKind::kMultipleChoice) {
    if (auto letter = choice_letter_of(expr)) return std::string(1, *letter);
    return strip_fixpoint(expr);
  }
  std::string s(expr);
  for (int pass = 0; pass < kMaxFixpointPasses; ++pass) {
    std::string next = normalize_math_once(s);
    if (next == s) break;
    s = std::move(next);
  }
  return s;
}

ExtractedAnswer extract_answer(std::string_view text, AnswerKind kind) {
  auto make = [&](std::string raw, ExtractionMethod method) {
    ExtractedAnswer a;
    a.raw_span = std::move(raw);
    a.method = method;
    a.normalized = normalize(a.raw_span, kind);
    return a;
  };
  const bool mc = kind == AnswerKind::kMultipleChoice;

  if (auto boxed = last_boxed(text); boxed && !trim(*boxed).empty()) {
    if (!mc || choice_letter_of(*boxed)) return make(trim(*boxed), ExtractionMethod::kBoxed);
  }
  if (auto span = answer_marker_span(text)) {
    if (!mc) return make(*span, ExtractionMethod::kAnswerMarker);
    if (choice_letter_of(*span)) return make(*span, ExtractionMethod::kAnswerMarker);
    if (auto letter = last_choice_letter(*span)) return make(*letter, ExtractionMethod::kAnswerMarker);
  }
  if (mc) {
    if (auto letter = last_choice_letter(text)) return make(*letter, ExtractionMethod::kChoiceLetter);
  } else if (auto expr = final_expression(text)) {
    return make(*expr, ExtractionMethod::kFinalExpression);
  }
  return ExtractedAnswer{};
}

Verdict is_equivalent(const ExtractedAnswer& pred, std::string_view gold, AnswerKind kind) {
  if (trim(gold).empty()) throw ValidationError("is_equivalent: gold answer is empty");
  if (pred.method == ExtractionMethod::kNone) return {false, VerdictReason::kUnextractable};

  if (kind == AnswerKind::kMultipleChoice) {
    std::string p = pred.normalized.empty() ? normalize(pred.raw_span, kind) : pred.normalized;
    std::string g = normalize(gold, kind);
    if (is_choice_letter(p) && p == g) return {true, VerdictReason::kChoiceMatch};
    return {false, VerdictReason::kMismatch};
  }

  const std::string pred_stripped = strip_fixpoint(pred.raw_span);
  const std::string gold_stripped = strip_fixpoint(gold);
  const auto pred_rational = parse_rational(pred_stripped);
  const auto gold_rational = parse_rational(gold_stripped);
  if (pred_rational && gold_rational) {
    if (*pred_rational != *gold_rational) return {false, VerdictReason::kMismatch};
    return {true, pred_stripped == gold_stripped ? VerdictReason::kExactMatch : VerdictReason::kRationalEqual};
  }

  const std::string pred_norm = pred.normalized.empty() ? normalize(pred.raw_span) : pred.normalized;
  const std::string gold_norm = normalize(gold);
  if (!pred_norm.empty() && pred_norm == gold_norm) {
    return {true, pred_stripped == gold_stripped ? VerdictReason::kExactMatch : VerdictReason::kRationalEqual};
  }

  const bool has_decimal = pred_stripped.find('.') != std::string::npos || gold_stripped.find('.') != std::string::npos;
  if (has_decimal && !(pred_rational && gold_rational)) {
    auto p = parse_float(pred_stripped);
    auto g = parse_float(gold_stripped);
    if (p && g) {
      double scale = std::max(std::abs(*p), std::abs(*g));
      if (std::abs(*p - *g) <= kRelativeTolerance * scale) return {true, VerdictReason::kNumericEqual};
    }
  }
  return {false, VerdictReason::kMismatch};
}

Verdict grade(std::string_view completion, std::string_view gold, AnswerKind kind, ExtractedAnswer* extracted) {
  ExtractedAnswer a = extract_answer(completion, kind);
  Verdict v = is_equivalent(a, gold, kind);
  if (extracted != nullptr) *extracted = std::move(a);
  return v;
}

}  // namespace w2sr
