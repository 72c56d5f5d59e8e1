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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace w2sr {

using json = nlohmann::json;

// Base of every error thrown by the toolkit. Callers that only care about
// "something in the pipeline went wrong" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

std::string read_file(const std::filesystem::path& path);

// Writes through a sibling temporary and renames, so readers never observe a
// half-written artifact.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

// Calls `fn(line_number, line)` for each line, 1-based. Trailing '\r' is
// removed. The last line is delivered even without a terminating newline.
void for_each_line(std::string_view text,
                   const std::function<void(std::size_t, std::string_view)>& fn);

// Serializes one JSON value per line with a trailing newline after each.
std::string to_jsonl(const std::vector<json>& rows);

std::vector<json> read_jsonl(const std::filesystem::path& path);

std::string sha256_hex(std::string_view bytes);

// FNV-1a, 64 bit. Used for stable non-cryptographic keys.
std::uint64_t fnv1a64(std::string_view bytes);

std::string hex64(std::uint64_t value);

std::string trim(std::string_view s);

std::string to_lower(std::string_view s);

}  // namespace w2sr
