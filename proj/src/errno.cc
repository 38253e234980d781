// Copyright 2026 The sysfault Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sysfault/errno.h"

#include <algorithm>
#include <charconv>
#include <optional>
#include <unordered_map>
#include <vector>

#include <fmt/format.h>

#include "sysfault/error.h"

namespace sysfault {
namespace {

struct Table {
  std::vector<ErrnoCode> by_number;
  std::unordered_map<std::string, int> numbers;
  std::unordered_map<int, std::size_t> index;

  Table() {
#define SYSFAULT_ERRNO(sym, num) by_number.push_back(ErrnoCode{#sym, num});
#include "errno_table.inc"
#undef SYSFAULT_ERRNO
    std::sort(by_number.begin(), by_number.end(),
              [](const ErrnoCode& a, const ErrnoCode& b) { return a.number < b.number; });
    for (std::size_t i = 0; i < by_number.size(); ++i) {
      numbers.emplace(by_number[i].symbol, by_number[i].number);
      index.emplace(by_number[i].number, i);
    }
  }
};

const Table& table() {
  static const Table t;
  return t;
}

std::optional<int> parse_int(std::string_view s) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

}  // namespace

bool ErrnoCode::known() const { return table().index.contains(number); }

ErrnoCode errno_lookup(int number) {
  if (number <= 0) throw Error(fmt::format("errno must be positive, got {}", number));
  const auto& t = table();
  if (auto it = t.index.find(number); it != t.index.end()) return t.by_number[it->second];
  return ErrnoCode{fmt::format("E?{}", number), number};
}

ErrnoCode errno_lookup(std::string_view text) {
  if (text.starts_with("E?")) {
    auto n = parse_int(text.substr(2));
    if (!n || *n <= 0) throw Error(fmt::format("malformed unknown errno '{}'", text));
    return errno_lookup(*n);
  }
  if (auto n = parse_int(text)) return errno_lookup(*n);
  const auto& t = table();
  if (auto it = t.numbers.find(std::string(text)); it != t.numbers.end()) {
    return t.by_number[t.index.at(it->second)];
  }
  throw Error(fmt::format("unknown errno symbol '{}'", text));
}

std::span<const ErrnoCode> errno_table() { return table().by_number; }

ErrnoCode success_code() { return ErrnoCode{std::string(kSuccessSymbol), 0}; }

bool is_success(const ErrnoCode& code) {
  return code.number == 0 && code.symbol == kSuccessSymbol;
}

ErrnoCode parse_return_class(std::string_view text) {
  if (text == kSuccessSymbol) return success_code();
  return errno_lookup(text);
}

}  // namespace sysfault
