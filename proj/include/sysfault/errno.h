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

#pragma once

#include <compare>
#include <span>
#include <string>
#include <string_view>

namespace sysfault {

// A Linux errno value with its symbolic name. Numbers outside the built-in
// table are kept verbatim under the symbol "E?<n>".
struct ErrnoCode {
  std::string symbol;
  int number = 0;

  bool known() const;

  friend bool operator==(const ErrnoCode&, const ErrnoCode&) = default;
  friend std::strong_ordering operator<=>(const ErrnoCode& a, const ErrnoCode& b) {
    if (auto c = a.symbol <=> b.symbol; c != 0) return c;
    return a.number <=> b.number;
  }
};

// Accepts a symbol ("EAGAIN"), a decimal number ("11") or "E?<n>".
// Throws sysfault::Error for unknown symbols.
ErrnoCode errno_lookup(std::string_view symbol_or_number);
ErrnoCode errno_lookup(int number);

// The built-in table, ordered by number. Aliases (EWOULDBLOCK, EDEADLOCK,
// ENOTSUP) are not part of it so that symbol and number map one to one.
std::span<const ErrnoCode> errno_table();

// Pseudo-code used in summaries for successful invocations.
inline constexpr std::string_view kSuccessSymbol = "SUCCESS";
ErrnoCode success_code();
bool is_success(const ErrnoCode& code);

// Parses either an errno or the SUCCESS marker.
ErrnoCode parse_return_class(std::string_view text);

}  // namespace sysfault
