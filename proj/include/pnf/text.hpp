// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace pnf::text {

/// Splits a single CSV line on commas. Quoting is not supported; fields in
/// this project never contain commas.
std::vector<std::string> split_csv(std::string_view line);

/// Shortest decimal that parses back to exactly `v`.
std::string format_double(double v);

/// Whole-string parse; throws InvalidInput on trailing garbage.
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

std::string trim(std::string_view s);

}  // namespace pnf::text
