// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

namespace energy_ood {

// Shortest decimal text that parses back to exactly v.
std::string format_double(double v);

// Strict: the whole of `text` must be a number (inf/nan spellings rejected).
bool parse_double(std::string_view text, double& out);
bool parse_int(std::string_view text, long long& out);

}  // namespace energy_ood
