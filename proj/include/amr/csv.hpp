#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace amr::csv {

/// Splits one CSV line (RFC 4180 quoting). Throws ParseError(MalformedRow) on bad quoting.
std::vector<std::string> split_line(std::string_view line, std::size_t line_no);

}  // namespace amr::csv
