#pragma once

#include <string>

namespace amr {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // begins with '/', never empty
};

/// Splits an http(s) URL into the origin httplib connects to and the request path.
ParsedUrl parse_url(const std::string& url);

}  // namespace amr
