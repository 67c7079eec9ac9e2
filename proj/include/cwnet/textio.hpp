#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "cwnet/errors.hpp"

namespace cwnet {

// shortest decimal that parses back to exactly v
inline std::string format_double(double v) {
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

// line-oriented reader tracking position for error context
class LineReader {
 public:
  explicit LineReader(std::istream& is) : is_(is) {}

  // next nonempty line split into tokens; empty result means EOF
  const std::vector<std::string>& next() {
    tokens_.clear();
    std::string line;
    while (std::getline(is_, line)) {
      ++lineno_;
      std::istringstream ls(line);
      std::string tok;
      while (ls >> tok) tokens_.push_back(tok);
      if (!tokens_.empty()) return tokens_;
    }
    return tokens_;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw DataError("line " + std::to_string(lineno_) + ": " + msg);
  }

  long parse_int(const std::string& tok, const char* what) const {
    try {
      size_t pos = 0;
      long v = std::stol(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      fail(std::string("expected integer for ") + what + ", got '" + tok + "'");
    }
  }

  double parse_real(const std::string& tok, const char* what) const {
    try {
      size_t pos = 0;
      double v = std::stod(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      fail(std::string("expected number for ") + what + ", got '" + tok + "'");
    }
  }

  std::uint64_t parse_u64(const std::string& tok, const char* what) const {
    try {
      size_t pos = 0;
      unsigned long long v = std::stoull(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      fail(std::string("expected unsigned integer for ") + what + ", got '" +
           tok + "'");
    }
  }

 private:
  std::istream& is_;
  long lineno_ = 0;
  std::vector<std::string> tokens_;
};

} // namespace cwnet
