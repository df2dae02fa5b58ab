#pragma once

#include "stlisp/interpreter.hpp"
#include "stlisp/sexpr.hpp"

#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

namespace stlisp::test {

inline Value read1(std::string_view src) { return read(src).at(0); }

/// Processes every form; returns the printed text of the last one.
inline std::string run(Interpreter& interp, std::string_view src) {
  std::string last;
  for (const auto& r : interp.process_source(src)) last = r.text;
  return last;
}

inline Value run_value(Interpreter& interp, std::string_view src) {
  Value last;
  for (const auto& r : interp.process_source(src)) last = r.value;
  return last;
}

inline std::string corpus_path(const std::string& name) {
  return std::string(STLISP_CORPUS_DIR) + "/" + name;
}

inline std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace stlisp::test
