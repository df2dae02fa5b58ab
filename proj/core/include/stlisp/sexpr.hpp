#pragma once

#include "stlisp/value.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace stlisp {

struct SourceForm {
  Value form;
  std::size_t line = 0;
  std::size_t column = 0;
};

/// Parses every form in `source`. Symbols are upcased; `'x` reads as
/// `(QUOTE x)`; `;` comments run to end of line. Throws ReadError.
std::vector<Value> read(std::string_view source);
std::vector<SourceForm> read_located(std::string_view source);

/// Prints in reader syntax. Live stobjs print as `<NAME>`; multiple values
/// print as a list.
std::string show(const Value& v);

}  // namespace stlisp
