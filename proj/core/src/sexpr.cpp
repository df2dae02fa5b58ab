#include "stlisp/sexpr.hpp"

#include "stlisp/error.hpp"
#include "stlisp/stobj.hpp"

#include <cctype>
#include <sstream>

namespace stlisp {

namespace {

class Reader {
 public:
  explicit Reader(std::string_view src) : src_(src) {}

  std::vector<SourceForm> read_all() {
    std::vector<SourceForm> out;
    while (true) {
      skip_blank();
      if (at_end()) break;
      SourceForm sf;
      sf.line = line_;
      sf.column = col_;
      sf.form = read_form();
      out.push_back(std::move(sf));
    }
    return out;
  }

 private:
  bool at_end() const { return pos_ >= src_.size(); }
  char peek() const { return src_[pos_]; }

  char advance() {
    char c = src_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ReadError(what, line_, col_);
  }
  [[noreturn]] void fail_at(const std::string& what, std::size_t line,
                            std::size_t col) const {
    throw ReadError(what, line, col);
  }

  void skip_blank() {
    while (!at_end()) {
      char c = peek();
      if (c == ';') {
        while (!at_end() && peek() != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  static bool is_delimiter(char c) {
    return std::isspace(static_cast<unsigned char>(c)) || c == '(' ||
           c == ')' || c == '\'' || c == '"' || c == ';';
  }

  Value read_form() {
    skip_blank();
    if (at_end()) fail("unexpected end of input");
    char c = peek();
    if (c == '(') {
      std::size_t l = line_, col = col_;
      advance();
      return read_list_tail(l, col);
    }
    if (c == ')') fail("unbalanced ')'");
    if (c == '\'') {
      advance();
      skip_blank();
      if (at_end()) fail("quote at end of input");
      return list({Sym::get().quote, read_form()});
    }
    if (c == '"') return read_string();
    if (c == '#' || c == '`' || c == ',' || c == '|')
      fail(std::string("unsupported syntax '") + c + "'");
    return read_atom();
  }

  Value read_list_tail(std::size_t open_line, std::size_t open_col) {
    std::vector<Value> items;
    Value tail;
    while (true) {
      skip_blank();
      if (at_end()) fail_at("unbalanced '(': missing ')'", open_line, open_col);
      if (peek() == ')') {
        advance();
        break;
      }
      if (peek() == '.' && pos_ + 1 < src_.size() &&
          is_delimiter(src_[pos_ + 1])) {
        if (items.empty()) fail("'.' with no preceding element");
        advance();
        tail = read_form();
        skip_blank();
        if (at_end()) fail_at("unbalanced '(': missing ')'", open_line, open_col);
        if (peek() != ')') fail("more than one form after '.'");
        advance();
        break;
      }
      items.push_back(read_form());
    }
    Value out = tail;
    for (auto it = items.rbegin(); it != items.rend(); ++it)
      out = Value::cons(*it, std::move(out));
    return out;
  }

  Value read_string() {
    std::size_t l = line_, col = col_;
    advance();
    std::string text;
    while (true) {
      if (at_end()) fail_at("unterminated string", l, col);
      char c = advance();
      if (c == '"') break;
      if (c == '\\') {
        if (at_end()) fail_at("unterminated string", l, col);
        c = advance();
      }
      text.push_back(c);
    }
    return Value::string(std::move(text));
  }

  Value read_atom() {
    std::size_t l = line_, col = col_;
    std::string tok;
    while (!at_end() && !is_delimiter(peek())) tok.push_back(advance());
    if (tok == ".") fail_at("'.' outside dotted-pair position", l, col);
    if (is_integer_token(tok)) {
      std::string digits = tok.front() == '+' ? tok.substr(1) : tok;
      return Value::integer(Integer(digits));
    }
    if (looks_rational(tok))
      fail_at("rational literal '" + tok + "' is not supported", l, col);
    for (char& ch : tok)
      ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return Value::symbol(tok);
  }

  static bool is_integer_token(const std::string& tok) {
    std::size_t i = 0;
    if (tok[0] == '+' || tok[0] == '-') i = 1;
    if (i >= tok.size()) return false;
    for (; i < tok.size(); ++i)
      if (!std::isdigit(static_cast<unsigned char>(tok[i]))) return false;
    return true;
  }

  static bool looks_rational(const std::string& tok) {
    auto slash = tok.find('/');
    if (slash == std::string::npos || slash == 0 || slash + 1 == tok.size())
      return false;
    return is_integer_token(tok.substr(0, slash)) &&
           is_integer_token(tok.substr(slash + 1));
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

void print(std::ostream& os, const Value& v);

void print_list(std::ostream& os, const Value& v) {
  os << '(';
  print(os, v.car());
  const Value* p = &v.cdr();
  for (; p->is_cons(); p = &p->cdr()) {
    os << ' ';
    print(os, p->car());
  }
  if (!p->is_nil()) {
    os << " . ";
    print(os, *p);
  }
  os << ')';
}

void print(std::ostream& os, const Value& v) {
  switch (v.kind()) {
    case Kind::Nil:
      os << "NIL";
      return;
    case Kind::Symbol:
      os << v.symbol_name();
      return;
    case Kind::Integer:
      os << v.as_integer();
      return;
    case Kind::String:
      os << '"';
      for (char c : v.as_string()) {
        if (c == '"' || c == '\\') os << '\\';
        os << c;
      }
      os << '"';
      return;
    case Kind::Stobj:
      os << '<' << v.stobj().spec().name.symbol_name() << '>';
      return;
    case Kind::Values: {
      os << '(';
      bool first = true;
      for (const auto& item : v.values()) {
        if (!first) os << ' ';
        first = false;
        print(os, item);
      }
      os << ')';
      return;
    }
    case Kind::Cons:
      if (v.car().eq(Sym::get().quote) && v.cdr().is_cons() &&
          v.cdr().cdr().is_nil()) {
        os << '\'';
        print(os, v.cdr().car());
        return;
      }
      print_list(os, v);
      return;
  }
}

}  // namespace

std::vector<SourceForm> read_located(std::string_view source) {
  return Reader(source).read_all();
}

std::vector<Value> read(std::string_view source) {
  std::vector<Value> out;
  for (auto& sf : read_located(source)) out.push_back(std::move(sf.form));
  return out;
}

std::string show(const Value& v) {
  std::ostringstream os;
  print(os, v);
  return os.str();
}

}  // namespace stlisp
