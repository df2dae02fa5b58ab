#pragma once

#include "stlisp/interpreter.hpp"
#include "stlisp/sexpr.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace stlisp::cli {

enum class Mode { Logical, Native, Diff };

std::string_view mode_name(Mode m);
/// Accepts "logical", "native" and "diff" in any case.
std::optional<Mode> parse_mode(std::string_view s);

struct SessionConfig {
  Mode mode = Mode::Logical;
  bool guard_check = true;
  std::uint64_t cap = 10'000'000;
  std::uint64_t seed = 0;
  std::uint64_t trials = 1000;
  /// Test-only: perturbs native loop results to exercise the diff harness.
  long long native_fault = 0;
};

enum ExitCode : int { kOk = 0, kEvalError = 1, kDivergence = 2 };

/// An interactive or batch session: one primary interpreter, plus a native
/// shadow in diff mode that re-executes every form and is compared against
/// the primary (logical) one.
class Session {
 public:
  Session(SessionConfig config, std::ostream& out, std::ostream& err);
  ~Session();

  /// Processes the forms and keyword commands of `source`. With
  /// `stop_on_error`, the first failure ends processing. Returns the worst
  /// exit code seen.
  int run_source(std::string_view source, std::string_view origin,
                 bool stop_on_error);
  /// Read-eval-print over `in` until EOF or `:q`.
  int repl(std::istream& in);

  Interpreter& primary() { return *primary_; }
  Interpreter* shadow() { return shadow_.get(); }
  Mode mode() const noexcept { return config_.mode; }
  void set_mode(Mode m);
  bool quit_requested() const noexcept { return quit_; }
  std::uint64_t divergences() const noexcept { return divergences_; }

 private:
  int process(const SourceForm& form, std::string_view origin);
  int command(const Value& cmd, const std::vector<SourceForm>& forms, std::size_t& i,
              std::string_view origin);
  void flush_side_output(Interpreter& interp);
  Config config_for(bool native) const;
  void undo(const Value& target);

  SessionConfig config_;
  std::ostream& out_;
  std::ostream& err_;
  std::unique_ptr<Interpreter> primary_;
  std::unique_ptr<Interpreter> shadow_;
  // Event forms and undo targets, replayed to build a shadow on `:mode diff`.
  std::vector<Value> history_;
  std::uint64_t divergences_ = 0;
  bool quit_ = false;
};

int run_file(const std::string& path, const SessionConfig& config, std::ostream& out,
             std::ostream& err);
/// Runs `path` in diff mode and prints "equivalent" or the divergences.
int diff_file(const std::string& path, SessionConfig config, std::ostream& out,
              std::ostream& err);
/// Loads `path` and checks the recorded constraints.
int check_constraints_file(const std::string& path, const SessionConfig& config,
                           std::ostream& out, std::ostream& err);

}  // namespace stlisp::cli
