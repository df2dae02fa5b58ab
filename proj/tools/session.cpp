#include "session.hpp"

#include "stlisp/error.hpp"
#include "stlisp/refinement.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <sstream>

namespace stlisp::cli {

std::string_view mode_name(Mode m) {
  switch (m) {
    case Mode::Logical: return "logical";
    case Mode::Native: return "native";
    case Mode::Diff: return "diff";
  }
  return "?";
}

std::optional<Mode> parse_mode(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "logical") return Mode::Logical;
  if (lower == "native") return Mode::Native;
  if (lower == "diff") return Mode::Diff;
  return std::nullopt;
}

namespace {

const Value& kw(const char* name) {
  // Interned once per name; the handful of commands keeps this small.
  static std::unordered_map<std::string, Value> cache;
  auto [it, fresh] = cache.try_emplace(name);
  if (fresh) it->second = sym(name);
  return it->second;
}

bool is_event_form(const Value& f) {
  const Sym& s = Sym::get();
  if (!f.is_cons()) return false;
  for (const Value& h : {s.defun, s.defstobj, s.encapsulate, s.defattach, s.include_book,
                         s.defwarrant, s.defbadge})
    if (f.car().eq(h)) return true;
  return false;
}

std::string where(std::string_view origin, const SourceForm& f) {
  return std::string(origin) + ":" + std::to_string(f.line) + ":" + std::to_string(f.column);
}

struct Outcome {
  bool ok = false;
  TopLevelResult result;
  std::string error;
};

Outcome attempt(Interpreter& interp, const Value& form) {
  Outcome o;
  try {
    o.result = interp.process(form);
    o.ok = true;
  } catch (const LispError& e) {
    o.error = e.what();
  }
  return o;
}

}  // namespace

Session::Session(SessionConfig config, std::ostream& out, std::ostream& err)
    : config_(config), out_(out), err_(err) {
  primary_ = std::make_unique<Interpreter>(config_for(config_.mode == Mode::Native));
  if (config_.mode == Mode::Diff) shadow_ = std::make_unique<Interpreter>(config_for(true));
}

Session::~Session() = default;

Config Session::config_for(bool native) const {
  Config c = native ? Config::native() : Config::logical();
  c.guard_check = config_.guard_check;
  c.native_cap = config_.cap;
  if (native) c.native_fault_for_testing = config_.native_fault;
  return c;
}

void Session::set_mode(Mode m) {
  if (m == config_.mode) return;
  const bool native = m == Mode::Native;
  Config c = config_for(native);
  primary_->config().loop_path = c.loop_path;
  primary_->set_stobj_semantics(c.stobj_semantics);
  if (m == Mode::Diff) {
    shadow_ = std::make_unique<Interpreter>(config_for(true));
    for (const Value& h : history_) {
      if (h.is_integer()) {
        shadow_->undo(static_cast<std::uint64_t>(h.as_integer()));
        continue;
      }
      try {
        shadow_->process(h);
      } catch (const LispError&) {
      }
    }
    shadow_->output().clear();
    shadow_->warnings().clear();
    shadow_->sync_bank_from(*primary_);
  } else {
    shadow_.reset();
  }
  config_.mode = m;
}

void Session::flush_side_output(Interpreter& interp) {
  for (const auto& line : interp.output()) out_ << line << "\n";
  interp.output().clear();
  for (const auto& w : interp.warnings()) err_ << "warning: " << w << "\n";
  interp.warnings().clear();
}

void Session::undo(const Value& target) {
  std::optional<std::uint64_t> index;
  if (target.is_integer()) {
    if (target.as_integer() < 0) throw EvalError(":ubt needs an event index or name");
    index = static_cast<std::uint64_t>(target.as_integer());
  } else if (target.is_symbol()) {
    index = primary_->world().index_of(target);
    if (!index) throw EvalError(":ubt: no event named " + show(target));
  } else {
    throw EvalError(":ubt needs an event index or name");
  }
  primary_->undo(*index);
  if (shadow_) {
    shadow_->undo(*index);
    shadow_->sync_bank_from(*primary_);
  }
  history_.push_back(Value::integer(static_cast<long long>(*index)));
  out_ << "undone through event " << *index << "\n";
}

int Session::command(const Value& cmd, const std::vector<SourceForm>& forms, std::size_t& i,
                     std::string_view origin) {
  auto next_arg = [&]() -> Value {
    if (i + 1 >= forms.size())
      throw EvalError(cmd.symbol_name() + " needs an argument");
    return forms[++i].form;
  };
  try {
    if (cmd.eq(kw(":Q"))) {
      quit_ = true;
      return kOk;
    }
    if (cmd.eq(kw(":UBT"))) {
      undo(next_arg());
      return kOk;
    }
    if (cmd.eq(kw(":EVENTS"))) {
      for (const auto& e : primary_->world().events())
        out_ << e.index << " " << event_kind_name(e.kind) << " " << show(e.name) << "\n";
      return kOk;
    }
    if (cmd.eq(kw(":MODE"))) {
      Value m = next_arg();
      auto mode = m.is_symbol() ? parse_mode(m.symbol_name()) : std::nullopt;
      if (!mode) throw EvalError(":mode expects logical, native or diff");
      set_mode(*mode);
      out_ << "mode " << mode_name(*mode) << "\n";
      return kOk;
    }
    throw EvalError("unknown command " + show(cmd));
  } catch (const LispError& e) {
    err_ << where(origin, forms[i]) << ": error: " << e.what() << "\n";
    return kEvalError;
  }
}

int Session::process(const SourceForm& sf, std::string_view origin) {
  const Value& form = sf.form;
  Outcome p = attempt(*primary_, form);
  flush_side_output(*primary_);
  if (!shadow_) {
    if (!p.ok) {
      err_ << where(origin, sf) << ": error: " << p.error << "\n";
      return kEvalError;
    }
    if (p.result.is_event) history_.push_back(form);
    out_ << p.result.text << "\n";
    return kOk;
  }

  Outcome s = attempt(*shadow_, form);
  shadow_->output().clear();
  shadow_->warnings().clear();
  if (!p.ok) {
    // Forms the logical path rejects are not compared.
    err_ << where(origin, sf) << ": skipped: " << p.error << "\n";
    shadow_->sync_bank_from(*primary_);
    return kEvalError;
  }
  if (p.result.is_event) history_.push_back(form);
  out_ << p.result.text << "\n";
  std::string why;
  if (!s.ok) {
    why = "native path failed: " + s.error;
  } else if (!equal(p.result.value, s.result.value)) {
    why = "results differ: logical " + show(logical_of(p.result.value)) + ", native " +
          show(logical_of(s.result.value));
  } else if (!equal(primary_->bank_logical_view(), shadow_->bank_logical_view())) {
    why = "stobj banks differ: logical " + show(primary_->bank_logical_view()) +
          ", native " + show(shadow_->bank_logical_view());
  }
  if (why.empty()) return kOk;
  ++divergences_;
  err_ << where(origin, sf) << ": divergence in " << show(form) << ": " << why << "\n";
  shadow_->sync_bank_from(*primary_);
  return kDivergence;
}

int Session::run_source(std::string_view source, std::string_view origin,
                        bool stop_on_error) {
  std::vector<SourceForm> forms;
  try {
    forms = read_located(source);
  } catch (const ReadError& e) {
    err_ << origin << ":" << e.what() << "\n";
    return kEvalError;
  }
  int worst = kOk;
  for (std::size_t i = 0; i < forms.size() && !quit_; ++i) {
    const Value& f = forms[i].form;
    int rc = f.is_keyword() ? command(f, forms, i, origin) : process(forms[i], origin);
    worst = std::max(worst, rc);
    if (rc != kOk && stop_on_error) break;
  }
  return worst;
}

int Session::repl(std::istream& in) {
  std::string pending;
  std::string line;
  out_ << "> " << std::flush;
  while (!quit_ && std::getline(in, line)) {
    pending += line;
    pending += "\n";
    try {
      (void)read(pending);
    } catch (const ReadError& e) {
      // Incomplete input keeps accumulating; anything else is reported.
      const std::string msg = e.what();
      if (msg.find("unterminated") != std::string::npos ||
          msg.find("end of input") != std::string::npos ||
          msg.find("missing ')'") != std::string::npos)
        continue;
      err_ << "error: " << e.what() << "\n";
      pending.clear();
      out_ << "> " << std::flush;
      continue;
    }
    run_source(pending, "repl", false);
    pending.clear();
    if (!quit_) out_ << "> " << std::flush;
  }
  return kOk;
}

namespace {

std::optional<std::string> slurp(const std::string& path, std::ostream& err) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    err << path << ": cannot open file\n";
    return std::nullopt;
  }
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

int run_file(const std::string& path, const SessionConfig& config, std::ostream& out,
             std::ostream& err) {
  auto src = slurp(path, err);
  if (!src) return kEvalError;
  Session s(config, out, err);
  return s.run_source(*src, path, true);
}

int diff_file(const std::string& path, SessionConfig config, std::ostream& out,
              std::ostream& err) {
  auto src = slurp(path, err);
  if (!src) return kEvalError;
  config.mode = Mode::Diff;
  Session s(config, out, err);
  s.run_source(*src, path, false);
  if (s.divergences() == 0) {
    out << "equivalent\n";
    return kOk;
  }
  out << s.divergences() << " divergence(s)\n";
  return kDivergence;
}

int check_constraints_file(const std::string& path, const SessionConfig& config,
                           std::ostream& out, std::ostream& err) {
  auto src = slurp(path, err);
  if (!src) return kEvalError;
  SessionConfig c = config;
  c.mode = Mode::Logical;
  std::ostringstream transcript;
  Session s(c, transcript, err);
  // Evaluation errors are reported but do not stop loading; the constraints
  // are still checked against whatever was defined.
  const int load_rc = s.run_source(*src, path, false);
  try {
    ConstraintReport r = check_constraints(s.primary(), config.seed, config.trials);
    out << r.describe() << "\n";
    if (r.failures != 0) return kDivergence;
    return load_rc;
  } catch (const LispError& e) {
    err << "error: " << e.what() << "\n";
    return kEvalError;
  }
}

}  // namespace stlisp::cli
