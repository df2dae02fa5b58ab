#include "session.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using stlisp::cli::Mode;
using stlisp::cli::SessionConfig;

void add_common(CLI::App& app, SessionConfig& cfg, std::string& mode) {
  app.add_option("--mode", mode, "logical, native or diff")
      ->envname("STLISP_MODE")
      ->check(CLI::IsMember({"logical", "native", "diff"}, CLI::ignore_case));
  app.add_option("--guard-check", cfg.guard_check, "check guards at runtime (on|off)")
      ->envname("STLISP_GUARD_CHECK")
      ->transform(CLI::Transformer({{"on", "1"}, {"off", "0"}}, CLI::ignore_case));
  app.add_option("--cap", cfg.cap, "native loop iteration cap")->envname("STLISP_CAP");
  app.add_option("--seed", cfg.seed, "random seed")->envname("STLISP_SEED");
  app.add_option("--trials", cfg.trials, "property trials")->envname("STLISP_TRIALS");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stlisp: applicative Lisp with single-threaded objects and loop$"};
  app.require_subcommand(1);

  SessionConfig cfg;
  std::string mode = "logical";
  std::string path;

  auto* run = app.add_subcommand("run", "evaluate a file, printing one line per form");
  run->add_option("file", path)->required();
  add_common(*run, cfg, mode);

  auto* repl = app.add_subcommand("repl", "interactive session");
  add_common(*repl, cfg, mode);

  auto* diff = app.add_subcommand("diff", "run a file on both paths and compare");
  diff->add_option("file", path)->required();
  add_common(*diff, cfg, mode);
  diff->add_option("--native-fault", cfg.native_fault)->group("");

  auto* check = app.add_subcommand("check-constraints",
                                   "load a file and sample its recorded constraints");
  check->add_option("file", path)->required();
  add_common(*check, cfg, mode);

  CLI11_PARSE(app, argc, argv);
  cfg.mode = *stlisp::cli::parse_mode(mode);

  if (*run) return stlisp::cli::run_file(path, cfg, std::cout, std::cerr);
  if (*diff) return stlisp::cli::diff_file(path, cfg, std::cout, std::cerr);
  if (*check) return stlisp::cli::check_constraints_file(path, cfg, std::cout, std::cerr);
  stlisp::cli::Session session(cfg, std::cout, std::cerr);
  return session.repl(std::cin);
}
