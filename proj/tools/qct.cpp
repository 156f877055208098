// qct <subcommand> --config <path> [--out <dir>] [--seed <u64>] [--threads <n>]

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "qct/app.hpp"

int main(int argc, char** argv) {
  CLI::App cli{"phase-space quantum/classical transition toolkit"};
  cli.require_subcommand(1, 1);
  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  for (const auto& name : qct::subcommands()) {
    auto* sub = cli.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--threads", threads, "worker cap")->check(CLI::PositiveNumber);
  }
  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = cli.exit(e);
    return rc == 0 ? 0 : 2;
  }
  auto* sub = cli.get_subcommands().front();

  auto report = [](const qct::Json& err) { std::cerr << err.dump() << "\n"; };

  std::optional<std::uint64_t> seed_opt;
  if (sub->count("--seed")) seed_opt = seed;
  qct::RunConfig cfg;
  try {
    cfg = qct::load_config(config_path, seed_opt);
  } catch (const qct::Error& e) {
    report(qct::error_json(e.kind(), e.what()));
    return qct::exit_code_for(e.kind());
  }

  qct::RunRequest req;
  req.subcommand = sub->get_name();
  if (!out_dir.empty()) {
    req.out_dir = out_dir;
  } else if (const char* env = std::getenv("QCT_OUT"); env && *env) {
    req.out_dir = env;
  } else {
    req.out_dir = cfg.output_dir;
  }
  req.seed = seed_opt;
  if (threads > 0) qct::set_max_threads(threads);

  const auto outcome = qct::run(cfg, req);
  if (outcome.error) report(*outcome.error);
  return outcome.exit_code;
}
