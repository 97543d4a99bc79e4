#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "stiffwkb/cli.hpp"

namespace {

// exit codes: 0 success, 2 configuration error, 3 solver failure
int run(const std::string& command, const std::string& config_path, const std::string& out_dir,
        unsigned threads) {
  using namespace stiffwkb;
  try {
    cli::RunContext ctx;
    ctx.config = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (!out_dir.empty()) ctx.config.output_dir = out_dir;
    ctx.threads = threads;
    cli::run_command(command, ctx, ctx.config.output_dir);
    std::printf("%s: wrote %s\n", command.c_str(), ctx.config.output_dir.c_str());
    return 0;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stiff beam spectra: direct FEM, low- and high-frequency asymptotics"};
  app.set_version_flag("--version", STIFFWKB_VERSION);
  app.require_subcommand(1);
  std::string config_path, out_dir;
  unsigned threads = 1;
  int code = 0;
  const char* commands[][2] = {
      {"direct", "lowest eigenpairs at one epsilon -> spectrum.csv"},
      {"lowfreq", "two-term low-frequency expansion vs direct -> lowfreq.csv"},
      {"highfreq", "WKB expansion along eps_p vs direct -> convergence.csv, expansion.json"},
      {"sweep", "spectrum over an epsilon grid -> density.csv, fan.svg"},
      {"verify-all", "every table above plus weak.csv and summary.csv"}};
  for (auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON run configuration");
    sub->add_option("--out", out_dir, "output directory (overrides output_dir)");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::Range(1u, 256u));
    sub->callback([&, cmd = std::string(name)] { code = run(cmd, config_path, out_dir, threads); });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  return code;
}
