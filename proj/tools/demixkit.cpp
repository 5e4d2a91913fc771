// demixkit <command> --config <file> [--out <dir>] [--seed <n>] [--threads <n>]
//
// Exit codes: 0 ok, 2 config error, 3 numerical failure, 4 I/O error.

#include "demixkit/config.hpp"
#include "demixkit/io.hpp"
#include "demixkit/parallel.hpp"
#include "demixkit/runner.hpp"

#include "CLI11.hpp"

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

namespace {

enum Exit { kOk = 0, kConfig = 2, kNumerical = 3, kIo = 4 };

int run_command(const std::string& command, const std::string& config_path,
                const std::optional<std::string>& out_dir, const std::optional<std::uint64_t>& seed,
                int threads) {
  using namespace demixkit;
  try {
    const std::string text = detail::read_file(config_path);
    const RunConfig cfg = parse_config(text, {seed, out_dir});
    if (to_string(cfg.command) != command)
      throw ConfigError("command line says \"" + command + "\" but " + config_path + " says \"" +
                        std::string(to_string(cfg.command)) + "\"");
    const RunOutcome outcome = run(cfg, resolve_threads(threads), std::cout);
    for (const auto& f : outcome.files) std::cout << "wrote " << f.string() << '\n';
    if (outcome.diverged) {
      std::cerr << "demixkit: solver diverged (non-finite iterates)\n";
      return kNumerical;
    }
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "demixkit: " << e.what() << '\n';
    return kConfig;
  } catch (const InvalidArgument& e) {
    std::cerr << "demixkit: invalid configuration: " << e.what() << '\n';
    return kConfig;
  } catch (const Unimplemented& e) {
    std::cerr << "demixkit: unsupported: " << e.what() << '\n';
    return kConfig;
  } catch (const NumericalError& e) {
    std::cerr << "demixkit: numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const IoError& e) {
    std::cerr << "demixkit: I/O error: " << e.what() << '\n';
    return kIo;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convex demixing toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 0;

  for (const char* name : {"demix", "phase-diagram", "sdim", "demo"}) {
    auto* sub = app.add_subcommand(name, std::string("run the ") + name + " command");
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--out", out_dir, "output directory (overrides output_dir)");
    sub->add_option("--seed", seed, "base seed (overrides seed)");
    sub->add_option("--threads", threads, "worker threads (default: DEMIXKIT_THREADS, else 1)")
        ->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfig;
  }
  return run_command(app.get_subcommands().front()->get_name(), config_path, out_dir, seed, threads);
}
