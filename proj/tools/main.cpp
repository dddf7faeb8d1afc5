#include <CLI11.hpp>

#include "fairlat/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"fairlat: fair representation learning via a projected latent "
               "direction"};
  app.require_subcommand(1);

  fairlat::cli::Options options;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir;
  bool out_set = false;

  auto add_common = [&](CLI::App* cmd, bool config_required) {
    auto* cfg = cmd->add_option("--config", options.config_path, "config file path");
    if (config_required) cfg->required();
    cmd->add_option("--out", out_dir, "output directory (overrides [global] out)")
        ->each([&](const std::string&) { out_set = true; });
    cmd->add_option("--seed", seed, "seed (overrides [global] seed)")
        ->each([&](const std::string&) { seed_set = true; });
    cmd->add_option("--jobs", options.jobs, "parallel fold/setting workers")
        ->check(CLI::PositiveNumber);
  };

  add_common(app.add_subcommand("generate", "generate a synthetic dataset"), true);
  add_common(app.add_subcommand("train", "train a model"), true);
  add_common(app.add_subcommand("eval", "cross-validated fairness evaluation"), true);
  add_common(app.add_subcommand("traverse", "latent traversal along P"), true);
  add_common(app.add_subcommand("sweep", "fairness sweep over bias subsets"), true);
  add_common(app.add_subcommand("gradcheck", "verify gradients"), false);

  CLI11_PARSE(app, argc, argv);

  options.command = app.get_subcommands().front()->get_name();
  if (seed_set) options.seed = seed;
  if (out_set) options.out_dir = out_dir;
  return fairlat::cli::run(options);
}
