#include <iostream>

#include "CLI11.hpp"

#include "dmchan/cli/commands.hpp"

#ifndef DMCHAN_GIT_DESCRIBE
#define DMCHAN_GIT_DESCRIBE "unknown"
#endif

int main(int argc, char** argv) {
  using namespace dmchan;
  CLI::App app{"Diffusion-model channel generation and end-to-end learning"};
  app.require_subcommand(1);

  std::string config_path, checkpoint, algorithm, conditions, manifest;
  std::uint64_t seed = 0;
  std::size_t scale = 1;
  std::string out = "out";

  for (const auto& name : cli::command_names()) {
    if (name == "replay") continue;
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "root seed; overrides the config");
    sub->add_option("--scale", scale, "divide dataset sizes and trial counts by this")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "output directory")->capture_default_str();
    sub->add_option("--checkpoint", checkpoint, "input checkpoint")->check(CLI::ExistingFile);
    if (name == "train-ae")
      sub->add_option("--algorithm", algorithm, "pretrain | iterative | model-aware")
          ->check(CLI::IsMember({"pretrain", "iterative", "model-aware"}));
    if (name == "sample") sub->add_option("--conditions", conditions, "CSV of channel inputs")->check(CLI::ExistingFile);
  }
  CLI::App* replay = app.add_subcommand("replay", "re-run the command recorded in a manifest");
  replay->add_option("manifest", manifest, "manifest.json")->required()->check(CLI::ExistingFile);
  replay->add_option("--out", out, "output directory")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  const CLI::App* sub = app.get_subcommands().front();

  try {
    cli::RunOptions opts;
    if (sub->get_name() == "replay") {
      opts = cli::options_from_manifest(io::read_json_file(manifest), out);
    } else {
      opts.command = sub->get_name();
      opts.config = config_path.empty() ? io::parse_config(io::json::object()) : io::load_config(config_path);
      if (sub->count("--seed")) opts.seed = seed;
      opts.scale = scale;
      opts.out = out;
      if (!checkpoint.empty()) opts.checkpoint = checkpoint;
      if (!algorithm.empty()) opts.algorithm = algorithm;
      if (!conditions.empty()) opts.conditions = conditions;
    }
    opts.build_id = DMCHAN_GIT_DESCRIBE;
    return cli::run(std::move(opts));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
