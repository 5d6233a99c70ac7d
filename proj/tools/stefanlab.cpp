// Command-line front end: one subcommand per pipeline stage, plus "all".
// Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 configuration
// problem, 3 solver breakdown.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "stefan/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Obstacle-problem laboratory for a free boundary flow with periodic media"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  app.add_option("--config", config_path, "ini-style configuration file");
  app.add_option("--set", overrides, "override one value as section.key=value (repeatable)");
  app.add_option("--out", out_dir,
                 "output directory (default: $STEFANLAB_OUT, then output.root)");

  std::vector<std::string> chosen;
  for (const std::string& name : stefan::pipeline_stage_names()) {
    CLI::App* sub =
        app.add_subcommand(name, "run the " + name + " stage and its prerequisites");
    sub->fallthrough();
    sub->callback([&chosen, name]() { chosen.push_back(name); });
  }
  CLI::App* all = app.add_subcommand("all", "run every stage");
  all->fallthrough();
  all->callback([&chosen]() { chosen.emplace_back("report"); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    stefan::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = stefan::parse_config(config_path);
    for (const std::string& a : overrides) stefan::apply_override(cfg, a);

    std::string out = out_dir;
    if (out.empty()) {
      const char* env = std::getenv("STEFANLAB_OUT");
      out = env && *env ? env : cfg.out_root;
    }

    stefan::RunManifest man = stefan::run_pipeline(cfg, chosen, out);
    for (const stefan::StageResult& s : man.stages)
      std::printf("%-10s  %s  %s\n", s.name.c_str(), s.pass ? "pass" : "FAIL",
                  s.notes.c_str());
    std::printf("outputs in %s (config %s)\n", man.out_dir.c_str(), man.config_hash.c_str());
    return man.all_pass ? 0 : 1;
  } catch (const stefan::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "run failed: %s\n", e.what());
    return 3;
  }
}
