#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "cli.hpp"

int main(int argc, char** argv) {
  using namespace schro::cli;
  CLI::App app{"Bifurcation and synchronization analysis for coupled radial systems on S^n"};
  app.require_subcommand(1);

  int n = 2;
  int jmax = 10;
  auto* spectrum = app.add_subcommand("spectrum", "Radial Laplacian spectrum of S^n");
  spectrum->add_option("-n,--dim", n, "sphere dimension (>= 2)");
  spectrum->add_option("-j,--jmax", jmax, "largest degree");

  std::string params_csv;
  std::vector<double> params_list;
  auto* classify = app.add_subcommand("classify", "Sign-regime classification of one parameter set");
  classify->add_option("--params", params_csv, "lambda1,lambda2,a11,a12,a21,a22,q");
  classify->add_option("values", params_list, "the same seven numbers as positional arguments");

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> format;
  std::vector<CLI::App*> pipelines;
  const std::pair<const char*, const char*> stages[] = {
      {"run", "Run the stages listed under pipeline (all four by default)"},
      {"detect", "Check the family conditions and locate resonance crossings"},
      {"continue", "Detect, then follow the branch nearest alpha = 0"},
      {"verify", "Full pipeline with checks; explicit parameter sets get multistart only"}};
  for (const auto& [name, help] : stages) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "flat key = value config file")->required();
    sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
    sub->add_option("--seed", seed, "multistart seed (overrides verify.seed)");
    sub->add_option("--format", format, "csv, json or both")->check(CLI::IsMember({"csv", "json", "both"}));
    pipelines.push_back(sub);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (spectrum->parsed()) {
      cmd_spectrum(n, jmax, std::cout);
      return 0;
    }
    if (classify->parsed()) {
      if (!params_csv.empty() && !params_list.empty()) {
        throw schro::Error(schro::Errc::InvalidArgument, "give parameters either with --params or positionally");
      }
      std::vector<double> v = params_list;
      if (!params_csv.empty()) {
        Config c;
        c.set("params", params_csv);
        v = c.numbers("params");
      }
      std::cout << cmd_classify(params_from_list(v)).dump(2) << '\n';
      return 0;
    }
    RunOptions ro;
    ro.out_dir = out_dir;
    ro.seed = seed;
    ro.formats = format;
    const Config cfg = Config::load(config_path);
    if (pipelines[1]->parsed()) ro.pipeline = std::vector<std::string>{"conditions", "detect"};
    if (pipelines[2]->parsed()) ro.pipeline = std::vector<std::string>{"conditions", "detect", "continue"};
    if (pipelines[3]->parsed()) {
      ro.pipeline = cfg.str("family.kind", "theorem5") != "explicit"
                        ? std::vector<std::string>{"conditions", "detect", "continue", "verify"}
                        : std::vector<std::string>{"verify"};
    }
    const RunResult r = cmd_run(cfg, ro);
    return r.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
