#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vcreg/errors.hpp"
#include "vcreg/pipeline.hpp"

// Command line front end: parses flags, assembles the merged configuration,
// and maps pipeline errors onto exit codes (config 2, data 3, numerical 4).

namespace {

using nlohmann::json;

struct CommonOpts {
  std::string config_file;
  std::vector<std::string> sets;
  std::string output_dir;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("-c,--config", o.config_file, "configuration file (JSON)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", o.sets, "override one key, e.g. --set nonrigid.epochs=50")
      ->type_name("KEY=VALUE");
  cmd->add_option("-o,--output-dir", o.output_dir, "directory for artifacts");
}

json build_config(const CommonOpts& o) {
  json cfg = o.config_file.empty() ? vcreg::default_config() : vcreg::load_config(o.config_file);
  for (const std::string& s : o.sets) vcreg::apply_override(cfg, s);
  if (!o.output_dir.empty()) cfg["paths"]["output_dir"] = o.output_dir;
  return cfg;
}

void fill_bundle_paths(json& cfg, const std::string& bundle) {
  const std::filesystem::path dir(bundle);
  cfg["paths"]["volume"] = (dir / "lumen_sdf.json").string();
  cfg["paths"]["wall_volume"] = (dir / "wall_sdf.json").string();
  cfg["paths"]["pullback"] = (dir / "pullback_lumen.json").string();
  cfg["paths"]["wall_pullback"] = (dir / "pullback_wall.json").string();
  cfg["paths"]["centerline"] = (dir / "centerline.json").string();
  cfg["paths"]["ground_truth"] = (dir / "ground_truth.json").string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"virtual-catheter registration of pullbacks to vessel volumes"};
  app.require_subcommand(1);

  CommonOpts phantom_opts;
  bool phantom_force = false;
  std::optional<std::uint64_t> phantom_seed;
  CLI::App* phantom = app.add_subcommand("phantom", "generate a synthetic vessel bundle");
  add_common(phantom, phantom_opts);
  phantom->add_flag("-f,--force", phantom_force, "overwrite existing bundle files");
  phantom->add_option("--seed", phantom_seed, "seed for both the vessel and its motion");

  CommonOpts sdf_opts;
  std::string mask_in;
  CLI::App* sdf =
      app.add_subcommand("sdf", "convert a binary mask volume to a banded signed distance field");
  add_common(sdf, sdf_opts);
  sdf->add_option("-i,--input", mask_in, "mask volume (JSON sidecar)");

  CommonOpts reg_opts;
  std::string reg_bundle;
  bool rigid_only = false;
  std::optional<int> epochs;
  CLI::App* reg = app.add_subcommand("register", "run the two-stage registration");
  add_common(reg, reg_opts);
  reg->add_option("--bundle", reg_bundle, "phantom bundle directory; fills the input paths");
  reg->add_flag("--rigid-only", rigid_only, "stop after the rigid stages");
  reg->add_option("--epochs", epochs, "refinement epochs");

  CommonOpts eval_opts;
  std::string eval_bundle, eval_result;
  CLI::App* eval = app.add_subcommand("evaluate", "score landmarks against the ground truth");
  add_common(eval, eval_opts);
  eval->add_option("--bundle", eval_bundle, "phantom bundle directory; fills paths.ground_truth");
  eval->add_option("--result", eval_result, "result.json from a register run");

  CLI::App* config = app.add_subcommand("config", "configuration utilities");
  config->require_subcommand(1);
  std::string init_path;
  bool init_force = false;
  CLI::App* init = config->add_subcommand("init", "write the full default configuration");
  init->add_option("path", init_path, "destination file (stdout when omitted)");
  init->add_flag("-f,--force", init_force, "overwrite an existing file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // bad usage is a config error
  }

  try {
    if (phantom->parsed()) {
      json cfg = build_config(phantom_opts);
      if (phantom_seed) {
        cfg["phantom"]["seed"] = *phantom_seed;
        cfg["phantom"]["motion"]["seed"] = *phantom_seed;
      }
      vcreg::run_phantom(cfg, phantom_force, std::cout);
    } else if (sdf->parsed()) {
      json cfg = build_config(sdf_opts);
      if (!mask_in.empty()) cfg["paths"]["mask"] = mask_in;
      vcreg::run_sdf(cfg, std::cout);
    } else if (reg->parsed()) {
      json cfg = build_config(reg_opts);
      if (!reg_bundle.empty()) fill_bundle_paths(cfg, reg_bundle);
      if (rigid_only) cfg["rigid"]["rigid_only"] = true;
      if (epochs) cfg["nonrigid"]["epochs"] = *epochs;
      vcreg::run_register(cfg, std::cout);
    } else if (eval->parsed()) {
      json cfg = build_config(eval_opts);
      if (!eval_bundle.empty())
        cfg["paths"]["ground_truth"] =
            (std::filesystem::path(eval_bundle) / "ground_truth.json").string();
      if (!eval_result.empty()) cfg["paths"]["result"] = eval_result;
      vcreg::run_evaluate(cfg, std::cout);
    } else if (config->parsed()) {
      const std::string text = vcreg::default_config().dump(2) + "\n";
      if (init_path.empty()) {
        std::cout << text;
      } else {
        if (!init_force && std::filesystem::exists(init_path))
          throw vcreg::DataError("output file already exists: " + init_path + " (use --force)");
        std::ofstream out(init_path);
        if (!out) throw vcreg::DataError("cannot write " + init_path);
        out << text;
        std::cout << "wrote " << init_path << "\n";
      }
    }
    return 0;
  } catch (const vcreg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const vcreg::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const vcreg::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
