#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "vcreg/nonrigid.hpp"
#include "vcreg/phantom.hpp"
#include "vcreg/transforms.hpp"

// Pipeline driver shared by the command line tool and the test suites. One
// JSON configuration tree feeds phantom generation, mask-to-SDF conversion,
// the two-stage registration, and landmark evaluation. Every runner creates
// paths.output_dir and writes a config_snapshot.json there that reproduces
// the run byte for byte.

namespace vcreg {

// The complete default tree; `config init` prints exactly this.
nlohmann::json default_config();

// Overlays user keys onto base. Keys absent from base and values of the
// wrong JSON kind are rejected with their dotted path. Arrays replace the
// base value wholesale; phantom.branches elements are themselves validated
// against the branch defaults.
void merge_config(nlohmann::json& base, const nlohmann::json& user);

// Reads a config file and merges it over the defaults.
nlohmann::json load_config(const std::filesystem::path& path);

// Applies one "dotted.path=value" override; the value is parsed as a JSON
// literal, with unquoted words falling back to strings.
void apply_override(nlohmann::json& cfg, const std::string& assignment);

// Typed views of a merged config.
SamplingGridSpec grid_from_config(const nlohmann::json& cfg);
VesselSpec vessel_from_config(const nlohmann::json& cfg);
MotionSpec motion_from_config(const nlohmann::json& cfg);
OptimizerConfig optimizer_from_config(const nlohmann::json& cfg);

// FNV-1a 64-bit digest of a file, hex encoded; used by bundle manifests.
std::string file_digest(const std::filesystem::path& path);

// Subcommand runners. Progress and result summaries go to `log`; artifacts
// go to paths.output_dir. All of them throw ConfigError / DataError /
// NumericalError, which the CLI maps to exit codes 2 / 3 / 4.
void run_phantom(const nlohmann::json& cfg, bool force, std::ostream& log);
void run_sdf(const nlohmann::json& cfg, std::ostream& log);
void run_register(const nlohmann::json& cfg, std::ostream& log);
void run_evaluate(const nlohmann::json& cfg, std::ostream& log);

}  // namespace vcreg
