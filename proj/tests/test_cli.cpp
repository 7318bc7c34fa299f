#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vcreg/errors.hpp"
#include "vcreg/phantom.hpp"
#include "vcreg/pipeline.hpp"

using namespace vcreg;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("vcreg_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.size() && line.back() == ',') cells.push_back("");
    rows.push_back(std::move(cells));
  }
  return rows;
}

// A bundle configuration small enough that generation plus two full
// registrations stay well under a second.
json small_cfg(const fs::path& outdir) {
  json cfg = default_config();
  json user = json::parse(R"({
    "phantom": {
      "kind": "line", "length": 40.0, "voxel_spacing": 0.3, "volume_margin": 8.0,
      "branches": [
        {"s": 0.44, "azimuth_deg": 40.0,  "elevation_deg": 55.0, "radius": 0.9, "length": 4.0},
        {"s": 0.50, "azimuth_deg": 200.0, "elevation_deg": 55.0, "radius": 0.9, "length": 4.0},
        {"s": 0.56, "azimuth_deg": 120.0, "elevation_deg": 55.0, "radius": 0.9, "length": 4.0}
      ],
      "n_frames": 48,
      "motion": {"stretch_amp": 0.08, "twist_amp_deg": 12.0, "transverse_frac": 0.15}
    },
    "grid": {"height": 24, "width": 24, "in_plane_spacing": 0.1, "frame_spacing": 0.2},
    "nonrigid": {"m_long": 8, "m_rot": 6, "m_trans": 10, "epochs": 30}
  })");
  merge_config(cfg, user);
  cfg["paths"]["output_dir"] = outdir.string();
  return cfg;
}

void point_at_bundle(json& cfg, const fs::path& bundle) {
  cfg["paths"]["volume"] = (bundle / "lumen_sdf.json").string();
  cfg["paths"]["wall_volume"] = (bundle / "wall_sdf.json").string();
  cfg["paths"]["pullback"] = (bundle / "pullback_lumen.json").string();
  cfg["paths"]["wall_pullback"] = (bundle / "pullback_wall.json").string();
  cfg["paths"]["centerline"] = (bundle / "centerline.json").string();
  cfg["paths"]["ground_truth"] = (bundle / "ground_truth.json").string();
}

json run_phantom_quiet(const json& cfg, bool force = false) {
  std::ostringstream log;
  run_phantom(cfg, force, log);
  return json::parse(log.str());
}

struct CliResult {
  int exit_code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(VCREG_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[4096];
  std::size_t got;
  while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, got);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

json vec3j(double x, double y, double z) { return json::array({x, y, z}); }

}  // namespace

TEST_CASE("config merging fills defaults and rejects unknown keys or wrong kinds") {
  json cfg = default_config();
  merge_config(cfg, json::object());
  CHECK(cfg == default_config());

  merge_config(cfg, json::parse(R"({"nonrigid": {"epochs": 50}})"));
  CHECK(cfg["nonrigid"]["epochs"].get<int>() == 50);
  CHECK(cfg["nonrigid"]["m_long"].get<int>() == 30);

  CHECK_THROWS_WITH_AS(merge_config(cfg, json::parse(R"({"nonrigd": 1})")),
                       "unknown config key: nonrigd", ConfigError);
  CHECK_THROWS_WITH_AS(merge_config(cfg, json::parse(R"({"nonrigid": {"epoch": 1}})")),
                       "unknown config key: nonrigid.epoch", ConfigError);
  CHECK_THROWS_AS(merge_config(cfg, json::parse(R"({"nonrigid": {"epochs": "many"}})")),
                  ConfigError);
  CHECK_THROWS_AS(merge_config(cfg, json::parse(R"({"nonrigid": {"epochs": 2.5}})")),
                  ConfigError);
  CHECK_THROWS_AS(merge_config(cfg, json::parse(R"({"rigid": {"rigid_only": 1}})")),
                  ConfigError);
  CHECK_THROWS_AS(merge_config(cfg, json::parse(R"({"paths": {"volume": 7}})")), ConfigError);
  CHECK_THROWS_AS(merge_config(cfg, json::parse(R"({"nonrigid": 3})")), ConfigError);

  // accepted integral spellings of numbers
  merge_config(cfg, json::parse(R"({"nonrigid": {"epochs": 75.0, "smooth_sigma": 2}})"));
  CHECK(cfg["nonrigid"]["epochs"].get<int>() == 75);
  CHECK(cfg["nonrigid"]["epochs"].is_number_integer());
  CHECK(cfg["nonrigid"]["smooth_sigma"].get<double>() == 2.0);
}

TEST_CASE("branch lists are validated element-wise and replace the defaults") {
  json cfg = default_config();
  merge_config(cfg, json::parse(R"({"phantom": {"branches": [{"s": 0.4}]}})"));
  REQUIRE(cfg["phantom"]["branches"].size() == 1);
  CHECK(cfg["phantom"]["branches"][0]["s"].get<double>() == 0.4);
  CHECK(cfg["phantom"]["branches"][0]["elevation_deg"].get<double>() == 60.0);

  CHECK_THROWS_WITH_AS(
      merge_config(cfg, json::parse(R"({"phantom": {"branches": [{"sx": 1}]}})")),
      "unknown config key: phantom.branches[0].sx", ConfigError);
  CHECK_THROWS_AS(merge_config(cfg, json::parse(R"({"phantom": {"branches": [3]}})")),
                  ConfigError);
  CHECK_THROWS_AS(
      merge_config(cfg, json::parse(R"({"evaluate": {"frame_thresholds": ["a"]}})")),
      ConfigError);

  const VesselSpec vs = vessel_from_config(cfg);
  REQUIRE(vs.branches.size() == 1);
  CHECK(vs.branches[0].s == 0.4);
  CHECK(vs.branches[0].elevation_deg == 60.0);
}

TEST_CASE("dotted overrides parse JSON literals and reuse the key validation") {
  json cfg = default_config();
  apply_override(cfg, "nonrigid.epochs=50");
  CHECK(cfg["nonrigid"]["epochs"].get<int>() == 50);
  apply_override(cfg, "rigid.rigid_only=true");
  CHECK(cfg["rigid"]["rigid_only"].get<bool>() == true);
  apply_override(cfg, "phantom.kind=line");  // bare word stays a string
  CHECK(cfg["phantom"]["kind"].get<std::string>() == "line");
  apply_override(cfg, R"(phantom.branches=[{"s": 0.3}])");
  CHECK(cfg["phantom"]["branches"][0]["radius"].get<double>() == 1.0);

  CHECK_THROWS_WITH_AS(apply_override(cfg, "nope=1"), "unknown config key: nope", ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "nonrigid.epochs"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "=5"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "nonrigid..epochs=5"), ConfigError);
}

TEST_CASE("typed config views validate their ranges") {
  json cfg = default_config();
  cfg["grid"]["height"] = 1;
  CHECK_THROWS_AS(grid_from_config(cfg), ConfigError);
  cfg = default_config();
  cfg["phantom"]["kind"] = "zigzag";
  CHECK_THROWS_AS(vessel_from_config(cfg), ConfigError);
  cfg = default_config();
  cfg["phantom"]["seed"] = -3;
  CHECK_THROWS_AS(vessel_from_config(cfg), ConfigError);
  cfg = default_config();
  const OptimizerConfig oc = optimizer_from_config(cfg);
  CHECK(oc.m_long == 30);
  CHECK(oc.epochs == 200);
  CHECK(oc.lr_long == 0.001);
}

TEST_CASE("config files round-trip through load_config unchanged") {
  const fs::path dir = fresh_dir("roundtrip");
  json cfg = default_config();
  apply_override(cfg, "nonrigid.epochs=33");
  apply_override(cfg, "paths.output_dir=" + (dir / "out").string());
  {
    std::ofstream out(dir / "cfg.json");
    out << cfg.dump(2) << "\n";
  }
  const json reloaded = load_config(dir / "cfg.json");
  CHECK(reloaded == cfg);
  CHECK(reloaded.dump(2) == cfg.dump(2));

  CHECK_THROWS_AS(load_config(dir / "missing.json"), ConfigError);
  {
    std::ofstream out(dir / "broken.json");
    out << "{ not json";
  }
  CHECK_THROWS_AS(load_config(dir / "broken.json"), ConfigError);
}

TEST_CASE("phantom bundles carry a manifest and reproduce bit-identically by seed") {
  const fs::path a = fresh_dir("bundle_a");
  const fs::path b = fresh_dir("bundle_b");
  const fs::path c = fresh_dir("bundle_c");

  const json manifest_a = run_phantom_quiet(small_cfg(a));
  REQUIRE(manifest_a.at("artifacts").size() == 6);
  for (const json& e : manifest_a.at("artifacts")) {
    CHECK(fs::exists(a / e.at("file").get<std::string>()));
    CHECK(e.at("bytes").get<std::uint64_t>() > 0);
    CHECK(e.at("fnv1a64").get<std::string>().size() == 16);
    if (e.contains("payload")) CHECK(fs::exists(a / e.at("payload").at("file").get<std::string>()));
  }
  // volumes and pullbacks have raw payloads; the two pure-JSON artifacts do not
  int payloads = 0;
  for (const json& e : manifest_a.at("artifacts")) payloads += e.contains("payload");
  CHECK(payloads == 4);
  CHECK(fs::exists(a / "config_snapshot.json"));

  // same configuration, fresh directory: identical checksums
  const json manifest_b = run_phantom_quiet(small_cfg(b));
  CHECK(manifest_a == manifest_b);

  // a different seed changes at least the pullback bytes
  json cfg_c = small_cfg(c);
  cfg_c["phantom"]["motion"]["seed"] = 7;
  const json manifest_c = run_phantom_quiet(cfg_c);
  CHECK(manifest_c != manifest_a);

  // collisions are refused without force and overwritten with it
  CHECK_THROWS_WITH_AS(run_phantom_quiet(small_cfg(a)),
                       ("output file already exists: " + (a / "lumen_sdf.json").string() +
                        " (use --force)")
                           .c_str(),
                       DataError);
  CHECK(run_phantom_quiet(small_cfg(a), true) == manifest_a);
}

TEST_CASE("invalid branch geometry surfaces as a data error") {
  json cfg = small_cfg(fresh_dir("bundle_bad"));
  cfg["phantom"]["branches"][0]["s"] = 0.56;
  cfg["phantom"]["branches"][1]["s"] = 0.50;  // not strictly increasing
  CHECK_THROWS_AS(run_phantom_quiet(cfg), DataError);

  json cfg2 = small_cfg(fresh_dir("bundle_bad2"));
  cfg2["phantom"]["branches"][0]["length"] = 30.0;  // pokes out of the volume
  CHECK_THROWS_AS(run_phantom_quiet(cfg2), DataError);
}

TEST_CASE("register writes deterministic result, frames, and loss artifacts") {
  const fs::path bundle = fresh_dir("reg_bundle");
  run_phantom_quiet(small_cfg(bundle));

  json cfg = small_cfg(fresh_dir("reg_run1"));
  point_at_bundle(cfg, bundle);
  std::ostringstream log;
  run_register(cfg, log);
  CHECK(log.str().find("crop") != std::string::npos);

  const fs::path run1 = cfg["paths"]["output_dir"].get<std::string>();
  const json result = json::parse(slurp(run1 / "result.json"));
  const json& crop = result.at("crop");
  const int n = crop.at("ct_end").get<int>() - crop.at("ct_start").get<int>();
  CHECK(n == crop.at("oct_end").get<int>() - crop.at("oct_start").get<int>());
  CHECK(n >= 40);
  REQUIRE(result.at("stages").contains("rigid"));
  REQUIRE(result.at("stages").contains("nonrigid"));
  CHECK(result.at("stages").at("rigid").at("R").size() == static_cast<std::size_t>(n));
  CHECK(result.at("stages").at("nonrigid").at("loss_history").size() == 30);
  CHECK(result.at("stages").at("nonrigid").at("params").at("x_s").size() == 7);

  // the refinement never reports a worse loss than its rigid starting point
  const double rigid_loss = result.at("stages").at("nonrigid").at("loss_history")[0].get<double>();
  CHECK(result.at("stages").at("nonrigid").at("final_loss").get<double>() <= rigid_loss);

  const auto frames = read_csv(run1 / "frames.csv");
  CHECK(frames.size() == static_cast<std::size_t>(n) + 1);
  CHECK(frames[0].size() == 13);
  const auto loss = read_csv(run1 / "loss.csv");
  CHECK(loss.size() == 31);

  // rerunning from the snapshot into a fresh directory is bit-identical
  json cfg2 = json::parse(slurp(run1 / "config_snapshot.json"));
  cfg2["paths"]["output_dir"] = fresh_dir("reg_run2").string();
  std::ostringstream log2;
  run_register(cfg2, log2);
  const fs::path run2 = cfg2["paths"]["output_dir"].get<std::string>();
  CHECK(slurp(run1 / "result.json") == slurp(run2 / "result.json"));
  CHECK(slurp(run1 / "frames.csv") == slurp(run2 / "frames.csv"));
  CHECK(slurp(run1 / "loss.csv") == slurp(run2 / "loss.csv"));
}

TEST_CASE("rigid-only runs gate the refinement stage") {
  const fs::path bundle = fresh_dir("ro_bundle");
  run_phantom_quiet(small_cfg(bundle));

  json cfg = small_cfg(fresh_dir("ro_run"));
  point_at_bundle(cfg, bundle);
  cfg["rigid"]["rigid_only"] = true;
  std::ostringstream log;
  run_register(cfg, log);

  const fs::path run = cfg["paths"]["output_dir"].get<std::string>();
  const json result = json::parse(slurp(run / "result.json"));
  CHECK(result.at("stages").contains("rigid"));
  CHECK(!result.at("stages").contains("nonrigid"));
  CHECK(result.contains("rigid_angle"));
  CHECK(result.at("crop").at("ct_end").get<int>() > result.at("crop").at("ct_start").get<int>());
  CHECK(read_csv(run / "loss.csv").size() == 1);  // header only
  CHECK(read_csv(run / "frames.csv").size() > 1);
}

TEST_CASE("register reports missing inputs and stage failures with their category") {
  json cfg = small_cfg(fresh_dir("reg_missing"));
  std::ostringstream log;
  CHECK_THROWS_WITH_AS(run_register(cfg, log), "paths.volume must be set", ConfigError);

  cfg["paths"]["volume"] = "/nonexistent/lumen.json";
  CHECK_THROWS_AS(run_register(cfg, log), ConfigError);

  // a target too short for the overlap floor fails inside LongReg
  const fs::path bundle = fresh_dir("short_bundle");
  json pcfg = small_cfg(bundle);
  pcfg["phantom"]["n_frames"] = 30;
  run_phantom_quiet(pcfg);
  json rcfg = small_cfg(fresh_dir("short_run"));
  point_at_bundle(rcfg, bundle);
  try {
    run_register(rcfg, log);
    FAIL("expected a DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("[stage LongReg]") == 0);
  }
}

TEST_CASE("evaluate scores a ground-truth-equal prediction as all-zero mismatch") {
  const fs::path bundle = fresh_dir("eval_bundle");
  const json cfg = small_cfg(bundle);
  run_phantom_quiet(cfg);

  // regenerate the same phantom to obtain the ground-truth frame chain, and
  // present it as the predicted registration
  const VesselPhantom ph = generate_vessel(vessel_from_config(cfg));
  const DistortedPullback dp = generate_distorted_pullback(
      ph, motion_from_config(cfg), grid_from_config(cfg), cfg["phantom"]["n_frames"].get<int>());
  auto vecs = [](const std::vector<Vec3>& vs) {
    json a = json::array();
    for (const Vec3& v : vs) a.push_back(vec3j(v.x, v.y, v.z));
    return a;
  };
  const json result = {{"stages",
                        {{"rigid",
                          {{"s_global", dp.curves.s},
                           {"R", vecs(dp.gt_frames.R)},
                           {"T", vecs(dp.gt_frames.T)},
                           {"U", vecs(dp.gt_frames.U)},
                           {"V", vecs(dp.gt_frames.V)}}}}}};
  const fs::path run = fresh_dir("eval_zero");
  {
    std::ofstream out(run / "result.json");
    out << result.dump(2) << "\n";
  }

  json ecfg = default_config();
  ecfg["paths"]["ground_truth"] = (bundle / "ground_truth.json").string();
  ecfg["paths"]["result"] = (run / "result.json").string();
  ecfg["paths"]["output_dir"] = (run / "eval").string();
  std::ostringstream log;
  run_evaluate(ecfg, log);

  const auto rows = read_csv(run / "eval" / "landmarks_rigid.csv");
  REQUIRE(rows.size() == 4);  // header + three landmarks
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i][1] == "0");
    CHECK(rows[i][2] == "0");
    CHECK(rows[i][3] == "1");
  }
  const auto summary = read_csv(run / "eval" / "summary.csv");
  REQUIRE(summary.size() == 2);
  CHECK(summary[1][2] == "0");  // frame mean
  CHECK(summary[1][8] == "0");  // angle mean
}

TEST_CASE("evaluate emits monotone curves and side-by-side summaries end to end") {
  const fs::path bundle = fresh_dir("e2e_bundle");
  run_phantom_quiet(small_cfg(bundle));

  json cfg = small_cfg(fresh_dir("e2e_run"));
  point_at_bundle(cfg, bundle);
  std::ostringstream rlog;
  run_register(cfg, rlog);
  const fs::path run = cfg["paths"]["output_dir"].get<std::string>();

  json ecfg = cfg;
  ecfg["paths"]["result"] = (run / "result.json").string();
  ecfg["paths"]["output_dir"] = (run / "eval").string();
  std::ostringstream elog;
  run_evaluate(ecfg, elog);

  const auto curves = read_csv(run / "eval" / "curves_frame.csv");
  REQUIRE(curves.size() == 11);  // header + ten thresholds
  REQUIRE(curves[0] == std::vector<std::string>{"threshold", "rigid", "nonrigid"});
  for (std::size_t col = 1; col <= 2; ++col) {
    double prev = -1.0;
    for (std::size_t i = 1; i < curves.size(); ++i) {
      const double v = std::stod(curves[i][col]);
      CHECK(v >= prev);
      prev = v;
    }
  }
  const auto summary = read_csv(run / "eval" / "summary.csv");
  REQUIRE(summary.size() == 3);
  CHECK(summary[1][0] == "rigid");
  CHECK(summary[2][0] == "nonrigid");
  CHECK(std::stoi(summary[1][1]) == 3);
  CHECK(fs::exists(run / "eval" / "landmarks_nonrigid.csv"));
  CHECK(fs::exists(run / "eval" / "curves_angle.csv"));
  CHECK(elog.str().find("summary.csv") != std::string::npos);
}

TEST_CASE("evaluate reproduces a hand-computed three-landmark summary") {
  const fs::path dir = fresh_dir("eval_toy");

  // ten frames along z, axes aligned with the world
  json frames{{"s_global", json::array()},
              {"R", json::array()},
              {"T", json::array()},
              {"U", json::array()},
              {"V", json::array()}};
  for (int i = 0; i < 10; ++i) {
    frames["s_global"].push_back(0.05 + 0.1 * i);
    frames["R"].push_back(vec3j(0, 0, i));
    frames["T"].push_back(vec3j(0, 0, 1));
    frames["U"].push_back(vec3j(1, 0, 0));
    frames["V"].push_back(vec3j(0, 1, 0));
  }
  const json result = {{"stages", {{"rigid", frames}}}};

  const double d30x = std::cos(30.0 * M_PI / 180.0), d30y = std::sin(30.0 * M_PI / 180.0);
  const double d120x = std::cos(120.0 * M_PI / 180.0), d120y = std::sin(120.0 * M_PI / 180.0);
  const double d350x = std::cos(350.0 * M_PI / 180.0), d350y = std::sin(350.0 * M_PI / 180.0);
  const json gt = {
      {"landmarks3d",
       {{{"id", 1}, {"s", 0.32}, {"position", vec3j(0, 0, 3.2)}, {"direction", vec3j(d30x, d30y, 0)}},
        {{"id", 2}, {"s", 0.52}, {"position", vec3j(0, 0, 5.2)}, {"direction", vec3j(d120x, d120y, 0)}},
        {{"id", 3}, {"s", 0.83}, {"position", vec3j(0, 0, 8.3)}, {"direction", vec3j(d350x, d350y, 0)}}}},
      {"observations",
       {{{"id", 1}, {"frame", 4}, {"azimuth_deg", 50.0}},
        {{"id", 2}, {"frame", 4}, {"azimuth_deg", 100.0}},
        {{"id", 3}, {"frame", 9}, {"azimuth_deg", 10.0}}}},
      {"curves", {{"s", json::array()}, {"theta", json::array()}, {"du", json::array()}, {"dv", json::array()}}}};

  {
    std::ofstream out(dir / "result.json");
    out << result.dump(2) << "\n";
  }
  {
    std::ofstream out(dir / "ground_truth.json");
    out << gt.dump(2) << "\n";
  }

  json ecfg = default_config();
  ecfg["paths"]["ground_truth"] = (dir / "ground_truth.json").string();
  ecfg["paths"]["result"] = (dir / "result.json").string();
  ecfg["paths"]["output_dir"] = (dir / "eval").string();
  std::ostringstream log;
  run_evaluate(ecfg, log);

  // landmark 1 lands in frame 2 (last s below 0.32) at azimuth 30: off by 2
  // frames and 20 degrees; landmark 2 in frame 4 at 120: 0 and 20; landmark 3
  // in frame 7 at 350: 2 and 20
  const auto rows = read_csv(dir / "eval" / "landmarks_rigid.csv");
  REQUIRE(rows.size() == 4);
  CHECK(rows[1][0] == "1");
  CHECK(rows[1][1] == "2");
  CHECK(std::stod(rows[1][2]) == doctest::Approx(20.0).epsilon(1e-9));
  CHECK(rows[2][1] == "0");
  CHECK(std::stod(rows[2][2]) == doctest::Approx(20.0).epsilon(1e-9));
  CHECK(rows[3][1] == "2");
  CHECK(std::stod(rows[3][2]) == doctest::Approx(20.0).epsilon(1e-9));

  const auto summary = read_csv(dir / "eval" / "summary.csv");
  REQUIRE(summary.size() == 2);
  const auto& s = summary[1];
  CHECK(s[0] == "rigid");
  CHECK(std::stoi(s[1]) == 3);
  CHECK(std::stod(s[2]) == doctest::Approx(4.0 / 3.0).epsilon(1e-8));          // frame mean
  CHECK(std::stod(s[3]) == doctest::Approx(std::sqrt(8.0 / 9.0)).epsilon(1e-8));  // population std
  CHECK(std::stod(s[4]) == doctest::Approx(2.0));                              // median
  CHECK(std::stod(s[5]) == doctest::Approx(0.2 * 4.0 / 3.0).epsilon(1e-8));    // mean, mm
  CHECK(std::stoi(s[7]) == 3);                                                 // all gated
  CHECK(std::stod(s[8]) == doctest::Approx(20.0).epsilon(1e-8));               // angle mean
  CHECK(std::stod(s[9]) == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(std::stod(s[10]) == doctest::Approx(20.0).epsilon(1e-8));
}

TEST_CASE("evaluate refuses ground truth without landmarks") {
  const fs::path bundle = fresh_dir("nolm_bundle");
  json cfg = small_cfg(bundle);
  cfg["phantom"]["branches"] = json::array();
  cfg["phantom"]["length"] = 30.0;
  run_phantom_quiet(cfg);

  json ecfg = default_config();
  ecfg["paths"]["ground_truth"] = (bundle / "ground_truth.json").string();
  ecfg["paths"]["result"] = (bundle / "ground_truth.json").string();  // unused before the check
  ecfg["paths"]["output_dir"] = (bundle / "eval").string();
  std::ostringstream log;
  CHECK_THROWS_WITH_AS(run_evaluate(ecfg, log), "ground truth contains no landmarks", DataError);
}

TEST_CASE("the binary maps error categories onto exit codes") {
  const fs::path dir = fresh_dir("exit_codes");

  // usage problems and config errors exit 2
  CHECK(run_cli("").exit_code == 2);
  CHECK(run_cli("register --config /nonexistent.json").exit_code == 2);
  CHECK(run_cli("register").exit_code == 2);                    // paths.volume unset
  CHECK(run_cli("phantom --set nope=1").exit_code == 2);        // unknown key
  CHECK(run_cli("--help").exit_code == 0);

  // config init prints the full default tree
  const CliResult init = run_cli("config init");
  CHECK(init.exit_code == 0);
  CHECK(json::parse(init.output) == default_config());

  const fs::path cfg_file = dir / "cfg.json";
  CHECK(run_cli("config init " + cfg_file.string()).exit_code == 0);
  CHECK(run_cli("config init " + cfg_file.string()).exit_code == 3);  // exists
  CHECK(run_cli("config init --force " + cfg_file.string()).exit_code == 0);
  CHECK(json::parse(slurp(cfg_file)) == default_config());

  // a phantom collision is a data error
  const fs::path bundle = dir / "bundle";
  json pcfg = small_cfg(bundle);
  {
    std::ofstream out(dir / "small.json");
    out << pcfg.dump(2) << "\n";
  }
  CHECK(run_cli("phantom -c " + (dir / "small.json").string()).exit_code == 0);
  CHECK(run_cli("phantom -c " + (dir / "small.json").string()).exit_code == 3);

  // a poisoned target surfaces as a numerical failure (exit 4)
  std::fstream raw(bundle / "pullback_lumen.raw",
                   std::ios::in | std::ios::out | std::ios::binary);
  REQUIRE(raw.good());
  const float nan = std::numeric_limits<float>::quiet_NaN();
  raw.seekp(static_cast<std::streamoff>(sizeof(float) * 24 * 24 * 20));
  raw.write(reinterpret_cast<const char*>(&nan), sizeof nan);
  raw.close();
  const CliResult reg = run_cli("register -c " + (dir / "small.json").string() + " --bundle " +
                                bundle.string() + " -o " + (dir / "run").string());
  CHECK(reg.exit_code == 4);
  CHECK(reg.output.find("[stage NonrigidReg]") != std::string::npos);
}
