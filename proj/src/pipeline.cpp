#include "vcreg/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <unordered_set>
#include <utility>
#include <vector>

#include "vcreg/catheter_geometry.hpp"
#include "vcreg/edt.hpp"
#include "vcreg/errors.hpp"
#include "vcreg/metrics.hpp"
#include "vcreg/rigid.hpp"
#include "vcreg/volume_io.hpp"

namespace vcreg {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// config tree

json branch_defaults() {
  return json{{"s", 0.5},
              {"azimuth_deg", 0.0},
              {"elevation_deg", 60.0},
              {"radius", 1.0},
              {"length", 6.0}};
}

std::string kind_name(const json& v) {
  if (v.is_object()) return "object";
  if (v.is_array()) return "array";
  if (v.is_string()) return "string";
  if (v.is_boolean()) return "boolean";
  if (v.is_number()) return "number";
  return "null";
}

bool integer_valued(const json& v) {
  if (v.is_number_integer() || v.is_number_unsigned()) return true;
  if (!v.is_number_float()) return false;
  const double d = v.get<double>();
  return std::isfinite(d) && d == std::floor(d);
}

void assign_scalar(json& slot, const json& v, const std::string& path) {
  if (slot.is_boolean()) {
    if (!v.is_boolean())
      throw ConfigError(path + ": expected boolean, got " + kind_name(v));
    slot = v;
    return;
  }
  if (slot.is_string()) {
    if (!v.is_string())
      throw ConfigError(path + ": expected string, got " + kind_name(v));
    slot = v;
    return;
  }
  if (!v.is_number())
    throw ConfigError(path + ": expected number, got " + kind_name(v));
  if (slot.is_number_float()) {
    slot = v.get<double>();
    return;
  }
  // integer slot: keep snapshots canonical by storing integers as integers
  if (!integer_valued(v))
    throw ConfigError(path + ": expected an integer, got " + v.dump());
  if (v.is_number_unsigned())
    slot = v.get<std::uint64_t>();
  else if (v.is_number_integer())
    slot = v.get<std::int64_t>();
  else
    slot = static_cast<std::int64_t>(std::llround(v.get<double>()));
}

void assign_number_array(json& slot, const json& v, const std::string& path) {
  if (!v.is_array())
    throw ConfigError(path + ": expected an array, got " + kind_name(v));
  json out = json::array();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number())
      throw ConfigError(path + "[" + std::to_string(i) + "]: expected number, got " +
                        kind_name(v[i]));
    out.push_back(v[i].get<double>());
  }
  slot = std::move(out);
}

void merge_tree(json& base, const json& user, const std::string& prefix);

void assign_branches(json& slot, const json& v, const std::string& path) {
  if (!v.is_array())
    throw ConfigError(path + ": expected an array, got " + kind_name(v));
  json out = json::array();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    if (!v[i].is_object())
      throw ConfigError(p + ": expected an object, got " + kind_name(v[i]));
    json el = branch_defaults();
    merge_tree(el, v[i], p + ".");
    out.push_back(std::move(el));
  }
  slot = std::move(out);
}

void merge_tree(json& base, const json& user, const std::string& prefix) {
  if (!user.is_object()) {
    if (prefix.empty()) throw ConfigError("config root must be an object");
    throw ConfigError(prefix.substr(0, prefix.size() - 1) + ": expected an object, got " +
                      kind_name(user));
  }
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix + key;
    auto it = base.find(key);
    if (it == base.end()) throw ConfigError("unknown config key: " + path);
    json& slot = *it;
    if (slot.is_object()) {
      merge_tree(slot, value, path + ".");
    } else if (slot.is_array()) {
      if (key == "branches")
        assign_branches(slot, value, path);
      else
        assign_number_array(slot, value, path);
    } else {
      assign_scalar(slot, value, path);
    }
  }
}

// ---------------------------------------------------------------------------
// small file helpers

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw DataError("bad JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw DataError("short write to " + path.string());
}

fs::path output_dir(const json& cfg) {
  const std::string dir = cfg.at("paths").at("output_dir").get<std::string>();
  if (dir.empty()) throw ConfigError("paths.output_dir must be set");
  return dir;
}

// Creates the output directory and records the exact configuration; a rerun
// from the snapshot reproduces every artifact byte for byte.
fs::path prepare_output_dir(const json& cfg) {
  const fs::path dir = output_dir(cfg);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
  write_json_file(dir / "config_snapshot.json", cfg);
  return dir;
}

fs::path input_path(const json& cfg, const char* key) {
  const std::string v = cfg.at("paths").at(key).get<std::string>();
  if (v.empty()) throw ConfigError(std::string("paths.") + key + " must be set");
  fs::path p(v);
  if (!fs::exists(p))
    throw ConfigError(std::string("paths.") + key + ": no such file: " + v);
  return p;
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// config -> typed specs

double num(const json& j, const char* k) { return j.at(k).get<double>(); }
int inum(const json& j, const char* k) { return j.at(k).get<int>(); }

std::uint64_t seed_of(const json& j, const std::string& path) {
  const json& v = j.at("seed");
  if (v.is_number_integer() && v.get<std::int64_t>() < 0)
    throw ConfigError(path + ".seed must be non-negative");
  return v.get<std::uint64_t>();
}

json vec3_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

json vecs_json(const std::vector<Vec3>& vs) {
  json a = json::array();
  for (const Vec3& v : vs) a.push_back(vec3_json(v));
  return a;
}

Vec3 vec3_from(const json& a, const std::string& what) {
  if (!a.is_array() || a.size() != 3 || !a[0].is_number() || !a[1].is_number() ||
      !a[2].is_number())
    throw DataError(what + ": expected an [x, y, z] number triple");
  return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

std::vector<Vec3> vecs_from(const json& a, const std::string& what) {
  if (!a.is_array()) throw DataError(what + ": expected an array of [x, y, z] triples");
  std::vector<Vec3> out;
  out.reserve(a.size());
  for (const json& e : a) out.push_back(vec3_from(e, what));
  return out;
}

}  // namespace

json default_config() {
  return json{
      {"paths",
       {{"volume", ""},
        {"wall_volume", ""},
        {"pullback", ""},
        {"wall_pullback", ""},
        {"centerline", ""},
        {"ground_truth", ""},
        {"mask", ""},
        {"result", ""},
        {"output_dir", "out"}}},
      {"grid",
       {{"height", 96}, {"width", 96}, {"in_plane_spacing", 0.08}, {"frame_spacing", 0.2}}},
      {"sdf", {{"tau", 2.0}, {"neg_band", 4.0}}},
      {"rigid", {{"gamma", 30}, {"min_overlap", 40}, {"rigid_only", false}}},
      {"nonrigid",
       {{"m_long", 30},
        {"m_rot", 20},
        {"m_trans", 60},
        {"lr_long", 0.001},
        {"lr_rot", 0.01},
        {"lr_trans", 0.01},
        {"epochs", 200},
        {"beta1", 0.9},
        {"beta2", 0.999},
        {"eps", 1e-8},
        {"max_rel", 0.35},
        {"smooth_sigma", 1.0},
        {"smooth_ksize", 5}}},
      {"phantom",
       {{"kind", "random_smooth"},
        {"length", 110.0},
        {"lumen_radius", 1.6},
        {"taper", 0.25},
        {"ripple_amp", 0.04},
        {"ripple_cycles", 3.0},
        {"wall_thickness", 0.9},
        {"wall_eccentricity", 0.45},
        {"ecc_azimuth_deg", 20.0},
        {"branches",
         {{{"s", 0.34}, {"azimuth_deg", 30.0}, {"elevation_deg", 65.0}, {"radius", 1.1}, {"length", 7.0}},
          {{"s", 0.42}, {"azimuth_deg", 150.0}, {"elevation_deg", 55.0}, {"radius", 0.9}, {"length", 6.0}},
          {{"s", 0.50}, {"azimuth_deg", 255.0}, {"elevation_deg", 70.0}, {"radius", 1.0}, {"length", 7.0}},
          {{"s", 0.58}, {"azimuth_deg", 80.0}, {"elevation_deg", 60.0}, {"radius", 0.8}, {"length", 5.0}},
          {{"s", 0.66}, {"azimuth_deg", 200.0}, {"elevation_deg", 50.0}, {"radius", 0.9}, {"length", 6.0}}}},
        {"voxel_spacing", 0.25},
        {"volume_margin", 10.0},
        {"seed", 1},
        {"n_frames", 256},
        {"motion",
         {{"stretch_amp", 0.15},
          {"twist_amp_deg", 30.0},
          {"transverse_frac", 0.2},
          {"smoothness", 8},
          {"seed", 1}}}}},
      {"evaluate",
       {{"gate_frames", 6.0},
        {"mm_per_frame", 0.2},
        // stored as doubles so a merged config serializes like the default
        {"frame_thresholds", {1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0}},
        {"angle_thresholds",
         {5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0, 55.0, 60.0}}}},
  };
}

void merge_config(json& base, const json& user) { merge_tree(base, user, ""); }

json load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json user;
  try {
    in >> user;
  } catch (const json::parse_error& e) {
    throw ConfigError("bad JSON in config " + path.string() + ": " + e.what());
  }
  json cfg = default_config();
  merge_config(cfg, user);
  return cfg;
}

void apply_override(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set expects dotted.key=value, got: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;  // unquoted words stay strings

  json patch = std::move(value);
  std::size_t end = key.size();
  for (;;) {
    const auto dot = key.rfind('.', end == 0 ? 0 : end - 1);
    const std::size_t start = (dot == std::string::npos) ? 0 : dot + 1;
    const std::string part = key.substr(start, end - start);
    if (part.empty()) throw ConfigError("--set key has an empty path segment: " + key);
    patch = json{{part, std::move(patch)}};
    if (dot == std::string::npos) break;
    end = dot;
  }
  merge_config(cfg, patch);
}

SamplingGridSpec grid_from_config(const json& cfg) {
  const json& g = cfg.at("grid");
  SamplingGridSpec spec;
  spec.height = inum(g, "height");
  spec.width = inum(g, "width");
  spec.in_plane_spacing = num(g, "in_plane_spacing");
  spec.frame_spacing = num(g, "frame_spacing");
  if (spec.height < 2 || spec.width < 2)
    throw ConfigError("grid.height and grid.width must be at least 2");
  if (spec.in_plane_spacing <= 0 || spec.frame_spacing <= 0)
    throw ConfigError("grid spacings must be positive");
  return spec;
}

VesselSpec vessel_from_config(const json& cfg) {
  const json& p = cfg.at("phantom");
  VesselSpec vs;
  const std::string kind = p.at("kind").get<std::string>();
  if (kind == "line")
    vs.kind = VesselSpec::Kind::line;
  else if (kind == "arc")
    vs.kind = VesselSpec::Kind::arc;
  else if (kind == "helix")
    vs.kind = VesselSpec::Kind::helix;
  else if (kind == "random_smooth")
    vs.kind = VesselSpec::Kind::random_smooth;
  else
    throw ConfigError("phantom.kind must be line, arc, helix, or random_smooth, got: " + kind);
  vs.length = num(p, "length");
  vs.lumen_radius = num(p, "lumen_radius");
  vs.taper = num(p, "taper");
  vs.ripple_amp = num(p, "ripple_amp");
  vs.ripple_cycles = num(p, "ripple_cycles");
  vs.wall_thickness = num(p, "wall_thickness");
  vs.wall_eccentricity = num(p, "wall_eccentricity");
  vs.ecc_azimuth_deg = num(p, "ecc_azimuth_deg");
  for (const json& b : p.at("branches")) {
    BranchSpec bs;
    bs.s = num(b, "s");
    bs.azimuth_deg = num(b, "azimuth_deg");
    bs.elevation_deg = num(b, "elevation_deg");
    bs.radius = num(b, "radius");
    bs.length = num(b, "length");
    vs.branches.push_back(bs);
  }
  vs.voxel_spacing = num(p, "voxel_spacing");
  vs.volume_margin = num(p, "volume_margin");
  vs.seed = seed_of(p, "phantom");
  return vs;
}

MotionSpec motion_from_config(const json& cfg) {
  const json& m = cfg.at("phantom").at("motion");
  MotionSpec ms;
  ms.stretch_amp = num(m, "stretch_amp");
  ms.twist_amp_deg = num(m, "twist_amp_deg");
  ms.transverse_frac = num(m, "transverse_frac");
  ms.smoothness = inum(m, "smoothness");
  ms.seed = seed_of(m, "phantom.motion");
  return ms;
}

OptimizerConfig optimizer_from_config(const json& cfg) {
  const json& n = cfg.at("nonrigid");
  OptimizerConfig oc;
  oc.m_long = inum(n, "m_long");
  oc.m_rot = inum(n, "m_rot");
  oc.m_trans = inum(n, "m_trans");
  oc.lr_long = num(n, "lr_long");
  oc.lr_rot = num(n, "lr_rot");
  oc.lr_trans = num(n, "lr_trans");
  oc.epochs = inum(n, "epochs");
  oc.beta1 = num(n, "beta1");
  oc.beta2 = num(n, "beta2");
  oc.eps = num(n, "eps");
  oc.max_rel = num(n, "max_rel");
  oc.smooth_sigma = num(n, "smooth_sigma");
  oc.smooth_ksize = inum(n, "smooth_ksize");
  return oc;
}

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::uint64_t h = 1469598103934665603ull;
  char buf[16384];
  for (;;) {
    in.read(buf, sizeof buf);
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i)
      h = (h ^ static_cast<unsigned char>(buf[i])) * 1099511628211ull;
    if (got < static_cast<std::streamsize>(sizeof buf)) break;
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

// ---------------------------------------------------------------------------
// phantom bundle

namespace {

json artifact_entry(const fs::path& file) {
  json e{{"file", file.filename().string()},
         {"bytes", static_cast<std::uint64_t>(fs::file_size(file))},
         {"fnv1a64", file_digest(file)}};
  fs::path raw = file;
  raw.replace_extension(".raw");
  if (fs::exists(raw))
    e["payload"] = json{{"file", raw.filename().string()},
                        {"bytes", static_cast<std::uint64_t>(fs::file_size(raw))},
                        {"fnv1a64", file_digest(raw)}};
  return e;
}

constexpr const char* kBundleFiles[] = {"lumen_sdf.json",     "wall_sdf.json",
                                        "pullback_lumen.json", "pullback_wall.json",
                                        "centerline.json",     "ground_truth.json"};

}  // namespace

void run_phantom(const json& cfg, bool force, std::ostream& log) {
  const fs::path dir = output_dir(cfg);
  if (!force) {
    for (const char* name : kBundleFiles) {
      fs::path p = dir / name;
      for (int pass = 0; pass < 2; ++pass, p.replace_extension(".raw"))
        if (fs::exists(p))
          throw DataError("output file already exists: " + p.string() + " (use --force)");
    }
    if (fs::exists(dir / "manifest.json"))
      throw DataError("output file already exists: " + (dir / "manifest.json").string() +
                      " (use --force)");
  }

  const VesselSpec vs = vessel_from_config(cfg);
  const MotionSpec ms = motion_from_config(cfg);
  const SamplingGridSpec spec = grid_from_config(cfg);
  const int n_frames = inum(cfg.at("phantom"), "n_frames");
  if (n_frames < 2) throw ConfigError("phantom.n_frames must be at least 2");

  const VesselPhantom ph = generate_vessel(vs);
  const DistortedPullback dp = generate_distorted_pullback(ph, ms, spec, n_frames);

  prepare_output_dir(cfg);
  io::save_volume(dir / "lumen_sdf.json", ph.lumen_sdf, SdfConvention{ph.tau});
  io::save_volume(dir / "wall_sdf.json", ph.wall_sdf, SdfConvention{ph.tau});
  io::save_pullback(dir / "pullback_lumen.json", dp.lumen);
  io::save_pullback(dir / "pullback_wall.json", dp.wall);
  io::save_centerline_points(dir / "centerline.json", ph.centerline_points);

  json marks = json::array();
  for (const Landmark3D& m : ph.landmarks)
    marks.push_back({{"id", m.id},
                     {"s", m.s},
                     {"position", vec3_json(m.position)},
                     {"direction", vec3_json(m.direction)}});
  json obs = json::array();
  for (const LandmarkObs& o : dp.gt_landmarks)
    obs.push_back({{"id", o.id}, {"frame", o.frame}, {"azimuth_deg", o.azimuth_deg}});
  write_json_file(dir / "ground_truth.json",
                  json{{"landmarks3d", std::move(marks)},
                       {"observations", std::move(obs)},
                       {"curves",
                        {{"s", dp.curves.s},
                         {"theta", dp.curves.theta},
                         {"du", dp.curves.du},
                         {"dv", dp.curves.dv}}}});

  json manifest{{"artifacts", json::array()}};
  for (const char* name : kBundleFiles)
    manifest["artifacts"].push_back(artifact_entry(dir / name));
  write_json_file(dir / "manifest.json", manifest);
  log << manifest.dump(2) << "\n";
}

void run_sdf(const json& cfg, std::ostream& log) {
  const fs::path in = input_path(cfg, "mask");
  const json& sc = cfg.at("sdf");
  const double tau = num(sc, "tau"), band = num(sc, "neg_band");
  if (tau <= 0 || band <= 0) throw ConfigError("sdf.tau and sdf.neg_band must be positive");

  const Volume3D mask = io::load_volume(in);
  Volume3D sdf = distance_transform(mask, SdfConvention{tau});
  const float lo = static_cast<float>(-band), hi = static_cast<float>(tau);
  for (float& v : sdf.data) v = std::min(std::max(v, lo), hi);

  const fs::path dir = prepare_output_dir(cfg);
  io::save_volume(dir / "sdf.json", sdf, SdfConvention{tau});
  log << "wrote " << (dir / "sdf.json").string() << "\n";
}

// ---------------------------------------------------------------------------
// registration

namespace {

// Module errors keep their category (and thus exit code) but gain the
// pipeline stage that raised them.
template <class Fn>
decltype(auto) run_stage(const char* name, Fn&& fn) {
  const auto tag = [name](const char* what) {
    return "[stage " + std::string(name) + "] " + what;
  };
  try {
    return std::forward<Fn>(fn)();
  } catch (const ConfigError& e) {
    throw ConfigError(tag(e.what()));
  } catch (const DataError& e) {
    throw DataError(tag(e.what()));
  } catch (const NumericalError& e) {
    throw NumericalError(tag(e.what()));
  }
}

PullbackGrid crop_pullback(const PullbackGrid& g, int start, int end) {
  PullbackGrid out;
  out.n_frames = end - start;
  out.height = g.height;
  out.width = g.width;
  out.in_plane_spacing = g.in_plane_spacing;
  out.frame_spacing = g.frame_spacing;
  const float* base = g.data.data() + g.frame_pixels() * start;
  out.data.assign(base, base + g.frame_pixels() * out.n_frames);
  out.valid.assign(g.valid.begin() + start, g.valid.begin() + end);
  return out;
}

FrameSet slice_frames(const FrameSet& f, int start, int end) {
  FrameSet out;
  out.R.assign(f.R.begin() + start, f.R.begin() + end);
  out.T.assign(f.T.begin() + start, f.T.begin() + end);
  out.U.assign(f.U.begin() + start, f.U.begin() + end);
  out.V.assign(f.V.begin() + start, f.V.begin() + end);
  out.s.assign(f.s.begin() + start, f.s.begin() + end);
  return out;
}

json frames_json(const FrameSet& f, const std::vector<double>& s_global) {
  return json{{"s_global", s_global},
              {"R", vecs_json(f.R)},
              {"T", vecs_json(f.T)},
              {"U", vecs_json(f.U)},
              {"V", vecs_json(f.V)}};
}

FrameSet frames_from_json(const json& st, const std::string& stage) {
  FrameSet f;
  f.R = vecs_from(st.at("R"), stage + ".R");
  f.T = vecs_from(st.at("T"), stage + ".T");
  f.U = vecs_from(st.at("U"), stage + ".U");
  f.V = vecs_from(st.at("V"), stage + ".V");
  f.s = st.at("s_global").get<std::vector<double>>();
  const std::size_t n = f.R.size();
  if (f.T.size() != n || f.U.size() != n || f.V.size() != n || f.s.size() != n)
    throw DataError(stage + ": frame arrays disagree in length");
  if (n == 0) throw DataError(stage + ": no frames");
  return f;
}

void write_frames_csv(const fs::path& path, const FrameSet& f) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "frame,Rx,Ry,Rz,Tx,Ty,Tz,Ux,Uy,Uz,Vx,Vy,Vz\n";
  for (int i = 0; i < f.size(); ++i) {
    out << i;
    for (const Vec3* v : {&f.R[i], &f.T[i], &f.U[i], &f.V[i]})
      out << ',' << fmt17(v->x) << ',' << fmt17(v->y) << ',' << fmt17(v->z);
    out << '\n';
  }
}

void write_loss_csv(const fs::path& path, const std::vector<double>& history) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "iteration,loss\n";
  for (std::size_t i = 0; i < history.size(); ++i)
    out << i << ',' << fmt17(history[i]) << '\n';
}

}  // namespace

void run_register(const json& cfg, std::ostream& log) {
  const fs::path vol_p = input_path(cfg, "volume");
  const fs::path wvol_p = input_path(cfg, "wall_volume");
  const fs::path pb_p = input_path(cfg, "pullback");
  const fs::path wpb_p = input_path(cfg, "wall_pullback");
  const fs::path cl_p = input_path(cfg, "centerline");
  const json& rc = cfg.at("rigid");
  const int gamma = inum(rc, "gamma");
  const int min_overlap = inum(rc, "min_overlap");
  const bool rigid_only = rc.at("rigid_only").get<bool>();
  if (gamma < 2) throw ConfigError("rigid.gamma must be at least 2");
  if (min_overlap < 1) throw ConfigError("rigid.min_overlap must be positive");

  const fs::path dir = prepare_output_dir(cfg);

  Volume3D lumen_vol, wall_vol;
  PullbackGrid tgt_lumen, tgt_wall;
  const Centerline cl = run_stage("LoadInputs", [&] {
    lumen_vol = io::load_volume(vol_p);
    wall_vol = io::load_volume(wvol_p);
    tgt_lumen = io::load_pullback(pb_p);
    tgt_wall = io::load_pullback(wpb_p);
    if (tgt_wall.n_frames != tgt_lumen.n_frames || tgt_wall.height != tgt_lumen.height ||
        tgt_wall.width != tgt_lumen.width)
      throw DataError("lumen and wall pullbacks disagree in shape");
    return fit_centerline(io::load_centerline_points(cl_p));
  });

  const SamplingGridSpec spec = SamplingGridSpec::like(tgt_lumen);
  const int n_ct = static_cast<int>(std::floor(cl.total_length() / spec.frame_spacing)) + 1;
  if (n_ct < 2)
    throw DataError("centerline is shorter than one pullback frame spacing");

  const FrameSet f0 = run_stage("InitFrames", [&] { return init_frames(cl, n_ct); });

  PullbackGrid ct_lumen, ct_wall;
  run_stage("VirtualCatheter", [&] {
    ct_lumen = virtual_catheter_sample(f0, lumen_vol, spec);
    ct_wall = virtual_catheter_sample(f0, wall_vol, spec);
  });

  const CropIndices crop = run_stage("LongReg", [&] {
    return long_reg(area_vector(ct_lumen), area_vector(tgt_lumen), min_overlap);
  });

  const double angle = run_stage("RotReg", [&] {
    const ThicknessMatrix h_ct =
        thickness_matrix(crop_pullback(ct_wall, crop.ct_start, crop.ct_end), gamma);
    const ThicknessMatrix h_oct =
        thickness_matrix(crop_pullback(tgt_wall, crop.oct_start, crop.oct_end), gamma);
    return rot_reg(h_ct, h_oct);
  });

  const double denom = n_ct - 1.0;
  const double s_lo = crop.ct_start / denom;
  const double s_hi = (crop.ct_end - 1) / denom;

  FrameSet rigid_frames = phi_rot(slice_frames(f0, crop.ct_start, crop.ct_end),
                                  std::vector<double>(crop.length(), angle));

  json result{{"crop",
               {{"ct_start", crop.ct_start},
                {"ct_end", crop.ct_end},
                {"oct_start", crop.oct_start},
                {"oct_end", crop.oct_end}}},
              {"rigid_angle", angle},
              {"n_ct_frames", n_ct},
              {"centerline_span", json::array({s_lo, s_hi})},
              {"stages", {{"rigid", frames_json(rigid_frames, rigid_frames.s)}}}};

  log << "crop: ct [" << crop.ct_start << ", " << crop.ct_end << ") <-> target ["
      << crop.oct_start << ", " << crop.oct_end << "), rigid angle " << angle << " rad\n";

  FrameSet final_frames = std::move(rigid_frames);
  std::vector<double> loss_history;

  if (!rigid_only) {
    const RegistrationResult rr = run_stage("NonrigidReg", [&] {
      NonrigidProblem prob(cl.restrict(s_lo, s_hi), lumen_vol,
                           crop_pullback(tgt_lumen, crop.oct_start, crop.oct_end), angle,
                           optimizer_from_config(cfg));
      RegistrationResult r = optimize(prob);
      r.crop = crop;
      return r;
    });

    std::vector<double> s_global(rr.frames.s.size());
    for (std::size_t i = 0; i < s_global.size(); ++i)
      s_global[i] = s_lo + rr.frames.s[i] * (s_hi - s_lo);

    json st = frames_json(rr.frames, s_global);
    st["params"] = {{"x_s", rr.params.x_s},
                    {"x_theta", rr.params.x_theta},
                    {"p_u", rr.params.p_u},
                    {"p_v", rr.params.p_v}};
    st["final_loss"] = rr.final_loss;
    st["best_iteration"] = rr.best_iteration;
    st["loss_history"] = rr.loss_history;
    st["s_monotone"] = rr.s_monotone;
    result["stages"]["nonrigid"] = std::move(st);

    log << "nonrigid: loss " << (rr.loss_history.empty() ? 0.0 : rr.loss_history.front())
        << " -> " << rr.final_loss << " (best iteration " << rr.best_iteration << ")\n";

    final_frames = rr.frames;
    loss_history = rr.loss_history;
  }

  write_json_file(dir / "result.json", result);
  write_frames_csv(dir / "frames.csv", final_frames);
  write_loss_csv(dir / "loss.csv", loss_history);
  log << "wrote " << (dir / "result.json").string() << "\n";
}

// ---------------------------------------------------------------------------
// evaluation

void run_evaluate(const json& cfg, std::ostream& log) {
  const fs::path gt_p = input_path(cfg, "ground_truth");
  const fs::path res_p = input_path(cfg, "result");
  const json& ec = cfg.at("evaluate");
  const double gate = num(ec, "gate_frames");
  const double mm_per_frame = num(ec, "mm_per_frame");
  const auto frame_thr = ec.at("frame_thresholds").get<std::vector<double>>();
  const auto angle_thr = ec.at("angle_thresholds").get<std::vector<double>>();

  std::vector<Landmark3D> marks;
  LandmarkSet gt_obs;
  try {
    const json gt = read_json_file(gt_p);
    for (const json& m : gt.at("landmarks3d"))
      marks.push_back({m.at("id").get<int>(), m.at("s").get<double>(),
                       vec3_from(m.at("position"), "landmark position"),
                       vec3_from(m.at("direction"), "landmark direction")});
    for (const json& o : gt.at("observations"))
      gt_obs.push_back(
          {o.at("id").get<int>(), o.at("frame").get<int>(), o.at("azimuth_deg").get<double>()});
  } catch (const json::exception& e) {
    throw DataError("malformed ground truth: " + std::string(e.what()));
  }
  if (marks.empty() || gt_obs.empty())
    throw DataError("ground truth contains no landmarks");

  json stages;
  int oct_start = 0;  // predicted frames index the cropped chain; ground
                      // truth indexes the full target pullback
  try {
    const json res = read_json_file(res_p);
    stages = res.at("stages");
    if (res.contains("crop")) oct_start = res.at("crop").at("oct_start").get<int>();
  } catch (const json::exception& e) {
    throw DataError("malformed result: " + std::string(e.what()));
  }

  std::unordered_set<int> gt_ids;
  for (const LandmarkObs& o : gt_obs) gt_ids.insert(o.id);

  const fs::path dir = prepare_output_dir(cfg);

  std::vector<std::pair<std::string, MismatchReport>> reports;
  std::vector<CurveSeries> frame_curves, angle_curves;
  for (const char* stage : {"rigid", "nonrigid"}) {
    if (!stages.contains(stage)) continue;
    const FrameSet f = frames_from_json(stages.at(stage), stage);
    LandmarkSet pred = observe_landmarks(marks, f, f.s);
    for (LandmarkObs& o : pred) o.frame += oct_start;
    // score only ids the ground truth observed; a landmark can fall outside
    // the predicted window but inside the truth's, and vice versa
    std::erase_if(pred, [&](const LandmarkObs& o) { return !gt_ids.count(o.id); });
    MismatchReport rep = evaluate_landmarks(pred, gt_obs, gate, mm_per_frame);

    std::ofstream rows(dir / ("landmarks_" + std::string(stage) + ".csv"));
    if (!rows) throw DataError("cannot write landmark rows for stage " + std::string(stage));
    write_rows_csv(rows, rep.rows);

    frame_curves.push_back({stage, mismatch_curve(frame_values(rep.rows), frame_thr)});
    const std::vector<double> gated = gated_angle_values(rep.rows);
    if (gated.empty())
      log << "stage " << stage << ": no landmark passed the rotational gate\n";
    else
      angle_curves.push_back({stage, mismatch_curve(gated, angle_thr)});
    reports.emplace_back(stage, std::move(rep));
  }
  if (reports.empty()) throw DataError("result contains no stages to evaluate");

  {
    std::ofstream out(dir / "curves_frame.csv");
    if (!out) throw DataError("cannot write curves_frame.csv");
    write_curves_csv(out, frame_thr, frame_curves);
  }
  if (!angle_curves.empty()) {
    std::ofstream out(dir / "curves_angle.csv");
    if (!out) throw DataError("cannot write curves_angle.csv");
    write_curves_csv(out, angle_thr, angle_curves);
  }
  {
    std::ofstream out(dir / "summary.csv");
    if (!out) throw DataError("cannot write summary.csv");
    write_summary_csv(out, reports);
  }
  write_summary_csv(log, reports);
  log << "wrote " << (dir / "summary.csv").string() << "\n";
}

}  // namespace vcreg
