#include "vcreg/volume_io.hpp"

#include <fstream>

#include <json.hpp>

#include "vcreg/errors.hpp"

namespace vcreg::io {
namespace {

using nlohmann::json;

json read_json(const std::filesystem::path& path) {
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

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

void write_payload(const std::filesystem::path& path, const std::vector<float>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!out) throw DataError("short write to " + path.string());
}

std::vector<float> read_payload(const std::filesystem::path& path, std::size_t count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open payload " + path.string());
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != count * sizeof(float))
    throw DataError("payload " + path.string() + " holds " + std::to_string(bytes) +
                    " bytes, expected " + std::to_string(count * sizeof(float)));
  in.seekg(0);
  std::vector<float> data(count);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw DataError("short read from " + path.string());
  return data;
}

std::filesystem::path payload_path_for(const std::filesystem::path& json_path) {
  std::filesystem::path p = json_path;
  p.replace_extension(".raw");
  return p;
}

void require_dtype(const json& j, const std::filesystem::path& path) {
  if (j.value("dtype", "") != "f32le")
    throw DataError(path.string() + ": unsupported dtype, expected f32le");
}

}  // namespace

void save_volume(const std::filesystem::path& json_path, const Volume3D& vol,
                 const SdfConvention& convention) {
  vol.validate();
  const auto payload = payload_path_for(json_path);
  json j = {
      {"dims", {vol.dims[0], vol.dims[1], vol.dims[2]}},
      {"spacing", {vol.spacing[0], vol.spacing[1], vol.spacing[2]}},
      {"origin", {vol.origin.x, vol.origin.y, vol.origin.z}},
      {"convention", {{"sign", "positive-inside"}, {"truncation_mm", convention.tau}}},
      {"dtype", "f32le"},
      {"data_file", payload.filename().string()},
  };
  write_json(json_path, j);
  write_payload(payload, vol.data);
}

Volume3D load_volume(const std::filesystem::path& json_path, SdfConvention* convention) {
  const json j = read_json(json_path);
  Volume3D v;
  try {
    for (int a = 0; a < 3; ++a) {
      v.dims[a] = j.at("dims").at(a).get<int>();
      v.spacing[a] = j.at("spacing").at(a).get<double>();
    }
    v.origin = {j.at("origin").at(0).get<double>(), j.at("origin").at(1).get<double>(),
                j.at("origin").at(2).get<double>()};
    require_dtype(j, json_path);
    if (convention != nullptr) {
      *convention = SdfConvention{};
      if (j.contains("convention"))
        convention->tau = j["convention"].value("truncation_mm", convention->tau);
    }
    const auto payload = json_path.parent_path() / j.at("data_file").get<std::string>();
    v.data = read_payload(payload, static_cast<std::size_t>(v.dims[0]) * v.dims[1] * v.dims[2]);
  } catch (const json::exception& e) {
    throw DataError("bad volume sidecar " + json_path.string() + ": " + e.what());
  }
  v.validate();
  return v;
}

void save_pullback(const std::filesystem::path& json_path, const PullbackGrid& grid) {
  grid.validate();
  const auto payload = payload_path_for(json_path);
  json j = {
      {"n_frames", grid.n_frames},
      {"frame_shape", {grid.height, grid.width}},
      {"in_plane_spacing", grid.in_plane_spacing},
      {"frame_spacing", grid.frame_spacing},
      {"valid_mask", json::array()},
      {"dtype", "f32le"},
      {"data_file", payload.filename().string()},
  };
  for (auto v : grid.valid) j["valid_mask"].push_back(v != 0);
  write_json(json_path, j);
  write_payload(payload, grid.data);
}

PullbackGrid load_pullback(const std::filesystem::path& json_path) {
  const json j = read_json(json_path);
  PullbackGrid g;
  try {
    g.n_frames = j.at("n_frames").get<int>();
    g.height = j.at("frame_shape").at(0).get<int>();
    g.width = j.at("frame_shape").at(1).get<int>();
    g.in_plane_spacing = j.at("in_plane_spacing").get<double>();
    g.frame_spacing = j.at("frame_spacing").get<double>();
    require_dtype(j, json_path);
    g.valid.clear();
    for (const auto& b : j.at("valid_mask")) g.valid.push_back(b.get<bool>() ? 1 : 0);
    const auto payload = json_path.parent_path() / j.at("data_file").get<std::string>();
    g.data = read_payload(payload,
                          g.frame_pixels() * static_cast<std::size_t>(g.n_frames));
  } catch (const json::exception& e) {
    throw DataError("bad pullback sidecar " + json_path.string() + ": " + e.what());
  }
  g.validate();
  return g;
}

void save_centerline_points(const std::filesystem::path& json_path,
                            const std::vector<Vec3>& points) {
  json j = json::array();
  for (const auto& p : points) j.push_back({p.x, p.y, p.z});
  write_json(json_path, j);
}

std::vector<Vec3> load_centerline_points(const std::filesystem::path& json_path) {
  const json j = read_json(json_path);
  std::vector<Vec3> pts;
  try {
    for (const auto& row : j)
      pts.push_back({row.at(0).get<double>(), row.at(1).get<double>(),
                     row.at(2).get<double>()});
  } catch (const json::exception& e) {
    throw DataError("bad centerline file " + json_path.string() + ": " + e.what());
  }
  return pts;
}

}  // namespace vcreg::io
