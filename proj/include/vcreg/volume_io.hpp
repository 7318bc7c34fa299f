#pragma once

#include <filesystem>

#include "vcreg/volume.hpp"

// On-disk format: a JSON sidecar describing geometry next to a raw
// little-endian float32 payload in x-fastest order. The sidecar's
// "data_file" entry names the payload relative to the sidecar.

namespace vcreg::io {

void save_volume(const std::filesystem::path& json_path, const Volume3D& vol,
                 const SdfConvention& convention = {});
Volume3D load_volume(const std::filesystem::path& json_path,
                     SdfConvention* convention = nullptr);

void save_pullback(const std::filesystem::path& json_path, const PullbackGrid& grid);
PullbackGrid load_pullback(const std::filesystem::path& json_path);

// Centerline files are a bare JSON array of [x, y, z] mm triples.
void save_centerline_points(const std::filesystem::path& json_path,
                            const std::vector<Vec3>& points);
std::vector<Vec3> load_centerline_points(const std::filesystem::path& json_path);

}  // namespace vcreg::io
