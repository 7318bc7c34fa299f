#pragma once

#include "vcreg/volume.hpp"

namespace vcreg {

// Exact signed Euclidean distance transform of a binary mask, positive
// inside. The zero level sits on the mask boundary: distances are measured to
// the midpoints of faces between voxels of opposite class, so a voxel
// adjacent to the interface reads half its spacing. Anisotropic spacing is
// respected. Throws DataError on a non-binary or single-class mask.
Volume3D distance_transform(const Volume3D& mask, const SdfConvention& convention = {});

}  // namespace vcreg
