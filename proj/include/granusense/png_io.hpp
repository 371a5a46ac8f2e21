// PNG persistence for tactile images, heightmaps and normal maps.
//
// Tactile images are 8-bit RGB. Heightmaps are 16-bit grayscale with the
// mm-per-unit scale recorded in a JSON sidecar next to the PNG. Normal maps
// are 8-bit RGB with the [-1,1] -> [0,255] affine mapping per component.
#pragma once

#include <string>

#include "granusense/image.hpp"

namespace gsn::pngio {

void write_rgb8(const std::string& path, const TactileImage& img);
TactileImage read_rgb8(const std::string& path);

// Heightmap quantization: stored_value = depth_mm / mm_per_unit, clamped to
// [0, 65535]. The sidecar "<path>.json" records mm_per_unit and resolution.
void write_heightmap(const std::string& path, const HeightMap& hm,
                     double mm_per_unit = 3.0 / 65535.0);
HeightMap read_heightmap(const std::string& path);

void write_normalmap(const std::string& path, const NormalMap& nm);

} // namespace gsn::pngio
