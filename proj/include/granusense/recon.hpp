// Inverse sensing: per-pixel surface normal recovery from a tactile image
// given the lighting model, normal-field integration into a heightmap, and
// contact-mask extraction by difference imaging.
#pragma once

#include <cstdint>
#include <vector>

#include "granusense/image.hpp"
#include "granusense/tactile.hpp"

namespace gsn::recon {

struct ContactMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> mask;

    bool at(int x, int y) const { return mask[static_cast<std::size_t>(y) * width + x] != 0; }
    std::size_t count() const;
};

struct NormalRecovery {
    NormalMap normals;
    // 1 = trusted pixel; 0 = degenerate (shadowed) or saturated response.
    std::vector<std::uint8_t> quality;
};

// Solves the per-pixel linear Lambertian system for the scaled normal and
// normalizes. Pixels with all channels at or below ambient get the flat
// normal (0,0,1) and a cleared quality flag; saturated pixels keep their
// solve but are flagged untrusted.
NormalRecovery normals_from_image(const TactileImage& img,
                                  const tactile::LightingModel& lighting,
                                  const TactileImage& background);

// Least-squares integration of the gradient field p = -nx/nz, q = -ny/nz via
// the cosine-transform Poisson solver on the even-extended domain. The result
// is shifted so the boundary median height is zero.
HeightMap integrate_normals(const NormalMap& nm);

// True where the channel-max absolute difference from background exceeds the
// threshold, then one pass of 3x3 majority smoothing.
ContactMask contact_mask(const TactileImage& img, const TactileImage& background,
                         double threshold);

} // namespace gsn::recon
