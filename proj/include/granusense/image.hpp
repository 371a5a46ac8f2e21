// Grid containers shared by the tactile forward model and the reconstruction
// path. All grids are row-major with pixel (x, y) = column x, row y, and carry
// the physical pixel pitch in millimetres.
#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace gsn {

// Gel indentation field. depths are in millimetres; 0 = undeformed gel,
// positive values are indentation toward the camera-facing gel surface.
struct HeightMap {
    int width = 0;
    int height = 0;
    double resolution = 0.25; // mm per pixel
    std::vector<double> depths;

    HeightMap() = default;
    HeightMap(int w, int h, double res)
        : width(w), height(h), resolution(res),
          depths(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0.0) {}

    double& at(int x, int y) { return depths[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return depths[static_cast<std::size_t>(y) * width + x]; }
    std::size_t size() const { return depths.size(); }
};

// Per-pixel unit surface normals, nz > 0 everywhere.
struct NormalMap {
    int width = 0;
    int height = 0;
    double resolution = 0.25; // mm per pixel, inherited from the source grid
    std::vector<double> nx, ny, nz;

    NormalMap() = default;
    NormalMap(int w, int h, double res)
        : width(w), height(h), resolution(res),
          nx(static_cast<std::size_t>(w) * h, 0.0),
          ny(static_cast<std::size_t>(w) * h, 0.0),
          nz(static_cast<std::size_t>(w) * h, 1.0) {}

    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
    std::size_t size() const { return nx.size(); }
};

// Rendered three-channel sensor image, channel values in [0, 1].
struct TactileImage {
    int width = 0;
    int height = 0;
    double resolution = 0.25; // mm per pixel
    std::array<std::vector<double>, 3> channels; // R, G, B planes

    TactileImage() = default;
    TactileImage(int w, int h, double res) : width(w), height(h), resolution(res) {
        for (auto& c : channels) c.assign(static_cast<std::size_t>(w) * h, 0.0);
    }

    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

    bool same_shape(const TactileImage& o) const {
        return width == o.width && height == o.height;
    }
};

inline void require_same_shape(const TactileImage& a, const TactileImage& b,
                               const char* what) {
    if (!a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": image dimensions differ");
}

} // namespace gsn
