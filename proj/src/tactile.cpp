#include "granusense/tactile.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "granusense/rng.hpp"

namespace gsn::tactile {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kSubsamples = 4; // per axis, 16 samples per pixel

// Grains scattered per mm^2 of boundary band in Sticks mode.
constexpr double kStickGrainDensityPerMm2 = 1.2;

int polygon_sides(ShapeKind k) {
    switch (k) {
    case ShapeKind::Triangle: return 3;
    case ShapeKind::Square: return 4;
    case ShapeKind::Hexagon: return 6;
    case ShapeKind::Circle: return 0;
    }
    return 0;
}

// Vertex layout: triangle points up, square axis-aligned at rotation 0.
double base_vertex_angle_deg(ShapeKind k) {
    switch (k) {
    case ShapeKind::Triangle: return 90.0;
    case ShapeKind::Square: return 45.0;
    default: return 0.0;
    }
}

struct Polygon {
    std::vector<double> vx, vy; // CCW
};

Polygon make_polygon(const ShapeSpec& shape) {
    Polygon poly;
    const int n = polygon_sides(shape.kind);
    const double r = shape.circumscribed_diameter * 0.5;
    const double base = base_vertex_angle_deg(shape.kind) + shape.pose.rotation_deg;
    for (int i = 0; i < n; ++i) {
        const double a = (base + 360.0 * i / n) * kPi / 180.0;
        poly.vx.push_back(shape.pose.x + r * std::cos(a));
        poly.vy.push_back(shape.pose.y + r * std::sin(a));
    }
    return poly;
}

bool inside_polygon(const Polygon& poly, double x, double y) {
    const std::size_t n = poly.vx.size();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = (i + 1) % n;
        const double ex = poly.vx[j] - poly.vx[i];
        const double ey = poly.vy[j] - poly.vy[i];
        if (ex * (y - poly.vy[i]) - ey * (x - poly.vx[i]) < 0.0) return false;
    }
    return true;
}

void gaussian_blur_inplace(std::vector<double>& grid, int w, int h, double sigma_px) {
    const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma_px)));
    std::vector<double> kernel(static_cast<std::size_t>(radius) * 2 + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * (i / sigma_px) * (i / sigma_px));
        kernel[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    for (auto& v : kernel) v /= sum;

    std::vector<double> tmp(grid.size(), 0.0);
    // horizontal pass, zero padded
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                const int xx = x + k;
                if (xx < 0 || xx >= w) continue;
                acc += grid[static_cast<std::size_t>(y) * w + xx] *
                       kernel[static_cast<std::size_t>(k + radius)];
            }
            tmp[static_cast<std::size_t>(y) * w + x] = acc;
        }
    }
    // vertical pass
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                const int yy = y + k;
                if (yy < 0 || yy >= h) continue;
                acc += tmp[static_cast<std::size_t>(yy) * w + x] *
                       kernel[static_cast<std::size_t>(k + radius)];
            }
            grid[static_cast<std::size_t>(y) * w + x] = acc;
        }
    }
}

// Binary object footprint recovered from a height map: pixels at or above
// half the maximum indentation.
std::vector<std::uint8_t> footprint_mask_from_depths(const HeightMap& hm, double max_d) {
    std::vector<std::uint8_t> mask(hm.size(), 0);
    const double thr = 0.5 * max_d;
    for (std::size_t i = 0; i < hm.size(); ++i) mask[i] = hm.depths[i] >= thr ? 1 : 0;
    return mask;
}

// Pixels whose neighborhood of the given radius contains both footprint and
// background: the contact boundary band.
std::vector<std::size_t> boundary_band_pixels(const std::vector<std::uint8_t>& mask,
                                              int w, int h, int radius_px) {
    std::vector<std::size_t> band;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            bool saw_in = false, saw_out = false;
            for (int dy = -radius_px; dy <= radius_px && !(saw_in && saw_out); ++dy) {
                for (int dx = -radius_px; dx <= radius_px; ++dx) {
                    if (dx * dx + dy * dy > radius_px * radius_px) continue;
                    const int xx = x + dx, yy = y + dy;
                    if (xx < 0 || xx >= w || yy < 0 || yy >= h) continue;
                    if (mask[static_cast<std::size_t>(yy) * w + xx]) saw_in = true;
                    else saw_out = true;
                    if (saw_in && saw_out) break;
                }
            }
            if (saw_in && saw_out) band.push_back(static_cast<std::size_t>(y) * w + x);
        }
    }
    return band;
}

// Additive spherical-cap bump centred at (cx, cy) mm.
void add_cap(HeightMap& hm, double cx, double cy, double radius_mm, double height_mm) {
    const double res = hm.resolution;
    const int x0 = std::max(0, static_cast<int>(std::floor((cx - radius_mm) / res - 0.5)));
    const int x1 = std::min(hm.width - 1, static_cast<int>(std::ceil((cx + radius_mm) / res)));
    const int y0 = std::max(0, static_cast<int>(std::floor((cy - radius_mm) / res - 0.5)));
    const int y1 = std::min(hm.height - 1, static_cast<int>(std::ceil((cy + radius_mm) / res)));
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double px = (x + 0.5) * res - cx;
            const double py = (y + 0.5) * res - cy;
            const double s = 1.0 - (px * px + py * py) / (radius_mm * radius_mm);
            if (s > 0.0) hm.at(x, y) += height_mm * std::sqrt(s);
        }
    }
}

// Elongated grain dome; overwrites the imprint underneath (the grain blocks
// the object from reaching the gel).
void overwrite_ellipsoid(HeightMap& hm, double cx, double cy, double a_mm, double b_mm,
                         double height_mm, double theta_rad,
                         std::vector<std::uint8_t>* covered) {
    const double res = hm.resolution;
    const double reach = std::max(a_mm, b_mm);
    const int x0 = std::max(0, static_cast<int>(std::floor((cx - reach) / res - 0.5)));
    const int x1 = std::min(hm.width - 1, static_cast<int>(std::ceil((cx + reach) / res)));
    const int y0 = std::max(0, static_cast<int>(std::floor((cy - reach) / res - 0.5)));
    const int y1 = std::min(hm.height - 1, static_cast<int>(std::ceil((cy + reach) / res)));
    const double ct = std::cos(theta_rad), st = std::sin(theta_rad);
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double px = (x + 0.5) * res - cx;
            const double py = (y + 0.5) * res - cy;
            const double u = ct * px + st * py;
            const double v = -st * px + ct * py;
            const double s = 1.0 - (u * u) / (a_mm * a_mm) - (v * v) / (b_mm * b_mm);
            if (s > 0.0) {
                hm.at(x, y) = height_mm * std::sqrt(s);
                if (covered) (*covered)[static_cast<std::size_t>(y) * hm.width + x] = 1;
            }
        }
    }
}

} // namespace

void ShapeSpec::validate() const {
    if (!(circumscribed_diameter > 0.0))
        throw std::domain_error("shape: circumscribed_diameter must be > 0");
    if (press_depth < 0.0 || press_depth > kGelThicknessMm)
        throw std::domain_error("shape: press_depth must be in [0, gel thickness]");
}

std::vector<double> footprint_coverage(const ShapeSpec& shape, const GridSpec& grid) {
    shape.validate();
    const double res = grid.resolution;
    std::vector<double> cov(static_cast<std::size_t>(grid.width) * grid.height, 0.0);

    const double r = shape.circumscribed_diameter * 0.5;
    const double field_w = grid.width * res;
    const double field_h = grid.height * res;

    if (shape.kind == ShapeKind::Circle) {
        if (shape.pose.x - r < 0.0 || shape.pose.x + r > field_w ||
            shape.pose.y - r < 0.0 || shape.pose.y + r > field_h)
            throw std::domain_error("shape footprint exceeds the sensing grid");
        const double r2 = r * r;
        for (int y = 0; y < grid.height; ++y) {
            for (int x = 0; x < grid.width; ++x) {
                int hits = 0;
                for (int sy = 0; sy < kSubsamples; ++sy) {
                    for (int sx = 0; sx < kSubsamples; ++sx) {
                        const double px = (x + (sx + 0.5) / kSubsamples) * res - shape.pose.x;
                        const double py = (y + (sy + 0.5) / kSubsamples) * res - shape.pose.y;
                        if (px * px + py * py <= r2) ++hits;
                    }
                }
                cov[static_cast<std::size_t>(y) * grid.width + x] =
                    hits / static_cast<double>(kSubsamples * kSubsamples);
            }
        }
        return cov;
    }

    const Polygon poly = make_polygon(shape);
    for (std::size_t i = 0; i < poly.vx.size(); ++i) {
        if (poly.vx[i] < 0.0 || poly.vx[i] > field_w || poly.vy[i] < 0.0 || poly.vy[i] > field_h)
            throw std::domain_error("shape footprint exceeds the sensing grid");
    }
    for (int y = 0; y < grid.height; ++y) {
        for (int x = 0; x < grid.width; ++x) {
            int hits = 0;
            for (int sy = 0; sy < kSubsamples; ++sy) {
                for (int sx = 0; sx < kSubsamples; ++sx) {
                    const double px = (x + (sx + 0.5) / kSubsamples) * res;
                    const double py = (y + (sy + 0.5) / kSubsamples) * res;
                    if (inside_polygon(poly, px, py)) ++hits;
                }
            }
            cov[static_cast<std::size_t>(y) * grid.width + x] =
                hits / static_cast<double>(kSubsamples * kSubsamples);
        }
    }
    return cov;
}

double analytic_footprint_area_mm2(const ShapeSpec& shape) {
    const double r = shape.circumscribed_diameter * 0.5;
    const int n = polygon_sides(shape.kind);
    if (n == 0) return kPi * r * r;
    return 0.5 * n * r * r * std::sin(2.0 * kPi / n);
}

HeightMap press_shape(const ShapeSpec& shape, const GridSpec& grid) {
    shape.validate();
    HeightMap hm(grid.width, grid.height, grid.resolution);
    if (shape.press_depth == 0.0) {
        footprint_coverage(shape, grid); // still validates footprint placement
        return hm;
    }
    std::vector<double> field = footprint_coverage(shape, grid);
    gaussian_blur_inplace(field, grid.width, grid.height, kFalloffSigmaMm / grid.resolution);
    for (std::size_t i = 0; i < field.size(); ++i)
        hm.depths[i] = shape.press_depth * field[i];
    return hm;
}

HeightMap add_grains(const HeightMap& hm, const sim::MediumSpec& medium,
                     sim::ClearingAction action, std::uint64_t seed) {
    medium.validate();
    HeightMap out = hm;
    if (medium.mode == sim::InteractionMode::Slips) return out;

    const double max_d = *std::max_element(hm.depths.begin(), hm.depths.end());
    if (max_d <= 0.0) return out; // nothing pressed, nothing to distort

    const double grain_mm = medium.grain_diameter * 1000.0;
    const auto mask = footprint_mask_from_depths(hm, max_d);

    if (medium.mode == sim::InteractionMode::Sticks) {
        // Band of one grain diameter on either side of the contact boundary.
        const int band_px = std::max(1, static_cast<int>(std::round(grain_mm / hm.resolution)));
        const auto band = boundary_band_pixels(mask, hm.width, hm.height, band_px);
        if (band.empty()) return out;

        Rng rng(derive_seed(seed, 0x57A11D));
        const double band_area = static_cast<double>(band.size()) * hm.resolution * hm.resolution;
        const int count = rng.poisson(kStickGrainDensityPerMm2 * band_area);
        const double radius = grain_mm * 0.5;
        for (int i = 0; i < count; ++i) {
            const std::size_t pick = band[rng.below(band.size())];
            const double cx = (static_cast<double>(pick % hm.width) + rng.uniform()) * hm.resolution;
            const double cy = (static_cast<double>(pick / hm.width) + rng.uniform()) * hm.resolution;
            add_cap(out, cx, cy, radius, radius * rng.uniform(0.7, 1.0));
        }
        // Overlapping caps must not exceed one grain of relief above the press.
        const double cap = max_d + radius;
        for (auto& d : out.depths) d = std::min(d, cap);
        return out;
    }

    // Blocks: elongated grains overwrite the imprint until the drawn
    // occlusion fraction of the footprint is covered.
    const double frac = sim::occlusion_fraction(medium, action, seed);
    std::vector<std::size_t> footprint;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) footprint.push_back(i);
    if (footprint.empty() || frac <= 0.0) return out;

    const auto target = static_cast<std::size_t>(frac * static_cast<double>(footprint.size()));
    std::vector<std::uint8_t> covered(hm.size(), 0);
    Rng rng(derive_seed(seed, 0x99A17));
    const double a = medium.grain_length * 1000.0 * 0.5;
    const double b = grain_mm * 0.5;
    std::size_t covered_count = 0;
    for (int grains = 0; covered_count < target && grains < 400; ++grains) {
        const std::size_t pick = footprint[rng.below(footprint.size())];
        const double cx = (static_cast<double>(pick % hm.width) + rng.uniform()) * hm.resolution;
        const double cy = (static_cast<double>(pick / hm.width) + rng.uniform()) * hm.resolution;
        const double h = b * rng.uniform(0.8, 1.0);
        const double theta = rng.uniform(0.0, kPi);
        overwrite_ellipsoid(out, cx, cy, a, b, h, theta, &covered);
        covered_count = 0;
        for (std::size_t i : footprint) covered_count += covered[i];
    }
    return out;
}

HeightMap add_loose_grains(const HeightMap& hm, const sim::MediumSpec& medium,
                           int count, std::uint64_t seed) {
    medium.validate();
    HeightMap out = hm;
    Rng rng(derive_seed(seed, 0xC1077E2));
    const double grain_mm = medium.grain_diameter * 1000.0;
    const double len_mm = medium.grain_length * 1000.0;
    const double field_w = hm.width * hm.resolution;
    const double field_h = hm.height * hm.resolution;
    for (int i = 0; i < count; ++i) {
        const double cx = rng.uniform(0.0, field_w);
        const double cy = rng.uniform(0.0, field_h);
        const double h = 0.5 * grain_mm * rng.uniform(0.3, 0.8);
        if (len_mm > grain_mm) {
            HeightMap dome(hm.width, hm.height, hm.resolution);
            overwrite_ellipsoid(dome, cx, cy, len_mm * 0.5, grain_mm * 0.5, h,
                                rng.uniform(0.0, kPi), nullptr);
            for (std::size_t p = 0; p < out.size(); ++p)
                out.depths[p] = std::max(out.depths[p], dome.depths[p]);
        } else {
            HeightMap dome(hm.width, hm.height, hm.resolution);
            add_cap(dome, cx, cy, grain_mm * 0.5, h);
            for (std::size_t p = 0; p < out.size(); ++p)
                out.depths[p] = std::max(out.depths[p], dome.depths[p]);
        }
    }
    return out;
}

NormalMap normals_from_heightmap(const HeightMap& hm) {
    if (hm.width < 3 || hm.height < 3)
        throw std::domain_error("normals_from_heightmap: grid must be at least 3x3");
    NormalMap nm(hm.width, hm.height, hm.resolution);
    const double res = hm.resolution;
    for (int y = 0; y < hm.height; ++y) {
        for (int x = 0; x < hm.width; ++x) {
            double sx, sy;
            if (x == 0) sx = (hm.at(1, y) - hm.at(0, y)) / res;
            else if (x == hm.width - 1) sx = (hm.at(x, y) - hm.at(x - 1, y)) / res;
            else sx = (hm.at(x + 1, y) - hm.at(x - 1, y)) / (2.0 * res);
            if (y == 0) sy = (hm.at(x, 1) - hm.at(x, 0)) / res;
            else if (y == hm.height - 1) sy = (hm.at(x, y) - hm.at(x, y - 1)) / res;
            else sy = (hm.at(x, y + 1) - hm.at(x, y - 1)) / (2.0 * res);

            const double inv = 1.0 / std::sqrt(sx * sx + sy * sy + 1.0);
            const std::size_t i = nm.index(x, y);
            nm.nx[i] = -sx * inv;
            nm.ny[i] = -sy * inv;
            nm.nz[i] = inv;
        }
    }
    return nm;
}

// ---------------------------------------------------------------------------
// Lighting
// ---------------------------------------------------------------------------

void LightingModel::validate() const {
    for (int c = 0; c < 3; ++c) {
        const auto& d = direction[static_cast<std::size_t>(c)];
        const double norm = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        if (std::abs(norm - 1.0) > 1e-6)
            throw std::invalid_argument("lighting: directions must be unit vectors");
        if (!(intensity[static_cast<std::size_t>(c)] > 0.0))
            throw std::invalid_argument("lighting: intensities must be > 0");
        if (ambient[static_cast<std::size_t>(c)] < 0.0)
            throw std::invalid_argument("lighting: ambient must be >= 0");
    }
    if (condition_number() >= 100.0)
        throw std::invalid_argument("lighting: direction triad is ill-conditioned");
}

double LightingModel::condition_number() const {
    // Eigenvalues of L^T L via Jacobi sweeps; cond2(L) = sqrt(lmax/lmin).
    double a[3][3] = {};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                a[i][j] += direction[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] *
                           direction[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];

    for (int sweep = 0; sweep < 32; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < 3; ++p)
            for (int q = p + 1; q < 3; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-24) break;
        for (int p = 0; p < 3; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                if (std::abs(a[p][q]) < 1e-18) continue;
                const double theta = 0.5 * std::atan2(2.0 * a[p][q], a[q][q] - a[p][p]);
                const double c = std::cos(theta), s = std::sin(theta);
                for (int k = 0; k < 3; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (int k = 0; k < 3; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    const double l1 = a[0][0], l2 = a[1][1], l3 = a[2][2];
    const double lmax = std::max({l1, l2, l3});
    const double lmin = std::min({l1, l2, l3});
    if (lmin <= 0.0) return 1e300;
    return std::sqrt(lmax / lmin);
}

LightingModel LightingModel::default_model() {
    LightingModel lm;
    const double el = 45.0 * kPi / 180.0;
    const double azimuths[3] = {0.0, 120.0, 240.0};
    for (int c = 0; c < 3; ++c) {
        const double az = azimuths[c] * kPi / 180.0;
        lm.direction[static_cast<std::size_t>(c)] = {std::cos(az) * std::cos(el),
                                                     std::sin(az) * std::cos(el),
                                                     std::sin(el)};
        lm.intensity[static_cast<std::size_t>(c)] = 0.55;
        lm.ambient[static_cast<std::size_t>(c)] = 0.15;
    }
    return lm;
}

LightingModel load_lighting(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open lighting file " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    LightingModel lm;
    const auto& lights = j.at("lights");
    if (lights.size() != 3)
        throw std::invalid_argument("lighting: expected exactly 3 channel lights");
    for (std::size_t c = 0; c < 3; ++c) {
        const auto& l = lights[c];
        const auto& d = l.at("direction");
        lm.direction[c] = {d.at(0).get<double>(), d.at(1).get<double>(), d.at(2).get<double>()};
        lm.intensity[c] = l.at("intensity").get<double>();
        lm.ambient[c] = l.at("ambient").get<double>();
    }
    lm.validate();
    return lm;
}

void save_lighting(const std::string& path, const LightingModel& lm) {
    nlohmann::json lights = nlohmann::json::array();
    const char* names[3] = {"red", "green", "blue"};
    for (std::size_t c = 0; c < 3; ++c) {
        lights.push_back({{"channel", names[c]},
                          {"direction", {lm.direction[c][0], lm.direction[c][1], lm.direction[c][2]}},
                          {"intensity", lm.intensity[c]},
                          {"ambient", lm.ambient[c]}});
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write lighting file " + path);
    out << nlohmann::json{{"lights", lights}}.dump(2) << "\n";
}

TactileImage shade(const NormalMap& nm, const LightingModel& lighting) {
    lighting.validate();
    TactileImage img(nm.width, nm.height, nm.resolution);
    for (std::size_t c = 0; c < 3; ++c) {
        const auto& l = lighting.direction[c];
        const double inten = lighting.intensity[c];
        const double amb = lighting.ambient[c];
        auto& plane = img.channels[c];
        for (std::size_t i = 0; i < nm.size(); ++i) {
            const double lambert = nm.nx[i] * l[0] + nm.ny[i] * l[1] + nm.nz[i] * l[2];
            plane[i] = std::clamp(amb + inten * std::max(0.0, lambert), 0.0, 1.0);
        }
    }
    return img;
}

TactileImage render(const ShapeSpec& shape, const sim::MediumSpec* medium,
                    sim::ClearingAction action, const LightingModel& lighting,
                    std::uint64_t seed, const GridSpec& grid) {
    HeightMap hm = press_shape(shape, grid);
    if (medium != nullptr) hm = add_grains(hm, *medium, action, seed);
    return shade(normals_from_heightmap(hm), lighting);
}

const char* shape_name(ShapeKind k) {
    switch (k) {
    case ShapeKind::Triangle: return "triangle";
    case ShapeKind::Square: return "square";
    case ShapeKind::Hexagon: return "hexagon";
    case ShapeKind::Circle: return "circle";
    }
    return "circle";
}

ShapeKind parse_shape(const std::string& name) {
    if (name == "triangle") return ShapeKind::Triangle;
    if (name == "square") return ShapeKind::Square;
    if (name == "hexagon") return ShapeKind::Hexagon;
    if (name == "circle") return ShapeKind::Circle;
    throw std::invalid_argument("unknown shape '" + name + "'");
}

} // namespace gsn::tactile
