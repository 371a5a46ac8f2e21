#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "granusense/recon.hpp"
#include "granusense/rng.hpp"
#include "granusense/tactile.hpp"

using namespace gsn;
using namespace gsn::recon;
using namespace gsn::tactile;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Chord-based angle between unit vectors; stable near zero, unlike acos.
double angle_deg(double ax, double ay, double az, double bx, double by, double bz) {
    const double dx = ax - bx, dy = ay - by, dz = az - bz;
    const double chord = std::sqrt(dx * dx + dy * dy + dz * dz);
    return 2.0 * std::asin(std::min(1.0, 0.5 * chord)) * 180.0 / kPi;
}

TactileImage background_image(const LightingModel& lm, int w = 64, int h = 64) {
    HeightMap flat(w, h, 0.25);
    return shade(normals_from_heightmap(flat), lm);
}

// Normal map whose gradient field is exactly (p, q) per pixel.
NormalMap normals_from_gradient(const std::vector<double>& p, const std::vector<double>& q,
                                int w, int h, double res) {
    NormalMap nm(w, h, res);
    for (std::size_t i = 0; i < nm.size(); ++i) {
        const double inv = 1.0 / std::sqrt(1.0 + p[i] * p[i] + q[i] * q[i]);
        nm.nx[i] = -p[i] * inv;
        nm.ny[i] = -q[i] * inv;
        nm.nz[i] = inv;
    }
    return nm;
}

double boundary_median(const HeightMap& hm) {
    std::vector<double> b;
    for (int x = 0; x < hm.width; ++x) {
        b.push_back(hm.at(x, 0));
        b.push_back(hm.at(x, hm.height - 1));
    }
    for (int y = 1; y + 1 < hm.height; ++y) {
        b.push_back(hm.at(0, y));
        b.push_back(hm.at(hm.width - 1, y));
    }
    std::sort(b.begin(), b.end());
    const std::size_t n = b.size();
    return n % 2 == 1 ? b[n / 2] : 0.5 * (b[n / 2 - 1] + b[n / 2]);
}

std::size_t largest_component(const ContactMask& m) {
    std::vector<std::uint8_t> seen(m.mask.size(), 0);
    std::size_t best = 0;
    std::vector<std::size_t> stack;
    for (std::size_t s = 0; s < m.mask.size(); ++s) {
        if (!m.mask[s] || seen[s]) continue;
        std::size_t size = 0;
        stack.push_back(s);
        seen[s] = 1;
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            ++size;
            const int x = static_cast<int>(i % static_cast<std::size_t>(m.width));
            const int y = static_cast<int>(i / static_cast<std::size_t>(m.width));
            const int nx[4] = {x - 1, x + 1, x, x};
            const int ny[4] = {y, y, y - 1, y + 1};
            for (int k = 0; k < 4; ++k) {
                if (nx[k] < 0 || nx[k] >= m.width || ny[k] < 0 || ny[k] >= m.height) continue;
                const std::size_t j =
                    static_cast<std::size_t>(ny[k]) * m.width + static_cast<std::size_t>(nx[k]);
                if (m.mask[j] && !seen[j]) {
                    seen[j] = 1;
                    stack.push_back(j);
                }
            }
        }
        best = std::max(best, size);
    }
    return best;
}

} // namespace

TEST_CASE("background image recovers flat normals with full quality") {
    const auto lm = LightingModel::default_model();
    const auto bg = background_image(lm);
    const auto rec = normals_from_image(bg, lm, bg);
    for (std::size_t i = 0; i < rec.normals.size(); ++i) {
        CHECK(angle_deg(rec.normals.nx[i], rec.normals.ny[i], rec.normals.nz[i], 0.0, 0.0,
                        1.0) < 1e-9);
        CHECK(rec.quality[i] == 1);
    }
}

TEST_CASE("shade/invert round trip recovers clamp-free normals exactly") {
    const auto lm = LightingModel::default_model();
    Rng rng(8);
    NormalMap nm(32, 32, 0.25);
    for (std::size_t i = 0; i < nm.size(); ++i) {
        const double p = rng.uniform(-0.4, 0.4);
        const double q = rng.uniform(-0.4, 0.4);
        const double inv = 1.0 / std::sqrt(1.0 + p * p + q * q);
        nm.nx[i] = -p * inv;
        nm.ny[i] = -q * inv;
        nm.nz[i] = inv;
    }
    const auto img = shade(nm, lm);
    const auto rec = normals_from_image(img, lm, background_image(lm, 32, 32));
    for (std::size_t i = 0; i < nm.size(); ++i) {
        CHECK(angle_deg(rec.normals.nx[i], rec.normals.ny[i], rec.normals.nz[i], nm.nx[i],
                        nm.ny[i], nm.nz[i]) < 1e-6);
    }
}

TEST_CASE("saturated pixels are flagged untrusted") {
    const auto lm = LightingModel::default_model();
    const auto bg = background_image(lm);
    auto img = bg;
    const std::size_t victim = img.index(10, 12);
    img.channels[1][victim] = 1.0;
    const auto rec = normals_from_image(img, lm, bg);
    CHECK(rec.quality[victim] == 0);
    CHECK(rec.quality[victim + 1] == 1);
}

TEST_CASE("shadowed pixels get the flat normal and a cleared flag") {
    const auto lm = LightingModel::default_model();
    const auto bg = background_image(lm);
    auto img = bg;
    const std::size_t victim = img.index(3, 3);
    for (std::size_t c = 0; c < 3; ++c) img.channels[c][victim] = lm.ambient[c];
    const auto rec = normals_from_image(img, lm, bg);
    CHECK(rec.quality[victim] == 0);
    CHECK(rec.normals.nx[victim] == 0.0);
    CHECK(rec.normals.ny[victim] == 0.0);
    CHECK(rec.normals.nz[victim] == 1.0);
}

TEST_CASE("a singular lighting matrix is a configuration error") {
    auto lm = LightingModel::default_model();
    lm.direction[1] = lm.direction[0];
    lm.direction[2] = lm.direction[0];
    const auto bg = background_image(LightingModel::default_model(), 8, 8);
    CHECK_THROWS_AS(normals_from_image(bg, lm, bg), std::invalid_argument);
}

TEST_CASE("integrating flat normals yields a zero heightmap") {
    NormalMap nm(32, 24, 0.25);
    const auto hm = integrate_normals(nm);
    for (double d : hm.depths) CHECK(std::abs(d) < 1e-12);
}

TEST_CASE("integrating plane normals recovers the plane") {
    const double a = 0.31, b = -0.17;
    const int w = 48, h = 40;
    const double res = 0.25;
    std::vector<double> p(static_cast<std::size_t>(w) * h, a);
    std::vector<double> q(p.size(), b);
    const auto nm = normals_from_gradient(p, q, w, h, res);
    const auto hm = integrate_normals(nm);

    HeightMap truth(w, h, res);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) truth.at(x, y) = a * x * res + b * y * res;
    const double shift = boundary_median(truth);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            CHECK(std::abs(hm.at(x, y) - (truth.at(x, y) - shift)) < 1e-6);
}

TEST_CASE("press/normals/integrate round trip stays within 5% of press depth") {
    ShapeSpec s;
    s.kind = ShapeKind::Hexagon;
    s.circumscribed_diameter = 10.0;
    s.pose = {8.0, 8.0, 25.0};
    s.press_depth = 1.0;
    const auto hm = press_shape(s, {});
    const auto rec = integrate_normals(normals_from_heightmap(hm));
    const double shift = boundary_median(hm);
    double rms = 0.0;
    for (std::size_t i = 0; i < hm.size(); ++i) {
        const double d = (hm.depths[i] - shift) - rec.depths[i];
        rms += d * d;
    }
    rms = std::sqrt(rms / static_cast<double>(hm.size()));
    CHECK(rms < 0.05 * s.press_depth);
}

TEST_CASE("integration is linear in the gradient field") {
    Rng rng(12);
    const int w = 32, h = 32;
    std::vector<double> p(static_cast<std::size_t>(w) * h), q(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = rng.uniform(-0.3, 0.3);
        q[i] = rng.uniform(-0.3, 0.3);
    }
    const auto base = integrate_normals(normals_from_gradient(p, q, w, h, 0.25));
    for (double alpha : {2.5, -1.0}) {
        auto ps = p, qs = q;
        for (std::size_t i = 0; i < p.size(); ++i) {
            ps[i] *= alpha;
            qs[i] *= alpha;
        }
        const auto scaled = integrate_normals(normals_from_gradient(ps, qs, w, h, 0.25));
        for (std::size_t i = 0; i < base.size(); ++i)
            CHECK(std::abs(scaled.depths[i] - alpha * base.depths[i]) < 1e-9);
    }
}

TEST_CASE("integration is gauge fixed: constant height offsets vanish") {
    ShapeSpec s;
    s.kind = ShapeKind::Circle;
    s.circumscribed_diameter = 9.0;
    s.pose = {8.0, 8.0, 0.0};
    s.press_depth = 0.8;
    auto hm = press_shape(s, {});
    const auto rec1 = integrate_normals(normals_from_heightmap(hm));
    for (auto& d : hm.depths) d += 0.37; // constant offset: same surface shape
    const auto rec2 = integrate_normals(normals_from_heightmap(hm));
    for (std::size_t i = 0; i < rec1.size(); ++i)
        CHECK(rec1.depths[i] == doctest::Approx(rec2.depths[i]).epsilon(1e-12));
}

TEST_CASE("identical images produce an empty contact mask") {
    const auto lm = LightingModel::default_model();
    const auto bg = background_image(lm);
    const auto m = contact_mask(bg, bg, 0.02);
    CHECK(m.count() == 0);
}

TEST_CASE("contact mask area approximates the pressed footprint") {
    const auto lm = LightingModel::default_model();
    const auto bg = background_image(lm);
    ShapeSpec s;
    s.kind = ShapeKind::Square;
    s.circumscribed_diameter = 12.0;
    s.pose = {8.0, 8.0, 17.0};
    s.press_depth = 1.0;
    const auto img = render(s, nullptr, sim::ClearingAction::None, lm, 0, {});
    const auto m = contact_mask(img, bg, 0.05);
    const double area = static_cast<double>(m.count()) * 0.25 * 0.25;
    const double analytic = analytic_footprint_area_mm2(s);
    CHECK(std::abs(area - analytic) / analytic < 0.10);
}

TEST_CASE("raising the threshold never adds mask pixels") {
    const auto lm = LightingModel::default_model();
    const auto bg = background_image(lm);
    ShapeSpec s;
    s.kind = ShapeKind::Triangle;
    s.circumscribed_diameter = 11.0;
    s.pose = {8.2, 7.8, 40.0};
    s.press_depth = 1.1;
    const auto img = render(s, nullptr, sim::ClearingAction::None, lm, 1, {});
    ContactMask prev = contact_mask(img, bg, 0.005);
    for (double th : {0.01, 0.02, 0.04, 0.08, 0.16}) {
        const ContactMask next = contact_mask(img, bg, th);
        for (std::size_t i = 0; i < next.mask.size(); ++i)
            if (next.mask[i]) CHECK(prev.mask[i]);
        prev = next;
    }
}

TEST_CASE("loose rice clutter is distinguishable from object contact") {
    const auto lm = LightingModel::default_model();
    const auto bg = background_image(lm);
    HeightMap flat(64, 64, 0.25);
    const auto cluttered =
        tactile::add_loose_grains(flat, sim::MediumSpec::rice(), 2, 51);
    const auto img = shade(normals_from_heightmap(cluttered), lm);
    const auto m = contact_mask(img, bg, 0.05);
    REQUIRE(m.count() > 0);

    // The smallest object footprint the generator produces: a triangle with an
    // 8.5 mm circumscribed diameter.
    ShapeSpec smallest;
    smallest.kind = ShapeKind::Triangle;
    smallest.circumscribed_diameter = 8.5;
    const double min_area_px =
        analytic_footprint_area_mm2(smallest) / (0.25 * 0.25);
    CHECK(static_cast<double>(largest_component(m)) < min_area_px);
}
