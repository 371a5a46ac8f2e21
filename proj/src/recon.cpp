#include "granusense/recon.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gsn::recon {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kSaturationEps = 1e-9;
// Half an 8-bit quantization step, so decoded PNG pixels classify the same
// way as the in-memory doubles they were written from.
constexpr double kDegenerateEps = 0.5 / 255.0;

// Solve the 3x3 system A x = y by Gaussian elimination with partial pivoting.
// Returns false when A is numerically singular.
bool solve3(const double A[3][3], const double y[3], double x[3]) {
    double m[3][4];
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) m[r][c] = A[r][c];
        m[r][3] = y[r];
    }
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
        if (std::abs(m[piv][col]) < 1e-14) return false;
        if (piv != col)
            for (int c = 0; c < 4; ++c) std::swap(m[piv][c], m[col][c]);
        for (int r = 0; r < 3; ++r) {
            if (r == col) continue;
            const double f = m[r][col] / m[col][col];
            for (int c = col; c < 4; ++c) m[r][c] -= f * m[col][c];
        }
    }
    for (int r = 0; r < 3; ++r) x[r] = m[r][3] / m[r][r];
    return true;
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid) - 1, v.end());
    return 0.5 * (v[mid - 1] + hi);
}

// DCT-II along rows/columns by direct cosine sums. Grids here are 64x64, so
// the O(N^2) transform is both exact enough and fast enough.
struct CosTable {
    int n;
    std::vector<double> c; // c[k*n + i] = cos(pi*k*(i+0.5)/n)
    explicit CosTable(int n_) : n(n_), c(static_cast<std::size_t>(n_) * n_) {
        for (int k = 0; k < n; ++k)
            for (int i = 0; i < n; ++i)
                c[static_cast<std::size_t>(k) * n + i] =
                    std::cos(kPi * k * (i + 0.5) / n);
    }
};

// forward: F[k] = sum_i f[i] cos(pi k (i+1/2)/N)
// inverse: f[i] = F[0]/N + (2/N) sum_{k>=1} F[k] cos(pi k (i+1/2)/N)
void dct2_rows(std::vector<double>& g, int w, int h, const CosTable& t, bool inverse) {
    std::vector<double> row(static_cast<std::size_t>(w));
    for (int y = 0; y < h; ++y) {
        double* base = g.data() + static_cast<std::size_t>(y) * w;
        if (!inverse) {
            for (int k = 0; k < w; ++k) {
                double acc = 0.0;
                const double* ck = t.c.data() + static_cast<std::size_t>(k) * w;
                for (int i = 0; i < w; ++i) acc += base[i] * ck[i];
                row[static_cast<std::size_t>(k)] = acc;
            }
        } else {
            for (int i = 0; i < w; ++i) {
                double acc = base[0] / w;
                for (int k = 1; k < w; ++k)
                    acc += (2.0 / w) * base[k] * t.c[static_cast<std::size_t>(k) * w + i];
                row[static_cast<std::size_t>(i)] = acc;
            }
        }
        std::copy(row.begin(), row.end(), base);
    }
}

void transpose(std::vector<double>& g, int& w, int& h) {
    std::vector<double> out(g.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out[static_cast<std::size_t>(x) * h + y] = g[static_cast<std::size_t>(y) * w + x];
    g.swap(out);
    std::swap(w, h);
}

} // namespace

std::size_t ContactMask::count() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

NormalRecovery normals_from_image(const TactileImage& img,
                                  const tactile::LightingModel& lighting,
                                  const TactileImage& background) {
    lighting.validate();
    require_same_shape(img, background, "normals_from_image");

    // Per-channel median of the background estimates the flat-gel response;
    // subtracting it removes both ambient and the flat-normal Lambertian term,
    // so the solve recovers the normal deviation from (0,0,1).
    double bg_median[3];
    for (std::size_t c = 0; c < 3; ++c) {
        std::vector<double> vals(background.channels[c]);
        bg_median[c] = median_of(std::move(vals));
    }

    double L[3][3];
    for (int c = 0; c < 3; ++c)
        for (int k = 0; k < 3; ++k)
            L[c][k] = lighting.direction[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)];

    NormalRecovery rec;
    rec.normals = NormalMap(img.width, img.height, img.resolution);
    rec.quality.assign(img.pixel_count(), 1);

    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        double rhs[3];
        bool degenerate = true;
        bool saturated = false;
        for (std::size_t c = 0; c < 3; ++c) {
            const double v = img.channels[c][i];
            if (v > lighting.ambient[c] + kDegenerateEps) degenerate = false;
            if (v >= 1.0 - kSaturationEps || v <= kSaturationEps) saturated = true;
            rhs[c] = (v - bg_median[c]) / lighting.intensity[c];
        }
        if (degenerate) {
            // Shadowed response carries no directional information.
            rec.normals.nx[i] = 0.0;
            rec.normals.ny[i] = 0.0;
            rec.normals.nz[i] = 1.0;
            rec.quality[i] = 0;
            continue;
        }
        double d[3];
        if (!solve3(L, rhs, d))
            throw std::invalid_argument("normals_from_image: singular lighting matrix");
        // d = n - z_hat for clamp-free pixels.
        double nx = d[0], ny = d[1], nz = d[2] + 1.0;
        if (nz < 1e-6) nz = 1e-6;
        const double inv = 1.0 / std::sqrt(nx * nx + ny * ny + nz * nz);
        rec.normals.nx[i] = nx * inv;
        rec.normals.ny[i] = ny * inv;
        rec.normals.nz[i] = nz * inv;
        if (saturated) rec.quality[i] = 0;
    }
    return rec;
}

HeightMap integrate_normals(const NormalMap& nm) {
    const int w = nm.width;
    const int h = nm.height;
    if (w < 2 || h < 2) throw std::domain_error("integrate_normals: grid must be at least 2x2");
    for (std::size_t i = 0; i < nm.size(); ++i)
        if (!(nm.nz[i] > 0.0))
            throw std::domain_error("integrate_normals: nz must be > 0 everywhere");

    const double res = nm.resolution;

    // Height steps along grid edges, from the staggered average of the
    // per-pixel gradient field p = -nx/nz, q = -ny/nz.
    // Normal equations of min sum (h_j - h_i - g_e)^2 give L h = b with L the
    // Neumann grid Laplacian, diagonalized by the DCT-II (the even-extension
    // frequency method).
    std::vector<double> b(static_cast<std::size_t>(w) * h, 0.0);
    auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x + 1 < w; ++x) {
            const std::size_t i = idx(x, y), j = idx(x + 1, y);
            const double p_i = -nm.nx[i] / nm.nz[i];
            const double p_j = -nm.nx[j] / nm.nz[j];
            const double g = 0.5 * (p_i + p_j) * res;
            b[j] += g;
            b[i] -= g;
        }
    }
    for (int y = 0; y + 1 < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = idx(x, y), j = idx(x, y + 1);
            const double q_i = -nm.ny[i] / nm.nz[i];
            const double q_j = -nm.ny[j] / nm.nz[j];
            const double g = 0.5 * (q_i + q_j) * res;
            b[j] += g;
            b[i] -= g;
        }
    }

    const CosTable tw(w), th(h);
    int cw = w, ch = h;
    dct2_rows(b, cw, ch, tw, false);
    transpose(b, cw, ch);
    dct2_rows(b, cw, ch, th, false);
    transpose(b, cw, ch);

    // Divide by Laplacian eigenvalues 4 sin^2(pi kx / 2w) + 4 sin^2(pi ky / 2h);
    // the (0,0) mode is the free gauge.
    for (int ky = 0; ky < h; ++ky) {
        const double sy = 2.0 * std::sin(kPi * ky / (2.0 * h));
        for (int kx = 0; kx < w; ++kx) {
            const double sx = 2.0 * std::sin(kPi * kx / (2.0 * w));
            const std::size_t i = idx(kx, ky);
            const double lambda = sx * sx + sy * sy;
            b[i] = (lambda > 0.0) ? b[i] / lambda : 0.0;
        }
    }

    dct2_rows(b, cw, ch, tw, true);
    transpose(b, cw, ch);
    dct2_rows(b, cw, ch, th, true);
    transpose(b, cw, ch);

    HeightMap out(w, h, res);
    out.depths = std::move(b);

    // Gauge fix: boundary median height = 0.
    std::vector<double> boundary;
    boundary.reserve(static_cast<std::size_t>(2 * (w + h)));
    for (int x = 0; x < w; ++x) {
        boundary.push_back(out.at(x, 0));
        boundary.push_back(out.at(x, h - 1));
    }
    for (int y = 1; y + 1 < h; ++y) {
        boundary.push_back(out.at(0, y));
        boundary.push_back(out.at(w - 1, y));
    }
    const double shift = median_of(std::move(boundary));
    for (auto& d : out.depths) d -= shift;
    return out;
}

ContactMask contact_mask(const TactileImage& img, const TactileImage& background,
                         double threshold) {
    require_same_shape(img, background, "contact_mask");
    if (!(threshold > 0.0)) throw std::domain_error("contact_mask: threshold must be > 0");

    const int w = img.width, h = img.height;
    std::vector<std::uint8_t> raw(img.pixel_count(), 0);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        double diff = 0.0;
        for (std::size_t c = 0; c < 3; ++c)
            diff = std::max(diff, std::abs(img.channels[c][i] - background.channels[c][i]));
        raw[i] = diff > threshold ? 1 : 0;
    }

    ContactMask out;
    out.width = w;
    out.height = h;
    out.mask.assign(raw.size(), 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int yes = 0, total = 0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int xx = x + dx, yy = y + dy;
                    if (xx < 0 || xx >= w || yy < 0 || yy >= h) continue;
                    ++total;
                    yes += raw[static_cast<std::size_t>(yy) * w + xx];
                }
            }
            out.mask[static_cast<std::size_t>(y) * w + x] = (2 * yes > total) ? 1 : 0;
        }
    }
    return out;
}

} // namespace gsn::recon
