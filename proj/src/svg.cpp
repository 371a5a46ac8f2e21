#include "granusense/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace gsn::svg {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

std::string esc(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        default: out += c;
        }
    }
    return out;
}

// Round a raw interval to pleasant tick spacing.
double nice_step(double span, int target_ticks) {
    if (span <= 0) return 1.0;
    const double raw = span / target_ticks;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        if (raw <= m * mag) return m * mag;
    }
    return 10.0 * mag;
}

} // namespace

std::string LineChart::render(int width, int height) const {
    const double ml = 70, mr = 170, mt = 42, mb = 52;
    const double pw = width - ml - mr;
    const double ph = height - mt - mb;

    double xmin = std::numeric_limits<double>::max(), xmax = std::numeric_limits<double>::lowest();
    double ymin = xmin, ymax = xmax;
    for (const auto& s : series) {
        for (double v : s.x) { xmin = std::min(xmin, v); xmax = std::max(xmax, v); }
        for (double v : s.y) { ymin = std::min(ymin, v); ymax = std::max(ymax, v); }
    }
    if (series.empty() || xmin > xmax) { xmin = 0; xmax = 1; ymin = 0; ymax = 1; }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    ymin = std::min(ymin, 0.0); // force axes to include zero for force/depth plots

    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
       << "\" height=\"" << height << "\" font-family=\"sans-serif\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
       << esc(title) << "</text>\n";

    // Gridlines and ticks.
    const double xs = nice_step(xmax - xmin, 8);
    const double ys = nice_step(ymax - ymin, 8);
    os << "<g stroke=\"#dddddd\" stroke-width=\"1\">\n";
    for (double x = std::ceil(xmin / xs) * xs; x <= xmax + 1e-12; x += xs)
        os << "<line x1=\"" << num(px(x)) << "\" y1=\"" << num(mt) << "\" x2=\"" << num(px(x))
           << "\" y2=\"" << num(mt + ph) << "\"/>\n";
    for (double y = std::ceil(ymin / ys) * ys; y <= ymax + 1e-12; y += ys)
        os << "<line x1=\"" << num(ml) << "\" y1=\"" << num(py(y)) << "\" x2=\"" << num(ml + pw)
           << "\" y2=\"" << num(py(y)) << "\"/>\n";
    os << "</g>\n";
    os << "<g font-size=\"11\" fill=\"#333333\">\n";
    for (double x = std::ceil(xmin / xs) * xs; x <= xmax + 1e-12; x += xs)
        os << "<text x=\"" << num(px(x)) << "\" y=\"" << num(mt + ph + 16)
           << "\" text-anchor=\"middle\">" << num(x) << "</text>\n";
    for (double y = std::ceil(ymin / ys) * ys; y <= ymax + 1e-12; y += ys)
        os << "<text x=\"" << num(ml - 8) << "\" y=\"" << num(py(y) + 4)
           << "\" text-anchor=\"end\">" << num(y) << "</text>\n";
    os << "</g>\n";

    // Axes.
    os << "<g stroke=\"#000000\" stroke-width=\"1.5\">\n"
       << "<line x1=\"" << num(ml) << "\" y1=\"" << num(mt + ph) << "\" x2=\"" << num(ml + pw)
       << "\" y2=\"" << num(mt + ph) << "\"/>\n"
       << "<line x1=\"" << num(ml) << "\" y1=\"" << num(mt) << "\" x2=\"" << num(ml)
       << "\" y2=\"" << num(mt + ph) << "\"/>\n</g>\n";
    os << "<text x=\"" << num(ml + pw / 2) << "\" y=\"" << num(height - 12)
       << "\" text-anchor=\"middle\" font-size=\"13\">" << esc(x_label) << "</text>\n";
    os << "<text x=\"18\" y=\"" << num(mt + ph / 2)
       << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
       << num(mt + ph / 2) << ")\">" << esc(y_label) << "</text>\n";

    // Series polylines, decimated to keep files small.
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kPalette[si % 10];
        const std::size_t n = s.x.size();
        const std::size_t stride = std::max<std::size_t>(1, n / 2000);
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
        for (std::size_t i = 0; i < n; i += stride)
            os << num(px(s.x[i])) << "," << num(py(s.y[i])) << " ";
        if (n > 0 && (n - 1) % stride != 0)
            os << num(px(s.x[n - 1])) << "," << num(py(s.y[n - 1]));
        os << "\"/>\n";
        const double ly = mt + 16 + 18 * static_cast<double>(si);
        os << "<line x1=\"" << num(ml + pw + 12) << "\" y1=\"" << num(ly) << "\" x2=\""
           << num(ml + pw + 36) << "\" y2=\"" << num(ly) << "\" stroke=\"" << color
           << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << num(ml + pw + 42) << "\" y=\"" << num(ly + 4)
           << "\" font-size=\"12\">" << esc(s.label) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string heatmap(const std::vector<std::vector<long>>& counts,
                    const std::vector<std::string>& labels,
                    const std::string& title) {
    const std::size_t n = counts.size();
    if (n == 0 || labels.size() != n)
        throw std::invalid_argument("heatmap: counts/labels size mismatch");

    long maxc = 1;
    for (const auto& row : counts)
        for (long v : row) maxc = std::max(maxc, v);

    const double cell = 52, ml = 150, mt = 90, mb = 30, mr = 30;
    const double width = ml + cell * static_cast<double>(n) + mr;
    const double height = mt + cell * static_cast<double>(n) + mb;

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\" font-family=\"sans-serif\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << width / 2 << "\" y=\"26\" text-anchor=\"middle\" font-size=\"16\">"
       << esc(title) << "</text>\n";

    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            const double t = static_cast<double>(counts[r][c]) / static_cast<double>(maxc);
            // white -> blue ramp
            const int red = static_cast<int>(std::lround(255 - 215 * t));
            const int grn = static_cast<int>(std::lround(255 - 180 * t));
            const int blu = static_cast<int>(std::lround(255 - 75 * t));
            const double x = ml + cell * static_cast<double>(c);
            const double y = mt + cell * static_cast<double>(r);
            os << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << cell
               << "\" height=\"" << cell << "\" fill=\"rgb(" << red << "," << grn << ","
               << blu << ")\" stroke=\"#cccccc\"/>\n";
            const char* tc = t > 0.55 ? "#ffffff" : "#222222";
            os << "<text x=\"" << num(x + cell / 2) << "\" y=\"" << num(y + cell / 2 + 5)
               << "\" text-anchor=\"middle\" font-size=\"14\" fill=\"" << tc << "\">"
               << counts[r][c] << "</text>\n";
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        os << "<text x=\"" << num(ml - 8) << "\" y=\"" << num(mt + cell * static_cast<double>(i) + cell / 2 + 4)
           << "\" text-anchor=\"end\" font-size=\"12\">" << esc(labels[i]) << "</text>\n";
        const double cx = ml + cell * static_cast<double>(i) + cell / 2;
        os << "<text x=\"" << num(cx) << "\" y=\"" << num(mt - 10)
           << "\" text-anchor=\"start\" font-size=\"12\" transform=\"rotate(-45 " << num(cx)
           << " " << num(mt - 10) << ")\">" << esc(labels[i]) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

} // namespace gsn::svg
