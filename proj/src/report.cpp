#include "rfmodel/report.hpp"

#include "rfmodel/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace rfmodel::report {

namespace {

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick_label(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", std::abs(v) < 1e-12 ? 0.0 : v);
    return buf;
}

std::string escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v)
    {
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    void finish()
    {
        if (!(lo <= hi)) {
            lo = 0;
            hi = 1;
        }
        if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
            lo -= 0.5;
            hi += 0.5;
        }
    }
};

// "Nice" tick step: 1, 2 or 5 times a power of ten, about five ticks.
double tick_step(const Range& r)
{
    const double raw = (r.hi - r.lo) / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0})
        if (m * mag >= raw)
            return m * mag;
    return 10.0 * mag;
}

}  // namespace

std::string render_svg(const Plot& plot)
{
    const double left = 70, right = 160, top = 40, bottom = 50;
    const double pw = plot.width - left - right;
    const double ph = plot.height - top - bottom;
    if (pw <= 0 || ph <= 0)
        fail("report: plot is too small");

    Range xr, yr;
    for (const auto& s : plot.series) {
        if (s.x.size() != s.y.size())
            fail("report: series '" + s.name + "' has mismatched x/y lengths");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (std::isfinite(s.y[i]))
                xr.add(s.x[i]);
            yr.add(s.y[i]);
        }
    }
    xr.finish();
    yr.finish();
    const double ypad = 0.05 * (yr.hi - yr.lo);
    yr.lo -= ypad;
    yr.hi += ypad;

    auto px = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
    auto py = [&](double y) { return top + (yr.hi - y) / (yr.hi - yr.lo) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << plot.width << "\" height=\"" << plot.height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << num(left + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << escape(plot.title) << "</text>\n";

    o << "<g stroke=\"#ddd\">\n";
    const double xs = tick_step(xr), ys = tick_step(yr);
    std::ostringstream labels;
    for (double t = std::ceil(xr.lo / xs) * xs; t <= xr.hi + 1e-9 * xs; t += xs) {
        o << "<line x1=\"" << num(px(t)) << "\" y1=\"" << num(top) << "\" x2=\"" << num(px(t)) << "\" y2=\""
          << num(top + ph) << "\"/>\n";
        labels << "<text x=\"" << num(px(t)) << "\" y=\"" << num(top + ph + 16)
               << "\" text-anchor=\"middle\">" << tick_label(t) << "</text>\n";
    }
    for (double t = std::ceil(yr.lo / ys) * ys; t <= yr.hi + 1e-9 * ys; t += ys) {
        o << "<line x1=\"" << num(left) << "\" y1=\"" << num(py(t)) << "\" x2=\"" << num(left + pw) << "\" y2=\""
          << num(py(t)) << "\"/>\n";
        labels << "<text x=\"" << num(left - 6) << "\" y=\"" << num(py(t) + 4) << "\" text-anchor=\"end\">"
               << tick_label(t) << "</text>\n";
    }
    o << "</g>\n" << labels.str();
    o << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    o << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(plot.height - 12.0) << "\" text-anchor=\"middle\">"
      << escape(plot.x_label) << "</text>\n";
    o << "<text transform=\"translate(16," << num(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(plot.y_label) << "</text>\n";

    for (std::size_t si = 0; si < plot.series.size(); ++si) {
        const auto& s = plot.series[si];
        const std::string style = "fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\"" +
                                  (s.dashed ? " stroke-dasharray=\"6 3\"" : "");
        std::string pts;
        auto flush = [&] {
            if (!pts.empty())
                o << "<polyline " << style << " points=\"" << pts << "\"/>\n";
            pts.clear();
        };
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
                flush();
                continue;
            }
            if (!pts.empty())
                pts += ' ';
            pts += num(px(s.x[i])) + "," + num(py(s.y[i]));
            if (s.markers)
                o << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i])) << "\" r=\"2.5\" fill=\""
                  << s.color << "\"/>\n";
        }
        flush();

        const double ly = top + 10 + 18.0 * static_cast<double>(si);
        o << "<line x1=\"" << num(left + pw + 12) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(left + pw + 36)
          << "\" y2=\"" << num(ly) << "\" " << style << "/>\n";
        o << "<text x=\"" << num(left + pw + 42) << "\" y=\"" << num(ly + 4) << "\">" << escape(s.name) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

void write_svg(const Plot& plot, const std::filesystem::path& path)
{
    const std::string text = render_svg(plot);
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out)
        throw Error(ErrorCode::io, "write to '" + path.string() + "' failed");
}

}  // namespace rfmodel::report
