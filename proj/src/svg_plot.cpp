#include "yoularen/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "yoularen/io.hpp"

namespace yoularen::plot {

namespace {

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 50;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string num(double x) {
    // Two decimals are plenty for pixel coordinates and keep files stable.
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(2);
    os << x;
    return os.str();
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

double nice_step(double span) {
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (raw <= m * mag) return m * mag;
    return 10.0 * mag;
}

}  // namespace

Band band_of(const Series& s) {
    if (s.curves.empty()) throw std::runtime_error("series '" + s.label + "' has no curves");
    const std::size_t n = s.curves.front().size();
    for (const auto& c : s.curves)
        if (c.size() != n)
            throw std::runtime_error("series '" + s.label + "' mixes curves of different lengths");
    Band b;
    for (std::size_t e = 0; e < n; ++e) {
        double sum = 0.0, lo = INFINITY, hi = -INFINITY;
        for (const auto& c : s.curves) {
            const double v = c[e].normalized_cost;
            sum += v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        b.epoch.push_back(static_cast<double>(s.curves.front()[e].epoch));
        b.mean.push_back(sum / static_cast<double>(s.curves.size()));
        b.lo.push_back(lo);
        b.hi.push_back(hi);
    }
    return b;
}

std::string render_svg(const std::vector<Series>& series, const std::string& title) {
    if (series.empty()) throw std::runtime_error("nothing to plot");
    std::vector<Band> bands;
    double xmax = 1.0, ymin = 0.0, ymax = 1.0;
    for (const auto& s : series) {
        bands.push_back(band_of(s));
        const auto& b = bands.back();
        for (std::size_t i = 0; i < b.epoch.size(); ++i) {
            xmax = std::max(xmax, b.epoch[i]);
            if (std::isfinite(b.lo[i])) ymin = std::min(ymin, b.lo[i]);
            if (std::isfinite(b.hi[i])) ymax = std::max(ymax, b.hi[i]);
        }
    }
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;

    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    auto X = [&](double e) { return kLeft + pw * e / xmax; };
    auto Y = [&](double v) {
        v = std::clamp(v, ymin, ymax);
        return kTop + ph * (ymax - v) / (ymax - ymin);
    };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!title.empty())
        svg << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" "
            << "font-family=\"sans-serif\" font-size=\"15\">" << escape(title) << "</text>\n";

    // Axes and ticks.
    svg << "<g stroke=\"black\" stroke-width=\"1\">\n";
    svg << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop + ph) << "\" x2=\""
        << num(kLeft + pw) << "\" y2=\"" << num(kTop + ph) << "\"/>\n";
    svg << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(kLeft)
        << "\" y2=\"" << num(kTop + ph) << "\"/>\n</g>\n";
    svg << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
    const double xs = nice_step(xmax);
    for (double e = 0.0; e <= xmax + 1e-9; e += xs)
        svg << "<text x=\"" << num(X(e)) << "\" y=\"" << num(kTop + ph + 16)
            << "\" text-anchor=\"middle\">" << e << "</text>\n";
    const double ys = nice_step(ymax - ymin);
    for (double v = std::ceil(ymin / ys) * ys; v <= ymax + 1e-12; v += ys)
        svg << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(Y(v) + 4)
            << "\" text-anchor=\"end\">" << io::format_double(std::round(v / ys) * ys)
            << "</text>\n";
    svg << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 10)
        << "\" text-anchor=\"middle\" font-size=\"13\">epoch</text>\n";
    svg << "<text transform=\"translate(18," << num(kTop + ph / 2)
        << ") rotate(-90)\" text-anchor=\"middle\" font-size=\"13\">normalized test cost</text>\n";
    svg << "</g>\n";

    // Reference levels: base controller at 1, optimal controller at 0.
    for (double ref : {1.0, 0.0})
        svg << "<line class=\"reference\" x1=\"" << num(kLeft) << "\" y1=\"" << num(Y(ref))
            << "\" x2=\"" << num(kLeft + pw) << "\" y2=\"" << num(Y(ref))
            << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& b = bands[k];
        const char* color = kPalette[k % std::size(kPalette)];
        if (b.epoch.size() == 1) {
            svg << "<circle class=\"marker\" cx=\"" << num(X(b.epoch[0])) << "\" cy=\""
                << num(Y(b.mean[0])) << "\" r=\"4\" fill=\"" << color << "\"/>\n";
        } else {
            svg << "<polygon class=\"band\" fill=\"" << color << "\" fill-opacity=\"0.2\" points=\"";
            for (std::size_t i = 0; i < b.epoch.size(); ++i)
                svg << num(X(b.epoch[i])) << ',' << num(Y(b.hi[i])) << ' ';
            for (std::size_t i = b.epoch.size(); i-- > 0;)
                svg << num(X(b.epoch[i])) << ',' << num(Y(b.lo[i])) << ' ';
            svg << "\"/>\n";
            svg << "<polyline class=\"mean\" fill=\"none\" stroke=\"" << color
                << "\" stroke-width=\"2\" points=\"";
            for (std::size_t i = 0; i < b.epoch.size(); ++i)
                svg << num(X(b.epoch[i])) << ',' << num(Y(b.mean[i])) << ' ';
            svg << "\"/>\n";
        }
        const double ly = kTop + 14 + 20.0 * static_cast<double>(k);
        svg << "<line x1=\"" << num(kLeft + pw + 14) << "\" y1=\"" << num(ly) << "\" x2=\""
            << num(kLeft + pw + 34) << "\" y2=\"" << num(ly) << "\" stroke=\"" << color
            << "\" stroke-width=\"3\"/>\n";
        svg << "<text x=\"" << num(kLeft + pw + 40) << "\" y=\"" << num(ly + 4)
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape(series[k].label)
            << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace yoularen::plot
