#include "predlab/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace predlab {

namespace {

const char* kPalette[] = {"#1f6fb2", "#d9541e", "#2e8b57", "#8e44ad",
                          "#c0392b", "#16737e", "#b8860b", "#555555"};

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '&')
            out += "&amp;";
        else if (c == '<')
            out += "&lt;";
        else if (c == '>')
            out += "&gt;";
        else
            out += c;
    }
    return out;
}

std::string num(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
}

struct Series {
    std::string label;
    std::vector<std::pair<double, double>> points;  // sorted by x
};

}  // namespace

std::string render_plot(const CsvTable& t, const PlotSpec& spec) {
    const int xc = t.column_index(spec.x_field);
    const int yc = t.column_index(spec.y_field);
    const int sc = spec.series_field.empty() ? -1 : t.column_index(spec.series_field);
    std::vector<int> guide_cols;
    for (const std::string& gf : spec.guide_fields) guide_cols.push_back(t.column_index(gf));

    std::vector<std::string> order;
    std::map<std::string, std::map<double, std::pair<double, int>>> acc;
    std::vector<double> guides;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        double x = t.number_at(r, xc);
        double y = t.number_at(r, yc);
        if (!std::isfinite(x) || !std::isfinite(y)) continue;
        if (spec.log_x && x <= 0.0)
            throw SpecError("log axis needs positive x, found " + num(x));
        std::string label = sc < 0 ? std::string() : t.at(r, sc);
        if (acc.find(label) == acc.end()) order.push_back(label);
        auto& cell = acc[label][x];
        cell.first += y;
        cell.second += 1;
        for (int gc : guide_cols) {
            double gv = t.number_at(r, static_cast<int>(gc));
            if (std::isfinite(gv)) guides.push_back(gv);
        }
    }
    if (order.empty()) throw SpecError("no plottable rows");
    std::sort(guides.begin(), guides.end());
    guides.erase(std::unique(guides.begin(), guides.end(),
                             [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                 guides.end());

    std::vector<Series> series;
    for (const std::string& label : order) {
        Series s;
        s.label = label;
        for (const auto& [x, sum_count] : acc[label])
            s.points.emplace_back(x, sum_count.first / sum_count.second);
        series.push_back(std::move(s));
    }

    const auto tx = [&](double x) { return spec.log_x ? std::log10(x) : x; };
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const Series& s : series)
        for (const auto& [x, y] : s.points) {
            xmin = std::min(xmin, tx(x));
            xmax = std::max(xmax, tx(x));
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    for (double gv : guides) {
        ymin = std::min(ymin, gv);
        ymax = std::max(ymax, gv);
    }
    if (xmax - xmin < 1e-12) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    if (ymax - ymin < 1e-12) {
        double pad = std::max(0.5, std::abs(ymax) * 0.1);
        ymin -= pad;
        ymax += pad;
    } else {
        double pad = (ymax - ymin) * 0.06;
        ymin -= pad;
        ymax += pad;
    }

    const double left = 70, right = 170, top = 42, bottom = 52;
    const double w = spec.width, h = spec.height;
    const double pw = w - left - right, ph = h - top - bottom;
    const auto px = [&](double x) { return left + (tx(x) - xmin) / (xmax - xmin) * pw; };
    const auto py = [&](double y) { return top + (ymax - y) / (ymax - ymin) * ph; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\""
        << h << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    svg << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
    if (!spec.title.empty())
        svg << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" "
            << "font-family=\"sans-serif\" font-size=\"16\">" << xml_escape(spec.title)
            << "</text>\n";

    svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw
        << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"#888\"/>\n";

    const int ticks = 6;
    for (int i = 0; i <= ticks; ++i) {
        double fx = xmin + (xmax - xmin) * i / ticks;
        double label = spec.log_x ? std::pow(10.0, fx) : fx;
        double cx = left + pw * i / ticks;
        svg << "<line x1=\"" << cx << "\" y1=\"" << top + ph << "\" x2=\"" << cx
            << "\" y2=\"" << top + ph + 5 << "\" stroke=\"#888\"/>\n";
        std::ostringstream lbl;
        lbl.precision(3);
        lbl << label;
        svg << "<text x=\"" << cx << "\" y=\"" << top + ph + 20
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << lbl.str() << "</text>\n";
        double fy = ymin + (ymax - ymin) * i / ticks;
        double cy = py(fy);
        svg << "<line x1=\"" << left - 5 << "\" y1=\"" << cy << "\" x2=\"" << left
            << "\" y2=\"" << cy << "\" stroke=\"#888\"/>\n";
        std::ostringstream ylbl;
        ylbl.precision(4);
        ylbl << fy;
        svg << "<text x=\"" << left - 8 << "\" y=\"" << cy + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
            << ylbl.str() << "</text>\n";
    }
    svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << h - 12
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
        << xml_escape(spec.x_field) << (spec.log_x ? " (log scale)" : "") << "</text>\n";
    svg << "<text x=\"16\" y=\"" << top + ph / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
        << "transform=\"rotate(-90 16 " << top + ph / 2 << ")\">"
        << xml_escape(spec.y_field) << "</text>\n";

    for (double gv : guides) {
        double cy = py(gv);
        svg << "<line x1=\"" << left << "\" y1=\"" << cy << "\" x2=\"" << left + pw
            << "\" y2=\"" << cy
            << "\" stroke=\"#444\" stroke-dasharray=\"6 4\" stroke-width=\"1\"/>\n";
        std::ostringstream lbl;
        lbl.precision(4);
        lbl << gv;
        svg << "<text x=\"" << left + pw + 4 << "\" y=\"" << cy + 4
            << "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#444\">"
            << lbl.str() << "</text>\n";
    }

    for (std::size_t si = 0; si < series.size(); ++si) {
        const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
        const Series& s = series[si];
        if (s.points.size() > 1) {
            svg << "<polyline fill=\"none\" stroke=\"" << color
                << "\" stroke-width=\"2\" points=\"";
            for (const auto& [x, y] : s.points) svg << px(x) << "," << py(y) << " ";
            svg << "\"/>\n";
        }
        for (const auto& [x, y] : s.points)
            svg << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y)
                << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        double ly = top + 16 + 18 * static_cast<double>(si);
        svg << "<line x1=\"" << left + pw + 28 << "\" y1=\"" << ly - 4 << "\" x2=\""
            << left + pw + 52 << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << left + pw + 58 << "\" y=\"" << ly
            << "\" font-family=\"sans-serif\" font-size=\"12\">"
            << xml_escape(s.label.empty() ? spec.y_field : s.label) << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

void plot_csv_file(const std::string& csv_path, const PlotSpec& spec,
                   const std::string& out_path) {
    const CsvTable t = read_csv(csv_path);
    std::ofstream out(out_path);
    if (!out) throw SpecError("cannot write " + out_path);
    out << render_plot(t, spec);
    if (!out) throw SpecError("short write to " + out_path);
}

}  // namespace predlab
