#include "advrobust/table.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "advrobust/errors.hpp"

namespace advrobust {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

ResultTable::ResultTable(std::vector<std::string> header) : header_(std::move(header)) {}

void ResultTable::add_row(std::vector<double> row) {
    if (row.size() != header_.size())
        throw ConfigError("row has " + std::to_string(row.size()) + " values, table has " +
                          std::to_string(header_.size()) + " columns");
    rows_.push_back(std::move(row));
}

void ResultTable::set_metadata(const std::string& key, const std::string& value) {
    for (auto& kv : metadata_) {
        if (kv.first == key) {
            kv.second = value;
            return;
        }
    }
    metadata_.emplace_back(key, value);
}

std::size_t ResultTable::column(const std::string& name) const {
    const auto it = std::find(header_.begin(), header_.end(), name);
    if (it == header_.end()) throw ConfigError("no column named " + name);
    return static_cast<std::size_t>(it - header_.begin());
}

std::string ResultTable::to_csv() const {
    std::string out;
    for (const auto& [key, value] : metadata_) out += "# " + key + ": " + value + "\n";
    for (std::size_t j = 0; j < header_.size(); ++j) out += (j ? "," : "") + header_[j];
    out += "\n";
    for (const auto& row : rows_) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) out += ",";
            out += format_double(row[j]);
        }
        out += "\n";
    }
    return out;
}

namespace {

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

}  // namespace

std::string render_svg(const ChartSpec& chart) {
    constexpr double width = 640, height = 480;
    constexpr double left = 80, right = 170, top = 40, bottom = 60;
    const double pw = width - left - right, ph = height - top - bottom;

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : chart.series) {
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    }
    if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    auto pad = [](double& lo, double& hi) {
        const double span = hi - lo;
        const double m = span > 0 ? 0.05 * span : std::max(1e-12, 0.05 * std::abs(lo) + 0.5);
        lo -= m;
        hi += m;
    };
    pad(xmin, xmax);
    pad(ymin, ymax);
    auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
    auto sy = [&](double y) { return top + (ymax - y) / (ymax - ymin) * ph; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << left + pw / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
       << xml_escape(chart.title) << "</text>\n";
    os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double xv = xmin + (xmax - xmin) * t / 4.0;
        const double yv = ymin + (ymax - ymin) * t / 4.0;
        os << "<line x1=\"" << sx(xv) << "\" y1=\"" << top + ph << "\" x2=\"" << sx(xv)
           << "\" y2=\"" << top + ph + 5 << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << sx(xv) << "\" y=\"" << top + ph + 18
           << "\" text-anchor=\"middle\">" << fmt("%.3g", xv) << "</text>\n";
        os << "<line x1=\"" << left - 5 << "\" y1=\"" << sy(yv) << "\" x2=\"" << left
           << "\" y2=\"" << sy(yv) << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << left - 8 << "\" y=\"" << sy(yv) + 4 << "\" text-anchor=\"end\">"
           << fmt("%.3g", yv) << "</text>\n";
    }
    os << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 15
       << "\" text-anchor=\"middle\">" << xml_escape(chart.x_label) << "</text>\n";
    os << "<text transform=\"translate(20," << top + ph / 2
       << ") rotate(-90)\" text-anchor=\"middle\">" << xml_escape(chart.y_label) << "</text>\n";

    for (std::size_t k = 0; k < chart.series.size(); ++k) {
        const auto& s = chart.series[k];
        const char* color = kPalette[k % std::size(kPalette)];
        std::string points;
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            points += fmt("%.2f", sx(s.x[i])) + "," + fmt("%.2f", sy(s.y[i])) + " ";
            os << "<circle cx=\"" << fmt("%.2f", sx(s.x[i])) << "\" cy=\""
               << fmt("%.2f", sy(s.y[i])) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        }
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\""
           << points << "\"/>\n";
        const double ly = top + 10 + 18.0 * static_cast<double>(k);
        os << "<line x1=\"" << left + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 30
           << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << left + pw + 35 << "\" y=\"" << ly + 4 << "\">"
           << xml_escape(s.label) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << content;
    f.flush();
    if (!f) throw IoError("failed writing " + path);
}

}  // namespace advrobust
