#pragma once

// Numeric result tables (CSV with '#' metadata lines) and a small SVG
// line-chart writer.

#include <string>
#include <utility>
#include <vector>

namespace advrobust {

/// Shortest text that reads back to the same double: 17 significant digits,
/// "nan", "inf" or "-inf".
std::string format_double(double v);

class ResultTable {
public:
    ResultTable() = default;
    explicit ResultTable(std::vector<std::string> header);

    const std::vector<std::string>& header() const { return header_; }
    const std::vector<std::vector<double>>& rows() const { return rows_; }
    const std::vector<std::pair<std::string, std::string>>& metadata() const { return metadata_; }

    /// Throws ConfigError when the row length differs from the header.
    void add_row(std::vector<double> row);
    /// Replaces the value of an existing key, otherwise appends.
    void set_metadata(const std::string& key, const std::string& value);
    /// Index of a column; throws ConfigError if absent.
    std::size_t column(const std::string& name) const;

    std::string to_csv() const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<double>> rows_;
    std::vector<std::pair<std::string, std::string>> metadata_;
};

struct ChartSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct ChartSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<ChartSeries> series;
};

/// Polyline chart with markers, linear axes and a legend. Non-finite points
/// are skipped.
std::string render_svg(const ChartSpec& chart);

/// Throws IoError on failure.
void write_text_file(const std::string& path, const std::string& content);

}  // namespace advrobust
