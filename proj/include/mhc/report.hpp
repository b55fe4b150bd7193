#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mhc/probe.hpp"
#include "mhc/random_matrix.hpp"
#include "mhc/train.hpp"

namespace mhc {

// 12 significant digits; NaN -> "nan", infinities -> "inf" / "-inf".
std::string format_number(double v);

// RFC-4180 style: header first, "\n" line ends, fields quoted only when needed.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);

    void add_row(std::vector<std::string> fields);
    std::string str() const;
    std::size_t row_count() const noexcept { return rows_.size(); }

    static std::string quote(std::string_view field);

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(std::string_view name) const;  // throws ValidationError if absent
};

CsvTable parse_csv(std::string_view text);

// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

std::string kappa_stats_csv(const std::vector<KappaStats>& stats);
std::string metrics_csv(const RunResult& run);
std::string conditioning_csv(const std::vector<ConditioningReport>& reports);

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<std::string> y;  // exact CSV strings; parsed for placement
};

// Self-contained static line chart. Each point carries data-x / data-y
// attributes holding the plotted values verbatim.
std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series, bool log_y = false);

}  // namespace mhc
