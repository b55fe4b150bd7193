#include "mhc/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace mhc {

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

namespace {

std::string format_kappa(const Kappa& k) { return k.is_infinite() ? "inf" : format_number(k.value()); }

double parse_number(const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    return std::stod(s);
}

std::string xml_escape(std::string_view s) {
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

}  // namespace

CsvWriter::CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvWriter::add_row(std::vector<std::string> fields) {
    if (fields.size() != header_.size()) throw ValidationError("csv: row width does not match header");
    rows_.push_back(std::move(fields));
}

std::string CsvWriter::quote(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string CsvWriter::str() const {
    std::string out;
    auto line = [&out](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out += ',';
            out += quote(fields[i]);
        }
        out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
}

std::size_t CsvTable::column(std::string_view name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ValidationError("csv: missing column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - header.begin());
}

CsvTable parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> fields;
    std::string field;
    bool in_quotes = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') {
            in_quotes = true;
            any = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            fields.push_back(std::move(field));
            field.clear();
            records.push_back(std::move(fields));
            fields.clear();
            any = false;
        } else {
            field += c;
            any = true;
        }
    }
    if (in_quotes) throw ValidationError("csv: unterminated quoted field");
    if (any) {
        fields.push_back(std::move(field));
        records.push_back(std::move(fields));
    }
    if (records.empty()) throw ValidationError("csv: empty document");
    CsvTable t;
    t.header = std::move(records.front());
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != t.header.size()) throw ValidationError("csv: row " + std::to_string(r) + " has wrong width");
        t.rows.push_back(std::move(records[r]));
    }
    return t;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::filesystem::filesystem_error("cannot open for writing", tmp,
                                                          std::make_error_code(std::errc::permission_denied));
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) throw std::filesystem::filesystem_error("write failed", tmp, std::make_error_code(std::errc::io_error));
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::filesystem::filesystem_error("cannot open", path, std::make_error_code(std::errc::no_such_file_or_directory));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string kappa_stats_csv(const std::vector<KappaStats>& stats) {
    CsvWriter csv({"h", "D", "trials", "mean_kappa", "std_kappa", "min", "max", "asymptotic_kappa", "rank_deficient"});
    for (const KappaStats& s : stats)
        csv.add_row({std::to_string(s.heads), std::to_string(s.embed_dim), std::to_string(s.trials),
                     format_number(s.mean_kappa), format_number(s.std_kappa), format_number(s.min_kappa),
                     format_number(s.max_kappa), format_number(s.asymptotic_kappa),
                     std::to_string(s.rank_deficient_count)});
    return csv.str();
}

std::string metrics_csv(const RunResult& run) {
    CsvWriter csv({"step", "loss", "lr"});
    for (std::size_t i = 0; i < run.loss_curve.size(); ++i)
        csv.add_row({std::to_string(i + 1), format_number(run.loss_curve[i]), format_number(run.lr_curve[i])});
    return csv.str();
}

std::string conditioning_csv(const std::vector<ConditioningReport>& reports) {
    CsvWriter csv({"step", "layer", "head", "kappa", "concat_kappa", "mean_concat_kappa_across_layers",
                   "rank_deficient_heads"});
    for (const ConditioningReport& r : reports)
        for (const LayerConditioning& l : r.per_layer)
            for (std::size_t h = 0; h < l.per_head_kappa.size(); ++h)
                csv.add_row({std::to_string(r.step), std::to_string(l.layer), std::to_string(h),
                             format_kappa(l.per_head_kappa[h]), format_kappa(l.concat_kappa),
                             format_number(r.mean_concat_kappa_across_layers), std::to_string(r.rank_deficient_heads)});
    return csv.str();
}

std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series, bool log_y) {
    constexpr double width = 640, height = 360, left = 70, right = 20, top = 40, bottom = 50;
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

    auto transform_y = [log_y](double y) { return log_y ? std::log10(y) : y; };
    double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
    double y_min = x_min, y_max = -x_min;
    for (const Series& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const double y = parse_number(s.y[i]);
            if (!std::isfinite(y) || (log_y && y <= 0)) continue;
            x_min = std::min(x_min, s.x[i]);
            x_max = std::max(x_max, s.x[i]);
            y_min = std::min(y_min, transform_y(y));
            y_max = std::max(y_max, transform_y(y));
        }
    if (!std::isfinite(x_min)) x_min = 0, x_max = 1, y_min = 0, y_max = 1;
    if (x_max == x_min) x_max = x_min + 1;
    if (y_max == y_min) y_max = y_min + 1;
    auto px = [&](double x) { return left + (x - x_min) / (x_max - x_min) * (width - left - right); };
    auto py = [&](double y) { return height - bottom - (transform_y(y) - y_min) / (y_max - y_min) * (height - top - bottom); };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
      << xml_escape(title) << "</text>\n";
    o << "<line x1=\"" << left << "\" y1=\"" << height - bottom << "\" x2=\"" << width - right << "\" y2=\""
      << height - bottom << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << height - bottom
      << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << width / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(x_label) << "</text>\n";
    o << "<text x=\"16\" y=\"" << height / 2 << "\" transform=\"rotate(-90 16 " << height / 2
      << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(y_label)
      << (log_y ? " (log10)" : "") << "</text>\n";
    auto tick = [&](double value_t, double y_pos) {
        const double shown = log_y ? std::pow(10.0, value_t) : value_t;
        o << "<text x=\"" << left - 6 << "\" y=\"" << y_pos + 4
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << format_number(shown) << "</text>\n";
    };
    tick(y_min, height - bottom);
    tick(y_max, top);
    o << "<text x=\"" << left << "\" y=\"" << height - bottom + 14
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << format_number(x_min) << "</text>\n";
    o << "<text x=\"" << width - right << "\" y=\"" << height - bottom + 14
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << format_number(x_max) << "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const Series& s = series[si];
        const char* color = colors[si % std::size(colors)];
        o << "<g class=\"series\" data-label=\"" << xml_escape(s.label) << "\">\n<polyline fill=\"none\" stroke=\""
          << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const double y = parse_number(s.y[i]);
            if (!std::isfinite(y) || (log_y && y <= 0)) continue;
            o << format_number(px(s.x[i])) << ',' << format_number(py(y)) << ' ';
        }
        o << "\"/>\n";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const double y = parse_number(s.y[i]);
            if (!std::isfinite(y) || (log_y && y <= 0)) continue;
            o << "<circle cx=\"" << format_number(px(s.x[i])) << "\" cy=\"" << format_number(py(y))
              << "\" r=\"2.5\" fill=\"" << color << "\" data-x=\"" << format_number(s.x[i]) << "\" data-y=\""
              << xml_escape(s.y[i]) << "\"/>\n";
        }
        o << "<text x=\"" << left + 10 << "\" y=\"" << top + 14 * (si + 1) << "\" fill=\"" << color
          << "\" font-family=\"sans-serif\" font-size=\"11\">" << xml_escape(s.label) << "</text>\n</g>\n";
    }
    o << "</svg>\n";
    return o.str();
}

}  // namespace mhc
