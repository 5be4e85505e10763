#include "fwid/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "fwid/errors.hpp"

namespace fwid {

namespace {

std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, delim)) out.push_back(field);
    if (!line.empty() && line.back() == delim) out.push_back("");
    return out;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

Dataset read_table(std::istream& in, const std::string& source_name) {
    std::string header;
    if (!std::getline(in, header))
        throw IngestError(source_name + ": empty input (header row required)");
    const char delim = std::count(header.begin(), header.end(), '\t') >
                               std::count(header.begin(), header.end(), ',')
                           ? '\t'
                           : ',';
    Dataset ds;
    for (const auto& c : split(header, delim)) ds.columns.push_back(trim(c));
    const int p = static_cast<int>(ds.columns.size());
    if (p < 1) throw IngestError(source_name + ": no columns in header");

    std::vector<std::vector<double>> rows;
    std::string line;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto fields = split(line, delim);
        if (static_cast<int>(fields.size()) != p)
            throw IngestError(source_name + ": row " + std::to_string(lineno) + " has " +
                              std::to_string(fields.size()) + " fields, expected " +
                              std::to_string(p));
        std::vector<double> vals(p);
        for (int j = 0; j < p; ++j) {
            const std::string f = trim(fields[j]);
            if (f.empty())
                throw IngestError(source_name + ": missing value at row " +
                                  std::to_string(lineno) + ", column '" + ds.columns[j] + "'");
            char* end = nullptr;
            vals[j] = std::strtod(f.c_str(), &end);
            if (end == f.c_str() || *end != '\0' || !std::isfinite(vals[j]))
                throw IngestError(source_name + ": non-numeric cell '" + f + "' at row " +
                                  std::to_string(lineno) + ", column '" + ds.columns[j] + "'");
        }
        rows.push_back(std::move(vals));
    }
    const int n = static_cast<int>(rows.size());
    if (n == 0) throw IngestError(source_name + ": no data rows");
    ds.values.resize(n, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) ds.values(i, j) = rows[i][j];
    return ds;
}

Dataset read_table_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open " + path);
    return read_table(in, path);
}

MomentSystem ingest(const Dataset& data) {
    const int n = static_cast<int>(data.values.rows());
    const int p = static_cast<int>(data.values.cols());
    if (n <= moment_dim(p))
        throw IngestError("ingest: need n > p(p+1)/2 rows (have n=" + std::to_string(n) +
                          ", p=" + std::to_string(p) + ")");
    for (int j = 0; j < p; ++j) {
        const double mean = data.values.col(j).mean();
        if ((data.values.col(j).array() - mean).abs().maxCoeff() == 0.0)
            throw IngestError("ingest: column '" + data.columns[j] +
                              "' is constant; its moment rows would be singular");
    }
    return make_moment_system(data.values, /*demean=*/true);
}

MomentSystem ingest(const std::string& path) { return ingest(read_table_file(path)); }

void write_dataset(std::ostream& out, const Eigen::MatrixXd& values,
                   const std::vector<std::string>& columns) {
    for (size_t j = 0; j < columns.size(); ++j)
        out << columns[j] << (j + 1 < columns.size() ? ',' : '\n');
    out << std::setprecision(17);
    for (int i = 0; i < values.rows(); ++i)
        for (int j = 0; j < values.cols(); ++j)
            out << values(i, j) << (j + 1 < values.cols() ? ',' : '\n');
}

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

std::string format_cell_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

McTable assemble_table(const std::string& title, const std::vector<McReport>& columns) {
    if (columns.empty()) throw InvalidParameterError("assemble_table: no columns");
    McTable t;
    t.title = title;
    for (const auto& rep : columns) t.col_values.push_back(rep.b1);
    for (const auto& cell : columns.front().cells) t.row_labels.push_back(cell.row);
    t.cells.resize(t.row_labels.size());
    for (size_t r = 0; r < t.row_labels.size(); ++r) {
        for (const auto& rep : columns) {
            if (rep.cells.size() != t.row_labels.size() ||
                rep.cells[r].row != t.row_labels[r])
                throw InvalidParameterError("assemble_table: column reports do not align");
            t.cells[r].push_back(rep.cells[r]);
        }
    }
    const auto& first = columns.front();
    std::ostringstream f1, f2;
    f1 << "dgp=" << first.dgp << " n=" << first.n << " B=" << first.B
       << " alpha=" << first.alpha << " seed=" << first.seed;
    t.footer.push_back(f1.str());
    int failures = 0;
    for (const auto& rep : columns)
        for (const auto& c : rep.cells) failures = std::max(failures, c.failures);
    f2 << "max replication failures per cell: " << failures
       << "; MC standard errors in the cells file";
    t.footer.push_back(f2.str());
    return t;
}

void write_cells_csv(std::ostream& out, const McTable& table) {
    out << "row,b,value,mc_se,used,failures\n";
    for (size_t r = 0; r < table.row_labels.size(); ++r)
        for (size_t c = 0; c < table.col_values.size(); ++c) {
            const McCell& cell = table.cells[r][c];
            out << table.row_labels[r] << ',' << format_cell_value(table.col_values[c]) << ','
                << format_cell_value(cell.value) << ',' << format_cell_value(cell.mc_se) << ','
                << cell.used << ',' << cell.failures << '\n';
        }
}

void write_text_table(std::ostream& out, const McTable& table) {
    constexpr int w = 9;
    out << table.title << '\n';
    out << std::left << std::setw(12) << "Test";
    for (double b : table.col_values)
        out << std::right << std::setw(w) << ("b=" + format_cell_value(b));
    out << '\n';
    for (size_t r = 0; r < table.row_labels.size(); ++r) {
        out << std::left << std::setw(12) << table.row_labels[r];
        const bool pct = table.row_labels[r] != "Ave. Len.";
        for (size_t c = 0; c < table.col_values.size(); ++c) {
            std::ostringstream v;
            v << std::fixed << std::setprecision(pct ? 1 : 2) << table.cells[r][c].value;
            out << std::right << std::setw(w) << v.str();
        }
        out << '\n';
    }
    for (const auto& f : table.footer) out << "# " << f << '\n';
}

std::string format_interval(const ConfidenceInterval& ci) {
    if (ci.empty) return "empty (all grid points rejected)";
    std::ostringstream s;
    s << std::fixed << std::setprecision(2);
    for (size_t i = 0; i < ci.intervals.size(); ++i) {
        if (i) s << " U ";
        s << '[' << ci.intervals[i].first << ',' << ci.intervals[i].second << ']';
    }
    if (ci.truncated_lo || ci.truncated_hi) s << " (truncated at the grid bound)";
    s << "  length=" << ci.length;
    return s.str();
}

}  // namespace fwid
