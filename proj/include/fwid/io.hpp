#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "fwid/hypotheses.hpp"
#include "fwid/mc.hpp"
#include "fwid/moments.hpp"

namespace fwid {

// Delimiter-separated ingestion: header row required, comma or tab
// autodetected, UTF-8. Columns are demeaned before the moment system is
// built. Throws IngestError with row/column diagnostics on bad cells.
struct Dataset {
    std::vector<std::string> columns;
    Eigen::MatrixXd values;  // n x p
};

Dataset read_table(std::istream& in, const std::string& source_name);
Dataset read_table_file(const std::string& path);
MomentSystem ingest(const std::string& path);
MomentSystem ingest(const Dataset& data);

void write_dataset(std::ostream& out, const Eigen::MatrixXd& values,
                   const std::vector<std::string>& columns);

// A rendered Monte Carlo table: one row per test, one column per drift
// value, mirroring the tables the harness reproduces.
struct McTable {
    std::string title;
    std::vector<std::string> row_labels;
    std::vector<double> col_values;      // the b (or b1) grid
    std::vector<std::vector<McCell>> cells;  // cells[row][col]
    std::vector<std::string> footer;
};

McTable assemble_table(const std::string& title, const std::vector<McReport>& columns);

// Machine-readable cells (4 significant digits) and an aligned text table.
void write_cells_csv(std::ostream& out, const McTable& table);
void write_text_table(std::ostream& out, const McTable& table);

std::string format_cell_value(double v);  // %.4g, the round-trip format

std::string format_interval(const ConfidenceInterval& ci);

}  // namespace fwid
