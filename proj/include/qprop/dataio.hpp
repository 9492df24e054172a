#pragma once

// CSV helpers shared by the CLI and the NTK data path. Numeric output uses
// 17 significant digits so emitted files round-trip doubles exactly.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qprop/errors.hpp"

namespace qprop {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct LabeledData {
    Eigen::MatrixXd features;  // points x features
    std::vector<int> labels;
};

/// Reads rows of numeric feature columns with a final integer label column.
/// Lines starting with '#' and an optional non-numeric header row are
/// skipped. Malformed cells report the offending row.
inline LabeledData read_labeled_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_labeled_csv: cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::string line;
    int lineno = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> cells;
        std::stringstream ss(line);
        std::string cell;
        bool bad = false;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                const double v = std::stod(cell, &used);
                while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used])))
                    ++used;
                if (used != cell.size()) throw std::invalid_argument(cell);
                cells.push_back(v);
            } catch (const std::exception&) {
                bad = true;
                break;
            }
        }
        if (bad) {
            if (rows.empty() && lineno == 1) continue;  // header row
            throw std::domain_error("read_labeled_csv: non-numeric value at row " +
                                    std::to_string(lineno));
        }
        if (cells.size() < 2)
            throw std::domain_error("read_labeled_csv: row " + std::to_string(lineno) +
                                    " needs at least one feature and a label");
        if (width == 0) width = cells.size();
        if (cells.size() != width)
            throw std::domain_error("read_labeled_csv: ragged row " + std::to_string(lineno));
        labels.push_back(static_cast<int>(cells.back()));
        cells.pop_back();
        rows.push_back(std::move(cells));
    }
    if (rows.empty()) throw std::domain_error("read_labeled_csv: no data rows in " + path);
    LabeledData out;
    out.features.resize(static_cast<Eigen::Index>(rows.size()),
                        static_cast<Eigen::Index>(width - 1));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j + 1 < width; ++j) out.features(i, j) = rows[i][j];
    out.labels = std::move(labels);
    return out;
}

inline void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) os << ',';
            os << format_double(m(i, j));
        }
        os << '\n';
    }
}

}  // namespace qprop
