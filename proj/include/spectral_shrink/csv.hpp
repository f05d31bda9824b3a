#pragma once

// Plain CSV matrix I/O: row-major, comma separated, no header by default.
// Numbers are written in the shortest decimal form that round-trips, so
// write-then-read reproduces values exactly.

#include <Eigen/Dense>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace spectral_shrink {

struct CsvParseError : std::runtime_error {
    CsvParseError(const std::string& what, int line, int column)
        : std::runtime_error(what + " (line " + std::to_string(line) + ", column " +
                             std::to_string(column) + ")"),
          line(line),
          column(column) {}
    int line;
    int column;
};

inline std::string format_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

inline Eigen::MatrixXd read_csv_matrix(const std::string& path, bool skip_header = false) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    std::vector<std::vector<double>> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (skip_header && line_no == 1) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        int column = 0;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            ++column;
            std::size_t comma = line.find(',', pos);
            if (comma == std::string::npos) comma = line.size();
            std::string field = line.substr(pos, comma - pos);
            // Trim surrounding blanks.
            const auto b = field.find_first_not_of(" \t");
            const auto e = field.find_last_not_of(" \t");
            if (b == std::string::npos)
                throw CsvParseError("empty field", line_no, column);
            field = field.substr(b, e - b + 1);
            char* end = nullptr;
            const double v = std::strtod(field.c_str(), &end);
            if (end == field.c_str() || *end != '\0')
                throw CsvParseError("not a number: '" + field + "'", line_no, column);
            row.push_back(v);
            pos = comma + 1;
            if (comma == line.size()) break;
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw CsvParseError("ragged row: expected " + std::to_string(rows.front().size()) +
                                    " fields, got " + std::to_string(row.size()),
                                line_no, 1);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("'" + path + "' contains no data");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return m;
}

inline void write_csv_matrix(const std::string& path, const Eigen::MatrixXd& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace spectral_shrink
