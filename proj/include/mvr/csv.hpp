#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvr::csv {

inline constexpr const char* schema_version = "mvrcli-v1";

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

inline std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);  // 17 significant digits round-trips
    return buf;
}

inline void write(std::ostream& os, const Table& table) {
    if (table.columns.empty()) throw std::invalid_argument("csv: no columns");
    os << "# schema " << schema_version << " " << table.name << "\n";
    for (std::size_t c = 0; c < table.columns.size(); ++c)
        os << table.columns[c] << (c + 1 < table.columns.size() ? "," : "\n");
    for (const auto& row : table.rows) {
        if (row.size() != table.columns.size())
            throw std::invalid_argument("csv: ragged row in " + table.name);
        for (std::size_t c = 0; c < row.size(); ++c)
            os << format_value(row[c]) << (c + 1 < row.size() ? "," : "\n");
    }
}

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

inline Table read(std::istream& is) {
    Table table;
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("csv: empty input");
    std::istringstream header(line);
    std::string hash, key, version;
    header >> hash >> key >> version >> table.name;
    if (hash != "#" || key != "schema" || version != schema_version)
        throw std::runtime_error("csv: unsupported schema header: " + line);
    if (!std::getline(is, line)) throw std::runtime_error("csv: missing column row");
    table.columns = split_line(line);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto fields = split_line(line);
        if (fields.size() != table.columns.size())
            throw std::runtime_error("csv: ragged data row: " + line);
        std::vector<double> row;
        for (const auto& f : fields) {
            // strtod, not stod: stod raises out_of_range on subnormal values
            char* end = nullptr;
            const double v = std::strtod(f.c_str(), &end);
            if (f.empty() || end != f.c_str() + f.size())
                throw std::runtime_error("csv: bad number: " + f);
            row.push_back(v);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

inline void write_file(const std::string& path, const Table& table) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("csv: cannot open for writing: " + path);
    write(os, table);
}

inline Table read_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("csv: cannot open for reading: " + path);
    return read(is);
}

}  // namespace mvr::csv
