#pragma once

// Report tables: one row per evaluated run, one column per protocol group
// plus the protocol's aggregate columns. CSV keeps full precision (shortest
// round-trip form, so emit -> parse -> emit is byte-identical); Markdown is
// for reading and rounds to four decimals, half away from zero. Rounding is
// done on the decimal string, never by float arithmetic.

#include <fbench/error.hpp>
#include <fbench/protocols.hpp>
#include <fbench/runner.hpp>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace fbench {

struct ReportTable {
    std::string metric;     // the metric the cells hold, e.g. "F1"
    double threshold = kDefaultThreshold;
    std::string averaging;  // human-readable averaging convention
    std::vector<std::string> columns;
    std::vector<std::string> rows;  // run names
    std::vector<std::vector<double>> cells;
};

struct ReportRow {
    std::vector<std::string> columns;
    std::vector<double> values;
};

// One table row from a run result: every group's value of `metric` in group
// order, then the aggregate columns as unweighted means of their members.
inline ReportRow aggregate(const RunResult& result,
                           const std::vector<Aggregate>& aggregates,
                           const std::string& metric) {
    ReportRow row;
    std::map<std::string, double> by_group;
    for (const auto& g : result.groups) {
        const double v = g.metrics.get(metric);
        row.columns.push_back(g.name);
        row.values.push_back(v);
        by_group.emplace(g.name, v);
    }
    for (const auto& agg : aggregates) {
        if (agg.groups.empty())
            throw BenchError("MissingGroup",
                             "aggregate '" + agg.column + "' lists no groups");
        double sum = 0.0;
        for (const auto& name : agg.groups) {
            const auto it = by_group.find(name);
            if (it == by_group.end())
                throw BenchError("MissingGroup", "aggregate '" + agg.column +
                                                     "' needs group '" + name +
                                                     "' absent from the result");
            sum += it->second;
        }
        row.columns.push_back(agg.column);
        row.values.push_back(sum / static_cast<double>(agg.groups.size()));
    }
    return row;
}

inline void add_row(ReportTable& table, const std::string& run_name,
                    const ReportRow& row) {
    if (table.columns.empty() && table.cells.empty())
        table.columns = row.columns;
    else if (table.columns != row.columns)
        throw BenchError("ColumnMismatch",
                         "row '" + run_name + "' does not match table columns");
    table.rows.push_back(run_name);
    table.cells.push_back(row.values);
}

namespace detail {

inline std::string format_full(double v) {
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

// Decomposes a to_chars float string into sign, bare digits and a decimal
// exponent with value = (-1)^neg * digits * 10^exp10.
inline void split_decimal(std::string_view s, bool& neg, std::string& digits,
                          int& exp10) {
    neg = false;
    if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
        neg = s[0] == '-';
        s.remove_prefix(1);
    }
    int e = 0;
    const auto epos = s.find_first_of("eE");
    if (epos != std::string_view::npos) {
        e = std::atoi(std::string(s.substr(epos + 1)).c_str());
        s = s.substr(0, epos);
    }
    const auto dot = s.find('.');
    if (dot != std::string_view::npos) {
        e -= static_cast<int>(s.size() - dot - 1);
        digits = std::string(s.substr(0, dot)) + std::string(s.substr(dot + 1));
    } else {
        digits = std::string(s);
    }
    const auto nz = digits.find_first_not_of('0');
    if (nz == std::string::npos) {
        digits = "0";
        e = 0;
    } else {
        digits.erase(0, nz);
    }
    exp10 = e;
}

// Fixed-point rendering with `places` fractional digits, rounding the
// shortest decimal form half away from zero by string arithmetic.
inline std::string format_fixed(double v, int places) {
    bool neg = false;
    std::string digits;
    int exp10 = 0;
    split_decimal(format_full(v), neg, digits, exp10);

    std::string intpart;  // digit string of round(|v| * 10^places)
    if (digits == "0") {
        intpart = "0";
    } else {
        const int shift = exp10 + places;
        if (shift >= 0) {
            intpart = digits + std::string(static_cast<std::size_t>(shift), '0');
        } else {
            const std::size_t cut = static_cast<std::size_t>(-shift);
            std::string full = digits;
            if (cut >= full.size())
                full.insert(0, std::string(cut - full.size() + 1, '0'));
            intpart = full.substr(0, full.size() - cut);
            if (full[full.size() - cut] >= '5') {
                // half away from zero on the magnitude: bump and carry
                int i = static_cast<int>(intpart.size()) - 1;
                for (; i >= 0; --i) {
                    if (intpart[static_cast<std::size_t>(i)] != '9') {
                        ++intpart[static_cast<std::size_t>(i)];
                        break;
                    }
                    intpart[static_cast<std::size_t>(i)] = '0';
                }
                if (i < 0) intpart.insert(0, 1, '1');
            }
            const auto nz = intpart.find_first_not_of('0');
            intpart = nz == std::string::npos ? "0" : intpart.substr(nz);
        }
    }

    if (intpart.size() <= static_cast<std::size_t>(places))
        intpart.insert(0, std::string(static_cast<std::size_t>(places) + 1 -
                                          intpart.size(),
                                      '0'));
    std::string out = intpart.substr(0, intpart.size() -
                                            static_cast<std::size_t>(places)) +
                      "." + intpart.substr(intpart.size() -
                                           static_cast<std::size_t>(places));
    const bool all_zero = out.find_first_not_of("0.") == std::string::npos;
    return neg && !all_zero ? "-" + out : out;
}

inline void check_cell_name(const std::string& name) {
    if (name.empty() || name.find_first_of(",\n|#") != std::string::npos)
        throw BenchError("BadCell", "name unusable in tables: '" + name + "'");
}

}  // namespace detail

inline std::string emit_csv(const ReportTable& table) {
    std::string out = "# metric=" + table.metric +
                      " threshold=" + detail::format_full(table.threshold) +
                      " averaging=" + table.averaging + "\n";
    out += "run";
    for (const auto& col : table.columns) {
        detail::check_cell_name(col);
        out += "," + col;
    }
    out += "\n";
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        detail::check_cell_name(table.rows[r]);
        out += table.rows[r];
        for (const double v : table.cells[r]) out += "," + detail::format_full(v);
        out += "\n";
    }
    return out;
}

inline std::string emit_markdown(const ReportTable& table) {
    std::string out = "Metric: " + table.metric + " (threshold " +
                      detail::format_full(table.threshold) + ")\n" +
                      "Averaging: " + table.averaging + "\n\n";
    out += "| run |";
    for (const auto& col : table.columns) out += " " + col + " |";
    out += "\n|---|";
    for (std::size_t i = 0; i < table.columns.size(); ++i) out += "---|";
    out += "\n";
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        out += "| " + table.rows[r] + " |";
        for (const double v : table.cells[r])
            out += " " + detail::format_fixed(v, 4) + " |";
        out += "\n";
    }
    return out;
}

inline ReportTable parse_csv(const std::string& text) {
    ReportTable table;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("# metric=", 0) != 0)
        throw BenchError("ReportParse", "missing metadata comment line");
    {
        const auto tpos = line.find(" threshold=");
        const auto apos = line.find(" averaging=");
        if (tpos == std::string::npos || apos == std::string::npos || apos < tpos)
            throw BenchError("ReportParse", "malformed metadata line");
        table.metric = line.substr(9, tpos - 9);
        const std::string tstr =
            line.substr(tpos + 11, apos - (tpos + 11));
        const auto [p, ec] = std::from_chars(
            tstr.data(), tstr.data() + tstr.size(), table.threshold);
        if (ec != std::errc() || p != tstr.data() + tstr.size())
            throw BenchError("ReportParse", "bad threshold '" + tstr + "'");
        table.averaging = line.substr(apos + 11);
    }
    if (!std::getline(in, line) || line.rfind("run", 0) != 0)
        throw BenchError("ReportParse", "missing header row");
    std::size_t pos = 3;
    while (pos < line.size()) {
        if (line[pos] != ',')
            throw BenchError("ReportParse", "malformed header row");
        const auto next = line.find(',', pos + 1);
        table.columns.push_back(line.substr(
            pos + 1, (next == std::string::npos ? line.size() : next) - pos - 1));
        pos = next == std::string::npos ? line.size() : next;
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        for (;;) {
            const auto comma = line.find(',', start);
            fields.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (fields.size() != table.columns.size() + 1)
            throw BenchError("ReportParse", "row '" + fields[0] +
                                                "' has wrong cell count");
        table.rows.push_back(fields[0]);
        std::vector<double> cells;
        for (std::size_t i = 1; i < fields.size(); ++i) {
            double v = 0.0;
            const auto [p, ec] = std::from_chars(
                fields[i].data(), fields[i].data() + fields[i].size(), v);
            if (ec != std::errc() || p != fields[i].data() + fields[i].size())
                throw BenchError("ReportParse", "bad number '" + fields[i] + "'");
            cells.push_back(v);
        }
        table.cells.push_back(std::move(cells));
    }
    return table;
}

inline void save_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw BenchError("IoFailure", "cannot write " + path.string());
    out << text;
}

inline std::string load_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw BenchError("IoFailure", "cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace fbench
