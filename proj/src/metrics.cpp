#include "dreamkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "dreamkit/errors.hpp"
#include "dreamkit/textio.hpp"

namespace dreamkit::harness {

AttrAccuracy per_attribute_accuracy(
    const std::vector<std::array<std::size_t, zoo::kAttributeCount>>& predictions,
    const std::vector<std::array<std::size_t, zoo::kAttributeCount>>& labels) {
    if (predictions.size() != labels.size())
        throw ValidationError("prediction/label length mismatch: " +
                              std::to_string(predictions.size()) + " vs " +
                              std::to_string(labels.size()));
    if (predictions.empty()) throw ValidationError("no predictions to score");
    AttrAccuracy out;
    for (std::size_t h = 0; h < zoo::kAttributeCount; ++h) {
        std::size_t hits = 0;
        for (std::size_t r = 0; r < predictions.size(); ++r)
            if (predictions[r][h] == labels[r][h]) ++hits;
        out.acc[h] = 100.0 * static_cast<double>(hits) /
                     static_cast<double>(predictions.size());
    }
    double sum = 0.0;
    for (double a : out.acc) sum += a;
    out.average = sum / zoo::kAttributeCount;
    return out;
}

double normalized_accuracy(double raw_percent, std::size_t attr) {
    if (attr >= zoo::kAttributeCount) throw ValidationError("attribute index out of range");
    const double random = 100.0 / static_cast<double>(zoo::kAttributeCardinality[attr]);
    return (raw_percent - random) / (100.0 - random);
}

AttrAccuracy random_baseline_row() {
    AttrAccuracy out;
    double sum = 0.0;
    for (std::size_t h = 0; h < zoo::kAttributeCount; ++h) {
        out.acc[h] = 100.0 / static_cast<double>(zoo::kAttributeCardinality[h]);
        sum += out.acc[h];
    }
    out.average = sum / zoo::kAttributeCount;
    return out;
}

namespace {

void check_consistent(const AttrAccuracy& acc) {
    double sum = 0.0;
    for (std::size_t h = 0; h < zoo::kAttributeCount; ++h) {
        if (!(acc.acc[h] >= 0.0 && acc.acc[h] <= 100.0))
            throw ValidationError("accuracy outside [0,100]");
        sum += acc.acc[h];
    }
    if (std::abs(sum / zoo::kAttributeCount - acc.average) > 1e-9)
        throw ValidationError("result row average does not equal the column mean");
}

}  // namespace

void ResultTable::add(ResultRow row) {
    check_consistent(row.acc);
    rows.push_back(std::move(row));
}

AttrAccuracy ResultTable::mean(const std::string& method, const std::string& target) const {
    AttrAccuracy out;
    std::size_t n = 0;
    for (const auto& row : rows) {
        if (row.method != method || row.target != target) continue;
        for (std::size_t h = 0; h < zoo::kAttributeCount; ++h) out.acc[h] += row.acc.acc[h];
        ++n;
    }
    if (!n) throw ValidationError("no rows for " + method + " on target " + target);
    double sum = 0.0;
    for (auto& a : out.acc) {
        a /= static_cast<double>(n);
        sum += a;
    }
    out.average = sum / zoo::kAttributeCount;
    return out;
}

AttrAccuracy ResultTable::mean_over_targets(const std::string& method) const {
    AttrAccuracy out;
    std::size_t n = 0;
    for (const auto& row : rows) {
        if (row.method != method) continue;
        for (std::size_t h = 0; h < zoo::kAttributeCount; ++h) out.acc[h] += row.acc.acc[h];
        ++n;
    }
    if (!n) throw ValidationError("no rows for method " + method);
    double sum = 0.0;
    for (auto& a : out.acc) {
        a /= static_cast<double>(n);
        sum += a;
    }
    out.average = sum / zoo::kAttributeCount;
    return out;
}

std::vector<std::string> ResultTable::methods() const {
    std::vector<std::string> out;
    for (const auto& row : rows)
        if (std::find(out.begin(), out.end(), row.method) == out.end())
            out.push_back(row.method);
    return out;
}

std::vector<std::string> ResultTable::targets() const {
    std::vector<std::string> out;
    for (const auto& row : rows)
        if (std::find(out.begin(), out.end(), row.target) == out.end())
            out.push_back(row.target);
    return out;
}

void write_table_csv(const ResultTable& table, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw ValidationError("cannot open " + path + " for writing");
    os << "method,target,trial";
    for (std::size_t col : kReportOrder) os << ',' << zoo::kAttributeNames[col];
    os << ",avg\n";
    for (const auto& row : table.rows) {
        check_consistent(row.acc);
        os << row.method << ',' << row.target << ',' << row.trial;
        for (std::size_t col : kReportOrder) os << ',' << format_f64(row.acc.acc[col]);
        os << ',' << format_f64(row.acc.average) << "\n";
    }
    if (!os) throw ValidationError("write failed: " + path);
}

ResultTable read_table_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open table " + path);
    std::string line;
    if (!std::getline(is, line)) throw ValidationError("empty table " + path);
    ResultTable table;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto tok = split_on(line, ',');
        if (tok.size() != 3 + zoo::kAttributeCount + 1)
            throw ValidationError("table line " + std::to_string(line_no) +
                                  ": wrong field count");
        ResultRow row;
        row.method = tok[0];
        row.target = tok[1];
        row.trial = static_cast<int>(parse_u64(tok[2]));
        for (std::size_t c = 0; c < zoo::kAttributeCount; ++c)
            row.acc.acc[kReportOrder[c]] = parse_f64(tok[3 + c]);
        row.acc.average = parse_f64(tok.back());
        check_consistent(row.acc);
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string render_table_text(const ResultTable& table) {
    std::string out;
    char buf[64];
    auto line = [&](const std::string& label, const AttrAccuracy& acc) {
        std::snprintf(buf, sizeof(buf), "%-10s", label.c_str());
        out += buf;
        for (std::size_t col : kReportOrder) {
            std::snprintf(buf, sizeof(buf), " %7.2f", acc.acc[col]);
            out += buf;
        }
        std::snprintf(buf, sizeof(buf), " %7.2f\n", acc.average);
        out += buf;
    };
    auto header = [&]() {
        std::snprintf(buf, sizeof(buf), "%-10s", "method");
        out += buf;
        for (std::size_t col : kReportOrder) {
            std::snprintf(buf, sizeof(buf), " %7s",
                          (std::string("#") + zoo::kAttributeNames[col]).c_str());
            out += buf;
        }
        std::snprintf(buf, sizeof(buf), " %7s\n", "Avg");
        out += buf;
    };

    for (const auto& target : table.targets()) {
        out += "target domain " + target + "\n";
        header();
        line("Random", random_baseline_row());
        for (const auto& method : table.methods()) {
            bool has = false;
            for (const auto& row : table.rows)
                if (row.method == method && row.target == target) has = true;
            if (has) line(method, table.mean(method, target));
        }
        out += "\n";
    }
    return out;
}

}  // namespace dreamkit::harness
