#pragma once

#include <array>
#include <string>
#include <vector>

#include "dreamkit/attributes.hpp"

namespace dreamkit::harness {

// Report column order (#act, #drop, #pool, #ks, #conv, #fc, #opt, #bs, #bn)
// as indices into the attribute order used everywhere else.
constexpr std::array<std::size_t, zoo::kAttributeCount> kReportOrder = {0, 1, 2, 4, 5,
                                                                        6, 7, 8, 3};

struct AttrAccuracy {
    std::array<double, zoo::kAttributeCount> acc{};  // percent, attribute order
    double average = 0.0;                            // arithmetic mean of the 9
};

// Exact-match accuracy per attribute head, in percent, plus the average.
AttrAccuracy per_attribute_accuracy(
    const std::vector<std::array<std::size_t, zoo::kAttributeCount>>& predictions,
    const std::vector<std::array<std::size_t, zoo::kAttributeCount>>& labels);

// (raw - random) / (100 - random), random = 100 / |value set|.
double normalized_accuracy(double raw_percent, std::size_t attr);

// The analytic random-choice row: 100 / |value set| per attribute.
AttrAccuracy random_baseline_row();

struct ResultRow {
    std::string method;
    std::string target;  // target domain id
    int trial = 0;
    AttrAccuracy acc;
};

struct ResultTable {
    std::vector<ResultRow> rows;

    void add(ResultRow row);
    // mean over trials for one (method, target); std via `stddev`
    AttrAccuracy mean(const std::string& method, const std::string& target) const;
    AttrAccuracy mean_over_targets(const std::string& method) const;
    std::vector<std::string> methods() const;
    std::vector<std::string> targets() const;
};

// CSV with report column order; every emission re-derives the average from
// the nine columns and refuses to write an inconsistent row.
void write_table_csv(const ResultTable& table, const std::string& path);
ResultTable read_table_csv(const std::string& path);

// Aligned text table in the report column order, one block per target,
// aggregated over trials, with the Random row included.
std::string render_table_text(const ResultTable& table);

}  // namespace dreamkit::harness
