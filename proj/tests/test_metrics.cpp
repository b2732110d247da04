#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "dreamkit/metrics.hpp"
#include "dreamkit/textio.hpp"

using namespace dreamkit;
using namespace dreamkit::harness;

TEST_SUITE_BEGIN("metrics");

namespace {

std::array<std::size_t, 9> labels_of(std::size_t a) {
    std::array<std::size_t, 9> out{};
    for (std::size_t h = 0; h < 9; ++h) out[h] = a % zoo::kAttributeCardinality[h];
    return out;
}

}  // namespace

TEST_CASE("random baseline row matches the analytic values") {
    auto row = random_baseline_row();
    const double expect[9] = {25.0, 50.0, 50.0, 50.0, 50.0, 100.0 / 3, 100.0 / 3,
                              100.0 / 3, 100.0 / 3};
    // attribute order: act, drop, pool, bn, ks, conv, fc, opt, bs
    const double want[9] = {25.0, 50.0, 50.0, 50.0, 50.0, 100.0 / 3, 100.0 / 3,
                            100.0 / 3, 100.0 / 3};
    (void)expect;
    for (std::size_t h = 0; h < 9; ++h)
        CHECK(row.acc[h] == doctest::Approx(want[h]).epsilon(1e-12));
    CHECK(std::abs(row.average - 39.81) <= 0.005);
    // report order puts batchnorm last: 25,50,50,50,33.33,...,50
    CHECK(row.acc[kReportOrder[0]] == doctest::Approx(25.0));
    CHECK(row.acc[kReportOrder[3]] == doctest::Approx(50.0));   // ks
    CHECK(row.acc[kReportOrder[4]] == doctest::Approx(100.0 / 3));  // conv
    CHECK(row.acc[kReportOrder[8]] == doctest::Approx(50.0));   // bn
}

TEST_CASE("per-attribute accuracy counts exact matches") {
    std::vector<std::array<std::size_t, 9>> labels = {labels_of(1), labels_of(5)};
    auto preds = labels;
    auto acc = per_attribute_accuracy(preds, labels);
    for (double a : acc.acc) CHECK(a == 100.0);
    CHECK(acc.average == 100.0);

    preds[1][0] = (preds[1][0] + 1) % 4;  // one of two models wrong on one head
    acc = per_attribute_accuracy(preds, labels);
    CHECK(acc.acc[0] == 50.0);
    for (std::size_t h = 1; h < 9; ++h) CHECK(acc.acc[h] == 100.0);

    CHECK_THROWS_AS(per_attribute_accuracy(preds, {labels_of(1)}), ValidationError);
}

TEST_CASE("accuracy matches a recount oracle over the saved prediction file") {
    Rng rng(3);
    std::vector<std::array<std::size_t, 9>> labels, preds;
    for (int r = 0; r < 37; ++r) {
        labels.push_back(labels_of(rng.below(5184)));
        auto p = labels.back();
        for (std::size_t h = 0; h < 9; ++h)
            if (rng.uniform() < 0.3) p[h] = rng.below(zoo::kAttributeCardinality[h]);
        preds.push_back(p);
    }
    auto acc = per_attribute_accuracy(preds, labels);

    // save to a file, recount with a line parser
    const auto path = (std::filesystem::temp_directory_path() /
                       ("dreamkit_preds_" + std::to_string(::getpid()) + ".csv"))
                          .string();
    {
        std::ofstream os(path);
        for (std::size_t r = 0; r < labels.size(); ++r) {
            for (std::size_t h = 0; h < 9; ++h)
                os << preds[r][h] << (h + 1 < 9 ? "," : ";");
            for (std::size_t h = 0; h < 9; ++h)
                os << labels[r][h] << (h + 1 < 9 ? "," : "\n");
        }
    }
    std::ifstream is(path);
    std::string line;
    std::array<int, 9> hits{};
    int rows = 0;
    while (std::getline(is, line)) {
        auto halves = split_on(line, ';');
        auto p = split_on(halves[0], ',');
        auto l = split_on(halves[1], ',');
        for (std::size_t h = 0; h < 9; ++h)
            if (p[h] == l[h]) hits[h]++;
        ++rows;
    }
    REQUIRE(rows == 37);
    for (std::size_t h = 0; h < 9; ++h)
        CHECK(acc.acc[h] == doctest::Approx(100.0 * hits[h] / 37.0).epsilon(1e-12));
    std::filesystem::remove(path);
}

TEST_CASE("normalized accuracy rescales against chance") {
    CHECK(normalized_accuracy(25.0, 0) == doctest::Approx(0.0));   // act at chance
    CHECK(normalized_accuracy(100.0, 0) == doctest::Approx(1.0));
    CHECK(normalized_accuracy(62.5, 1) == doctest::Approx(0.25));  // binary head
    CHECK(normalized_accuracy(100.0 / 3, 5) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(normalized_accuracy(20.0, 0) < 0.0);
}

TEST_CASE("result tables aggregate and render consistently") {
    ResultTable table;
    for (int trial = 0; trial < 3; ++trial) {
        ResultRow row;
        row.method = "dream";
        row.target = "0";
        row.trial = trial;
        for (std::size_t h = 0; h < 9; ++h)
            row.acc.acc[h] = 40.0 + static_cast<double>(trial) + static_cast<double>(h);
        double sum = 0.0;
        for (double a : row.acc.acc) sum += a;
        row.acc.average = sum / 9.0;
        table.add(row);
    }
    auto mean = table.mean("dream", "0");
    CHECK(mean.acc[0] == doctest::Approx(41.0));
    CHECK(mean.average == doctest::Approx((41.0 + 49.0) / 2.0));

    // inconsistent averages are refused on add
    ResultRow bad;
    bad.method = "x";
    bad.target = "0";
    bad.acc.acc.fill(50.0);
    bad.acc.average = 10.0;
    CHECK_THROWS_AS(table.add(bad), ValidationError);

    const auto path = (std::filesystem::temp_directory_path() /
                       ("dreamkit_table_" + std::to_string(::getpid()) + ".csv"))
                          .string();
    write_table_csv(table, path);
    auto loaded = read_table_csv(path);
    REQUIRE(loaded.rows.size() == table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        CHECK(loaded.rows[r].method == table.rows[r].method);
        CHECK(loaded.rows[r].acc.acc == table.rows[r].acc.acc);  // bit-exact floats
    }
    // header carries the report column order with bn last
    std::ifstream is(path);
    std::string header;
    std::getline(is, header);
    CHECK(header == "method,target,trial,act,drop,pool,ks,conv,fc,opt,bs,bn,avg");

    auto text = render_table_text(table);
    CHECK(text.find("Random") != std::string::npos);
    CHECK(text.find("39.81") != std::string::npos);
    CHECK(text.find("dream") != std::string::npos);
    std::filesystem::remove(path);
}

TEST_SUITE_END();
