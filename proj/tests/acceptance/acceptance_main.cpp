// Acceptance suite: runs every acceptance criterion on the desk-scale
// default configuration and prints one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "dreamkit/baselines.hpp"
#include "dreamkit/harness.hpp"
#include "dreamkit/textio.hpp"
#include "gradcheck_all.hpp"
#include "oracles.hpp"

using namespace dreamkit;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int criterion, const std::string& name, bool pass,
            const std::string& detail) {
    std::printf("[%s] criterion %d: %s — %s\n", pass ? "PASS" : "FAIL", criterion,
                name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

double elapsed_s(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
}

std::string file_bytes(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) return {};
    return std::string((std::istreambuf_iterator<char>(is)), {});
}

}  // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    ToolkitConfig cfg = default_config();
    const fs::path root = fs::temp_directory_path() / "dreamkit_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);

    // ---- criterion 1: gradient-check battery -------------------------------
    {
        const auto t = std::chrono::steady_clock::now();
        auto outcomes = gradcheck::run_battery(20);
        double worst = 0.0;
        std::string worst_name = "-";
        std::size_t coords = 0;
        for (const auto& o : outcomes) {
            coords += o.coords;
            if (o.max_rel_err > worst) {
                worst = o.max_rel_err;
                worst_name = o.name;
            }
        }
        const double secs = elapsed_s(t);
        report(1, "gradient checks", worst < 1e-4 && secs < 60.0,
               "max rel err " + format_f64(worst) + " (" + worst_name + ") over " +
                   std::to_string(coords) + " coordinates in " + format_f64(secs) +
                   " s");
    }

    // ---- criterion 2: optimizer closed forms --------------------------------
    {
        bool pass = true;
        std::string detail = "SGD/Adam/RMSprop 3-step trajectories";
        const std::vector<double> grads = {1.0, -0.5, 0.25};
        auto scalar_net = [](double w0) {
            Rng rng(0);
            auto net = nn::Network::build({nn::LayerSpec::dense(1, 1)}, {1},
                                          nn::InitSpec::kaiming(), rng);
            net.params().layers[0].find("w").value.data[0] = w0;
            net.params().layers[0].find("b").value.data[0] = 0.0;
            return net;
        };
        auto run3 = [&](nn::OptKind kind, double lr,
                        const std::vector<double>& expect) {
            auto net = scalar_net(0.7);
            auto opt = nn::OptimizerState::make(kind, lr, net.params());
            for (std::size_t t = 0; t < grads.size(); ++t) {
                net.params().zero_grad();
                net.params().layers[0].find("w").grad.data[0] = grads[t];
                nn::optimizer_step(opt, net.params());
                const double w = net.params().layers[0].find("w").value.data[0];
                if (std::abs(w - expect[t]) > 1e-12) pass = false;
            }
        };
        run3(nn::OptKind::SGD, 0.05, oracles::sgd_trajectory(0.7, 0.05, grads));
        run3(nn::OptKind::Adam, 0.1,
             oracles::adam_trajectory(0.7, 0.1, 0.9, 0.999, 1e-8, grads));
        run3(nn::OptKind::RMSprop, 0.01,
             oracles::rmsprop_trajectory(0.7, 0.01, 0.99, 1e-8, grads));
        // the documented Adam first-step value
        {
            auto net = scalar_net(0.0);
            auto opt = nn::OptimizerState::make(nn::OptKind::Adam, 0.1, net.params());
            net.params().zero_grad();
            net.params().layers[0].find("w").grad.data[0] = 1.0;
            nn::optimizer_step(opt, net.params());
            const double w = net.params().layers[0].find("w").value.data[0];
            if (std::abs(w - (-0.1 / (1.0 + 1e-8))) > 1e-12) pass = false;
        }
        report(2, "optimizer oracles", pass, detail);
    }

    // ---- criterion 3: grid and partition exactness ---------------------------
    {
        auto grid = zoo::enumerate_grid();
        std::set<std::string> distinct;
        for (const auto& a : grid) distinct.insert(a.csv());
        bool pass = grid.size() == 5184 && distinct.size() == 5184;

        Rng rng(1);
        for (int trial = 0; trial < 200 && pass; ++trial) {
            const std::size_t n = 2 + rng.below(9);
            std::vector<std::string> domains;
            for (std::size_t i = 0; i < n; ++i)
                domains.push_back(std::to_string(rng.below(4)));
            std::set<std::string> ds(domains.begin(), domains.end());
            if (ds.size() < 2) continue;
            for (const auto& dom : ds) {
                auto part = dream::partition_true_false(domains, dom);
                std::vector<int> cover(n, 0);
                for (auto i : part.true_idx) {
                    cover[i]++;
                    if (domains[i] != dom) pass = false;
                }
                for (auto i : part.false_idx) {
                    cover[i]++;
                    if (domains[i] == dom) pass = false;
                }
                for (int c : cover)
                    if (c != 1) pass = false;
            }
        }
        report(3, "grid and partition exactness", pass,
               std::to_string(distinct.size()) + " distinct grid members; partition "
               "disjoint-and-covering on exhaustive small batches");
    }

    // ---- criterion 4: random baseline row ------------------------------------
    {
        auto row = harness::random_baseline_row();
        const double want[9] = {25.0, 50.0, 50.0, 50.0, 100.0 / 3.0, 100.0 / 3.0,
                                100.0 / 3.0, 100.0 / 3.0, 50.0};
        bool pass = true;
        for (std::size_t c = 0; c < 9; ++c)
            if (std::abs(row.acc[harness::kReportOrder[c]] - want[c]) > 1e-9)
                pass = false;
        if (std::abs(row.average - 39.81) > 0.005) pass = false;
        report(4, "random baseline exactness", pass,
               "row avg " + format_f64(row.average));
    }

    // ---- criterion 5: structural reduction to KENNEN* ------------------------
    {
        // small synthetic fingerprint set is enough for a bit-level contract
        Rng rng(77);
        fp::FingerprintSet train;
        for (int r = 0; r < 24; ++r) {
            fp::Fingerprint row;
            row.model_id = "m" + std::to_string(r);
            row.domain = std::to_string(r % 2);
            row.labeled = true;
            row.attrs = zoo::AttributeVector::from_grid_index(
                static_cast<std::size_t>(rng.below(zoo::kGridSize)));
            row.class_count = 4;
            row.n_queries = 5;
            for (int q = 0; q < 5; ++q) {
                double block[4];
                double sum = 0;
                for (double& v : block) {
                    v = rng.uniform(0.05, 1.0);
                    sum += v;
                }
                for (double v : block) row.values.push_back(v / sum);
            }
            train.add(std::move(row));
        }
        dream::DreamConfig dc;
        dc.use_gan = false;
        dc.lambda = 0.0;
        dc.beta = 1e-3;
        dc.batch = 8;
        dc.epochs = 12;
        dc.seed = 99;
        auto a = dream::train_reverse(train, dc);
        baselines::BaselineConfig bc;
        bc.lr = 1e-3;
        bc.batch = 8;
        bc.epochs = 12;
        bc.seed = 99;
        auto b = baselines::train_kennen(train, bc);
        bool pass = a.pipeline.trunk.params().bit_equal(b.pipeline.trunk.params());
        for (std::size_t h = 0; h < a.pipeline.heads.size(); ++h)
            if (!a.pipeline.heads[h].params().bit_equal(b.pipeline.heads[h].params()))
                pass = false;
        report(5, "dream(lambda=0, no discriminators) == KENNEN*", pass,
               "trunk and all 9 heads bit-identical under a shared seed");
    }

    // ---- criteria 6-10 share the desk-scale end-to-end run --------------------
    const fs::path ws = root / "desk";
    harness::ExperimentPlan plan = harness::plan_from_config(cfg);
    plan.methods = {"dream", "kennen", "random"};

    harness::ResultTable table;
    double run_minutes = 0.0;
    bool run_ok = true;
    std::string run_err;
    {
        const auto t = std::chrono::steady_clock::now();
        try {
            table = harness::run_lodo(plan, cfg, ws.string());
        } catch (const std::exception& e) {
            run_ok = false;
            run_err = e.what();
        }
        run_minutes = elapsed_s(t) / 60.0;
    }

    // criterion 6: LODO trend
    {
        bool pass = run_ok;
        std::string detail;
        if (run_ok) {
            const double dream_avg = table.mean_over_targets("dream").average;
            const double kennen_avg = table.mean_over_targets("kennen").average;
            const double random_avg = harness::random_baseline_row().average;
            pass = dream_avg >= random_avg + 5.0 && dream_avg > kennen_avg &&
                   run_minutes <= 45.0;
            detail = "dream " + format_f64(dream_avg) + " vs kennen " +
                     format_f64(kennen_avg) + " vs random " + format_f64(random_avg) +
                     "; full run " + format_f64(run_minutes) + " min";
        } else {
            detail = "run failed: " + run_err;
        }
        report(6, "end-to-end LODO trend", pass, detail);
    }

    // criterion 7: domain-invariance probe gap per rotation
    {
        bool pass = run_ok;
        std::string detail;
        if (run_ok) {
            auto data = harness::ensure_data(cfg, ws.string());
            auto zoo_set = harness::ensure_zoo(cfg, data, ws.string(),
                                               effective_jobs(cfg.harness.jobs));
            for (int target : plan.targets) {
                auto rot = harness::collect_rotation(cfg, data, zoo_set, target,
                                                     ws.string(), "fp",
                                                     effective_jobs(cfg.harness.jobs),
                                                     plan.seed);
                auto pipe = dream::load_pipeline(
                    (ws / "runs" / ("target_" + std::to_string(target)) / "dream.pipe")
                        .string());
                auto rep = harness::invariance_probe(rot, pipe, plan.seed,
                                                     cfg.harness.probe);
                const double gap = rep.raw_accuracy - rep.embed_accuracy;
                detail += "t" + std::to_string(target) + ": raw " +
                          format_f64(rep.raw_accuracy) + " embed " +
                          format_f64(rep.embed_accuracy) + "; ";
                if (gap < 0.10) pass = false;
            }
        } else {
            detail = "skipped: end-to-end run failed";
        }
        report(7, "domain-invariance probe gap >= 10 points", pass, detail);
    }

    // criterion 8: classifier-loss convergence on the default run
    {
        bool pass = run_ok;
        std::string detail;
        if (run_ok) {
            for (int target : plan.targets) {
                std::ifstream is(ws / "runs" / ("target_" + std::to_string(target)) /
                                 "dream_history.csv");
                std::string line;
                std::getline(is, line);  // header
                std::vector<double> losses;
                while (std::getline(is, line)) {
                    auto tok = split_on(line, ',');
                    if (tok.size() >= 4) losses.push_back(parse_f64(tok[3]));
                }
                if (losses.size() < 10) {
                    pass = false;
                    continue;
                }
                const std::size_t tail = std::max<std::size_t>(1, losses.size() / 10);
                double tail_mean = 0.0;
                for (std::size_t i = losses.size() - tail; i < losses.size(); ++i)
                    tail_mean += losses[i];
                tail_mean /= static_cast<double>(tail);
                detail += "t" + std::to_string(target) + ": " +
                          format_f64(losses.front()) + " -> " + format_f64(tail_mean) +
                          "; ";
                if (!(tail_mean < 0.5 * losses.front())) pass = false;
            }
        } else {
            detail = "skipped: end-to-end run failed";
        }
        report(8, "classifier-loss convergence", pass, detail);
    }

    // criterion 9: determinism and formats
    {
        bool pass = run_ok;
        std::string detail;
        if (run_ok) {
            const fs::path ws2 = root / "desk_rerun";
            try {
                harness::run_lodo(plan, cfg, ws2.string());
                const std::string a = file_bytes(ws / "runs" / "results.csv");
                const std::string b = file_bytes(ws2 / "runs" / "results.csv");
                const std::string sa = file_bytes(ws / "runs" / "summary.csv");
                const std::string sb = file_bytes(ws2 / "runs" / "summary.csv");
                const std::string fa = file_bytes(ws / "fp" / "target_0" / "train.fp");
                const std::string fb = file_bytes(ws2 / "fp" / "target_0" / "train.fp");
                pass = !a.empty() && a == b && sa == sb && fa == fb;
                detail = "rerun tables byte-identical: " +
                         std::string(pass ? "yes" : "no");

                // fingerprint round trip is bit-exact
                auto set = fp::read_fingerprints(
                    (ws / "fp" / "target_0" / "train.fp").string());
                const fs::path copy = root / "fp_copy.fp";
                fp::write_fingerprints(copy.string(), set);
                if (file_bytes(copy) != fa) {
                    pass = false;
                    detail += "; fingerprint rewrite differs";
                }
                // corrupted rows are rejected with row diagnostics
                auto poisoned = set;
                poisoned.rows[2].values[0] += 0.5;
                bool caught = false;
                try {
                    fp::write_fingerprints((root / "bad.fp").string(), poisoned);
                } catch (const ValidationError& e) {
                    caught = std::string(e.what()).find("row 2") != std::string::npos;
                }
                if (!caught) {
                    pass = false;
                    detail += "; corruption not flagged";
                }
                // pipeline checkpoint round trip
                auto pipe = dream::load_pipeline(
                    (ws / "runs" / "target_0" / "dream.pipe").string());
                const fs::path pcopy = root / "pipe_copy.pipe";
                dream::save_pipeline(pipe, pcopy.string());
                auto pipe2 = dream::load_pipeline(pcopy.string());
                if (!pipe2.trunk.params().bit_equal(pipe.trunk.params())) {
                    pass = false;
                    detail += "; pipeline round trip differs";
                }
                fs::remove_all(ws2);
            } catch (const std::exception& e) {
                pass = false;
                detail = std::string("rerun failed: ") + e.what();
            }
        } else {
            detail = "skipped: end-to-end run failed";
        }
        report(9, "determinism and formats", pass, detail);
    }

    // criterion 10: domain-shift modes
    {
        bool pass = run_ok;
        std::string detail;
        if (run_ok) {
            try {
                // disjoint-combination split: exhaustive emptiness assertion runs
                // inside run_domain_shift
                ToolkitConfig cfg10 = cfg;
                cfg10.harness.trials = 1;
                cfg10.harness.methods = {"kennen"};
                harness::ExperimentPlan p10 = harness::plan_from_config(cfg10);
                p10.targets = {0};
                p10.mode = harness::ExperimentPlan::Mode::DisjointCombos;
                harness::run_domain_shift(p10, cfg10, ws.string());
                detail = "disjoint split assertion passed";

                // equal class subsets degenerate to the standard run
                harness::ExperimentPlan p10b = harness::plan_from_config(cfg10);
                p10b.targets = {0};
                p10b.mode = harness::ExperimentPlan::Mode::ClassSubset;
                p10b.class_subset.clear();
                for (int c = 0; c < cfg.data.class_count; ++c)
                    p10b.class_subset.push_back(c);
                auto base = harness::run_lodo(p10b, cfg10, ws.string(), "runs_c10");
                p10b.mode = harness::ExperimentPlan::Mode::ClassSubset;
                auto shifted = harness::run_domain_shift(p10b, cfg10, ws.string());
                bool same = shifted.rows.size() == base.rows.size();
                if (same)
                    for (std::size_t r = 0; r < base.rows.size(); ++r)
                        if (shifted.rows[r].acc.acc != base.rows[r].acc.acc) same = false;
                if (!same) {
                    pass = false;
                    detail += "; degenerate class-subset run differs";
                } else {
                    detail += "; degenerate class-subset equals the standard run";
                }
            } catch (const std::exception& e) {
                pass = false;
                detail = std::string("domain-shift run failed: ") + e.what();
            }
        } else {
            detail = "skipped: end-to-end run failed";
        }
        report(10, "domain-shift modes", pass, detail);
    }

    std::printf("%s: %d criterion(s) failed; total wall time %.1f min\n",
                failures == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED", failures,
                elapsed_s(t0) / 60.0);
    return failures == 0 ? 0 : 1;
}
