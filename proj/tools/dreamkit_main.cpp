#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dreamkit/baselines.hpp"
#include "dreamkit/config.hpp"
#include "dreamkit/errors.hpp"
#include "dreamkit/harness.hpp"
#include "dreamkit/rng.hpp"
#include "dreamkit/textio.hpp"

namespace fs = std::filesystem;
using namespace dreamkit;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 0;
};

ToolkitConfig resolve_config(const GlobalOpts& g) {
    ToolkitConfig cfg = g.config_path.empty() ? default_config() : load_config(g.config_path);
    if (g.seed_set) cfg.seed = g.seed;
    if (g.jobs > 0) cfg.harness.jobs = g.jobs;
    cfg.validate();
    return cfg;
}

harness::ExperimentPlan resolve_plan(const ToolkitConfig& cfg,
                                     const std::vector<int>& targets,
                                     const std::vector<std::string>& methods,
                                     int trials) {
    harness::ExperimentPlan plan = harness::plan_from_config(cfg);
    if (!targets.empty()) plan.targets = targets;
    if (!methods.empty()) plan.methods = methods;
    if (trials > 0) plan.trials = trials;
    return plan;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dreamkit: reverse-engineer training attributes of black-box "
                 "classifiers from probability outputs"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "JSON config file");
    app.add_option("--out-dir", g.out_dir, "workspace directory")->capture_default_str();
    auto* seed_opt = app.add_option("--seed", g.seed, "override the config seed");
    app.add_option("--jobs", g.jobs, "worker threads (0 = hardware)");

    // gen-data
    auto* cmd_gen = app.add_subcommand("gen-data", "generate the synthetic multi-domain datasets");

    // train-zoo
    auto* cmd_zoo = app.add_subcommand("train-zoo", "train the white-box model zoo");

    // split-zoo
    auto* cmd_split = app.add_subcommand("split-zoo", "re-assign zoo train/val/test splits");
    int sp_train = -1, sp_val = -1, sp_test = -1;
    std::string sp_mode = "standard";
    cmd_split->add_option("--train", sp_train, "train split size per domain");
    cmd_split->add_option("--val", sp_val, "val split size per domain");
    cmd_split->add_option("--test", sp_test, "test split size per domain");
    cmd_split->add_option("--mode", sp_mode, "standard | disjoint")->capture_default_str();

    // fingerprint
    auto* cmd_fp = app.add_subcommand("fingerprint", "collect fingerprints for LODO rotations");
    std::vector<int> fp_targets;
    cmd_fp->add_option("--target", fp_targets, "target domain ids (default: all)");

    // train-dream
    auto* cmd_dream = app.add_subcommand("train-dream", "train the adversarial reverse pipeline");
    std::string td_train, td_val, td_out = "dream.pipe", td_hist;
    double td_lambda = -1.0;
    cmd_dream->add_option("--train-fp", td_train, "training fingerprint file")->required();
    cmd_dream->add_option("--val-fp", td_val, "validation fingerprint file (lambda tuning)");
    cmd_dream->add_option("--out", td_out, "pipeline output path")->capture_default_str();
    cmd_dream->add_option("--history", td_hist, "per-epoch metrics CSV output");
    cmd_dream->add_option("--lambda", td_lambda, "fix lambda instead of tuning");

    // train-baseline
    auto* cmd_base = app.add_subcommand("train-baseline", "train a baseline reverse model");
    std::string tb_method = "kennen", tb_train, tb_val, tb_out = "baseline.ckpt";
    cmd_base->add_option("--method", tb_method, "kennen | mmd | svm")->capture_default_str();
    cmd_base->add_option("--train-fp", tb_train, "training fingerprint file")->required();
    cmd_base->add_option("--val-fp", tb_val, "validation fingerprint file (gamma tuning)");
    cmd_base->add_option("--out", tb_out, "checkpoint output path")->capture_default_str();

    // eval
    auto* cmd_eval = app.add_subcommand("eval", "run the leave-one-domain-out evaluation");
    std::vector<int> ev_targets;
    std::vector<std::string> ev_methods;
    int ev_trials = 0;
    std::string ev_mode = "standard";
    cmd_eval->add_option("--target", ev_targets, "target domain ids (default: rotation over all)");
    cmd_eval->add_option("--methods", ev_methods, "methods: dream kennen mmd svm random");
    cmd_eval->add_option("--trials", ev_trials, "trials per target");
    cmd_eval->add_option("--mode", ev_mode, "standard | class-subset | disjoint")
        ->capture_default_str();

    // sweep
    auto* cmd_sweep = app.add_subcommand("sweep", "sensitivity sweeps");
    std::string sw_axis;
    std::vector<double> sw_values;
    std::vector<int> sw_targets;
    std::vector<std::string> sw_methods;
    int sw_trials = 0;
    cmd_sweep->add_option("--axis", sw_axis, "lambda | query_count | zoo_size")->required();
    cmd_sweep->add_option("--values", sw_values, "axis values")->required();
    cmd_sweep->add_option("--target", sw_targets, "target domain ids");
    cmd_sweep->add_option("--methods", sw_methods, "methods");
    cmd_sweep->add_option("--trials", sw_trials, "trials per target");

    // export-embeddings
    auto* cmd_emb = app.add_subcommand("export-embeddings", "export generator embeddings");
    std::string em_pipe, em_fp, em_out = "embeddings.csv";
    cmd_emb->add_option("--pipeline", em_pipe, "trained pipeline file")->required();
    cmd_emb->add_option("--fingerprints", em_fp, "fingerprint file")->required();
    cmd_emb->add_option("--out", em_out, "output CSV path")->capture_default_str();

    // probe
    auto* cmd_probe = app.add_subcommand("probe", "domain probe on fingerprints/embeddings");
    std::string pr_train, pr_test, pr_pipe;
    cmd_probe->add_option("--train-fp", pr_train, "probe training fingerprint file")->required();
    cmd_probe->add_option("--test-fp", pr_test, "probe held-out fingerprint file")->required();
    cmd_probe->add_option("--pipeline", pr_pipe, "also probe this pipeline's embeddings");

    // report
    auto* cmd_report = app.add_subcommand("report", "render a results CSV as an aligned table");
    std::string rp_results, rp_out;
    cmd_report->add_option("--results", rp_results, "results.csv path")->required();
    cmd_report->add_option("--out", rp_out, "write the table here instead of stdout");

    CLI11_PARSE(app, argc, argv);
    g.seed_set = seed_opt->count() > 0;

    try {
        ToolkitConfig cfg = resolve_config(g);
        const int jobs = effective_jobs(cfg.harness.jobs);

        if (cmd_gen->parsed()) {
            harness::ensure_data(cfg, g.out_dir);
            std::printf("datasets ready under %s/data\n", g.out_dir.c_str());
        } else if (cmd_zoo->parsed()) {
            auto data = harness::ensure_data(cfg, g.out_dir);
            auto z = harness::ensure_zoo(cfg, data, g.out_dir, jobs);
            std::size_t ok = 0;
            for (const auto& rec : z.records)
                if (rec.finite_ok()) ++ok;
            std::printf("zoo ready: %zu models (%zu trained cleanly), manifest %s/zoo/manifest.txt\n",
                        z.records.size(), ok, g.out_dir.c_str());
        } else if (cmd_split->parsed()) {
            const std::string manifest = g.out_dir + "/zoo/manifest.txt";
            auto z = zoo::load_manifest(manifest);
            const int tr = sp_train >= 0 ? sp_train : cfg.zoo.split_train;
            const int va = sp_val >= 0 ? sp_val : cfg.zoo.split_val;
            const int te = sp_test >= 0 ? sp_test : cfg.zoo.split_test;
            if (sp_mode == "standard")
                zoo::split_zoo(z, tr, va, te, mix_seed(cfg.seed, 0x53504c49u));
            else if (sp_mode == "disjoint")
                zoo::disjoint_attribute_split(z, tr, va, te, mix_seed(cfg.seed, 0x444a5354u));
            else
                throw ValidationError("split mode must be standard or disjoint");
            zoo::save_manifest(z, manifest);
            std::printf("splits updated (%d/%d/%d, %s)\n", tr, va, te, sp_mode.c_str());
        } else if (cmd_fp->parsed()) {
            auto data = harness::ensure_data(cfg, g.out_dir);
            auto z = harness::ensure_zoo(cfg, data, g.out_dir, jobs);
            std::vector<int> targets = fp_targets;
            if (targets.empty())
                for (int d = 0; d < cfg.data.domain_count; ++d) targets.push_back(d);
            for (int t : targets) {
                harness::collect_rotation(cfg, data, z, t, g.out_dir, "fp", jobs, cfg.seed);
                std::printf("fingerprints ready under %s/fp/target_%d\n", g.out_dir.c_str(), t);
            }
        } else if (cmd_dream->parsed()) {
            auto train = fp::read_fingerprints(td_train);
            dream::DreamConfig dc = cfg.dream;
            dc.seed = cfg.seed;
            dc.use_gan = true;
            if (td_lambda >= 0.0) {
                dc.lambda = td_lambda;
            } else if (!td_val.empty()) {
                auto val = fp::read_fingerprints(td_val);
                dc.lambda = dream::select_lambda(train, val, dc);
            } else if (!dc.lambda_grid.empty()) {
                dc.lambda = dc.lambda_grid.front();
            }
            auto res = dream::train_reverse(train, dc);
            dream::save_pipeline(res.pipeline, td_out);
            if (!td_hist.empty()) {
                std::ofstream os(td_hist);
                os << harness::history_csv(res.history);
            }
            std::printf("dream pipeline (lambda=%s) saved to %s\n",
                        format_f64(dc.lambda).c_str(), td_out.c_str());
        } else if (cmd_base->parsed()) {
            auto train = fp::read_fingerprints(tb_train);
            baselines::BaselineConfig bc = cfg.baseline;
            bc.seed = cfg.seed;
            if (tb_method == "kennen") {
                auto res = baselines::train_kennen(train, bc);
                dream::save_pipeline(res.pipeline, tb_out);
            } else if (tb_method == "mmd") {
                if (!tb_val.empty() && bc.gamma_grid.size() > 1) {
                    auto val = fp::read_fingerprints(tb_val);
                    double best = bc.gamma_grid.front(), best_acc = -1.0;
                    auto grid = bc.gamma_grid;
                    std::sort(grid.begin(), grid.end());
                    for (double gamma : grid) {
                        baselines::BaselineConfig c = bc;
                        c.mmd_gamma = gamma;
                        auto res = baselines::train_mmd(train, c);
                        const double acc = dream::mean_attribute_accuracy(res.pipeline, val);
                        if (acc > best_acc) {
                            best_acc = acc;
                            best = gamma;
                        }
                    }
                    bc.mmd_gamma = best;
                }
                auto res = baselines::train_mmd(train, bc);
                dream::save_pipeline(res.pipeline, tb_out);
            } else if (tb_method == "svm") {
                auto svm = baselines::train_linear_svm(train, bc);
                baselines::save_svm(svm, train.class_count, train.n_queries,
                                    zoo::grid_hash(), tb_out);
            } else {
                throw ValidationError("baseline method must be kennen, mmd or svm");
            }
            std::printf("%s baseline saved to %s\n", tb_method.c_str(), tb_out.c_str());
        } else if (cmd_eval->parsed()) {
            auto plan = resolve_plan(cfg, ev_targets, ev_methods, ev_trials);
            harness::ResultTable table;
            if (ev_mode == "standard") {
                table = harness::run_lodo(plan, cfg, g.out_dir);
            } else if (ev_mode == "class-subset") {
                plan.mode = harness::ExperimentPlan::Mode::ClassSubset;
                table = harness::run_domain_shift(plan, cfg, g.out_dir);
            } else if (ev_mode == "disjoint") {
                plan.mode = harness::ExperimentPlan::Mode::DisjointCombos;
                table = harness::run_domain_shift(plan, cfg, g.out_dir);
            } else {
                throw ValidationError("eval mode must be standard, class-subset or disjoint");
            }
            std::fputs(harness::render_table_text(table).c_str(), stdout);
        } else if (cmd_sweep->parsed()) {
            auto plan = resolve_plan(cfg, sw_targets, sw_methods, sw_trials);
            auto axis = harness::sweep_axis_from_name(sw_axis);
            auto result = harness::sweep(plan, cfg, axis, sw_values, g.out_dir);
            std::printf("sweep over %s: %zu tables under %s\n", sw_axis.c_str(),
                        result.tables.size(), g.out_dir.c_str());
        } else if (cmd_emb->parsed()) {
            auto pipe = dream::load_pipeline(em_pipe);
            auto set = fp::read_fingerprints(em_fp);
            harness::export_embeddings(pipe, set, em_out);
            std::printf("embeddings written to %s\n", em_out.c_str());
        } else if (cmd_probe->parsed()) {
            auto train = fp::read_fingerprints(pr_train);
            auto test = fp::read_fingerprints(pr_test);
            auto doms = [](const fp::FingerprintSet& s) {
                std::vector<int> out;
                for (const auto& row : s.rows)
                    out.push_back(static_cast<int>(parse_u64(row.domain)));
                return out;
            };
            const double raw = harness::domain_probe_split(
                train.features(), doms(train), test.features(), doms(test), cfg.seed,
                cfg.harness.probe);
            std::printf("raw_probe_accuracy=%s\n", format_f64(raw).c_str());
            if (!pr_pipe.empty()) {
                auto pipe = dream::load_pipeline(pr_pipe);
                dream::check_compatible(pipe, train);
                Tensor ztr = pipe.embed(train.features());
                Tensor zte = pipe.embed(test.features());
                const double emb = harness::domain_probe_split(
                    ztr, doms(train), zte, doms(test), cfg.seed, cfg.harness.probe);
                std::printf("embedding_probe_accuracy=%s\n", format_f64(emb).c_str());
            }
        } else if (cmd_report->parsed()) {
            auto table = harness::read_table_csv(rp_results);
            const std::string text = harness::render_table_text(table);
            if (rp_out.empty()) {
                std::fputs(text.c_str(), stdout);
            } else {
                std::ofstream os(rp_out);
                os << text;
            }
        }
        return 0;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 2;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 2;
    } catch (const IncompatibilityError& e) {
        std::fprintf(stderr, "incompatibility: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
