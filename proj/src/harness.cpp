#include "dreamkit/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "dreamkit/baselines.hpp"
#include "dreamkit/errors.hpp"
#include "dreamkit/parallel.hpp"
#include "dreamkit/rng.hpp"
#include "dreamkit/textio.hpp"

namespace fs = std::filesystem;

namespace dreamkit::harness {

void ExperimentPlan::validate(const ToolkitConfig& cfg) const {
    if (targets.empty()) throw ValidationError("plan has no target domains");
    for (int t : targets)
        if (t < 0 || t >= cfg.data.domain_count)
            throw ValidationError("target domain " + std::to_string(t) +
                                  " outside the configured domain set");
    if (trials < 1) throw ValidationError("trial count must be >= 1");
    if (methods.empty()) throw ValidationError("plan selects no methods");
    for (const auto& m : methods)
        if (m != "dream" && m != "kennen" && m != "mmd" && m != "svm" && m != "random")
            throw ValidationError("unknown method '" + m + "'");
    if (mode == Mode::ClassSubset) {
        if (class_subset.empty()) throw ValidationError("class subset is empty");
        std::set<int> s(class_subset.begin(), class_subset.end());
        if (s.size() != class_subset.size())
            throw ValidationError("class subset has duplicates");
        for (int c : class_subset)
            if (c < 0 || c >= cfg.data.class_count)
                throw ValidationError("class subset entry out of range");
    }
}

ExperimentPlan plan_from_config(const ToolkitConfig& cfg) {
    ExperimentPlan plan;
    for (int d = 0; d < cfg.data.domain_count; ++d) plan.targets.push_back(d);
    plan.methods = cfg.harness.methods;
    plan.trials = cfg.harness.trials;
    plan.seed = cfg.seed;
    plan.class_subset = cfg.harness.class_subset;
    return plan;
}

std::vector<zoo::DomainData> ensure_data(const ToolkitConfig& cfg,
                                         const std::string& out_dir) {
    const fs::path dir = fs::path(out_dir) / "data";
    fs::create_directories(dir);
    std::vector<zoo::DomainData> data;
    bool all_present = true;
    for (int d = 0; d < cfg.data.domain_count; ++d)
        if (!fs::exists(dir / ("domain_" + std::to_string(d) + ".dkd")))
            all_present = false;
    const auto specs = domain_specs(cfg);
    if (all_present) {
        for (int d = 0; d < cfg.data.domain_count; ++d) {
            auto loaded = zoo::load_domain((dir / ("domain_" + std::to_string(d) + ".dkd")).string());
            const auto& want = specs[static_cast<std::size_t>(d)];
            if (loaded.spec.class_count != want.class_count ||
                loaded.spec.image_side != want.image_side ||
                loaded.spec.style != want.style ||
                loaded.spec.train_per_class != want.train_per_class ||
                loaded.spec.val_per_class != want.val_per_class)
                throw IncompatibilityError(
                    "existing dataset for domain " + std::to_string(d) +
                    " does not match the config; use a fresh --out-dir");
            data.push_back(std::move(loaded));
        }
        return data;
    }
    data = zoo::gen_synthetic_domains(cfg.seed, specs);
    for (const auto& d : data)
        zoo::save_domain(d, (dir / ("domain_" + std::to_string(d.spec.domain_id) + ".dkd"))
                                .string());
    return data;
}

namespace {

zoo::ModelZoo ensure_zoo_at(const ToolkitConfig& cfg,
                            const std::vector<zoo::DomainData>& datasets,
                            const std::string& out_dir, const std::string& tag,
                            int jobs) {
    const fs::path dir = fs::path(out_dir) / tag;
    const fs::path manifest = dir / "manifest.txt";
    if (fs::exists(manifest)) {
        zoo::ModelZoo loaded = zoo::load_manifest(manifest.string());
        if (loaded.grid_hash_value != zoo::grid_hash())
            throw IncompatibilityError("zoo manifest was built against a different grid");
        if (loaded.global_seed != cfg.seed ||
            static_cast<int>(loaded.records.size()) !=
                cfg.data.domain_count * cfg.zoo.models_per_domain)
            throw IncompatibilityError(
                "existing zoo does not match the config; use a fresh --out-dir");
        return loaded;
    }
    fs::create_directories(dir / "checkpoints");
    auto plan = zoo::plan_zoo(cfg.seed, cfg.data.domain_count, cfg.zoo.models_per_domain,
                              cfg.data.image_side);
    auto ztc = zoo_train_config(cfg, jobs);
    zoo::ModelZoo z =
        zoo::train_zoo(plan, datasets, ztc, (dir / "checkpoints").string());
    z.global_seed = cfg.seed;
    zoo::split_zoo(z, cfg.zoo.split_train, cfg.zoo.split_val, cfg.zoo.split_test,
                   mix_seed(cfg.seed, 0x53504c49u));
    zoo::save_manifest(z, manifest.string());
    return z;
}

}  // namespace

zoo::ModelZoo ensure_zoo(const ToolkitConfig& cfg,
                         const std::vector<zoo::DomainData>& datasets,
                         const std::string& out_dir, int jobs) {
    return ensure_zoo_at(cfg, datasets, out_dir, "zoo", jobs);
}

namespace {

fp::FingerprintSet collect_split(const ToolkitConfig& cfg, const zoo::ModelZoo& zoo_set,
                                 const std::vector<std::size_t>& record_idx,
                                 const fp::QuerySet& queries, int class_count, int jobs) {
    std::vector<fp::Fingerprint> rows(record_idx.size());
    auto ztc = zoo_train_config(cfg, 1);
    parallel_for(record_idx.size(), jobs, [&](std::size_t i) {
        const auto& rec = zoo_set.records[record_idx[i]];
        nn::Network net =
            zoo::load_model(rec, class_count, cfg.data.image_side, ztc);
        fp::Fingerprint fpr = fp::collect_fingerprint(net, queries);
        fpr.model_id = std::to_string(rec.id);
        fpr.domain = std::to_string(rec.domain_id);
        fpr.labeled = true;
        fpr.attrs = rec.attrs;
        rows[i] = std::move(fpr);
    });
    fp::FingerprintSet set;
    for (auto& r : rows) set.add(std::move(r));
    return set;
}

std::vector<std::size_t> split_records(const zoo::ModelZoo& zoo_set,
                                       const std::vector<int>& domains,
                                       zoo::Split split) {
    std::vector<std::size_t> idx;
    for (int d : domains) {
        auto part = zoo_set.select(d, split);
        idx.insert(idx.end(), part.begin(), part.end());
    }
    return idx;
}

}  // namespace

RotationData collect_rotation(const ToolkitConfig& cfg,
                              const std::vector<zoo::DomainData>& datasets,
                              const zoo::ModelZoo& zoo_set, int target,
                              const std::string& out_dir, const std::string& fp_tag,
                              int jobs, std::uint64_t seed) {
    RotationData rot;
    rot.target = target;
    const fs::path dir = fs::path(out_dir) / fp_tag / ("target_" + std::to_string(target));
    const fs::path train_path = dir / "train.fp";
    const fs::path val_path = dir / "val.fp";
    const fs::path test_path = dir / "test.fp";

    std::vector<const zoo::DomainData*> sources;
    std::vector<int> source_ids;
    for (const auto& d : datasets)
        if (d.spec.domain_id != target) {
            sources.push_back(&d);
            source_ids.push_back(d.spec.domain_id);
        }
    if (sources.empty()) throw ValidationError("no source domains left for this target");

    std::vector<zoo::DomainData> source_data;
    for (const auto* s : sources) source_data.push_back(*s);
    rot.queries = fp::build_query_set(source_data, cfg.n_queries,
                                      mix_seed(seed, 0x51525936u,
                                               static_cast<std::uint64_t>(target)));

    if (fs::exists(train_path) && fs::exists(val_path) && fs::exists(test_path)) {
        rot.train = fp::read_fingerprints(train_path.string());
        rot.val = fp::read_fingerprints(val_path.string());
        rot.test = fp::read_fingerprints(test_path.string());
        return rot;
    }

    rot.train = collect_split(cfg, zoo_set, split_records(zoo_set, source_ids,
                                                          zoo::Split::Train),
                              rot.queries, cfg.data.class_count, jobs);
    rot.val = collect_split(cfg, zoo_set,
                            split_records(zoo_set, source_ids, zoo::Split::Val),
                            rot.queries, cfg.data.class_count, jobs);
    rot.test = collect_split(cfg, zoo_set, split_records(zoo_set, {target},
                                                         zoo::Split::Test),
                             rot.queries, cfg.data.class_count, jobs);
    fs::create_directories(dir);
    fp::write_fingerprints(train_path.string(), rot.train);
    fp::write_fingerprints(val_path.string(), rot.val);
    fp::write_fingerprints(test_path.string(), rot.test);
    return rot;
}

void assert_no_domain(const fp::FingerprintSet& set, const std::string& forbidden,
                      const std::string& context) {
    for (const auto& row : set.rows)
        if (row.domain == forbidden)
            throw ValidationError(context + ": target-domain row '" + row.model_id +
                                  "' (domain " + forbidden +
                                  ") leaked into a training path");
}

namespace {

std::vector<std::array<std::size_t, zoo::kAttributeCount>> true_labels(
    const fp::FingerprintSet& set) {
    std::vector<std::array<std::size_t, zoo::kAttributeCount>> out;
    out.reserve(set.rows.size());
    for (const auto& row : set.rows) {
        if (!row.labeled)
            throw ValidationError("row " + row.model_id + " has no attribute labels");
        out.push_back(row.attrs.label_indices());
    }
    return out;
}

AttrAccuracy score_pipeline(dream::ReversePipeline& pipe, const fp::FingerprintSet& test) {
    auto preds = dream::predict_batch(pipe, test);
    std::vector<std::array<std::size_t, zoo::kAttributeCount>> p;
    p.reserve(preds.size());
    for (const auto& pr : preds) p.push_back(pr.label_indices);
    return per_attribute_accuracy(p, true_labels(test));
}

double tune_mmd_gamma(const fp::FingerprintSet& train, const fp::FingerprintSet& val,
                      const baselines::BaselineConfig& cfg) {
    std::vector<double> grid = cfg.gamma_grid;
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    if (grid.empty()) return cfg.mmd_gamma;
    if (grid.size() == 1) return grid.front();
    double best = grid.front(), best_acc = -1.0;
    for (double gamma : grid) {
        baselines::BaselineConfig c = cfg;
        c.mmd_gamma = gamma;
        auto res = baselines::train_mmd(train, c);
        const double acc = dream::mean_attribute_accuracy(res.pipeline, val);
        if (acc > best_acc) {
            best_acc = acc;
            best = gamma;
        }
    }
    return best;
}

struct MethodOutcome {
    AttrAccuracy acc;
};

MethodOutcome evaluate_method(const std::string& method, const RotationData& rot,
                              const ToolkitConfig& cfg, std::uint64_t trial_seed,
                              const std::string& save_dir) {
    MethodOutcome out;
    if (method == "random") {
        out.acc = random_baseline_row();
        return out;
    }
    if (method == "svm") {
        baselines::BaselineConfig bc = cfg.baseline;
        bc.seed = trial_seed;
        auto svm = baselines::train_linear_svm(rot.train, bc);
        std::vector<std::array<std::size_t, zoo::kAttributeCount>> preds;
        preds.reserve(rot.test.rows.size());
        for (const auto& row : rot.test.rows) preds.push_back(svm.predict(row.values));
        out.acc = per_attribute_accuracy(preds, true_labels(rot.test));
        if (!save_dir.empty())
            baselines::save_svm(svm, rot.train.class_count, rot.train.n_queries,
                                zoo::grid_hash(), save_dir + "/svm.svmckpt");
        return out;
    }

    dream::TrainResult res;
    if (method == "dream") {
        dream::DreamConfig dc = cfg.dream;
        dc.seed = trial_seed;
        dc.use_gan = true;
        if (!dc.lambda_grid.empty())
            dc.lambda = dream::select_lambda(rot.train, rot.val, dc);
        res = dream::train_reverse(rot.train, dc);
    } else if (method == "kennen") {
        baselines::BaselineConfig bc = cfg.baseline;
        bc.seed = trial_seed;
        res = baselines::train_kennen(rot.train, bc);
    } else if (method == "mmd") {
        baselines::BaselineConfig bc = cfg.baseline;
        bc.seed = trial_seed;
        bc.mmd_gamma = tune_mmd_gamma(rot.train, rot.val, bc);
        res = baselines::train_mmd(rot.train, bc);
    } else {
        throw ValidationError("unknown method '" + method + "'");
    }
    out.acc = score_pipeline(res.pipeline, rot.test);
    if (!save_dir.empty()) {
        dream::save_pipeline(res.pipeline, save_dir + "/" + method + ".pipe");
        std::ofstream os(save_dir + "/" + method + "_history.csv");
        os << history_csv(res.history);
    }
    return out;
}

void write_run_outputs(const ResultTable& table, const fs::path& run_dir) {
    fs::create_directories(run_dir);
    write_table_csv(table, (run_dir / "results.csv").string());

    // summary: per (method, target) mean plus per-method mean over targets
    std::ofstream os(run_dir / "summary.csv");
    if (!os) throw ValidationError("cannot write summary.csv");
    os << "method,target";
    for (std::size_t col : kReportOrder) os << ',' << zoo::kAttributeNames[col];
    os << ",avg\n";
    auto emit = [&os](const std::string& method, const std::string& target,
                      const AttrAccuracy& acc) {
        os << method << ',' << target;
        for (std::size_t col : kReportOrder) os << ',' << format_f64(acc.acc[col]);
        os << ',' << format_f64(acc.average) << "\n";
    };
    emit("random", "all", random_baseline_row());
    for (const auto& method : table.methods()) {
        for (const auto& target : table.targets())
            emit(method, target, table.mean(method, target));
        emit(method, "all", table.mean_over_targets(method));
    }
    std::ofstream txt(run_dir / "table.txt");
    txt << render_table_text(table);
}

ResultTable run_rotations(const ExperimentPlan& plan, const ToolkitConfig& cfg,
                          const std::vector<RotationData>& rotations,
                          const std::string& out_dir, const std::string& run_tag,
                          const std::string& method_suffix) {
    const fs::path run_dir = fs::path(out_dir) / run_tag;
    fs::create_directories(run_dir);

    struct Job {
        std::size_t rotation;
        int trial;
        std::size_t method;
    };
    std::vector<Job> jobs;
    for (std::size_t r = 0; r < rotations.size(); ++r)
        for (int trial = 0; trial < plan.trials; ++trial)
            for (std::size_t m = 0; m < plan.methods.size(); ++m)
                jobs.push_back({r, trial, m});

    std::vector<AttrAccuracy> results(jobs.size());
    parallel_for(jobs.size(), effective_jobs(cfg.harness.jobs), [&](std::size_t j) {
        const Job& job = jobs[j];
        const RotationData& rot = rotations[job.rotation];
        const std::uint64_t trial_seed =
            mix_seed(plan.seed, 0x5452494cu, static_cast<std::uint64_t>(rot.target),
                     static_cast<std::uint64_t>(job.trial));
        std::string save_dir;
        if (job.trial == 0 && plan.methods[job.method] != "random") {
            const fs::path dir = run_dir / ("target_" + std::to_string(rot.target));
            fs::create_directories(dir);
            save_dir = dir.string();
        }
        results[j] =
            evaluate_method(plan.methods[job.method], rot, cfg, trial_seed, save_dir)
                .acc;
    });

    ResultTable table;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        ResultRow row;
        row.method = plan.methods[jobs[j].method] + method_suffix;
        row.target = std::to_string(rotations[jobs[j].rotation].target);
        row.trial = jobs[j].trial;
        row.acc = results[j];
        table.add(std::move(row));
    }
    write_run_outputs(table, run_dir);
    return table;
}

std::vector<RotationData> standard_rotations(const ExperimentPlan& plan,
                                             const ToolkitConfig& cfg,
                                             const std::vector<zoo::DomainData>& data,
                                             const zoo::ModelZoo& zoo_set,
                                             const std::string& out_dir,
                                             const std::string& fp_tag) {
    std::vector<RotationData> rotations;
    for (int target : plan.targets) {
        RotationData rot = collect_rotation(cfg, data, zoo_set, target, out_dir, fp_tag,
                                            effective_jobs(cfg.harness.jobs), plan.seed);
        assert_no_domain(rot.train, std::to_string(target), "train split");
        assert_no_domain(rot.val, std::to_string(target), "validation split");
        if (plan.zoo_train_limit > 0)
            rot.train = [&] {
                // per-domain prefix of a seeded shuffle; the full size is the
                // identity so a single-point sweep equals the plain run
                std::map<std::string, std::vector<std::size_t>> by_domain;
                for (std::size_t i = 0; i < rot.train.rows.size(); ++i)
                    by_domain[rot.train.rows[i].domain].push_back(i);
                std::vector<std::size_t> keep;
                for (auto& [dom, idx] : by_domain) {
                    if (idx.size() > plan.zoo_train_limit) {
                        Rng rng(mix_seed(plan.seed, 0x5a53554du,
                                         static_cast<std::uint64_t>(rot.target),
                                         parse_u64(dom)));
                        rng.shuffle(idx);
                        idx.resize(plan.zoo_train_limit);
                    }
                    keep.insert(keep.end(), idx.begin(), idx.end());
                }
                std::sort(keep.begin(), keep.end());
                fp::FingerprintSet sub;
                for (std::size_t i : keep) sub.add(rot.train.rows[i]);
                return sub;
            }();
        rotations.push_back(std::move(rot));
    }
    return rotations;
}

}  // namespace

ResultTable run_lodo(const ExperimentPlan& plan, const ToolkitConfig& cfg,
                     const std::string& out_dir, const std::string& run_tag) {
    cfg.validate();
    plan.validate(cfg);
    auto data = ensure_data(cfg, out_dir);
    auto zoo_set = ensure_zoo(cfg, data, out_dir, effective_jobs(cfg.harness.jobs));
    auto rotations = standard_rotations(plan, cfg, data, zoo_set, out_dir, "fp");
    return run_rotations(plan, cfg, rotations, out_dir, run_tag, "");
}

ResultTable run_domain_shift(const ExperimentPlan& plan, const ToolkitConfig& cfg,
                             const std::string& out_dir) {
    cfg.validate();
    plan.validate(cfg);
    if (plan.mode == ExperimentPlan::Mode::Standard)
        throw ValidationError("domain-shift run needs class-subset or disjoint mode");

    if (plan.mode == ExperimentPlan::Mode::ClassSubset) {
        std::vector<int> subset = plan.class_subset;
        std::sort(subset.begin(), subset.end());
        if (static_cast<int>(subset.size()) == cfg.data.class_count) {
            // identical class sets: degenerates exactly to the standard run
            ExperimentPlan p2 = plan;
            p2.mode = ExperimentPlan::Mode::Standard;
            return run_lodo(p2, cfg, out_dir, "runs_shift");
        }
        auto data = ensure_data(cfg, out_dir);
        auto zoo_full = ensure_zoo(cfg, data, out_dir, effective_jobs(cfg.harness.jobs));

        std::vector<zoo::DomainData> data_sub;
        for (const auto& d : data) data_sub.push_back(zoo::subset_classes(d, subset));
        ToolkitConfig cfg_sub = cfg;
        cfg_sub.data.class_count = static_cast<int>(subset.size());
        auto zoo_sub = ensure_zoo_at(cfg_sub, data_sub, out_dir, "zoo_subset",
                                     effective_jobs(cfg.harness.jobs));

        std::vector<RotationData> rotations;
        for (int target : plan.targets) {
            RotationData rot;
            rot.target = target;
            std::vector<zoo::DomainData> sources;
            std::vector<int> source_ids;
            for (const auto& d : data_sub)
                if (d.spec.domain_id != target) {
                    sources.push_back(d);
                    source_ids.push_back(d.spec.domain_id);
                }
            rot.queries = fp::build_query_set(
                sources, cfg.n_queries,
                mix_seed(plan.seed, 0x51525936u, static_cast<std::uint64_t>(target)));
            const int jobs = effective_jobs(cfg.harness.jobs);
            rot.train = collect_split(cfg_sub, zoo_sub,
                                      split_records(zoo_sub, source_ids, zoo::Split::Train),
                                      rot.queries, cfg_sub.data.class_count, jobs);
            rot.val = collect_split(cfg_sub, zoo_sub,
                                    split_records(zoo_sub, source_ids, zoo::Split::Val),
                                    rot.queries, cfg_sub.data.class_count, jobs);
            // target models keep all classes; blocks are truncated to the
            // shared class set and renormalized
            fp::FingerprintSet test_full =
                collect_split(cfg, zoo_full, split_records(zoo_full, {target},
                                                           zoo::Split::Test),
                              rot.queries, cfg.data.class_count, jobs);
            for (auto& row : test_full.rows) {
                fp::Fingerprint cut = fp::truncate_to_classes(row, subset);
                rot.test.add(std::move(cut));
            }
            assert_no_domain(rot.train, std::to_string(target), "train split");
            assert_no_domain(rot.val, std::to_string(target), "validation split");
            const fs::path dir =
                fs::path(out_dir) / "fp_subset" / ("target_" + std::to_string(target));
            fs::create_directories(dir);
            fp::write_fingerprints((dir / "train.fp").string(), rot.train);
            fp::write_fingerprints((dir / "val.fp").string(), rot.val);
            fp::write_fingerprints((dir / "test.fp").string(), rot.test);
            rotations.push_back(std::move(rot));
        }
        return run_rotations(plan, cfg, rotations, out_dir, "runs_subset", "*");
    }

    // disjoint attribute combinations
    auto data = ensure_data(cfg, out_dir);
    auto zoo_set = ensure_zoo(cfg, data, out_dir, effective_jobs(cfg.harness.jobs));
    zoo::disjoint_attribute_split(zoo_set, cfg.harness.disjoint_train,
                                  cfg.harness.disjoint_val, cfg.harness.disjoint_test,
                                  mix_seed(plan.seed, 0x444a5354u));
    // exhaustive intersection-emptiness audit
    std::set<std::size_t> train_combos, val_combos, test_combos;
    for (const auto& rec : zoo_set.records) {
        if (rec.split == zoo::Split::Train) train_combos.insert(rec.attrs.grid_index());
        if (rec.split == zoo::Split::Val) val_combos.insert(rec.attrs.grid_index());
        if (rec.split == zoo::Split::Test) test_combos.insert(rec.attrs.grid_index());
    }
    for (std::size_t c : train_combos)
        if (val_combos.count(c) || test_combos.count(c))
            throw ValidationError("disjoint split failed: combination shared across splits");
    for (std::size_t c : val_combos)
        if (test_combos.count(c))
            throw ValidationError("disjoint split failed: combination shared across splits");

    auto rotations = standard_rotations(plan, cfg, data, zoo_set, out_dir, "fp_disjoint");
    return run_rotations(plan, cfg, rotations, out_dir, "runs_disjoint", "**");
}

SweepAxis sweep_axis_from_name(const std::string& name) {
    if (name == "lambda") return SweepAxis::Lambda;
    if (name == "query_count") return SweepAxis::QueryCount;
    if (name == "zoo_size") return SweepAxis::ZooSize;
    throw ValidationError("unknown sweep axis '" + name + "'");
}

SweepResult sweep(const ExperimentPlan& plan, const ToolkitConfig& cfg, SweepAxis axis,
                  const std::vector<double>& values, const std::string& out_dir) {
    if (values.empty()) throw ValidationError("sweep needs at least one value");
    const char* axis_name = axis == SweepAxis::Lambda      ? "lambda"
                            : axis == SweepAxis::QueryCount ? "query_count"
                                                            : "zoo_size";
    SweepResult result;
    for (double value : values) {
        ToolkitConfig cv = cfg;
        ExperimentPlan pv = plan;
        if (axis == SweepAxis::Lambda) {
            if (value < 0.0) throw ValidationError("lambda sweep value must be >= 0");
            cv.dream.lambda = value;
            cv.dream.lambda_grid = {value};
        } else if (axis == SweepAxis::QueryCount) {
            if (value < 1.0 || value != std::floor(value))
                throw ValidationError("query_count sweep values must be positive integers");
            cv.n_queries = static_cast<int>(value);
        } else {
            if (value < 1.0 || value != std::floor(value))
                throw ValidationError("zoo_size sweep values must be positive integers");
            pv.zoo_train_limit = static_cast<std::size_t>(value);
        }
        const std::string tag = std::string("sweep_") + axis_name + "/value_" +
                                format_f64(value);
        ResultTable table = run_lodo(pv, cv, out_dir, tag);
        result.tables.emplace_back(value, std::move(table));
    }

    const fs::path combined =
        fs::path(out_dir) / (std::string("sweep_") + axis_name + ".csv");
    std::ofstream os(combined);
    if (!os) throw ValidationError("cannot write sweep CSV");
    os << "axis_value,method,target,trial";
    for (std::size_t col : kReportOrder) os << ',' << zoo::kAttributeNames[col];
    os << ",avg\n";
    for (const auto& [value, table] : result.tables) {
        for (const auto& row : table.rows) {
            os << format_f64(value) << ',' << row.method << ',' << row.target << ','
               << row.trial;
            for (std::size_t col : kReportOrder) os << ',' << format_f64(row.acc.acc[col]);
            os << ',' << format_f64(row.acc.average) << "\n";
        }
    }
    return result;
}

void export_embeddings(dream::ReversePipeline& pipe, const fp::FingerprintSet& set,
                       const std::string& path) {
    dream::check_compatible(pipe, set);
    Tensor z = pipe.embed(set.features());
    std::ofstream os(path);
    if (!os) throw ValidationError("cannot open " + path + " for writing");
    os << "model_id,domain";
    for (std::size_t q = 0; q < z.shape[1]; ++q) os << ",z" << q;
    os << "\n";
    for (std::size_t r = 0; r < set.rows.size(); ++r) {
        os << set.rows[r].model_id << ',' << set.rows[r].domain;
        for (std::size_t q = 0; q < z.shape[1]; ++q)
            os << ',' << format_f64(z.data[r * z.shape[1] + q]);
        os << "\n";
    }
    if (!os) throw ValidationError("write failed: " + path);
}

InvarianceReport invariance_probe(const RotationData& rotation,
                                  dream::ReversePipeline& pipe, std::uint64_t seed,
                                  const ProbeConfig& cfg) {
    auto domains = [](const fp::FingerprintSet& set) {
        std::vector<int> out;
        out.reserve(set.rows.size());
        for (const auto& row : set.rows)
            out.push_back(static_cast<int>(parse_u64(row.domain)));
        return out;
    };
    Tensor raw_train = rotation.train.features();
    Tensor raw_test = rotation.val.features();
    InvarianceReport report;
    report.raw_accuracy = domain_probe_split(raw_train, domains(rotation.train),
                                             raw_test, domains(rotation.val), seed, cfg);
    Tensor z_train = pipe.embed(raw_train);
    Tensor z_test = pipe.embed(raw_test);
    report.embed_accuracy = domain_probe_split(z_train, domains(rotation.train), z_test,
                                               domains(rotation.val), seed, cfg);
    return report;
}

std::string history_csv(const std::vector<dream::EpochMetrics>& history) {
    std::string out = "epoch,disc_loss,adv_loss,classifier_loss,with_replacement\n";
    for (std::size_t e = 0; e < history.size(); ++e) {
        out += std::to_string(e) + ',' + format_f64(history[e].disc_loss) + ',' +
               format_f64(history[e].adv_loss) + ',' +
               format_f64(history[e].classifier_loss) + ',' +
               (history[e].sampled_with_replacement ? "1" : "0") + "\n";
    }
    return out;
}

}  // namespace dreamkit::harness
