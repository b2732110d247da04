#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dreamkit/config.hpp"
#include "dreamkit/dream.hpp"
#include "dreamkit/fingerprint.hpp"
#include "dreamkit/metrics.hpp"
#include "dreamkit/probe.hpp"
#include "dreamkit/zoo.hpp"

namespace dreamkit::harness {

struct ExperimentPlan {
    enum class Mode { Standard, ClassSubset, DisjointCombos };

    std::vector<int> targets;  // leave-one-domain-out rotation
    Mode mode = Mode::Standard;
    std::vector<std::string> methods = {"dream", "kennen"};
    int trials = 5;
    std::uint64_t seed = 0;
    std::vector<int> class_subset;   // ClassSubset mode
    std::size_t zoo_train_limit = 0; // 0 = use every train row (zoo-size sweeps)

    void validate(const ToolkitConfig& cfg) const;
};

ExperimentPlan plan_from_config(const ToolkitConfig& cfg);

// Generate-or-load stages. Loaded artifacts are validated against the
// config; a mismatch is an error rather than a silent regeneration.
std::vector<zoo::DomainData> ensure_data(const ToolkitConfig& cfg,
                                         const std::string& out_dir);
zoo::ModelZoo ensure_zoo(const ToolkitConfig& cfg,
                         const std::vector<zoo::DomainData>& datasets,
                         const std::string& out_dir, int jobs);

struct RotationData {
    int target = 0;
    fp::QuerySet queries;
    fp::FingerprintSet train;  // source-domain train split
    fp::FingerprintSet val;    // source-domain val split
    fp::FingerprintSet test;   // target-domain test split
};

// Builds the rotation's query set from source domains only and collects
// fingerprints for the three splits; also writes them as DREAMFP files
// under <out_dir>/<fp_tag>/target_<t>/.
RotationData collect_rotation(const ToolkitConfig& cfg,
                              const std::vector<zoo::DomainData>& datasets,
                              const zoo::ModelZoo& zoo_set, int target,
                              const std::string& out_dir, const std::string& fp_tag,
                              int jobs, std::uint64_t seed);

// Split-tag audit: throws when any row carries the forbidden domain.
void assert_no_domain(const fp::FingerprintSet& set, const std::string& forbidden,
                      const std::string& context);

// Leave-one-domain-out driver: per target and trial, trains the requested
// methods on source train rows, tunes on source val rows, and scores
// per-attribute accuracy on the target test rows. Writes results.csv,
// summary.csv and table.txt under <out_dir>/<run_tag>/.
ResultTable run_lodo(const ExperimentPlan& plan, const ToolkitConfig& cfg,
                     const std::string& out_dir, const std::string& run_tag = "runs");

// Domain-shift scenarios: class-subset training (both zoos rebuilt on the
// shared class set; target fingerprints truncated and renormalized) and
// disjoint attribute combinations. Equal class sets degenerate exactly to
// run_lodo.
ResultTable run_domain_shift(const ExperimentPlan& plan, const ToolkitConfig& cfg,
                             const std::string& out_dir);

enum class SweepAxis { Lambda, QueryCount, ZooSize };
SweepAxis sweep_axis_from_name(const std::string& name);

struct SweepResult {
    std::vector<std::pair<double, ResultTable>> tables;
};

// One full evaluation per axis value with shared seeds; per-value outputs
// under <out_dir>/sweep_<axis>/value_<v>/ plus a combined CSV.
SweepResult sweep(const ExperimentPlan& plan, const ToolkitConfig& cfg, SweepAxis axis,
                  const std::vector<double>& values, const std::string& out_dir);

// Plain-text table: model_id,domain,z0..z{d-1}; re-export is bit-identical.
void export_embeddings(dream::ReversePipeline& pipe, const fp::FingerprintSet& set,
                       const std::string& path);

struct InvarianceReport {
    double raw_accuracy = 0.0;    // probe on fingerprints O
    double embed_accuracy = 0.0;  // probe on embeddings z
};

// Trains the domain probe on source train rows and scores it on held-out
// source val rows, once on raw fingerprints and once on embeddings.
InvarianceReport invariance_probe(const RotationData& rotation,
                                  dream::ReversePipeline& pipe, std::uint64_t seed,
                                  const ProbeConfig& cfg);

std::string history_csv(const std::vector<dream::EpochMetrics>& history);

}  // namespace dreamkit::harness
