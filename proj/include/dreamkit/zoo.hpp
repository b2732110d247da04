#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dreamkit/attributes.hpp"
#include "dreamkit/dataset.hpp"
#include "dreamkit/nn.hpp"

namespace dreamkit::zoo {

constexpr double kDropoutRate = 0.1;

enum class Split { Train, Val, Test, Unused };

const char* split_name(Split s);
Split split_from_name(const std::string& name);

struct ModelRecord {
    std::uint64_t id = 0;
    int domain_id = 0;
    AttributeVector attrs;
    std::uint64_t seed = 0;
    double val_accuracy = 0.0;  // NaN when training hit a non-finite loss
    Split split = Split::Unused;
    std::string checkpoint_path;

    bool finite_ok() const { return val_accuracy == val_accuracy; }
};

struct ModelZoo {
    std::vector<ModelRecord> records;
    int domain_count = 0;
    std::uint64_t global_seed = 0;
    std::uint64_t grid_hash_value = 0;

    std::vector<std::size_t> select(int domain_id, Split split) const;
};

struct ZooTrainConfig {
    int epochs = 15;
    double lr_sgd = 0.05;
    double lr_adam = 1e-3;
    double lr_rmsprop = 1e-3;
    std::size_t conv_channels = 8;
    std::size_t fc_width = 32;
    int jobs = 1;
    int eval_batch = 256;
};

// Layer sequence per the white-box scheme: n_conv blocks of
// conv -> [batchnorm] -> [maxpool] -> activation, then n_fc blocks of
// dense -> activation -> [dropout(0.1)], then a linear classifier to
// class_count logits. Throws on spatial collapse.
std::vector<nn::LayerSpec> build_model(const AttributeVector& attr, int class_count,
                                       int image_side, std::size_t conv_channels,
                                       std::size_t fc_width);

// True when the attribute vector composes at this image side (pooling never
// empties the feature map).
bool attrs_feasible(const AttributeVector& attr, int image_side);

// Samples one attribute vector per model from the grid, uniformly over the
// combinations feasible at `image_side`. Per-model seeds come from
// mix_seed(global_seed, model id), so every record is reproducible on its
// own. Ids are sequential across domains.
std::vector<ModelRecord> plan_zoo(std::uint64_t global_seed, int domain_count,
                                  int models_per_domain, int image_side);

struct TrainedModel {
    nn::Network net;
    double val_accuracy = 0.0;
    bool finite_ok = true;
};

// Deterministic single-model training with the record's own optimizer and
// batch-size attributes. A non-finite loss stops training and flags the
// result instead of throwing.
TrainedModel train_model(const ModelRecord& rec, const DomainData& data,
                         const ZooTrainConfig& cfg);

// Trains every planned model (parallel across models), writes checkpoints
// under checkpoint_dir, and returns the populated zoo. Results do not
// depend on scheduling order.
ModelZoo train_zoo(const std::vector<ModelRecord>& plan,
                   const std::vector<DomainData>& datasets, const ZooTrainConfig& cfg,
                   const std::string& checkpoint_dir);

// Seeded per-domain split into train/val/test of the given sizes; the
// remainder is left unused. Records flagged non-finite are never assigned.
void split_zoo(ModelZoo& zoo, int train_n, int val_n, int test_n, std::uint64_t seed);

// Counts for an exact ratio split of `per_domain` models (e.g. 140 at 5:1:1
// gives 100/20/20). Errors when the ratio does not divide evenly.
void split_counts_from_ratio(int per_domain, int r_train, int r_val, int r_test,
                             int& train_n, int& val_n, int& test_n);

// Split where no attribute combination appears in more than one split (one
// model per combination is selected). Errors when the zoo does not hold
// enough distinct feasible combinations.
void disjoint_attribute_split(ModelZoo& zoo, int train_n, int val_n, int test_n,
                              std::uint64_t seed);

// Line-oriented manifest with a header carrying grid hash and global seed.
void save_manifest(const ModelZoo& zoo, const std::string& path);
ModelZoo load_manifest(const std::string& path);

// Rebuild the record's network and load its checkpoint.
nn::Network load_model(const ModelRecord& rec, int class_count, int image_side,
                       const ZooTrainConfig& cfg);

}  // namespace dreamkit::zoo
