#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dreamkit/baselines.hpp"
#include "dreamkit/dataset.hpp"
#include "dreamkit/dream.hpp"
#include "dreamkit/probe.hpp"
#include "dreamkit/zoo.hpp"

namespace dreamkit {

// Every tunable constant of the toolkit, loadable from a JSON config file.
// Defaults are the desk-scale configuration used by the acceptance runs.
struct ToolkitConfig {
    std::uint64_t seed = 20260801;

    struct Data {
        int domain_count = 3;
        int class_count = 5;
        int image_side = 12;
        int train_per_class = 200;
        int val_per_class = 50;
        std::vector<std::string> styles = {"clean", "invert-noise", "dilate"};
    } data;

    struct Zoo {
        int models_per_domain = 140;
        int epochs = 15;
        double lr_sgd = 0.05;
        double lr_adam = 1e-3;
        double lr_rmsprop = 1e-3;
        int conv_channels = 8;
        int fc_width = 32;
        int split_train = 100;
        int split_val = 20;
        int split_test = 20;
    } zoo;

    int n_queries = 20;

    dream::DreamConfig dream;
    baselines::BaselineConfig baseline;

    struct Harness {
        int trials = 5;
        std::vector<std::string> methods = {"dream", "kennen"};
        int jobs = 0;  // 0 = hardware concurrency
        harness::ProbeConfig probe;
        int disjoint_train = 60;
        int disjoint_val = 20;
        int disjoint_test = 20;
        std::vector<int> class_subset = {0, 1, 2, 3};
    } harness;

    void validate() const;
};

ToolkitConfig default_config();
ToolkitConfig load_config(const std::string& path);
void save_config(const ToolkitConfig& cfg, const std::string& path);

std::vector<zoo::DomainSpec> domain_specs(const ToolkitConfig& cfg);
zoo::ZooTrainConfig zoo_train_config(const ToolkitConfig& cfg, int jobs);

int effective_jobs(int jobs);

}  // namespace dreamkit
