#pragma once

#include <cstdint>
#include <vector>

#include "dreamkit/tensor.hpp"

namespace dreamkit::harness {

struct ProbeConfig {
    int epochs = 400;
    double lr = 0.05;
    double l2 = 1e-4;
    double train_fraction = 0.5;  // for the internal split variant
};

// Seeded multinomial logistic regression predicting the domain id from
// features; returns held-out accuracy. Features are standardized with
// training-row statistics.
double domain_probe_split(const Tensor& train_features,
                          const std::vector<int>& train_domains,
                          const Tensor& test_features,
                          const std::vector<int>& test_domains, std::uint64_t seed,
                          const ProbeConfig& cfg);

// Convenience variant with an internal seeded row split.
double domain_probe(const Tensor& features, const std::vector<int>& domains,
                    std::uint64_t seed, const ProbeConfig& cfg);

}  // namespace dreamkit::harness
