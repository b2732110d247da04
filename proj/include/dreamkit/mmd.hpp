#pragma once

#include <vector>

#include "dreamkit/tensor.hpp"

namespace dreamkit::baselines {

struct MmdResult {
    double value = 0.0;
    std::vector<Tensor> grads;  // one per input batch
};

// Biased squared-MMD estimator with an RBF kernel,
//   mean k(x,x') + mean k(y,y') - 2 mean k(x,y),
// averaged over all domain pairs. Gradients are with respect to the
// embeddings. Needs >= 2 batches with >= 2 rows each and sigma > 0.
MmdResult mmd_penalty(const std::vector<Tensor>& batches, double sigma);

double mmd_value(const std::vector<Tensor>& batches, double sigma);

// Median heuristic: sigma^2 = median pairwise squared distance / 2 over the
// pooled rows. Throws on a degenerate (zero) bandwidth.
double median_heuristic_sigma(const std::vector<Tensor>& batches);

}  // namespace dreamkit::baselines
