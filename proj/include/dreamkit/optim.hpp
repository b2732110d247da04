#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dreamkit/nn.hpp"
#include "dreamkit/tensor.hpp"

namespace dreamkit::nn {

enum class OptKind { SGD, Adam, RMSprop };

const char* opt_name(OptKind k);
OptKind opt_from_name(const std::string& name);

// Moment buffers mirror the parameters' trainable tensors in declaration
// order. The step counter is shared across tensors (bias correction).
struct OptimizerState {
    OptKind kind = OptKind::SGD;
    double lr = 0.0;
    std::uint64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double rho = 0.99;
    std::vector<Tensor> m1;  // Adam first moment
    std::vector<Tensor> m2;  // Adam second moment / RMSprop square average

    static OptimizerState make(OptKind kind, double lr, const Parameters& params);
};

// Applies one update from the gradients accumulated in `params`, then
// increments the step counter and the parameter version.
void optimizer_step(OptimizerState& state, Parameters& params);

}  // namespace dreamkit::nn
