#include "dreamkit/optim.hpp"

#include <cmath>

#include "dreamkit/errors.hpp"

namespace dreamkit::nn {

const char* opt_name(OptKind k) {
    switch (k) {
        case OptKind::SGD: return "SGD";
        case OptKind::Adam: return "Adam";
        case OptKind::RMSprop: return "RMSprop";
    }
    return "?";
}

OptKind opt_from_name(const std::string& name) {
    if (name == "SGD") return OptKind::SGD;
    if (name == "Adam" || name == "ADAM") return OptKind::Adam;
    if (name == "RMSprop") return OptKind::RMSprop;
    throw ValidationError("unknown optimizer: " + name);
}

OptimizerState OptimizerState::make(OptKind kind, double lr, const Parameters& params) {
    if (lr < 0.0) throw ValidationError("learning rate must be non-negative");
    OptimizerState st;
    st.kind = kind;
    st.lr = lr;
    if (kind != OptKind::SGD) {
        params.for_each_trainable([&](const ParamTensor& pt) {
            if (kind == OptKind::Adam) st.m1.push_back(Tensor::zeros(pt.value.shape));
            st.m2.push_back(Tensor::zeros(pt.value.shape));
        });
    }
    return st;
}

void optimizer_step(OptimizerState& state, Parameters& params) {
    ++state.step;
    const double t = static_cast<double>(state.step);
    std::size_t idx = 0;
    params.for_each_trainable([&](ParamTensor& pt) {
        if (pt.grad.shape != pt.value.shape)
            throw ValidationError("gradient shape mismatch for " + pt.name);
        if (!pt.grad.finite())
            throw NumericalError("non-finite gradient for " + pt.name);
        double* w = pt.value.ptr();
        const double* g = pt.grad.ptr();
        const std::size_t n = pt.value.size();
        switch (state.kind) {
            case OptKind::SGD: {
                for (std::size_t i = 0; i < n; ++i) w[i] -= state.lr * g[i];
                break;
            }
            case OptKind::Adam: {
                if (idx >= state.m1.size() || state.m1[idx].shape != pt.value.shape)
                    throw ValidationError("optimizer state does not match parameters");
                double* m = state.m1[idx].ptr();
                double* v = state.m2[idx].ptr();
                const double bc1 = 1.0 - std::pow(state.beta1, t);
                const double bc2 = 1.0 - std::pow(state.beta2, t);
                for (std::size_t i = 0; i < n; ++i) {
                    m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
                    v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
                    const double mhat = m[i] / bc1;
                    const double vhat = v[i] / bc2;
                    w[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
                }
                break;
            }
            case OptKind::RMSprop: {
                if (idx >= state.m2.size() || state.m2[idx].shape != pt.value.shape)
                    throw ValidationError("optimizer state does not match parameters");
                double* v = state.m2[idx].ptr();
                for (std::size_t i = 0; i < n; ++i) {
                    v[i] = state.rho * v[i] + (1.0 - state.rho) * g[i] * g[i];
                    w[i] -= state.lr * g[i] / (std::sqrt(v[i]) + state.eps);
                }
                break;
            }
        }
        ++idx;
    });
    ++params.version;
}

}  // namespace dreamkit::nn
