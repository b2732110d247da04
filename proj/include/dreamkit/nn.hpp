#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dreamkit/rng.hpp"
#include "dreamkit/tensor.hpp"

namespace dreamkit::nn {

enum class LayerKind {
    Dense,
    Conv2d,
    Activation,
    Dropout,
    Batchnorm,
    Maxpool,
    SoftmaxHead,
    Sigmoid,
};

enum class Activation { ReLU, PReLU, ELU, Tanh };

constexpr double kPReluInitSlope = 0.25;
constexpr double kEluAlpha = 1.0;
constexpr double kBatchnormEps = 1e-5;
constexpr double kBatchnormMomentum = 0.1;
constexpr double kLogClamp = 1e-12;

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// One layer of the fixed layer set. Only the fields for `kind` are read.
struct LayerSpec {
    LayerKind kind = LayerKind::Dense;
    // dense
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    // conv2d ("same" padding, stride 1)
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel_size = 0;
    // activation
    Activation act = Activation::ReLU;
    // dropout
    double rate = 0.0;

    static LayerSpec dense(std::size_t in, std::size_t out);
    static LayerSpec conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t k);
    static LayerSpec activation(Activation a);
    static LayerSpec dropout(double rate);
    static LayerSpec batchnorm();
    static LayerSpec maxpool();
    static LayerSpec softmax_head();
    static LayerSpec sigmoid();

    void validate() const;
};

struct ParamTensor {
    std::string name;
    Tensor value;
    Tensor grad;  // same shape as value for trainable tensors, empty otherwise
    bool trainable = true;
};

struct LayerParams {
    std::vector<ParamTensor> tensors;
    ParamTensor& find(const std::string& name);
    const ParamTensor& find(const std::string& name) const;
};

// All state of a network: trainable weights plus batchnorm running stats.
// `version` increments on every mutation so stale backward caches are caught.
struct Parameters {
    std::vector<LayerParams> layers;
    std::uint64_t version = 0;

    void zero_grad();
    std::size_t trainable_tensor_count() const;
    template <typename Fn>
    void for_each_trainable(Fn&& fn) {
        for (auto& layer : layers)
            for (auto& pt : layer.tensors)
                if (pt.trainable) fn(pt);
    }
    template <typename Fn>
    void for_each_trainable(Fn&& fn) const {
        for (const auto& layer : layers)
            for (const auto& pt : layer.tensors)
                if (pt.trainable) fn(pt);
    }
    bool bit_equal(const Parameters& o) const;
};

enum class Mode { Train, Eval };

struct InitSpec {
    enum class Kind { KaimingUniform, Normal } kind = Kind::KaimingUniform;
    double sigma = 0.02;  // Normal only

    static InitSpec kaiming() { return {Kind::KaimingUniform, 0.0}; }
    static InitSpec normal(double sigma) { return {Kind::Normal, sigma}; }
};

// Per-layer saved state from a train-mode forward pass.
struct ForwardCache {
    Mode mode = Mode::Train;
    std::uint64_t param_version = 0;
    bool valid = false;
    std::vector<Tensor> inputs;   // input seen by each layer (post-flatten for dense)
    std::vector<Tensor> outputs;  // output of each layer
    std::vector<Tensor> aux;      // dropout mask / bn xhat / pool argmax
    std::vector<Tensor> aux2;     // bn inv_std
};

// Feed-forward network over the fixed layer set with explicit backward.
// Single-threaded and deterministic; independent instances may train on
// separate threads.
class Network {
  public:
    Network() = default;

    // Validates specs, propagates shapes, initializes parameters from `rng`.
    // `input_sample_shape` excludes the batch dimension.
    static Network build(std::vector<LayerSpec> specs,
                         std::vector<std::size_t> input_sample_shape,
                         const InitSpec& init, Rng& rng);

    const std::vector<LayerSpec>& layers() const { return specs_; }
    Parameters& params() { return params_; }
    const Parameters& params() const { return params_; }
    const std::vector<std::size_t>& input_sample_shape() const { return in_shape_; }
    const std::vector<std::size_t>& output_sample_shape() const { return out_shape_; }
    std::size_t output_dim() const;

    // mode=Eval disables dropout and uses batchnorm running stats. Train-mode
    // batchnorm updates running stats. `rng` is required when a dropout layer
    // runs in train mode.
    Tensor forward(const Tensor& input, Mode mode, ForwardCache* cache = nullptr,
                   Rng* rng = nullptr);

    // Accumulates parameter gradients and returns the input gradient.
    // Requires a valid train-mode cache against the current parameters.
    Tensor backward(const ForwardCache& cache, const Tensor& grad_out);

    // Replace parameters; shapes and tensor names must match exactly.
    void set_params(Parameters p);

  private:
    std::vector<LayerSpec> specs_;
    Parameters params_;
    std::vector<std::size_t> in_shape_;
    std::vector<std::size_t> out_shape_;
    std::vector<std::vector<std::size_t>> layer_in_;   // sample shapes
    std::vector<std::vector<std::size_t>> layer_out_;
};

// Numerically stable softmax along the last axis.
Tensor softmax(const Tensor& logits);

// dL/dlogits given dL/dp for a softmax along the last axis.
Tensor softmax_backward(const Tensor& probs, const Tensor& grad_probs);

// Cross entropy -y^T log p summed over rows, p clamped at 1e-12 before log.
// grad is with respect to the probabilities.
struct LossResult {
    double loss = 0.0;
    Tensor grad;
};
LossResult cross_entropy(const Tensor& probs, const Tensor& onehot);

// Fused softmax + cross entropy on logits; grad is p - y, summed over rows.
LossResult softmax_cross_entropy(const Tensor& logits, const Tensor& onehot);

inline double clamp_prob(double p) {
    if (p < kLogClamp) return kLogClamp;
    if (p > 1.0 - kLogClamp) return 1.0 - kLogClamp;
    return p;
}

}  // namespace dreamkit::nn
