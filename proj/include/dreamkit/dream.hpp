#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dreamkit/attributes.hpp"
#include "dreamkit/fingerprint.hpp"
#include "dreamkit/nn.hpp"
#include "dreamkit/optim.hpp"

namespace dreamkit::dream {

struct DreamDims {
    std::size_t gen_hidden = 500;
    std::size_t embed_dim = 128;
    std::size_t disc_hidden1 = 512;
    std::size_t disc_hidden2 = 256;
    std::size_t trunk_hidden = 256;

    bool operator==(const DreamDims&) const = default;
};

struct DreamConfig {
    double alpha = 1e-5;  // generator / discriminator learning rate
    double beta = 1e-4;   // classifier learning rate
    double lambda = 0.1;  // trade-off between adversarial and CE terms
    int batch = 100;      // b, per domain
    int epochs = 200;
    std::vector<double> lambda_grid = {0.001, 0.01, 0.1, 1.0, 10.0};
    std::uint64_t seed = 0;
    bool use_gan = true;          // off: classifier trains on raw fingerprints
    bool non_saturating = false;  // flag for max log D(G(x)) generator loss
    nn::OptKind update_rule = nn::OptKind::Adam;
    double init_sigma = 0.02;
    double mmd_gamma = 0.0;  // feature-alignment penalty weight (baseline hook)
    double mmd_sigma = 0.0;  // 0 = median heuristic per batch
    DreamDims dims;

    void validate() const;
};

// Trained attack artifact: generator + discriminators + classifier for the
// adversarial pipeline, or the classifier alone when use_gan is off.
struct ReversePipeline {
    std::string kind = "dream";  // dream | kennen | mmd
    bool use_gan = true;
    int class_count = 0;
    int n_queries = 0;
    int domain_count = 0;  // source domains m
    std::uint64_t grid_hash_value = 0;
    std::vector<std::string> source_domains;
    double lambda = 0.0;
    double mmd_gamma = 0.0;
    DreamDims dims;

    nn::Network generator;
    std::vector<nn::Network> discriminators;
    nn::Network trunk;
    std::vector<nn::Network> heads;  // one per attribute

    std::size_t input_dim() const {
        return static_cast<std::size_t>(class_count) * n_queries;
    }
    // G(X), or X itself when the pipeline has no generator.
    Tensor embed(const Tensor& rows);
};

// Throws IncompatibilityError unless the set's (C, N) matches the pipeline.
void check_compatible(const ReversePipeline& pipe, const fp::FingerprintSet& set);

std::uint64_t architecture_hash(const ReversePipeline& pipe);

struct Partition {
    std::vector<std::size_t> true_idx;
    std::vector<std::size_t> false_idx;
};

// True/False split for discriminator i: rows of that domain against all
// others. Disjoint and covering by construction; needs >= 2 domains.
Partition partition_true_false(const std::vector<std::string>& row_domains,
                               const std::string& domain_i);

// -[sum_T log D(z) + sum_F log(1 - D(z))], outputs clamped before log.
double discriminator_loss(nn::Network& disc, const Tensor& z_true,
                          const Tensor& z_false);
// Same value; also accumulates discriminator parameter gradients.
double discriminator_loss_backward(nn::Network& disc, const Tensor& z_true,
                                   const Tensor& z_false);

// sum_i sum_{x in False_i} log(1 - D_i(z)), the term the generator descends
// (non-saturating flag switches to -sum log D_i(z)). `false_embeds` holds one
// embedding batch per discriminator.
double generator_adversarial_loss(std::vector<nn::Network>& discs,
                                  const std::vector<Tensor>& false_embeds,
                                  bool non_saturating);
// Same value; fills `embed_grads` with d(loss)/d(embedding) per batch.
double generator_adversarial_loss_backward(std::vector<nn::Network>& discs,
                                           const std::vector<Tensor>& false_embeds,
                                           bool non_saturating,
                                           std::vector<Tensor>& embed_grads);

// Mean over samples of the summed per-head cross entropies.
double classifier_loss(nn::Network& trunk, std::vector<nn::Network>& heads,
                       const Tensor& embeddings,
                       const std::vector<std::array<std::size_t,
                                                    zoo::kAttributeCount>>& labels);

struct EpochMetrics {
    double disc_loss = 0.0;        // per-sample mean over discriminators
    double adv_loss = 0.0;         // per-sample mean generator adversarial value
    double classifier_loss = 0.0;  // per-sample mean CE (summed heads)
    bool sampled_with_replacement = false;
};

struct TrainResult {
    ReversePipeline pipeline;
    std::vector<EpochMetrics> history;
};

// Joint training: per iteration, sample b rows per source domain, update
// each discriminator in ascending domain order on the True/False partition,
// then update classifier (unscaled CE, lr beta) and generator (adversarial
// term plus lambda-scaled CE, lr alpha) from the pooled batch. An epoch is
// one pass over the smallest per-domain split.
TrainResult train_reverse(const fp::FingerprintSet& train_rows, const DreamConfig& cfg);

// Trains one pipeline per distinct grid value (shared seed) and returns the
// lambda with the best mean per-attribute validation accuracy; ties go to
// the smaller value. A single-value grid is returned without training.
double select_lambda(const fp::FingerprintSet& train_rows,
                     const fp::FingerprintSet& val_rows, const DreamConfig& cfg);

struct Prediction {
    std::array<std::size_t, zoo::kAttributeCount> label_indices{};
    zoo::AttributeVector attrs;
    std::array<std::vector<double>, zoo::kAttributeCount> head_probs;
};

// Argmax attribute prediction for one black-box fingerprint vector; throws
// IncompatibilityError on a length mismatch.
Prediction infer_attributes(ReversePipeline& pipe, const std::vector<double>& values);

std::vector<Prediction> predict_batch(ReversePipeline& pipe,
                                      const fp::FingerprintSet& set);

// Mean per-attribute accuracy (fraction in [0,1]) of the pipeline on
// labeled rows.
double mean_attribute_accuracy(ReversePipeline& pipe, const fp::FingerprintSet& set);

// Binary bundle of all pipeline parameters plus the (C, N, m, grid hash)
// metadata it was trained for. Loading never guesses: metadata mismatches
// at use sites raise IncompatibilityError.
void save_pipeline(const ReversePipeline& pipe, const std::string& path);
ReversePipeline load_pipeline(const std::string& path);

}  // namespace dreamkit::dream
