#pragma once

#include <cstdint>
#include <vector>

#include "dreamkit/dream.hpp"
#include "dreamkit/fingerprint.hpp"
#include "dreamkit/mmd.hpp"

namespace dreamkit::baselines {

struct BaselineConfig {
    double lr = 1e-4;
    int epochs = 200;
    int batch = 100;
    double mmd_gamma = 1.0;
    double mmd_sigma = 0.0;  // 0 = median heuristic
    std::vector<double> gamma_grid = {0.01, 0.1, 1.0, 10.0};
    // linear SVM
    double svm_lr = 0.05;
    int svm_epochs = 60;
    double svm_reg = 1e-3;
    std::uint64_t seed = 0;
};

// The reverse-classifier architecture trained directly on raw fingerprints
// with cross entropy only (trunk input C*N, domain tags ignored). Shares the
// dream trainer code path, so it is bit-identical to
// train_reverse(use_gan=false, lambda=0) under the same seed.
dream::TrainResult train_kennen(const fp::FingerprintSet& train_rows,
                                const BaselineConfig& cfg);

// KENNEN* plus gamma * mmd_penalty on trunk features across domains.
// gamma = 0 reduces bit-exactly to train_kennen.
dream::TrainResult train_mmd(const fp::FingerprintSet& train_rows,
                             const BaselineConfig& cfg);

// One-vs-rest linear classifiers per attribute, hinge loss with L2
// regularization, trained by seeded subgradient descent.
struct LinearSvm {
    // per attribute, per value: weight vector (dim) + bias
    std::vector<std::vector<std::vector<double>>> weights;
    std::vector<std::vector<double>> biases;
    std::size_t input_dim = 0;

    std::array<std::size_t, zoo::kAttributeCount> predict(
        const std::vector<double>& values) const;
};

LinearSvm train_linear_svm(const fp::FingerprintSet& train_rows,
                           const BaselineConfig& cfg);

// hinge(margin) = max(0, 1 - s * margin); exposed for tests
double hinge(double signed_margin);

double svm_mean_attribute_accuracy(const LinearSvm& svm, const fp::FingerprintSet& set);

// SVM checkpoint with the same metadata header discipline as the pipeline
// bundle (kind, C, N, grid hash); round-trip bit-exact.
struct SvmBundle {
    LinearSvm svm;
    int class_count = 0;
    int n_queries = 0;
    std::uint64_t grid_hash_value = 0;
};

void save_svm(const LinearSvm& svm, int class_count, int n_queries,
              std::uint64_t grid_hash_value, const std::string& path);
SvmBundle load_svm(const std::string& path);

}  // namespace dreamkit::baselines
