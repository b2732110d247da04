#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dreamkit/nn.hpp"
#include "dreamkit/optim.hpp"

namespace dreamkit::zoo {

constexpr std::size_t kAttributeCount = 9;

// Value-set sizes in attribute order: activation, dropout, maxpool,
// batchnorm, kernel size, conv layers, fc layers, optimizer, batch size.
constexpr std::array<std::size_t, kAttributeCount> kAttributeCardinality = {
    4, 2, 2, 2, 2, 3, 3, 3, 3};

constexpr std::size_t kGridSize = 4 * 2 * 2 * 2 * 2 * 3 * 3 * 3 * 3;  // 5184

extern const std::array<const char*, kAttributeCount> kAttributeNames;

// One point of the attribute grid; the label the reverse model predicts.
struct AttributeVector {
    nn::Activation activation = nn::Activation::ReLU;
    bool dropout = false;
    bool maxpool = false;
    bool batchnorm = false;
    int kernel_size = 3;   // {3, 5}
    int n_conv = 2;        // {2, 3, 4}
    int n_fc = 2;          // {2, 3, 4}
    nn::OptKind optimizer = nn::OptKind::SGD;
    int batch_size = 32;   // {32, 64, 128}

    bool operator==(const AttributeVector&) const = default;

    // Per-attribute class index into its value set (Table layout order).
    std::array<std::size_t, kAttributeCount> label_indices() const;
    static AttributeVector from_label_indices(
        const std::array<std::size_t, kAttributeCount>& idx);

    // Tokens in attribute order, e.g. "ReLU,yes,no,yes,3,2,4,Adam,64".
    std::array<std::string, kAttributeCount> tokens() const;
    static AttributeVector from_tokens(const std::vector<std::string>& tokens);

    std::string csv() const;

    // Flat grid index (lexicographic, activation most significant,
    // batch size fastest-varying).
    std::size_t grid_index() const;
    static AttributeVector from_grid_index(std::size_t index);
};

// All 5,184 grid members in documented lexicographic order.
std::vector<AttributeVector> enumerate_grid();

// Token list for one attribute's value set, in value order.
std::vector<std::string> attribute_values(std::size_t attr);

// FNV-1a hash over the canonical token stream of the full grid; identifies
// the grid an artifact was built against.
std::uint64_t grid_hash();

}  // namespace dreamkit::zoo
