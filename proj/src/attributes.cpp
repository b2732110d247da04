#include "dreamkit/attributes.hpp"

#include <sstream>

#include "dreamkit/errors.hpp"

namespace dreamkit::zoo {

const std::array<const char*, kAttributeCount> kAttributeNames = {
    "act", "drop", "pool", "bn", "ks", "conv", "fc", "opt", "bs"};

namespace {

const std::array<std::vector<std::string>, kAttributeCount> kValueTokens = {{
    {"ReLU", "PReLU", "ELU", "Tanh"},
    {"yes", "no"},
    {"yes", "no"},
    {"yes", "no"},
    {"3", "5"},
    {"2", "3", "4"},
    {"2", "3", "4"},
    {"SGD", "Adam", "RMSprop"},
    {"32", "64", "128"},
}};

std::size_t token_index(std::size_t attr, const std::string& token) {
    const auto& vals = kValueTokens[attr];
    for (std::size_t i = 0; i < vals.size(); ++i)
        if (vals[i] == token) return i;
    throw ValidationError(std::string("bad value '") + token + "' for attribute " +
                          kAttributeNames[attr]);
}

}  // namespace

std::array<std::size_t, kAttributeCount> AttributeVector::label_indices() const {
    std::array<std::size_t, kAttributeCount> idx{};
    idx[0] = static_cast<std::size_t>(activation);
    idx[1] = dropout ? 0 : 1;
    idx[2] = maxpool ? 0 : 1;
    idx[3] = batchnorm ? 0 : 1;
    idx[4] = kernel_size == 3 ? 0 : 1;
    idx[5] = static_cast<std::size_t>(n_conv - 2);
    idx[6] = static_cast<std::size_t>(n_fc - 2);
    idx[7] = static_cast<std::size_t>(optimizer);
    idx[8] = batch_size == 32 ? 0 : (batch_size == 64 ? 1 : 2);
    return idx;
}

AttributeVector AttributeVector::from_label_indices(
    const std::array<std::size_t, kAttributeCount>& idx) {
    for (std::size_t a = 0; a < kAttributeCount; ++a)
        if (idx[a] >= kAttributeCardinality[a])
            throw ValidationError("label index out of range for attribute " +
                                  std::string(kAttributeNames[a]));
    AttributeVector v;
    v.activation = static_cast<nn::Activation>(idx[0]);
    v.dropout = idx[1] == 0;
    v.maxpool = idx[2] == 0;
    v.batchnorm = idx[3] == 0;
    v.kernel_size = idx[4] == 0 ? 3 : 5;
    v.n_conv = static_cast<int>(idx[5]) + 2;
    v.n_fc = static_cast<int>(idx[6]) + 2;
    v.optimizer = static_cast<nn::OptKind>(idx[7]);
    v.batch_size = idx[8] == 0 ? 32 : (idx[8] == 1 ? 64 : 128);
    return v;
}

std::array<std::string, kAttributeCount> AttributeVector::tokens() const {
    const auto idx = label_indices();
    std::array<std::string, kAttributeCount> out;
    for (std::size_t a = 0; a < kAttributeCount; ++a) out[a] = kValueTokens[a][idx[a]];
    return out;
}

AttributeVector AttributeVector::from_tokens(const std::vector<std::string>& tokens) {
    if (tokens.size() != kAttributeCount)
        throw ValidationError("expected " + std::to_string(kAttributeCount) +
                              " attribute tokens, got " + std::to_string(tokens.size()));
    std::array<std::size_t, kAttributeCount> idx{};
    for (std::size_t a = 0; a < kAttributeCount; ++a) idx[a] = token_index(a, tokens[a]);
    return from_label_indices(idx);
}

std::string AttributeVector::csv() const {
    const auto t = tokens();
    std::string out;
    for (std::size_t a = 0; a < kAttributeCount; ++a) {
        if (a) out += ',';
        out += t[a];
    }
    return out;
}

std::size_t AttributeVector::grid_index() const {
    const auto idx = label_indices();
    std::size_t flat = 0;
    for (std::size_t a = 0; a < kAttributeCount; ++a)
        flat = flat * kAttributeCardinality[a] + idx[a];
    return flat;
}

AttributeVector AttributeVector::from_grid_index(std::size_t index) {
    if (index >= kGridSize) throw ValidationError("grid index out of range");
    std::array<std::size_t, kAttributeCount> idx{};
    for (std::size_t a = kAttributeCount; a-- > 0;) {
        idx[a] = index % kAttributeCardinality[a];
        index /= kAttributeCardinality[a];
    }
    return from_label_indices(idx);
}

std::vector<AttributeVector> enumerate_grid() {
    std::vector<AttributeVector> grid;
    grid.reserve(kGridSize);
    for (std::size_t i = 0; i < kGridSize; ++i)
        grid.push_back(AttributeVector::from_grid_index(i));
    return grid;
}

std::vector<std::string> attribute_values(std::size_t attr) {
    if (attr >= kAttributeCount) throw ValidationError("attribute index out of range");
    return kValueTokens[attr];
}

std::uint64_t grid_hash() {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        h ^= '\n';
        h *= 0x100000001b3ULL;
    };
    for (std::size_t i = 0; i < kGridSize; ++i)
        mix(AttributeVector::from_grid_index(i).csv());
    return h;
}

}  // namespace dreamkit::zoo
