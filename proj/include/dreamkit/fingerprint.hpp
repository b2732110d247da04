#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dreamkit/attributes.hpp"
#include "dreamkit/dataset.hpp"
#include "dreamkit/nn.hpp"
#include "dreamkit/tensor.hpp"

namespace dreamkit::fp {

// Tolerance for each per-query probability block summing to 1.
constexpr double kSimplexTol = 1e-6;

// Fixed, immutable query set: an equal number of images from every source
// domain, in seeded deterministic order (per-domain blocks, domain order).
struct QuerySet {
    int n_queries = 0;
    Tensor images;                    // [N, 1, side, side]
    std::vector<int> source_domains;  // one tag per query
    std::uint64_t seed = 0;
};

QuerySet build_query_set(const std::vector<zoo::DomainData>& sources, int n_queries,
                         std::uint64_t seed);

// Concatenated softmax outputs over the query set, length C*N; every
// consecutive C-block is a probability simplex point.
struct Fingerprint {
    std::string model_id;
    std::string domain = "?";  // "?" for black-box targets
    bool labeled = false;
    zoo::AttributeVector attrs;   // meaningful only when labeled
    std::vector<double> values;   // C * N
    int class_count = 0;
    int n_queries = 0;
};

struct FingerprintSet {
    std::vector<Fingerprint> rows;
    int domain_count = 0;  // m
    int class_count = 0;   // C
    int n_queries = 0;     // N

    void add(Fingerprint fpr);
    std::vector<std::string> domains() const;
    // Feature matrix [rows, C*N] in row order.
    Tensor features() const;
};

// Eval-mode outputs of the model over the query batch; a pure function of
// (parameters, query set).
Fingerprint collect_fingerprint(nn::Network& model, const QuerySet& queries);

// Text format:
//   DREAMFP 1 m=<m> C=<C> N=<N>
//   model_id,domain,<9 attribute tokens or '?'>,<C*N floats>
// Floats use shortest round-trip encoding, so write/read is bit-exact.
void write_fingerprints(const std::string& path, const FingerprintSet& set);
FingerprintSet read_fingerprints(const std::string& path);

// Simplex/shape validation with row and block diagnostics.
void validate_set(const FingerprintSet& set);

// Keep only the probability entries of `classes` (original class indices)
// in every block and renormalize each block. When `classes` is the full
// identity list the row is returned unchanged (exact degenerate path).
Fingerprint truncate_to_classes(const Fingerprint& fpr, const std::vector<int>& classes);

}  // namespace dreamkit::fp
