#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dreamkit/tensor.hpp"

namespace dreamkit::zoo {

// Style transforms that shift pixel statistics while preserving class
// identity: shared stroke prototypes rendered clean, inverted with extra
// noise, or dilated.
enum class DomainStyle { Clean, InvertNoise, Dilate };

const char* style_name(DomainStyle s);
DomainStyle style_from_name(const std::string& name);

struct DomainSpec {
    int domain_id = 0;
    int class_count = 5;
    int image_side = 12;
    DomainStyle style = DomainStyle::Clean;
    int train_per_class = 200;
    int val_per_class = 50;
};

struct LabeledImages {
    Tensor images;            // [n, 1, side, side]
    std::vector<int> labels;  // n entries in [0, class_count)

    std::size_t count() const { return labels.size(); }
};

struct DomainData {
    DomainSpec spec;
    LabeledImages train;
    LabeledImages val;
};

// Deterministic given (seed, specs). All domains share class prototypes
// derived from the seed, so labels mean the same thing everywhere while
// pixel statistics differ per style.
std::vector<DomainData> gen_synthetic_domains(std::uint64_t seed,
                                              const std::vector<DomainSpec>& specs);

// Binary container, magic "DKDATA01", little-endian; round-trip bit-exact.
void save_domain(const DomainData& d, const std::string& path);
DomainData load_domain(const std::string& path);

// Keep only the listed classes and relabel them to 0..k-1 (class-subset
// domain-shift mode). Class order follows `classes`.
DomainData subset_classes(const DomainData& d, const std::vector<int>& classes);

double pixel_mean(const LabeledImages& imgs);

}  // namespace dreamkit::zoo
