#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "dreamkit/nn.hpp"

namespace dreamkit::nn {

// Little-endian binary parameter checkpoint:
//   magic "DKCKPT01"
//   u32 layer_count
//   per layer: u32 tensor_count
//     per tensor: u32 name_len, name bytes, u8 trainable,
//                 u32 ndim, u64 dims[ndim], f64 data[prod(dims)]
// Round-trips are bit-exact.
void save_parameters(const Parameters& params, const std::string& path);
Parameters load_parameters(const std::string& path);

void write_parameters(std::ostream& os, const Parameters& params);
Parameters read_parameters(std::istream& is);

// Low-level little-endian helpers shared by the binary formats.
void write_u32(std::ostream& os, std::uint32_t v);
void write_u64(std::ostream& os, std::uint64_t v);
void write_f64(std::ostream& os, double v);
std::uint32_t read_u32(std::istream& is);
std::uint64_t read_u64(std::istream& is);
double read_f64(std::istream& is);

}  // namespace dreamkit::nn
