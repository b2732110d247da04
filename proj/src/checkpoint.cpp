#include "dreamkit/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "dreamkit/errors.hpp"

namespace dreamkit::nn {

namespace {
constexpr char kMagic[8] = {'D', 'K', 'C', 'K', 'P', 'T', '0', '1'};
}

void write_u32(std::ostream& os, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 8);
}

void write_f64(std::ostream& os, double v) {
    write_u64(os, std::bit_cast<std::uint64_t>(v));
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw ValidationError("truncated binary stream");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw ValidationError("truncated binary stream");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

double read_f64(std::istream& is) { return std::bit_cast<double>(read_u64(is)); }

void write_parameters(std::ostream& os, const Parameters& params) {
    os.write(kMagic, 8);
    write_u32(os, static_cast<std::uint32_t>(params.layers.size()));
    for (const auto& layer : params.layers) {
        write_u32(os, static_cast<std::uint32_t>(layer.tensors.size()));
        for (const auto& pt : layer.tensors) {
            write_u32(os, static_cast<std::uint32_t>(pt.name.size()));
            os.write(pt.name.data(), static_cast<std::streamsize>(pt.name.size()));
            os.put(pt.trainable ? 1 : 0);
            write_u32(os, static_cast<std::uint32_t>(pt.value.shape.size()));
            for (std::size_t d : pt.value.shape) write_u64(os, d);
            for (double v : pt.value.data) write_f64(os, v);
        }
    }
}

Parameters read_parameters(std::istream& is) {
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw ValidationError("bad checkpoint magic");
    Parameters params;
    const std::uint32_t nlayers = read_u32(is);
    params.layers.resize(nlayers);
    for (auto& layer : params.layers) {
        const std::uint32_t nt = read_u32(is);
        layer.tensors.resize(nt);
        for (auto& pt : layer.tensors) {
            const std::uint32_t name_len = read_u32(is);
            if (name_len > 256) throw ValidationError("unreasonable tensor name length");
            pt.name.resize(name_len);
            is.read(pt.name.data(), name_len);
            const int trainable = is.get();
            if (trainable != 0 && trainable != 1)
                throw ValidationError("corrupt checkpoint: bad trainable flag");
            pt.trainable = trainable == 1;
            const std::uint32_t ndim = read_u32(is);
            if (ndim > 8) throw ValidationError("unreasonable tensor rank");
            std::vector<std::size_t> shape(ndim);
            for (auto& d : shape) d = static_cast<std::size_t>(read_u64(is));
            const std::size_t n = Tensor::count(shape);
            std::vector<double> data(n);
            for (auto& v : data) v = read_f64(is);
            pt.value = Tensor(std::move(shape), std::move(data));
            if (pt.trainable) pt.grad = Tensor::zeros(pt.value.shape);
        }
    }
    params.version = 1;
    return params;
}

void save_parameters(const Parameters& params, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ValidationError("cannot open " + path + " for writing");
    write_parameters(os, params);
    if (!os) throw ValidationError("write failed: " + path);
}

Parameters load_parameters(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("cannot open checkpoint " + path);
    return read_parameters(is);
}

}  // namespace dreamkit::nn
