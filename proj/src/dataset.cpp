#include "dreamkit/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "dreamkit/checkpoint.hpp"
#include "dreamkit/errors.hpp"
#include "dreamkit/rng.hpp"

namespace dreamkit::zoo {

const char* style_name(DomainStyle s) {
    switch (s) {
        case DomainStyle::Clean: return "clean";
        case DomainStyle::InvertNoise: return "invert-noise";
        case DomainStyle::Dilate: return "dilate";
    }
    return "?";
}

DomainStyle style_from_name(const std::string& name) {
    if (name == "clean") return DomainStyle::Clean;
    if (name == "invert-noise") return DomainStyle::InvertNoise;
    if (name == "dilate") return DomainStyle::Dilate;
    throw ValidationError("unknown domain style: " + name);
}

namespace {

constexpr std::uint64_t kProtoTag = 0x50524f54;   // prototype stream
constexpr std::uint64_t kSampleTag = 0x53414d50;  // per-domain sample stream

// Stroke-pattern prototype: a few seeded random walks on the grid. Strokes
// keep classes distinguishable at small resolutions and give the dilation
// style something to thicken.
std::vector<double> class_prototype(std::uint64_t seed, int class_id, int side) {
    Rng rng(mix_seed(seed, kProtoTag, static_cast<std::uint64_t>(class_id)));
    std::vector<double> img(static_cast<std::size_t>(side) * side, 0.0);
    const int strokes = 3;
    for (int s = 0; s < strokes; ++s) {
        int x = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(side - 2)));
        int y = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(side - 2)));
        int dir = static_cast<int>(rng.below(8));
        const int steps = side - 3 + static_cast<int>(rng.below(3));
        static const int dx[8] = {1, 1, 0, -1, -1, -1, 0, 1};
        static const int dy[8] = {0, 1, 1, 1, 0, -1, -1, -1};
        for (int t = 0; t < steps; ++t) {
            img[static_cast<std::size_t>(y) * side + x] = 1.0;
            if (rng.uniform() < 0.2) dir = static_cast<int>(rng.below(8));
            x = std::clamp(x + dx[dir], 0, side - 1);
            y = std::clamp(y + dy[dir], 0, side - 1);
        }
    }
    return img;
}

std::vector<double> shift_image(const std::vector<double>& img, int side, int sx, int sy) {
    std::vector<double> out(img.size(), 0.0);
    for (int y = 0; y < side; ++y) {
        const int ys = y - sy;
        if (ys < 0 || ys >= side) continue;
        for (int x = 0; x < side; ++x) {
            const int xs = x - sx;
            if (xs < 0 || xs >= side) continue;
            out[static_cast<std::size_t>(y) * side + x] =
                img[static_cast<std::size_t>(ys) * side + xs];
        }
    }
    return out;
}

std::vector<double> dilate3(const std::vector<double>& img, int side) {
    std::vector<double> out(img.size(), 0.0);
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            double m = 0.0;
            for (int dy = -1; dy <= 1; ++dy) {
                const int yy = y + dy;
                if (yy < 0 || yy >= side) continue;
                for (int dx = -1; dx <= 1; ++dx) {
                    const int xx = x + dx;
                    if (xx < 0 || xx >= side) continue;
                    m = std::max(m, img[static_cast<std::size_t>(yy) * side + xx]);
                }
            }
            out[static_cast<std::size_t>(y) * side + x] = m;
        }
    }
    return out;
}

LabeledImages render_split(std::uint64_t seed, const DomainSpec& spec,
                           const std::vector<std::vector<double>>& prototypes,
                           int per_class, std::uint64_t split_tag) {
    const int side = spec.image_side;
    const std::size_t n = static_cast<std::size_t>(per_class) * spec.class_count;
    LabeledImages out;
    out.images = Tensor::zeros({n, 1, static_cast<std::size_t>(side),
                                static_cast<std::size_t>(side)});
    out.labels.resize(n);
    Rng rng(mix_seed(seed, kSampleTag, static_cast<std::uint64_t>(spec.domain_id) + 1,
                     split_tag));
    std::size_t row = 0;
    for (int c = 0; c < spec.class_count; ++c) {
        for (int k = 0; k < per_class; ++k, ++row) {
            const int sx = static_cast<int>(rng.below(3)) - 1;
            const int sy = static_cast<int>(rng.below(3)) - 1;
            std::vector<double> img = shift_image(prototypes[c], side, sx, sy);
            const double amp = rng.uniform(0.75, 1.0);
            for (double& v : img) v *= amp;
            double noise_sigma = 0.08;
            switch (spec.style) {
                case DomainStyle::Clean:
                    break;
                case DomainStyle::InvertNoise:
                    for (double& v : img) v = 1.0 - v;
                    noise_sigma = 0.12;
                    break;
                case DomainStyle::Dilate:
                    img = dilate3(img, side);
                    break;
            }
            double* dst = out.images.ptr() + row * img.size();
            for (std::size_t t = 0; t < img.size(); ++t) {
                const double v = img[t] + rng.normal(0.0, noise_sigma);
                dst[t] = std::clamp(v, 0.0, 1.0);
            }
            out.labels[row] = c;
        }
    }
    return out;
}

}  // namespace

std::vector<DomainData> gen_synthetic_domains(std::uint64_t seed,
                                              const std::vector<DomainSpec>& specs) {
    if (specs.size() < 2)
        throw ValidationError("need at least 2 domains");
    for (const auto& s : specs) {
        if (s.class_count < 2 || s.class_count != specs.front().class_count)
            throw ValidationError("all domains must share the same class count >= 2");
        if (s.image_side < 6 || s.image_side != specs.front().image_side)
            throw ValidationError("all domains must share the same image side >= 6");
        if (s.train_per_class < 1 || s.val_per_class < 1)
            throw ValidationError("per-class sample counts must be positive");
    }
    std::vector<std::vector<double>> prototypes;
    for (int c = 0; c < specs.front().class_count; ++c)
        prototypes.push_back(class_prototype(seed, c, specs.front().image_side));

    std::vector<DomainData> out;
    out.reserve(specs.size());
    for (const auto& spec : specs) {
        DomainData d;
        d.spec = spec;
        d.train = render_split(seed, spec, prototypes, spec.train_per_class, 1);
        d.val = render_split(seed, spec, prototypes, spec.val_per_class, 2);
        out.push_back(std::move(d));
    }
    return out;
}

namespace {

constexpr char kDataMagic[8] = {'D', 'K', 'D', 'A', 'T', 'A', '0', '1'};

void write_split(std::ostream& os, const LabeledImages& imgs) {
    nn::write_u32(os, static_cast<std::uint32_t>(imgs.count()));
    for (int lbl : imgs.labels) nn::write_u32(os, static_cast<std::uint32_t>(lbl));
    for (double v : imgs.images.data) nn::write_f64(os, v);
}

LabeledImages read_split(std::istream& is, int side) {
    LabeledImages imgs;
    const std::uint32_t n = nn::read_u32(is);
    imgs.labels.resize(n);
    for (auto& lbl : imgs.labels) lbl = static_cast<int>(nn::read_u32(is));
    imgs.images = Tensor::zeros({n, 1, static_cast<std::size_t>(side),
                                 static_cast<std::size_t>(side)});
    for (auto& v : imgs.images.data) v = nn::read_f64(is);
    return imgs;
}

}  // namespace

void save_domain(const DomainData& d, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ValidationError("cannot open " + path + " for writing");
    os.write(kDataMagic, 8);
    nn::write_u32(os, static_cast<std::uint32_t>(d.spec.domain_id));
    nn::write_u32(os, static_cast<std::uint32_t>(d.spec.style));
    nn::write_u32(os, static_cast<std::uint32_t>(d.spec.class_count));
    nn::write_u32(os, static_cast<std::uint32_t>(d.spec.image_side));
    nn::write_u32(os, static_cast<std::uint32_t>(d.spec.train_per_class));
    nn::write_u32(os, static_cast<std::uint32_t>(d.spec.val_per_class));
    write_split(os, d.train);
    write_split(os, d.val);
    if (!os) throw ValidationError("write failed: " + path);
}

DomainData load_domain(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("cannot open dataset " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kDataMagic, 8) != 0)
        throw ValidationError("bad dataset magic in " + path);
    DomainData d;
    d.spec.domain_id = static_cast<int>(nn::read_u32(is));
    const std::uint32_t style = nn::read_u32(is);
    if (style > 2) throw ValidationError("bad style tag in " + path);
    d.spec.style = static_cast<DomainStyle>(style);
    d.spec.class_count = static_cast<int>(nn::read_u32(is));
    d.spec.image_side = static_cast<int>(nn::read_u32(is));
    d.spec.train_per_class = static_cast<int>(nn::read_u32(is));
    d.spec.val_per_class = static_cast<int>(nn::read_u32(is));
    d.train = read_split(is, d.spec.image_side);
    d.val = read_split(is, d.spec.image_side);
    return d;
}

DomainData subset_classes(const DomainData& d, const std::vector<int>& classes) {
    if (classes.empty()) throw ValidationError("class subset is empty");
    for (int c : classes)
        if (c < 0 || c >= d.spec.class_count)
            throw ValidationError("class subset contains out-of-range class");

    auto filter = [&](const LabeledImages& in) {
        const std::size_t px = in.images.size() / std::max<std::size_t>(in.count(), 1);
        LabeledImages out;
        std::vector<std::size_t> keep;
        std::vector<int> relabel;
        for (std::size_t i = 0; i < in.count(); ++i) {
            for (std::size_t k = 0; k < classes.size(); ++k) {
                if (in.labels[i] == classes[k]) {
                    keep.push_back(i);
                    relabel.push_back(static_cast<int>(k));
                    break;
                }
            }
        }
        auto shape = in.images.shape;
        shape[0] = keep.size();
        out.images = Tensor::zeros(shape);
        out.labels = std::move(relabel);
        for (std::size_t r = 0; r < keep.size(); ++r)
            std::copy_n(in.images.ptr() + keep[r] * px, px, out.images.ptr() + r * px);
        return out;
    };

    DomainData out;
    out.spec = d.spec;
    out.spec.class_count = static_cast<int>(classes.size());
    out.train = filter(d.train);
    out.val = filter(d.val);
    return out;
}

double pixel_mean(const LabeledImages& imgs) {
    if (imgs.images.empty()) return 0.0;
    double s = 0.0;
    for (double v : imgs.images.data) s += v;
    return s / static_cast<double>(imgs.images.size());
}

}  // namespace dreamkit::zoo
