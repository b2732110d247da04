#include "dreamkit/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace dreamkit::nn {

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::ReLU: return "ReLU";
        case Activation::PReLU: return "PReLU";
        case Activation::ELU: return "ELU";
        case Activation::Tanh: return "Tanh";
    }
    return "?";
}

Activation activation_from_name(const std::string& name) {
    if (name == "ReLU") return Activation::ReLU;
    if (name == "PReLU") return Activation::PReLU;
    if (name == "ELU") return Activation::ELU;
    if (name == "Tanh") return Activation::Tanh;
    throw ValidationError("unknown activation: " + name);
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
    LayerSpec s;
    s.kind = LayerKind::Dense;
    s.in_dim = in;
    s.out_dim = out;
    return s;
}
LayerSpec LayerSpec::conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t k) {
    LayerSpec s;
    s.kind = LayerKind::Conv2d;
    s.in_channels = in_ch;
    s.out_channels = out_ch;
    s.kernel_size = k;
    return s;
}
LayerSpec LayerSpec::activation(Activation a) {
    LayerSpec s;
    s.kind = LayerKind::Activation;
    s.act = a;
    return s;
}
LayerSpec LayerSpec::dropout(double rate) {
    LayerSpec s;
    s.kind = LayerKind::Dropout;
    s.rate = rate;
    return s;
}
LayerSpec LayerSpec::batchnorm() {
    LayerSpec s;
    s.kind = LayerKind::Batchnorm;
    return s;
}
LayerSpec LayerSpec::maxpool() {
    LayerSpec s;
    s.kind = LayerKind::Maxpool;
    return s;
}
LayerSpec LayerSpec::softmax_head() {
    LayerSpec s;
    s.kind = LayerKind::SoftmaxHead;
    return s;
}
LayerSpec LayerSpec::sigmoid() {
    LayerSpec s;
    s.kind = LayerKind::Sigmoid;
    return s;
}

void LayerSpec::validate() const {
    switch (kind) {
        case LayerKind::Dense:
            if (in_dim == 0 || out_dim == 0)
                throw ValidationError("dense layer needs positive in/out dims");
            break;
        case LayerKind::Conv2d:
            if (in_channels == 0 || out_channels == 0)
                throw ValidationError("conv2d layer needs positive channel counts");
            if (kernel_size != 3 && kernel_size != 5)
                throw ValidationError("conv2d kernel size must be 3 or 5");
            break;
        case LayerKind::Dropout:
            if (!(rate >= 0.0 && rate < 1.0))
                throw ValidationError("dropout rate must be in [0,1)");
            break;
        default:
            break;
    }
}

ParamTensor& LayerParams::find(const std::string& name) {
    for (auto& pt : tensors)
        if (pt.name == name) return pt;
    throw ValidationError("no parameter tensor named " + name);
}
const ParamTensor& LayerParams::find(const std::string& name) const {
    for (const auto& pt : tensors)
        if (pt.name == name) return pt;
    throw ValidationError("no parameter tensor named " + name);
}

void Parameters::zero_grad() {
    for (auto& layer : layers)
        for (auto& pt : layer.tensors)
            if (pt.trainable) pt.grad.fill(0.0);
}

std::size_t Parameters::trainable_tensor_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers)
        for (const auto& pt : layer.tensors)
            if (pt.trainable) ++n;
    return n;
}

bool Parameters::bit_equal(const Parameters& o) const {
    if (layers.size() != o.layers.size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].tensors.size() != o.layers[i].tensors.size()) return false;
        for (std::size_t j = 0; j < layers[i].tensors.size(); ++j) {
            const auto& a = layers[i].tensors[j];
            const auto& b = o.layers[i].tensors[j];
            if (a.name != b.name || a.trainable != b.trainable) return false;
            if (!a.value.bit_equal(b.value)) return false;
        }
    }
    return true;
}

namespace {

ParamTensor make_param(std::string name, std::vector<std::size_t> shape, bool trainable) {
    ParamTensor pt;
    pt.name = std::move(name);
    pt.value = Tensor::zeros(shape);
    if (trainable) pt.grad = Tensor::zeros(shape);
    pt.trainable = trainable;
    return pt;
}

void init_weight(Tensor& w, std::size_t fan_in, const InitSpec& init, Rng& rng) {
    if (init.kind == InitSpec::Kind::KaimingUniform) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (double& v : w.data) v = rng.uniform(-bound, bound);
    } else {
        for (double& v : w.data) v = rng.normal(0.0, init.sigma);
    }
}

void init_bias(Tensor& b, const InitSpec& init, Rng& rng) {
    if (init.kind == InitSpec::Kind::Normal) {
        for (double& v : b.data) v = rng.normal(0.0, init.sigma);
    }
    // Kaiming scheme keeps biases at zero.
}

}  // namespace

Network Network::build(std::vector<LayerSpec> specs,
                       std::vector<std::size_t> input_sample_shape,
                       const InitSpec& init, Rng& rng) {
    Network net;
    net.specs_ = std::move(specs);
    net.in_shape_ = input_sample_shape;
    if (net.in_shape_.empty()) throw ValidationError("empty input shape");

    std::vector<std::size_t> cur = net.in_shape_;
    for (const auto& spec : net.specs_) {
        spec.validate();
        LayerParams lp;
        std::vector<std::size_t> in_shape = cur;
        switch (spec.kind) {
            case LayerKind::Dense: {
                std::size_t flat = Tensor::count(cur);
                if (flat != spec.in_dim)
                    throw ValidationError("dense in_dim " + std::to_string(spec.in_dim) +
                                          " does not match incoming " + shape_str(cur));
                in_shape = {spec.in_dim};
                lp.tensors.push_back(make_param("w", {spec.in_dim, spec.out_dim}, true));
                lp.tensors.push_back(make_param("b", {spec.out_dim}, true));
                init_weight(lp.find("w").value, spec.in_dim, init, rng);
                init_bias(lp.find("b").value, init, rng);
                cur = {spec.out_dim};
                break;
            }
            case LayerKind::Conv2d: {
                if (cur.size() != 3 || cur[0] != spec.in_channels)
                    throw ValidationError("conv2d expects [in_channels,H,W] input, got " +
                                          shape_str(cur));
                std::size_t k = spec.kernel_size;
                lp.tensors.push_back(make_param(
                    "w", {spec.out_channels, spec.in_channels, k, k}, true));
                lp.tensors.push_back(make_param("b", {spec.out_channels}, true));
                init_weight(lp.find("w").value, spec.in_channels * k * k, init, rng);
                init_bias(lp.find("b").value, init, rng);
                cur = {spec.out_channels, cur[1], cur[2]};
                break;
            }
            case LayerKind::Activation: {
                if (spec.act == Activation::PReLU) {
                    auto pt = make_param("slope", {1}, true);
                    pt.value.data[0] = kPReluInitSlope;
                    lp.tensors.push_back(std::move(pt));
                }
                break;
            }
            case LayerKind::Batchnorm: {
                if (cur.size() != 1 && cur.size() != 3)
                    throw ValidationError("batchnorm expects feature or [C,H,W] input");
                std::size_t c = cur[0];
                auto gamma = make_param("gamma", {c}, true);
                gamma.value.fill(1.0);
                lp.tensors.push_back(std::move(gamma));
                lp.tensors.push_back(make_param("beta", {c}, true));
                lp.tensors.push_back(make_param("running_mean", {c}, false));
                auto rv = make_param("running_var", {c}, false);
                rv.value.fill(1.0);
                lp.tensors.push_back(std::move(rv));
                break;
            }
            case LayerKind::Maxpool: {
                if (cur.size() != 3)
                    throw ValidationError("maxpool expects [C,H,W] input, got " +
                                          shape_str(cur));
                std::size_t ho = cur[1] / 2, wo = cur[2] / 2;
                if (ho == 0 || wo == 0)
                    throw ValidationError("spatial collapse: maxpool on " + shape_str(cur) +
                                          " would produce an empty map");
                cur = {cur[0], ho, wo};
                break;
            }
            case LayerKind::Dropout:
            case LayerKind::SoftmaxHead:
            case LayerKind::Sigmoid:
                break;
        }
        net.layer_in_.push_back(in_shape);
        net.layer_out_.push_back(cur);
        net.params_.layers.push_back(std::move(lp));
    }
    net.out_shape_ = cur;
    net.params_.version = 1;
    return net;
}

std::size_t Network::output_dim() const { return Tensor::count(out_shape_); }

namespace {

std::size_t batch_of(const Tensor& t) {
    if (t.ndim() < 1) throw ValidationError("batched tensor expected");
    return t.shape[0];
}

void dense_forward(const Tensor& x, const Tensor& w, const Tensor& b, Tensor& y) {
    const std::size_t bs = x.shape[0], in = w.shape[0], out = w.shape[1];
    for (std::size_t n = 0; n < bs; ++n) {
        double* yr = y.ptr() + n * out;
        const double* xr = x.ptr() + n * in;
        for (std::size_t o = 0; o < out; ++o) yr[o] = b.data[o];
        for (std::size_t i = 0; i < in; ++i) {
            const double xi = xr[i];
            if (xi == 0.0) continue;
            const double* wr = w.ptr() + i * out;
            for (std::size_t o = 0; o < out; ++o) yr[o] += xi * wr[o];
        }
    }
}

void dense_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor& dw,
                    Tensor& db, Tensor& dx) {
    const std::size_t bs = x.shape[0], in = w.shape[0], out = w.shape[1];
    for (std::size_t n = 0; n < bs; ++n) {
        const double* dyr = dy.ptr() + n * out;
        const double* xr = x.ptr() + n * in;
        double* dxr = dx.ptr() + n * in;
        for (std::size_t o = 0; o < out; ++o) db.data[o] += dyr[o];
        for (std::size_t i = 0; i < in; ++i) {
            const double* wr = w.ptr() + i * out;
            double* dwr = dw.ptr() + i * out;
            const double xi = xr[i];
            double acc = 0.0;
            for (std::size_t o = 0; o < out; ++o) {
                acc += dyr[o] * wr[o];
                dwr[o] += xi * dyr[o];
            }
            dxr[i] = acc;
        }
    }
}

void conv_forward(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t k,
                  Tensor& y) {
    const std::size_t bs = x.shape[0], ic = x.shape[1], h = x.shape[2], wd = x.shape[3];
    const std::size_t oc = w.shape[0];
    const std::size_t p = k / 2;
    for (std::size_t n = 0; n < bs; ++n) {
        for (std::size_t o = 0; o < oc; ++o) {
            double* yplane = y.ptr() + ((n * oc + o) * h) * wd;
            std::fill(yplane, yplane + h * wd, b.data[o]);
            for (std::size_t c = 0; c < ic; ++c) {
                const double* xplane = x.ptr() + ((n * ic + c) * h) * wd;
                const double* wbase = w.ptr() + ((o * ic + c) * k) * k;
                for (std::size_t u = 0; u < k; ++u) {
                    const std::ptrdiff_t di = static_cast<std::ptrdiff_t>(u) -
                                              static_cast<std::ptrdiff_t>(p);
                    const std::size_t i0 = di < 0 ? static_cast<std::size_t>(-di) : 0;
                    const std::size_t i1 =
                        di > 0 ? h - static_cast<std::size_t>(di) : h;
                    for (std::size_t v = 0; v < k; ++v) {
                        const double wv = wbase[u * k + v];
                        if (wv == 0.0) continue;
                        const std::ptrdiff_t dj = static_cast<std::ptrdiff_t>(v) -
                                                  static_cast<std::ptrdiff_t>(p);
                        const std::size_t j0 = dj < 0 ? static_cast<std::size_t>(-dj) : 0;
                        const std::size_t j1 =
                            dj > 0 ? wd - static_cast<std::size_t>(dj) : wd;
                        for (std::size_t i = i0; i < i1; ++i) {
                            const double* xrow =
                                xplane + (static_cast<std::size_t>(
                                             static_cast<std::ptrdiff_t>(i) + di)) *
                                             wd;
                            double* yrow = yplane + i * wd;
                            for (std::size_t j = j0; j < j1; ++j)
                                yrow[j] += wv * xrow[static_cast<std::size_t>(
                                                static_cast<std::ptrdiff_t>(j) + dj)];
                        }
                    }
                }
            }
        }
    }
}

void conv_backward(const Tensor& x, const Tensor& w, const Tensor& dy, std::size_t k,
                   Tensor& dw, Tensor& db, Tensor& dx) {
    const std::size_t bs = x.shape[0], ic = x.shape[1], h = x.shape[2], wd = x.shape[3];
    const std::size_t oc = w.shape[0];
    const std::size_t p = k / 2;
    for (std::size_t n = 0; n < bs; ++n) {
        for (std::size_t o = 0; o < oc; ++o) {
            const double* dyplane = dy.ptr() + ((n * oc + o) * h) * wd;
            double acc_b = 0.0;
            for (std::size_t t = 0; t < h * wd; ++t) acc_b += dyplane[t];
            db.data[o] += acc_b;
            for (std::size_t c = 0; c < ic; ++c) {
                const double* xplane = x.ptr() + ((n * ic + c) * h) * wd;
                double* dxplane = dx.ptr() + ((n * ic + c) * h) * wd;
                const double* wbase = w.ptr() + ((o * ic + c) * k) * k;
                double* dwbase = dw.ptr() + ((o * ic + c) * k) * k;
                for (std::size_t u = 0; u < k; ++u) {
                    const std::ptrdiff_t di = static_cast<std::ptrdiff_t>(u) -
                                              static_cast<std::ptrdiff_t>(p);
                    const std::size_t i0 = di < 0 ? static_cast<std::size_t>(-di) : 0;
                    const std::size_t i1 =
                        di > 0 ? h - static_cast<std::size_t>(di) : h;
                    for (std::size_t v = 0; v < k; ++v) {
                        const double wv = wbase[u * k + v];
                        double acc_w = 0.0;
                        const std::ptrdiff_t dj = static_cast<std::ptrdiff_t>(v) -
                                                  static_cast<std::ptrdiff_t>(p);
                        const std::size_t j0 = dj < 0 ? static_cast<std::size_t>(-dj) : 0;
                        const std::size_t j1 =
                            dj > 0 ? wd - static_cast<std::size_t>(dj) : wd;
                        for (std::size_t i = i0; i < i1; ++i) {
                            const std::size_t xi = static_cast<std::size_t>(
                                static_cast<std::ptrdiff_t>(i) + di);
                            const double* xrow = xplane + xi * wd;
                            double* dxrow = dxplane + xi * wd;
                            const double* dyrow = dyplane + i * wd;
                            for (std::size_t j = j0; j < j1; ++j) {
                                const std::size_t xj = static_cast<std::size_t>(
                                    static_cast<std::ptrdiff_t>(j) + dj);
                                acc_w += dyrow[j] * xrow[xj];
                                dxrow[xj] += dyrow[j] * wv;
                            }
                        }
                        dwbase[u * k + v] += acc_w;
                    }
                }
            }
        }
    }
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Tensor Network::forward(const Tensor& input, Mode mode, ForwardCache* cache, Rng* rng) {
    if (input.ndim() < 2) throw ValidationError("forward expects a batched tensor");
    std::vector<std::size_t> sample(input.shape.begin() + 1, input.shape.end());
    if (Tensor::count(sample) != Tensor::count(in_shape_) || sample != in_shape_)
        throw ValidationError("input sample shape " + shape_str(sample) +
                              " does not match network input " + shape_str(in_shape_));
    const std::size_t bs = input.shape[0];

    if (cache) {
        cache->mode = mode;
        cache->param_version = params_.version;
        cache->valid = (mode == Mode::Train);
        cache->inputs.assign(specs_.size(), Tensor());
        cache->outputs.assign(specs_.size(), Tensor());
        cache->aux.assign(specs_.size(), Tensor());
        cache->aux2.assign(specs_.size(), Tensor());
    }

    Tensor x = input;
    for (std::size_t li = 0; li < specs_.size(); ++li) {
        const LayerSpec& spec = specs_[li];
        LayerParams& lp = params_.layers[li];
        // dense consumes a flat view of whatever came before
        if (spec.kind == LayerKind::Dense && x.ndim() != 2)
            x.shape = {bs, Tensor::count(x.shape) / bs};

        Tensor y;
        switch (spec.kind) {
            case LayerKind::Dense: {
                y = Tensor::zeros({bs, spec.out_dim});
                dense_forward(x, lp.find("w").value, lp.find("b").value, y);
                break;
            }
            case LayerKind::Conv2d: {
                y = Tensor::zeros({bs, spec.out_channels, x.shape[2], x.shape[3]});
                conv_forward(x, lp.find("w").value, lp.find("b").value,
                             spec.kernel_size, y);
                break;
            }
            case LayerKind::Activation: {
                y = x;
                switch (spec.act) {
                    case Activation::ReLU:
                        for (double& v : y.data) v = v > 0.0 ? v : 0.0;
                        break;
                    case Activation::PReLU: {
                        const double a = lp.find("slope").value.data[0];
                        for (double& v : y.data) v = v > 0.0 ? v : a * v;
                        break;
                    }
                    case Activation::ELU:
                        for (double& v : y.data)
                            v = v > 0.0 ? v : kEluAlpha * (std::exp(v) - 1.0);
                        break;
                    case Activation::Tanh:
                        for (double& v : y.data) v = std::tanh(v);
                        break;
                }
                break;
            }
            case LayerKind::Dropout: {
                if (mode == Mode::Train) {
                    if (!rng)
                        throw ValidationError("train-mode dropout needs a random source");
                    Tensor mask = Tensor::zeros(x.shape);
                    const double keep_scale = 1.0 / (1.0 - spec.rate);
                    for (std::size_t t = 0; t < mask.size(); ++t)
                        mask.data[t] = rng->uniform() < spec.rate ? 0.0 : keep_scale;
                    y = x;
                    for (std::size_t t = 0; t < y.size(); ++t) y.data[t] *= mask.data[t];
                    if (cache) cache->aux[li] = std::move(mask);
                } else {
                    y = x;
                }
                break;
            }
            case LayerKind::Batchnorm: {
                const bool conv_in = x.ndim() == 4;
                const std::size_t c = conv_in ? x.shape[1] : x.shape[1];
                const std::size_t spatial = conv_in ? x.shape[2] * x.shape[3] : 1;
                Tensor& gamma = lp.find("gamma").value;
                Tensor& beta = lp.find("beta").value;
                Tensor& rmean = lp.find("running_mean").value;
                Tensor& rvar = lp.find("running_var").value;
                y = Tensor::zeros(x.shape);
                if (mode == Mode::Train) {
                    if (bs < 2)
                        throw ValidationError(
                            "batchnorm train mode needs batch size >= 2 "
                            "(variance undefined)");
                    const double n = static_cast<double>(bs * spatial);
                    Tensor xhat = Tensor::zeros(x.shape);
                    Tensor inv_std = Tensor::zeros({c});
                    for (std::size_t ch = 0; ch < c; ++ch) {
                        double mean = 0.0;
                        for (std::size_t b = 0; b < bs; ++b) {
                            const double* px = x.ptr() + (b * c + ch) * spatial;
                            for (std::size_t t = 0; t < spatial; ++t) mean += px[t];
                        }
                        mean /= n;
                        double var = 0.0;
                        for (std::size_t b = 0; b < bs; ++b) {
                            const double* px = x.ptr() + (b * c + ch) * spatial;
                            for (std::size_t t = 0; t < spatial; ++t) {
                                const double d = px[t] - mean;
                                var += d * d;
                            }
                        }
                        var /= n;
                        const double istd = 1.0 / std::sqrt(var + kBatchnormEps);
                        inv_std.data[ch] = istd;
                        const double g = gamma.data[ch], be = beta.data[ch];
                        for (std::size_t b = 0; b < bs; ++b) {
                            const double* px = x.ptr() + (b * c + ch) * spatial;
                            double* ph = xhat.ptr() + (b * c + ch) * spatial;
                            double* py = y.ptr() + (b * c + ch) * spatial;
                            for (std::size_t t = 0; t < spatial; ++t) {
                                ph[t] = (px[t] - mean) * istd;
                                py[t] = g * ph[t] + be;
                            }
                        }
                        const double unbiased = var * n / (n - 1.0);
                        rmean.data[ch] = (1.0 - kBatchnormMomentum) * rmean.data[ch] +
                                         kBatchnormMomentum * mean;
                        rvar.data[ch] = (1.0 - kBatchnormMomentum) * rvar.data[ch] +
                                        kBatchnormMomentum * unbiased;
                    }
                    if (cache) {
                        cache->aux[li] = std::move(xhat);
                        cache->aux2[li] = std::move(inv_std);
                    }
                } else {
                    for (std::size_t ch = 0; ch < c; ++ch) {
                        const double istd = 1.0 / std::sqrt(rvar.data[ch] + kBatchnormEps);
                        const double g = gamma.data[ch], be = beta.data[ch];
                        const double m = rmean.data[ch];
                        for (std::size_t b = 0; b < bs; ++b) {
                            const double* px = x.ptr() + (b * c + ch) * spatial;
                            double* py = y.ptr() + (b * c + ch) * spatial;
                            for (std::size_t t = 0; t < spatial; ++t)
                                py[t] = g * (px[t] - m) * istd + be;
                        }
                    }
                }
                break;
            }
            case LayerKind::Maxpool: {
                const std::size_t c = x.shape[1], h = x.shape[2], wd = x.shape[3];
                const std::size_t ho = h / 2, wo = wd / 2;
                y = Tensor::zeros({bs, c, ho, wo});
                Tensor arg = Tensor::zeros({bs, c, ho, wo});
                for (std::size_t b = 0; b < bs; ++b) {
                    for (std::size_t ch = 0; ch < c; ++ch) {
                        const double* xp = x.ptr() + (b * c + ch) * h * wd;
                        double* yp = y.ptr() + (b * c + ch) * ho * wo;
                        double* ap = arg.ptr() + (b * c + ch) * ho * wo;
                        for (std::size_t i = 0; i < ho; ++i) {
                            for (std::size_t j = 0; j < wo; ++j) {
                                std::size_t best = (2 * i) * wd + 2 * j;
                                double bv = xp[best];
                                const std::size_t cand[3] = {
                                    (2 * i) * wd + 2 * j + 1,
                                    (2 * i + 1) * wd + 2 * j,
                                    (2 * i + 1) * wd + 2 * j + 1};
                                for (std::size_t cc : cand) {
                                    if (xp[cc] > bv) {
                                        bv = xp[cc];
                                        best = cc;
                                    }
                                }
                                yp[i * wo + j] = bv;
                                ap[i * wo + j] = static_cast<double>(best);
                            }
                        }
                    }
                }
                if (cache) cache->aux[li] = std::move(arg);
                break;
            }
            case LayerKind::SoftmaxHead: {
                y = softmax(x);
                break;
            }
            case LayerKind::Sigmoid: {
                y = x;
                for (double& v : y.data) v = stable_sigmoid(v);
                break;
            }
        }
        require_finite(y, "layer output");
        if (cache) {
            cache->inputs[li] = x;
            cache->outputs[li] = y;
        }
        x = std::move(y);
    }
    return x;
}

Tensor Network::backward(const ForwardCache& cache, const Tensor& grad_out) {
    if (!cache.valid || cache.mode != Mode::Train)
        throw ValidationError("backward needs a train-mode forward cache");
    if (cache.param_version != params_.version)
        throw ValidationError("stale forward cache: parameters changed since forward");
    if (cache.outputs.size() != specs_.size())
        throw ValidationError("forward cache does not match network");

    Tensor g = grad_out;
    const std::size_t bs = g.shape.empty() ? 0 : g.shape[0];
    for (std::size_t ri = specs_.size(); ri-- > 0;) {
        const LayerSpec& spec = specs_[ri];
        LayerParams& lp = params_.layers[ri];
        const Tensor& x = cache.inputs[ri];
        const Tensor& y = cache.outputs[ri];
        if (!g.same_shape(y)) {
            if (Tensor::count(g.shape) != Tensor::count(y.shape))
                throw ValidationError("output gradient shape mismatch");
            g.shape = y.shape;
        }
        Tensor dx;
        switch (spec.kind) {
            case LayerKind::Dense: {
                dx = Tensor::zeros(x.shape);
                dense_backward(x, lp.find("w").value, g, lp.find("w").grad,
                               lp.find("b").grad, dx);
                break;
            }
            case LayerKind::Conv2d: {
                dx = Tensor::zeros(x.shape);
                conv_backward(x, lp.find("w").value, g, spec.kernel_size,
                              lp.find("w").grad, lp.find("b").grad, dx);
                break;
            }
            case LayerKind::Activation: {
                dx = g;
                switch (spec.act) {
                    case Activation::ReLU:
                        for (std::size_t t = 0; t < dx.size(); ++t)
                            if (x.data[t] <= 0.0) dx.data[t] = 0.0;
                        break;
                    case Activation::PReLU: {
                        const double a = lp.find("slope").value.data[0];
                        double da = 0.0;
                        for (std::size_t t = 0; t < dx.size(); ++t) {
                            if (x.data[t] <= 0.0) {
                                da += g.data[t] * x.data[t];
                                dx.data[t] = a * g.data[t];
                            }
                        }
                        lp.find("slope").grad.data[0] += da;
                        break;
                    }
                    case Activation::ELU:
                        for (std::size_t t = 0; t < dx.size(); ++t)
                            if (x.data[t] <= 0.0)
                                dx.data[t] = g.data[t] * (y.data[t] + kEluAlpha);
                        break;
                    case Activation::Tanh:
                        for (std::size_t t = 0; t < dx.size(); ++t)
                            dx.data[t] = g.data[t] * (1.0 - y.data[t] * y.data[t]);
                        break;
                }
                break;
            }
            case LayerKind::Dropout: {
                dx = g;
                const Tensor& mask = cache.aux[ri];
                if (!mask.empty())
                    for (std::size_t t = 0; t < dx.size(); ++t)
                        dx.data[t] *= mask.data[t];
                break;
            }
            case LayerKind::Batchnorm: {
                const bool conv_in = x.ndim() == 4;
                const std::size_t c = x.shape[1];
                const std::size_t spatial = conv_in ? x.shape[2] * x.shape[3] : 1;
                const Tensor& xhat = cache.aux[ri];
                const Tensor& inv_std = cache.aux2[ri];
                Tensor& gamma = lp.find("gamma").value;
                Tensor& dgamma = lp.find("gamma").grad;
                Tensor& dbeta = lp.find("beta").grad;
                const double n = static_cast<double>(bs * spatial);
                dx = Tensor::zeros(x.shape);
                for (std::size_t ch = 0; ch < c; ++ch) {
                    double sum_dy = 0.0, sum_dy_xhat = 0.0;
                    for (std::size_t b = 0; b < bs; ++b) {
                        const double* pg = g.ptr() + (b * c + ch) * spatial;
                        const double* ph = xhat.ptr() + (b * c + ch) * spatial;
                        for (std::size_t t = 0; t < spatial; ++t) {
                            sum_dy += pg[t];
                            sum_dy_xhat += pg[t] * ph[t];
                        }
                    }
                    dgamma.data[ch] += sum_dy_xhat;
                    dbeta.data[ch] += sum_dy;
                    const double scale = gamma.data[ch] * inv_std.data[ch] / n;
                    for (std::size_t b = 0; b < bs; ++b) {
                        const double* pg = g.ptr() + (b * c + ch) * spatial;
                        const double* ph = xhat.ptr() + (b * c + ch) * spatial;
                        double* pd = dx.ptr() + (b * c + ch) * spatial;
                        for (std::size_t t = 0; t < spatial; ++t)
                            pd[t] = scale * (n * pg[t] - sum_dy - ph[t] * sum_dy_xhat);
                    }
                }
                break;
            }
            case LayerKind::Maxpool: {
                dx = Tensor::zeros(x.shape);
                const Tensor& arg = cache.aux[ri];
                const std::size_t c = x.shape[1], h = x.shape[2], wd = x.shape[3];
                const std::size_t ho = h / 2, wo = wd / 2;
                for (std::size_t b = 0; b < bs; ++b) {
                    for (std::size_t ch = 0; ch < c; ++ch) {
                        const double* pg = g.ptr() + (b * c + ch) * ho * wo;
                        const double* pa = arg.ptr() + (b * c + ch) * ho * wo;
                        double* pd = dx.ptr() + (b * c + ch) * h * wd;
                        for (std::size_t t = 0; t < ho * wo; ++t)
                            pd[static_cast<std::size_t>(pa[t])] += pg[t];
                    }
                }
                break;
            }
            case LayerKind::SoftmaxHead: {
                dx = softmax_backward(y, g);
                break;
            }
            case LayerKind::Sigmoid: {
                dx = g;
                for (std::size_t t = 0; t < dx.size(); ++t)
                    dx.data[t] *= y.data[t] * (1.0 - y.data[t]);
                break;
            }
        }
        g = std::move(dx);
    }
    if (g.shape != cache.inputs.front().shape) g.shape = cache.inputs.front().shape;
    require_finite(g, "input gradient");
    return g;
}

void Network::set_params(Parameters p) {
    if (p.layers.size() != params_.layers.size())
        throw IncompatibilityError("parameter layer count does not match network");
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        const auto& got = p.layers[i].tensors;
        const auto& want = params_.layers[i].tensors;
        if (got.size() != want.size())
            throw IncompatibilityError("parameter tensor count mismatch at layer " +
                                       std::to_string(i));
        for (std::size_t j = 0; j < got.size(); ++j) {
            if (got[j].name != want[j].name || got[j].value.shape != want[j].value.shape ||
                got[j].trainable != want[j].trainable)
                throw IncompatibilityError("parameter tensor mismatch at layer " +
                                           std::to_string(i) + ": " + want[j].name);
        }
    }
    const std::uint64_t v = params_.version;
    params_ = std::move(p);
    params_.version = v + 1;
    // restore grad buffers
    for (auto& layer : params_.layers)
        for (auto& pt : layer.tensors)
            if (pt.trainable && pt.grad.shape != pt.value.shape)
                pt.grad = Tensor::zeros(pt.value.shape);
}

Tensor softmax(const Tensor& logits) {
    if (logits.ndim() < 1) throw ValidationError("softmax needs at least 1 axis");
    require_finite(logits, "softmax input");
    const std::size_t k = logits.shape.back();
    const std::size_t rows = logits.size() / k;
    Tensor out = logits;
    for (std::size_t r = 0; r < rows; ++r) {
        double* p = out.ptr() + r * k;
        double mx = p[0];
        for (std::size_t i = 1; i < k; ++i) mx = std::max(mx, p[i]);
        double sum = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            p[i] = std::exp(p[i] - mx);
            sum += p[i];
        }
        for (std::size_t i = 0; i < k; ++i) p[i] /= sum;
    }
    return out;
}

Tensor softmax_backward(const Tensor& probs, const Tensor& grad_probs) {
    if (!probs.same_shape(grad_probs))
        throw ValidationError("softmax_backward shape mismatch");
    const std::size_t k = probs.shape.back();
    const std::size_t rows = probs.size() / k;
    Tensor dx = Tensor::zeros(probs.shape);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* p = probs.ptr() + r * k;
        const double* gp = grad_probs.ptr() + r * k;
        double dot = 0.0;
        for (std::size_t i = 0; i < k; ++i) dot += gp[i] * p[i];
        double* d = dx.ptr() + r * k;
        for (std::size_t i = 0; i < k; ++i) d[i] = p[i] * (gp[i] - dot);
    }
    return dx;
}

LossResult cross_entropy(const Tensor& probs, const Tensor& onehot) {
    if (!probs.same_shape(onehot))
        throw ValidationError("cross_entropy dimension mismatch: probs " +
                              shape_str(probs.shape) + " vs labels " +
                              shape_str(onehot.shape));
    LossResult res;
    res.grad = Tensor::zeros(probs.shape);
    for (std::size_t t = 0; t < probs.size(); ++t) {
        const double y = onehot.data[t];
        if (y == 0.0) continue;
        const double p = probs.data[t];
        const double pc = p < kLogClamp ? kLogClamp : p;
        res.loss -= y * std::log(pc);
        if (p >= kLogClamp) res.grad.data[t] = -y / pc;
    }
    return res;
}

LossResult softmax_cross_entropy(const Tensor& logits, const Tensor& onehot) {
    if (!logits.same_shape(onehot))
        throw ValidationError("softmax_cross_entropy dimension mismatch");
    Tensor p = softmax(logits);
    LossResult res;
    for (std::size_t t = 0; t < p.size(); ++t) {
        if (onehot.data[t] != 0.0) {
            const double pc = p.data[t] < kLogClamp ? kLogClamp : p.data[t];
            res.loss -= onehot.data[t] * std::log(pc);
        }
        p.data[t] -= onehot.data[t];
    }
    res.grad = std::move(p);
    return res;
}

}  // namespace dreamkit::nn
