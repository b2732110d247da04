#include "dreamkit/zoo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include "dreamkit/checkpoint.hpp"
#include "dreamkit/errors.hpp"
#include "dreamkit/parallel.hpp"
#include "dreamkit/rng.hpp"
#include "dreamkit/textio.hpp"

namespace dreamkit::zoo {

const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
        case Split::Unused: return "unused";
    }
    return "?";
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    if (name == "test") return Split::Test;
    if (name == "unused") return Split::Unused;
    throw ValidationError("unknown split tag: " + name);
}

std::vector<std::size_t> ModelZoo::select(int domain_id, Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < records.size(); ++i)
        if (records[i].domain_id == domain_id && records[i].split == split)
            out.push_back(i);
    return out;
}

bool attrs_feasible(const AttributeVector& attr, int image_side) {
    if (!attr.maxpool) return true;
    int side = image_side;
    for (int i = 0; i < attr.n_conv; ++i) {
        side /= 2;
        if (side == 0) return false;
    }
    return true;
}

std::vector<nn::LayerSpec> build_model(const AttributeVector& attr, int class_count,
                                       int image_side, std::size_t conv_channels,
                                       std::size_t fc_width) {
    if (class_count < 2) throw ValidationError("class count must be >= 2");
    std::vector<nn::LayerSpec> specs;
    std::size_t ch = 1;
    int side = image_side;
    for (int i = 0; i < attr.n_conv; ++i) {
        specs.push_back(nn::LayerSpec::conv2d(ch, conv_channels,
                                              static_cast<std::size_t>(attr.kernel_size)));
        ch = conv_channels;
        if (attr.batchnorm) specs.push_back(nn::LayerSpec::batchnorm());
        if (attr.maxpool) {
            side /= 2;
            if (side == 0)
                throw ValidationError(
                    "spatial collapse: " + std::to_string(attr.n_conv) +
                    " pooled conv blocks do not fit a " + std::to_string(image_side) +
                    "px image");
            specs.push_back(nn::LayerSpec::maxpool());
        }
        specs.push_back(nn::LayerSpec::activation(attr.activation));
    }
    std::size_t flat = ch * static_cast<std::size_t>(side) * static_cast<std::size_t>(side);
    for (int i = 0; i < attr.n_fc; ++i) {
        specs.push_back(nn::LayerSpec::dense(i == 0 ? flat : fc_width, fc_width));
        specs.push_back(nn::LayerSpec::activation(attr.activation));
        if (attr.dropout) specs.push_back(nn::LayerSpec::dropout(kDropoutRate));
    }
    specs.push_back(nn::LayerSpec::dense(fc_width, static_cast<std::size_t>(class_count)));
    return specs;
}

std::vector<ModelRecord> plan_zoo(std::uint64_t global_seed, int domain_count,
                                  int models_per_domain, int image_side) {
    if (domain_count < 2) throw ValidationError("zoo needs at least 2 domains");
    if (models_per_domain < 1) throw ValidationError("models_per_domain must be positive");
    std::vector<ModelRecord> plan;
    plan.reserve(static_cast<std::size_t>(domain_count) * models_per_domain);
    std::uint64_t id = 0;
    for (int d = 0; d < domain_count; ++d) {
        for (int k = 0; k < models_per_domain; ++k, ++id) {
            ModelRecord rec;
            rec.id = id;
            rec.domain_id = d;
            rec.seed = mix_seed(global_seed, id);
            Rng rng(rec.seed);
            // rejection keeps the feasible subset uniform
            for (;;) {
                rec.attrs = AttributeVector::from_grid_index(
                    static_cast<std::size_t>(rng.below(kGridSize)));
                if (attrs_feasible(rec.attrs, image_side)) break;
            }
            rec.split = Split::Unused;
            plan.push_back(std::move(rec));
        }
    }
    return plan;
}

namespace {

double lr_for(const AttributeVector& attr, const ZooTrainConfig& cfg) {
    switch (attr.optimizer) {
        case nn::OptKind::SGD: return cfg.lr_sgd;
        case nn::OptKind::Adam: return cfg.lr_adam;
        case nn::OptKind::RMSprop: return cfg.lr_rmsprop;
    }
    return cfg.lr_sgd;
}

Tensor gather_batch(const LabeledImages& data, const std::vector<std::size_t>& order,
                    std::size_t begin, std::size_t end) {
    const std::size_t px = data.images.size() / data.count();
    auto shape = data.images.shape;
    shape[0] = end - begin;
    Tensor batch = Tensor::zeros(shape);
    for (std::size_t r = begin; r < end; ++r)
        std::copy_n(data.images.ptr() + order[r] * px, px,
                    batch.ptr() + (r - begin) * px);
    return batch;
}

Tensor onehot_batch(const LabeledImages& data, const std::vector<std::size_t>& order,
                    std::size_t begin, std::size_t end, int class_count) {
    Tensor y = Tensor::zeros({end - begin, static_cast<std::size_t>(class_count)});
    for (std::size_t r = begin; r < end; ++r)
        y.data[(r - begin) * class_count + data.labels[order[r]]] = 1.0;
    return y;
}

}  // namespace

TrainedModel train_model(const ModelRecord& rec, const DomainData& data,
                         const ZooTrainConfig& cfg) {
    const int side = data.spec.image_side;
    const int C = data.spec.class_count;
    Rng rng(rec.seed);
    TrainedModel out;
    out.net = nn::Network::build(
        build_model(rec.attrs, C, side, cfg.conv_channels, cfg.fc_width),
        {1, static_cast<std::size_t>(side), static_cast<std::size_t>(side)},
        nn::InitSpec::kaiming(), rng);

    auto opt = nn::OptimizerState::make(rec.attrs.optimizer, lr_for(rec.attrs, cfg),
                                        out.net.params());
    const std::size_t n = data.train.count();
    const std::size_t bs = static_cast<std::size_t>(rec.attrs.batch_size);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs && out.finite_ok; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += bs) {
            const std::size_t end = std::min(n, start + bs);
            if (end - start < 2 && bs > 1) break;  // batchnorm needs >= 2 rows
            Tensor x = gather_batch(data.train, order, start, end);
            Tensor y = onehot_batch(data.train, order, start, end, C);
            nn::ForwardCache cache;
            Tensor logits;
            try {
                logits = out.net.forward(x, nn::Mode::Train, &cache, &rng);
            } catch (const NumericalError&) {
                out.finite_ok = false;
                break;
            }
            auto ce = nn::softmax_cross_entropy(logits, y);
            if (!std::isfinite(ce.loss)) {
                out.finite_ok = false;
                break;
            }
            const double inv = 1.0 / static_cast<double>(end - start);
            for (double& g : ce.grad.data) g *= inv;
            out.net.params().zero_grad();
            try {
                out.net.backward(cache, ce.grad);
                nn::optimizer_step(opt, out.net.params());
            } catch (const NumericalError&) {
                out.finite_ok = false;
                break;
            }
        }
    }

    if (!out.finite_ok) {
        out.val_accuracy = std::numeric_limits<double>::quiet_NaN();
        return out;
    }

    // validation accuracy, eval mode
    const std::size_t nv = data.val.count();
    std::vector<std::size_t> vorder(nv);
    for (std::size_t i = 0; i < nv; ++i) vorder[i] = i;
    std::size_t correct = 0;
    const std::size_t eb = static_cast<std::size_t>(cfg.eval_batch);
    for (std::size_t start = 0; start < nv; start += eb) {
        const std::size_t end = std::min(nv, start + eb);
        Tensor x = gather_batch(data.val, vorder, start, end);
        Tensor logits = out.net.forward(x, nn::Mode::Eval);
        const std::size_t k = logits.shape[1];
        for (std::size_t r = 0; r < end - start; ++r) {
            const double* row = logits.ptr() + r * k;
            std::size_t best = 0;
            for (std::size_t j = 1; j < k; ++j)
                if (row[j] > row[best]) best = j;
            if (static_cast<int>(best) == data.val.labels[vorder[start + r]]) ++correct;
        }
    }
    out.val_accuracy = nv ? static_cast<double>(correct) / static_cast<double>(nv) : 0.0;
    return out;
}

ModelZoo train_zoo(const std::vector<ModelRecord>& plan,
                   const std::vector<DomainData>& datasets, const ZooTrainConfig& cfg,
                   const std::string& checkpoint_dir) {
    ModelZoo zoo;
    zoo.records = plan;
    zoo.grid_hash_value = grid_hash();
    int max_domain = -1;
    for (const auto& rec : plan) max_domain = std::max(max_domain, rec.domain_id);
    zoo.domain_count = max_domain + 1;
    if (static_cast<int>(datasets.size()) < zoo.domain_count)
        throw ValidationError("plan references domains without datasets");

    parallel_for(zoo.records.size(), cfg.jobs, [&](std::size_t i) {
        ModelRecord& rec = zoo.records[i];
        const DomainData* data = nullptr;
        for (const auto& d : datasets)
            if (d.spec.domain_id == rec.domain_id) data = &d;
        if (!data) throw ValidationError("no dataset for domain " +
                                         std::to_string(rec.domain_id));
        TrainedModel tm = train_model(rec, *data, cfg);
        rec.val_accuracy = tm.val_accuracy;
        rec.checkpoint_path =
            checkpoint_dir + "/model_" + std::to_string(rec.id) + ".ckpt";
        nn::save_parameters(tm.net.params(), rec.checkpoint_path);
    });
    return zoo;
}

void split_counts_from_ratio(int per_domain, int r_train, int r_val, int r_test,
                             int& train_n, int& val_n, int& test_n) {
    const int total = r_train + r_val + r_test;
    if (total <= 0 || per_domain % total != 0)
        throw ValidationError("ratio does not divide the per-domain model count");
    const int unit = per_domain / total;
    train_n = unit * r_train;
    val_n = unit * r_val;
    test_n = unit * r_test;
}

void split_zoo(ModelZoo& zoo, int train_n, int val_n, int test_n, std::uint64_t seed) {
    if (train_n < 0 || val_n < 0 || test_n < 0)
        throw ValidationError("split sizes must be non-negative");
    const int need = train_n + val_n + test_n;
    for (int d = 0; d < zoo.domain_count; ++d) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < zoo.records.size(); ++i) {
            if (zoo.records[i].domain_id != d) continue;
            zoo.records[i].split = Split::Unused;
            if (zoo.records[i].finite_ok()) idx.push_back(i);
        }
        if (static_cast<int>(idx.size()) < need)
            throw ValidationError("domain " + std::to_string(d) + " has " +
                                  std::to_string(idx.size()) + " usable models, needs " +
                                  std::to_string(need));
        Rng rng(mix_seed(seed, 0x53504c54, static_cast<std::uint64_t>(d)));
        rng.shuffle(idx);
        int pos = 0;
        for (int k = 0; k < train_n; ++k) zoo.records[idx[pos++]].split = Split::Train;
        for (int k = 0; k < val_n; ++k) zoo.records[idx[pos++]].split = Split::Val;
        for (int k = 0; k < test_n; ++k) zoo.records[idx[pos++]].split = Split::Test;
    }
}

void disjoint_attribute_split(ModelZoo& zoo, int train_n, int val_n, int test_n,
                              std::uint64_t seed) {
    if (train_n <= 0 || val_n < 0 || test_n < 0)
        throw ValidationError("split sizes must be positive");
    const std::size_t need =
        static_cast<std::size_t>(train_n) + val_n + test_n;
    if (need > kGridSize)
        throw ValidationError("requested " + std::to_string(need) +
                              " distinct attribute combinations, grid has " +
                              std::to_string(kGridSize));

    // one representative model per combination, chosen by seeded shuffle
    std::map<std::size_t, std::vector<std::size_t>> by_combo;
    for (std::size_t i = 0; i < zoo.records.size(); ++i) {
        zoo.records[i].split = Split::Unused;
        if (zoo.records[i].finite_ok())
            by_combo[zoo.records[i].attrs.grid_index()].push_back(i);
    }
    if (by_combo.size() < need)
        throw ValidationError("zoo holds " + std::to_string(by_combo.size()) +
                              " distinct combinations, needs " + std::to_string(need));

    Rng rng(mix_seed(seed, 0x44495350));
    std::vector<std::size_t> combos;
    combos.reserve(by_combo.size());
    for (const auto& [combo, members] : by_combo) combos.push_back(combo);
    rng.shuffle(combos);

    std::size_t pos = 0;
    auto assign = [&](int count, Split split) {
        for (int k = 0; k < count; ++k, ++pos) {
            auto& members = by_combo[combos[pos]];
            const std::size_t pick = static_cast<std::size_t>(rng.below(members.size()));
            zoo.records[members[pick]].split = split;
        }
    };
    assign(train_n, Split::Train);
    assign(val_n, Split::Val);
    assign(test_n, Split::Test);
}

void save_manifest(const ModelZoo& zoo, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw ValidationError("cannot open " + path + " for writing");
    char hash_hex[17];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(zoo.grid_hash_value));
    os << "DKZOO 1 grid_hash=" << hash_hex << " global_seed=" << zoo.global_seed
       << " domains=" << zoo.domain_count << "\n";
    for (const auto& rec : zoo.records) {
        os << rec.id << ',' << rec.domain_id << ',' << rec.attrs.csv() << ',' << rec.seed
           << ',' << format_f64(rec.val_accuracy) << ',' << split_name(rec.split) << ','
           << rec.checkpoint_path << "\n";
    }
    if (!os) throw ValidationError("write failed: " + path);
}

ModelZoo load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open manifest " + path);
    std::string line;
    if (!std::getline(is, line)) throw ValidationError("empty manifest " + path);
    auto head = split_on(line, ' ');
    if (head.size() != 5 || head[0] != "DKZOO" || head[1] != "1")
        throw ValidationError("bad manifest header in " + path);
    ModelZoo zoo;
    auto field = [&](const std::string& tok, const char* key) {
        auto kv = split_on(tok, '=');
        if (kv.size() != 2 || kv[0] != key)
            throw ValidationError("bad manifest header field: " + tok);
        return kv[1];
    };
    zoo.grid_hash_value = std::stoull(field(head[2], "grid_hash"), nullptr, 16);
    zoo.global_seed = parse_u64(field(head[3], "global_seed"));
    zoo.domain_count = static_cast<int>(parse_u64(field(head[4], "domains")));

    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto tok = split_on(line, ',');
        if (tok.size() != 15)
            throw ValidationError("manifest line " + std::to_string(line_no) +
                                  ": expected 15 fields, got " +
                                  std::to_string(tok.size()));
        ModelRecord rec;
        rec.id = parse_u64(tok[0]);
        rec.domain_id = static_cast<int>(parse_u64(tok[1]));
        rec.attrs = AttributeVector::from_tokens(
            std::vector<std::string>(tok.begin() + 2, tok.begin() + 11));
        rec.seed = parse_u64(tok[11]);
        rec.val_accuracy = tok[12] == "nan"
                               ? std::numeric_limits<double>::quiet_NaN()
                               : parse_f64(tok[12]);
        if (rec.finite_ok() && (rec.val_accuracy < 0.0 || rec.val_accuracy > 1.0))
            throw ValidationError("manifest line " + std::to_string(line_no) +
                                  ": validation accuracy outside [0,1]");
        rec.split = split_from_name(tok[13]);
        rec.checkpoint_path = tok[14];
        zoo.records.push_back(std::move(rec));
    }
    return zoo;
}

nn::Network load_model(const ModelRecord& rec, int class_count, int image_side,
                       const ZooTrainConfig& cfg) {
    Rng rng(rec.seed);
    nn::Network net = nn::Network::build(
        build_model(rec.attrs, class_count, image_side, cfg.conv_channels, cfg.fc_width),
        {1, static_cast<std::size_t>(image_side), static_cast<std::size_t>(image_side)},
        nn::InitSpec::kaiming(), rng);
    net.set_params(nn::load_parameters(rec.checkpoint_path));
    return net;
}

}  // namespace dreamkit::zoo
