#include "dreamkit/dream.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include "dreamkit/checkpoint.hpp"
#include "dreamkit/errors.hpp"
#include "dreamkit/mmd.hpp"
#include "dreamkit/rng.hpp"

namespace dreamkit::dream {

void DreamConfig::validate() const {
    if (alpha < 0.0 || beta < 0.0)
        throw ValidationError("learning rates must be non-negative");
    if (lambda < 0.0) throw ValidationError("lambda must be >= 0");
    if (batch < 2) throw ValidationError("batch size b must be >= 2");
    if (epochs < 0) throw ValidationError("epochs must be >= 0");
    if (mmd_gamma < 0.0) throw ValidationError("mmd gamma must be >= 0");
    if (mmd_gamma > 0.0 && use_gan)
        throw ValidationError("the MMD penalty is a no-GAN baseline option");
    if (dims.embed_dim == 0 || dims.gen_hidden == 0 || dims.trunk_hidden == 0)
        throw ValidationError("network dimensions must be positive");
}

namespace {

double clamp_unit(double p) {
    if (p < nn::kLogClamp) return nn::kLogClamp;
    if (p > 1.0 - nn::kLogClamp) return 1.0 - nn::kLogClamp;
    return p;
}

nn::Network make_generator(std::size_t input_dim, const DreamDims& dims, double sigma,
                           Rng& rng) {
    std::vector<nn::LayerSpec> specs = {
        nn::LayerSpec::dense(input_dim, dims.gen_hidden),
        nn::LayerSpec::activation(nn::Activation::ReLU),
        nn::LayerSpec::dense(dims.gen_hidden, dims.embed_dim),
    };
    return nn::Network::build(std::move(specs), {input_dim}, nn::InitSpec::normal(sigma),
                              rng);
}

nn::Network make_discriminator(const DreamDims& dims, double sigma, Rng& rng) {
    std::vector<nn::LayerSpec> specs = {
        nn::LayerSpec::dense(dims.embed_dim, dims.disc_hidden1),
        nn::LayerSpec::activation(nn::Activation::ReLU),
        nn::LayerSpec::dense(dims.disc_hidden1, dims.disc_hidden2),
        nn::LayerSpec::activation(nn::Activation::ReLU),
        nn::LayerSpec::dense(dims.disc_hidden2, 1),
        nn::LayerSpec::sigmoid(),
    };
    return nn::Network::build(std::move(specs), {dims.embed_dim},
                              nn::InitSpec::normal(sigma), rng);
}

nn::Network make_trunk(std::size_t input_dim, const DreamDims& dims, double sigma,
                       Rng& rng) {
    std::vector<nn::LayerSpec> specs = {
        nn::LayerSpec::dense(input_dim, dims.trunk_hidden),
        nn::LayerSpec::activation(nn::Activation::ReLU),
    };
    return nn::Network::build(std::move(specs), {input_dim}, nn::InitSpec::normal(sigma),
                              rng);
}

nn::Network make_head(const DreamDims& dims, std::size_t classes, double sigma,
                      Rng& rng) {
    std::vector<nn::LayerSpec> specs = {
        nn::LayerSpec::dense(dims.trunk_hidden, classes),
    };
    return nn::Network::build(std::move(specs), {dims.trunk_hidden},
                              nn::InitSpec::normal(sigma), rng);
}

void build_pipeline_nets(ReversePipeline& pipe, double sigma, Rng& rng) {
    if (pipe.use_gan) {
        pipe.generator = make_generator(pipe.input_dim(), pipe.dims, sigma, rng);
        pipe.discriminators.clear();
        for (int i = 0; i < pipe.domain_count; ++i)
            pipe.discriminators.push_back(make_discriminator(pipe.dims, sigma, rng));
        pipe.trunk = make_trunk(pipe.dims.embed_dim, pipe.dims, sigma, rng);
    } else {
        pipe.trunk = make_trunk(pipe.input_dim(), pipe.dims, sigma, rng);
    }
    pipe.heads.clear();
    for (std::size_t a = 0; a < zoo::kAttributeCount; ++a)
        pipe.heads.push_back(
            make_head(pipe.dims, zoo::kAttributeCardinality[a], sigma, rng));
}

// numeric when possible so "2" < "10"
bool domain_less(const std::string& a, const std::string& b) {
    const bool na = !a.empty() && a.find_first_not_of("0123456789") == std::string::npos;
    const bool nb = !b.empty() && b.find_first_not_of("0123456789") == std::string::npos;
    if (na && nb) {
        if (a.size() != b.size()) return a.size() < b.size();
    }
    return a < b;
}

Tensor gather_rows(const Tensor& features, const std::vector<std::size_t>& idx) {
    const std::size_t dim = features.shape[1];
    Tensor out = Tensor::zeros({idx.size(), dim});
    for (std::size_t r = 0; r < idx.size(); ++r)
        std::copy_n(features.ptr() + idx[r] * dim, dim, out.ptr() + r * dim);
    return out;
}

}  // namespace

Tensor ReversePipeline::embed(const Tensor& rows) {
    if (!use_gan) return rows;
    return generator.forward(rows, nn::Mode::Eval);
}

void check_compatible(const ReversePipeline& pipe, const fp::FingerprintSet& set) {
    if (set.class_count != pipe.class_count || set.n_queries != pipe.n_queries)
        throw IncompatibilityError(
            "fingerprint set (C=" + std::to_string(set.class_count) +
            ",N=" + std::to_string(set.n_queries) + ") incompatible with pipeline (C=" +
            std::to_string(pipe.class_count) + ",N=" + std::to_string(pipe.n_queries) +
            ")");
}

std::uint64_t architecture_hash(const ReversePipeline& pipe) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    };
    mix(pipe.use_gan ? 1 : 0);
    mix(pipe.input_dim());
    mix(pipe.domain_count >= 0 ? static_cast<std::uint64_t>(pipe.domain_count) : 0);
    mix(pipe.dims.gen_hidden);
    mix(pipe.dims.embed_dim);
    mix(pipe.dims.disc_hidden1);
    mix(pipe.dims.disc_hidden2);
    mix(pipe.dims.trunk_hidden);
    for (std::size_t a = 0; a < zoo::kAttributeCount; ++a)
        mix(zoo::kAttributeCardinality[a]);
    return h;
}

Partition partition_true_false(const std::vector<std::string>& row_domains,
                               const std::string& domain_i) {
    std::set<std::string> distinct(row_domains.begin(), row_domains.end());
    if (distinct.size() < 2)
        throw ValidationError(
            "partition needs at least 2 domains (no complement exists)");
    if (!distinct.count(domain_i))
        throw ValidationError("domain " + domain_i + " not present in batch");
    Partition part;
    for (std::size_t r = 0; r < row_domains.size(); ++r) {
        if (row_domains[r] == domain_i)
            part.true_idx.push_back(r);
        else
            part.false_idx.push_back(r);
    }
    return part;
}

namespace {

// dL/dd for -log(clamped d); zero where the clamp binds.
double dlog_pos(double d) { return d < nn::kLogClamp || d > 1.0 - nn::kLogClamp
                                       ? 0.0
                                       : -1.0 / d; }
// dL/dd for -log(1 - clamped d)
double dlog_neg(double d) { return d < nn::kLogClamp || d > 1.0 - nn::kLogClamp
                                       ? 0.0
                                       : 1.0 / (1.0 - d); }

}  // namespace

double discriminator_loss(nn::Network& disc, const Tensor& z_true,
                          const Tensor& z_false) {
    if (z_true.shape[0] == 0 || z_false.shape[0] == 0)
        throw ValidationError("discriminator loss needs non-empty True and False sets");
    Tensor dt = disc.forward(z_true, nn::Mode::Eval);
    Tensor df = disc.forward(z_false, nn::Mode::Eval);
    double loss = 0.0;
    for (double d : dt.data) loss -= std::log(clamp_unit(d));
    for (double d : df.data) loss -= std::log(1.0 - clamp_unit(d));
    return loss;
}

double discriminator_loss_backward(nn::Network& disc, const Tensor& z_true,
                                   const Tensor& z_false) {
    if (z_true.shape[0] == 0 || z_false.shape[0] == 0)
        throw ValidationError("discriminator loss needs non-empty True and False sets");
    nn::ForwardCache cache_t, cache_f;
    Tensor dt = disc.forward(z_true, nn::Mode::Train, &cache_t);
    Tensor df = disc.forward(z_false, nn::Mode::Train, &cache_f);
    double loss = 0.0;
    Tensor gt = Tensor::zeros(dt.shape);
    Tensor gf = Tensor::zeros(df.shape);
    for (std::size_t r = 0; r < dt.size(); ++r) {
        loss -= std::log(clamp_unit(dt.data[r]));
        gt.data[r] = dlog_pos(dt.data[r]);
    }
    for (std::size_t r = 0; r < df.size(); ++r) {
        loss -= std::log(1.0 - clamp_unit(df.data[r]));
        gf.data[r] = dlog_neg(df.data[r]);
    }
    disc.backward(cache_t, gt);
    disc.backward(cache_f, gf);
    return loss;
}

double generator_adversarial_loss(std::vector<nn::Network>& discs,
                                  const std::vector<Tensor>& false_embeds,
                                  bool non_saturating) {
    if (discs.size() != false_embeds.size())
        throw ValidationError("one False batch per discriminator expected");
    double loss = 0.0;
    for (std::size_t i = 0; i < discs.size(); ++i) {
        if (false_embeds[i].shape[0] == 0) continue;
        Tensor d = discs[i].forward(false_embeds[i], nn::Mode::Eval);
        for (double v : d.data)
            loss += non_saturating ? -std::log(clamp_unit(v))
                                   : std::log(1.0 - clamp_unit(v));
    }
    return loss;
}

double generator_adversarial_loss_backward(std::vector<nn::Network>& discs,
                                           const std::vector<Tensor>& false_embeds,
                                           bool non_saturating,
                                           std::vector<Tensor>& embed_grads) {
    if (discs.size() != false_embeds.size())
        throw ValidationError("one False batch per discriminator expected");
    embed_grads.assign(discs.size(), Tensor());
    double loss = 0.0;
    for (std::size_t i = 0; i < discs.size(); ++i) {
        if (false_embeds[i].shape[0] == 0) continue;
        nn::ForwardCache cache;
        Tensor d = discs[i].forward(false_embeds[i], nn::Mode::Train, &cache);
        Tensor gd = Tensor::zeros(d.shape);
        for (std::size_t r = 0; r < d.size(); ++r) {
            const double v = d.data[r];
            if (non_saturating) {
                loss += -std::log(clamp_unit(v));
                gd.data[r] = dlog_pos(v);
            } else {
                loss += std::log(1.0 - clamp_unit(v));
                gd.data[r] = -dlog_neg(v);
            }
        }
        embed_grads[i] = discs[i].backward(cache, gd);
        discs[i].params().zero_grad();  // discriminators are frozen in this step
    }
    return loss;
}

double classifier_loss(nn::Network& trunk, std::vector<nn::Network>& heads,
                       const Tensor& embeddings,
                       const std::vector<std::array<std::size_t,
                                                    zoo::kAttributeCount>>& labels) {
    if (embeddings.shape[0] != labels.size())
        throw ValidationError("one label per embedding expected");
    if (heads.size() != zoo::kAttributeCount)
        throw ValidationError("nine classifier heads expected");
    const std::size_t rows = embeddings.shape[0];
    if (rows == 0) throw ValidationError("empty embedding batch");
    Tensor t = trunk.forward(embeddings, nn::Mode::Eval);
    double total = 0.0;
    for (std::size_t h = 0; h < heads.size(); ++h) {
        Tensor p = nn::softmax(heads[h].forward(t, nn::Mode::Eval));
        const std::size_t k = p.shape[1];
        for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t y = labels[r][h];
            if (y >= k) throw ValidationError("label outside head value set");
            total -= std::log(clamp_unit(p.data[r * k + y]));
        }
    }
    return total / static_cast<double>(rows);
}

namespace {

struct Trainer {
    const fp::FingerprintSet& data;
    DreamConfig cfg;
    Rng rng;
    ReversePipeline pipe;
    Tensor features;  // [rows, C*N]
    std::vector<std::array<std::size_t, zoo::kAttributeCount>> labels;
    std::vector<std::vector<std::size_t>> domain_rows;  // per source domain
    nn::OptimizerState opt_gen;
    std::vector<nn::OptimizerState> opt_disc;
    nn::OptimizerState opt_trunk;
    std::vector<nn::OptimizerState> opt_heads;

    Trainer(const fp::FingerprintSet& train_rows, const DreamConfig& config)
        : data(train_rows), cfg(config), rng(config.seed) {
        cfg.validate();
        if (data.rows.empty()) throw ValidationError("empty training set");
        for (const auto& row : data.rows)
            if (!row.labeled)
                throw ValidationError("training fingerprints must carry attribute labels");

        std::vector<std::string> domains = data.domains();
        std::sort(domains.begin(), domains.end(), domain_less);
        if (cfg.use_gan && domains.size() < 2)
            throw ValidationError("adversarial training needs at least 2 source domains");
        if (domains.empty())
            throw ValidationError("training rows carry no domain tags");

        pipe.kind = cfg.use_gan ? "dream" : (cfg.mmd_gamma > 0.0 ? "mmd" : "kennen");
        pipe.use_gan = cfg.use_gan;
        pipe.class_count = data.class_count;
        pipe.n_queries = data.n_queries;
        pipe.domain_count = static_cast<int>(domains.size());
        pipe.source_domains = domains;
        pipe.lambda = cfg.lambda;
        pipe.mmd_gamma = cfg.mmd_gamma;
        pipe.dims = cfg.dims;
        pipe.grid_hash_value = zoo::grid_hash();
        build_pipeline_nets(pipe, cfg.init_sigma, rng);

        features = data.features();
        labels.reserve(data.rows.size());
        for (const auto& row : data.rows) labels.push_back(row.attrs.label_indices());
        domain_rows.resize(domains.size());
        for (std::size_t r = 0; r < data.rows.size(); ++r) {
            const auto it = std::find(domains.begin(), domains.end(), data.rows[r].domain);
            domain_rows[static_cast<std::size_t>(it - domains.begin())].push_back(r);
        }
        for (std::size_t d = 0; d < domain_rows.size(); ++d)
            if (domain_rows[d].empty())
                throw ValidationError("source domain " + domains[d] +
                                      " has no training fingerprints");

        if (cfg.use_gan) {
            opt_gen = nn::OptimizerState::make(cfg.update_rule, cfg.alpha,
                                               pipe.generator.params());
            for (auto& disc : pipe.discriminators)
                opt_disc.push_back(
                    nn::OptimizerState::make(cfg.update_rule, cfg.alpha, disc.params()));
        }
        opt_trunk = nn::OptimizerState::make(cfg.update_rule, cfg.beta,
                                             pipe.trunk.params());
        for (auto& head : pipe.heads)
            opt_heads.push_back(
                nn::OptimizerState::make(cfg.update_rule, cfg.beta, head.params()));
    }

    EpochMetrics run_epoch() {
        const std::size_t b = static_cast<std::size_t>(cfg.batch);
        std::size_t min_rows = domain_rows.front().size();
        for (const auto& rows : domain_rows) min_rows = std::min(min_rows, rows.size());
        const std::size_t iterations = std::max<std::size_t>(1, (min_rows + b - 1) / b);
        const std::size_t m = domain_rows.size();

        EpochMetrics metrics;
        for (std::size_t it = 0; it < iterations; ++it) {
            // sample b rows per domain, ascending domain order
            std::vector<std::size_t> batch_rows;
            std::vector<std::string> batch_domains;
            batch_rows.reserve(b * m);
            for (std::size_t d = 0; d < m; ++d) {
                const auto& pool = domain_rows[d];
                if (pool.size() >= b) {
                    auto pick = rng.sample_without_replacement(pool.size(), b);
                    for (std::size_t p : pick) batch_rows.push_back(pool[p]);
                } else {
                    metrics.sampled_with_replacement = true;
                    for (std::size_t k = 0; k < b; ++k)
                        batch_rows.push_back(
                            pool[static_cast<std::size_t>(rng.below(pool.size()))]);
                }
                for (std::size_t k = 0; k < b; ++k)
                    batch_domains.push_back(pipe.source_domains[d]);
            }
            const std::size_t bm = batch_rows.size();
            Tensor x_all = gather_rows(features, batch_rows);
            std::vector<std::array<std::size_t, zoo::kAttributeCount>> y_all(bm);
            for (std::size_t r = 0; r < bm; ++r) y_all[r] = labels[batch_rows[r]];

            // discriminator updates on the Eq.-1 partition
            if (cfg.use_gan) {
                double disc_sum = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    Tensor z = pipe.generator.forward(x_all, nn::Mode::Eval);
                    Partition part =
                        partition_true_false(batch_domains, pipe.source_domains[i]);
                    Tensor z_true = gather_rows(z, part.true_idx);
                    Tensor z_false = gather_rows(z, part.false_idx);
                    pipe.discriminators[i].params().zero_grad();
                    disc_sum += discriminator_loss_backward(pipe.discriminators[i],
                                                            z_true, z_false) /
                                static_cast<double>(bm);
                    nn::optimizer_step(opt_disc[i], pipe.discriminators[i].params());
                }
                metrics.disc_loss += disc_sum / static_cast<double>(m);
            }

            // joint classifier + generator step from the pooled batch
            nn::ForwardCache cache_g;
            Tensor z_all = cfg.use_gan
                               ? pipe.generator.forward(x_all, nn::Mode::Train, &cache_g)
                               : x_all;
            nn::ForwardCache cache_t;
            Tensor t = pipe.trunk.forward(z_all, nn::Mode::Train, &cache_t);

            pipe.trunk.params().zero_grad();
            for (auto& head : pipe.heads) head.params().zero_grad();

            double ce_sum = 0.0;
            Tensor dt = Tensor::zeros(t.shape);
            for (std::size_t h = 0; h < pipe.heads.size(); ++h) {
                nn::ForwardCache cache_h;
                Tensor logits = pipe.heads[h].forward(t, nn::Mode::Train, &cache_h);
                Tensor y = Tensor::zeros(logits.shape);
                const std::size_t k = logits.shape[1];
                for (std::size_t r = 0; r < bm; ++r) {
                    if (y_all[r][h] >= k)
                        throw ValidationError("label outside head value set");
                    y.data[r * k + y_all[r][h]] = 1.0;
                }
                auto ce = nn::softmax_cross_entropy(logits, y);
                ce_sum += ce.loss;
                Tensor dti = pipe.heads[h].backward(cache_h, ce.grad);
                for (std::size_t q = 0; q < dt.size(); ++q) dt.data[q] += dti.data[q];
            }
            metrics.classifier_loss += ce_sum / static_cast<double>(bm);

            if (cfg.mmd_gamma > 0.0) {
                std::vector<Tensor> per_domain;
                for (std::size_t d = 0; d < m; ++d) {
                    std::vector<std::size_t> idx;
                    for (std::size_t r = 0; r < bm; ++r)
                        if (batch_domains[r] == pipe.source_domains[d]) idx.push_back(r);
                    per_domain.push_back(gather_rows(t, idx));
                }
                const double sigma = cfg.mmd_sigma > 0.0
                                         ? cfg.mmd_sigma
                                         : baselines::median_heuristic_sigma(per_domain);
                auto mmd = baselines::mmd_penalty(per_domain, sigma);
                std::vector<std::size_t> cursor(m, 0);
                for (std::size_t r = 0; r < bm; ++r) {
                    const std::size_t d = r / b;  // contiguous per-domain blocks
                    const double* g = mmd.grads[d].ptr() + cursor[d] * t.shape[1];
                    double* dst = dt.ptr() + r * t.shape[1];
                    for (std::size_t q = 0; q < t.shape[1]; ++q)
                        dst[q] += cfg.mmd_gamma * g[q];
                    ++cursor[d];
                }
            }

            Tensor dz = pipe.trunk.backward(cache_t, dt);

            if (cfg.use_gan) {
                // lambda-scaled CE path into the generator, Alg.-1 style
                for (double& v : dz.data) v *= cfg.lambda;
                double adv_value = 0.0;
                std::size_t adv_terms = 0;
                for (std::size_t i = 0; i < m; ++i) {
                    Partition part =
                        partition_true_false(batch_domains, pipe.source_domains[i]);
                    Tensor z_false = gather_rows(z_all, part.false_idx);
                    nn::ForwardCache cache_d;
                    Tensor d = pipe.discriminators[i].forward(z_false, nn::Mode::Train,
                                                              &cache_d);
                    Tensor gd = Tensor::zeros(d.shape);
                    for (std::size_t r = 0; r < d.size(); ++r) {
                        const double v = d.data[r];
                        if (cfg.non_saturating) {
                            adv_value += -std::log(clamp_unit(v));
                            gd.data[r] = dlog_pos(v);
                        } else {
                            adv_value += std::log(1.0 - clamp_unit(v));
                            gd.data[r] = -dlog_neg(v);
                        }
                    }
                    Tensor dzf = pipe.discriminators[i].backward(cache_d, gd);
                    pipe.discriminators[i].params().zero_grad();
                    for (std::size_t r = 0; r < part.false_idx.size(); ++r) {
                        double* dst = dz.ptr() + part.false_idx[r] * dz.shape[1];
                        const double* src = dzf.ptr() + r * dz.shape[1];
                        for (std::size_t q = 0; q < dz.shape[1]; ++q) dst[q] += src[q];
                    }
                    adv_terms += part.false_idx.size();
                }
                metrics.adv_loss +=
                    adv_terms ? adv_value / static_cast<double>(adv_terms) : 0.0;
                pipe.generator.params().zero_grad();
                pipe.generator.backward(cache_g, dz);
            }

            nn::optimizer_step(opt_trunk, pipe.trunk.params());
            for (std::size_t h = 0; h < pipe.heads.size(); ++h)
                nn::optimizer_step(opt_heads[h], pipe.heads[h].params());
            if (cfg.use_gan) nn::optimizer_step(opt_gen, pipe.generator.params());
        }

        const double inv_it = 1.0 / static_cast<double>(iterations);
        metrics.disc_loss *= inv_it;
        metrics.adv_loss *= inv_it;
        metrics.classifier_loss *= inv_it;
        return metrics;
    }
};

}  // namespace

TrainResult train_reverse(const fp::FingerprintSet& train_rows, const DreamConfig& cfg) {
    Trainer trainer(train_rows, cfg);
    TrainResult result;
    result.history.reserve(static_cast<std::size_t>(cfg.epochs));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch)
        result.history.push_back(trainer.run_epoch());
    result.pipeline = std::move(trainer.pipe);
    return result;
}

double select_lambda(const fp::FingerprintSet& train_rows,
                     const fp::FingerprintSet& val_rows, const DreamConfig& cfg) {
    if (val_rows.rows.empty()) throw ValidationError("empty validation split");
    for (const auto& row : val_rows.rows)
        if (!row.labeled)
            throw ValidationError("validation fingerprints must carry labels");
    std::vector<double> grid = cfg.lambda_grid;
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    if (grid.empty()) throw ValidationError("empty lambda grid");
    if (grid.size() == 1) return grid.front();

    double best_lambda = grid.front();
    double best_acc = -1.0;
    for (double lambda : grid) {
        DreamConfig candidate = cfg;
        candidate.lambda = lambda;
        TrainResult res = train_reverse(train_rows, candidate);
        const double acc = mean_attribute_accuracy(res.pipeline, val_rows);
        if (acc > best_acc) {  // ascending scan: ties keep the smaller lambda
            best_acc = acc;
            best_lambda = lambda;
        }
    }
    return best_lambda;
}

std::vector<Prediction> predict_batch(ReversePipeline& pipe,
                                      const fp::FingerprintSet& set) {
    check_compatible(pipe, set);
    if (set.rows.empty()) return {};
    Tensor x = set.features();
    Tensor z = pipe.embed(x);
    Tensor t = pipe.trunk.forward(z, nn::Mode::Eval);
    std::vector<Prediction> out(set.rows.size());
    for (std::size_t h = 0; h < pipe.heads.size(); ++h) {
        Tensor p = nn::softmax(pipe.heads[h].forward(t, nn::Mode::Eval));
        const std::size_t k = p.shape[1];
        for (std::size_t r = 0; r < out.size(); ++r) {
            const double* row = p.ptr() + r * k;
            std::size_t best = 0;
            for (std::size_t j = 1; j < k; ++j)
                if (row[j] > row[best]) best = j;
            out[r].label_indices[h] = best;
            out[r].head_probs[h].assign(row, row + k);
        }
    }
    for (auto& pred : out)
        pred.attrs = zoo::AttributeVector::from_label_indices(pred.label_indices);
    return out;
}

Prediction infer_attributes(ReversePipeline& pipe, const std::vector<double>& values) {
    if (values.size() != pipe.input_dim())
        throw IncompatibilityError(
            "fingerprint length " + std::to_string(values.size()) +
            " incompatible with pipeline C*N = " + std::to_string(pipe.input_dim()) +
            " (query set or class count mismatch)");
    fp::FingerprintSet one;
    fp::Fingerprint row;
    row.model_id = "query";
    row.class_count = pipe.class_count;
    row.n_queries = pipe.n_queries;
    row.values = values;
    one.add(std::move(row));
    return predict_batch(pipe, one).front();
}

double mean_attribute_accuracy(ReversePipeline& pipe, const fp::FingerprintSet& set) {
    std::vector<std::size_t> labeled;
    for (std::size_t r = 0; r < set.rows.size(); ++r)
        if (set.rows[r].labeled) labeled.push_back(r);
    if (labeled.empty()) throw ValidationError("no labeled rows to score");
    auto preds = predict_batch(pipe, set);
    double acc = 0.0;
    for (std::size_t r : labeled) {
        const auto truth = set.rows[r].attrs.label_indices();
        std::size_t hits = 0;
        for (std::size_t h = 0; h < zoo::kAttributeCount; ++h)
            if (preds[r].label_indices[h] == truth[h]) ++hits;
        acc += static_cast<double>(hits) / zoo::kAttributeCount;
    }
    return acc / static_cast<double>(labeled.size());
}

namespace {
constexpr char kPipeMagic[8] = {'D', 'K', 'P', 'I', 'P', 'E', '0', '1'};

void write_string(std::ostream& os, const std::string& s) {
    nn::write_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
    const std::uint32_t len = nn::read_u32(is);
    if (len > 4096) throw ValidationError("unreasonable string length in pipeline file");
    std::string s(len, '\0');
    is.read(s.data(), len);
    if (!is) throw ValidationError("truncated pipeline file");
    return s;
}
}  // namespace

void save_pipeline(const ReversePipeline& pipe, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ValidationError("cannot open " + path + " for writing");
    os.write(kPipeMagic, 8);
    nn::write_u32(os, 1);
    write_string(os, pipe.kind);
    os.put(pipe.use_gan ? 1 : 0);
    nn::write_u32(os, static_cast<std::uint32_t>(pipe.class_count));
    nn::write_u32(os, static_cast<std::uint32_t>(pipe.n_queries));
    nn::write_u32(os, static_cast<std::uint32_t>(pipe.domain_count));
    nn::write_u64(os, pipe.grid_hash_value);
    nn::write_u32(os, static_cast<std::uint32_t>(pipe.source_domains.size()));
    for (const auto& d : pipe.source_domains) write_string(os, d);
    nn::write_f64(os, pipe.lambda);
    nn::write_f64(os, pipe.mmd_gamma);
    nn::write_u64(os, pipe.dims.gen_hidden);
    nn::write_u64(os, pipe.dims.embed_dim);
    nn::write_u64(os, pipe.dims.disc_hidden1);
    nn::write_u64(os, pipe.dims.disc_hidden2);
    nn::write_u64(os, pipe.dims.trunk_hidden);
    if (pipe.use_gan) {
        nn::write_parameters(os, pipe.generator.params());
        for (const auto& disc : pipe.discriminators)
            nn::write_parameters(os, disc.params());
    }
    nn::write_parameters(os, pipe.trunk.params());
    for (const auto& head : pipe.heads) nn::write_parameters(os, head.params());
    if (!os) throw ValidationError("write failed: " + path);
}

ReversePipeline load_pipeline(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("cannot open pipeline " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kPipeMagic, 8) != 0)
        throw ValidationError("bad pipeline magic in " + path);
    if (nn::read_u32(is) != 1) throw ValidationError("unsupported pipeline version");
    ReversePipeline pipe;
    pipe.kind = read_string(is);
    const int gan = is.get();
    if (gan != 0 && gan != 1) throw ValidationError("corrupt pipeline flag");
    pipe.use_gan = gan == 1;
    pipe.class_count = static_cast<int>(nn::read_u32(is));
    pipe.n_queries = static_cast<int>(nn::read_u32(is));
    pipe.domain_count = static_cast<int>(nn::read_u32(is));
    pipe.grid_hash_value = nn::read_u64(is);
    const std::uint32_t nd = nn::read_u32(is);
    for (std::uint32_t i = 0; i < nd; ++i) pipe.source_domains.push_back(read_string(is));
    pipe.lambda = nn::read_f64(is);
    pipe.mmd_gamma = nn::read_f64(is);
    pipe.dims.gen_hidden = static_cast<std::size_t>(nn::read_u64(is));
    pipe.dims.embed_dim = static_cast<std::size_t>(nn::read_u64(is));
    pipe.dims.disc_hidden1 = static_cast<std::size_t>(nn::read_u64(is));
    pipe.dims.disc_hidden2 = static_cast<std::size_t>(nn::read_u64(is));
    pipe.dims.trunk_hidden = static_cast<std::size_t>(nn::read_u64(is));

    Rng scratch(0);
    build_pipeline_nets(pipe, 0.02, scratch);
    if (pipe.use_gan) {
        pipe.generator.set_params(nn::read_parameters(is));
        for (auto& disc : pipe.discriminators) disc.set_params(nn::read_parameters(is));
    }
    pipe.trunk.set_params(nn::read_parameters(is));
    for (auto& head : pipe.heads) head.set_params(nn::read_parameters(is));
    return pipe;
}

}  // namespace dreamkit::dream
