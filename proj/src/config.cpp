#include "dreamkit/config.hpp"

#include <fstream>
#include <thread>

#include <json.hpp>

#include "dreamkit/errors.hpp"

namespace dreamkit {

using nlohmann::json;

namespace {

void check_keys(const json& j, const char* where,
                std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* key : allowed)
            if (it.key() == key) ok = true;
        if (!ok)
            throw ValidationError(std::string("unknown config key '") + it.key() +
                                  "' in " + where);
    }
}

}  // namespace

void ToolkitConfig::validate() const {
    if (data.domain_count < 2) throw ValidationError("config: need >= 2 domains");
    if (data.class_count < 2) throw ValidationError("config: need >= 2 classes");
    if (data.image_side < 6) throw ValidationError("config: image side too small");
    if (data.styles.empty()) throw ValidationError("config: no domain styles");
    if (data.train_per_class < 1 || data.val_per_class < 1)
        throw ValidationError("config: per-class counts must be positive");
    if (zoo.models_per_domain < zoo.split_train + zoo.split_val + zoo.split_test)
        throw ValidationError("config: zoo split sizes exceed models per domain");
    if (zoo.conv_channels < 1 || zoo.fc_width < 1)
        throw ValidationError("config: conv channels and fc width must be positive");
    if (n_queries < 1) throw ValidationError("config: query count must be positive");
    if (harness.trials < 1) throw ValidationError("config: trial count must be >= 1");
    if (harness.methods.empty()) throw ValidationError("config: no methods selected");
    dream.validate();
}

ToolkitConfig default_config() {
    ToolkitConfig cfg;
    // desk-scale attack settings; the DreamConfig constructor carries the
    // paper-scale learning rates, which are too slow for 200-row splits
    cfg.dream.alpha = 2e-4;
    cfg.dream.beta = 1e-3;
    cfg.dream.lambda = 0.1;
    cfg.dream.batch = 100;
    cfg.dream.epochs = 300;
    cfg.dream.lambda_grid = {0.1};
    cfg.baseline.lr = 1e-3;
    cfg.baseline.epochs = 300;
    cfg.baseline.batch = 100;
    return cfg;
}

namespace {

void from_json_dream(const json& j, dream::DreamConfig& d) {
    check_keys(j, "dream",
               {"alpha", "beta", "lambda", "batch", "epochs", "lambda_grid",
                "non_saturating", "update_rule", "init_sigma", "dims"});
    d.alpha = j.value("alpha", d.alpha);
    d.beta = j.value("beta", d.beta);
    d.lambda = j.value("lambda", d.lambda);
    d.batch = j.value("batch", d.batch);
    d.epochs = j.value("epochs", d.epochs);
    if (j.contains("lambda_grid"))
        d.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
    d.non_saturating = j.value("non_saturating", d.non_saturating);
    if (j.contains("update_rule"))
        d.update_rule = nn::opt_from_name(j.at("update_rule").get<std::string>());
    d.init_sigma = j.value("init_sigma", d.init_sigma);
    if (j.contains("dims")) {
        const json& dims = j.at("dims");
        check_keys(dims, "dream.dims",
                   {"gen_hidden", "embed_dim", "disc_hidden1", "disc_hidden2",
                    "trunk_hidden"});
        d.dims.gen_hidden = dims.value("gen_hidden", d.dims.gen_hidden);
        d.dims.embed_dim = dims.value("embed_dim", d.dims.embed_dim);
        d.dims.disc_hidden1 = dims.value("disc_hidden1", d.dims.disc_hidden1);
        d.dims.disc_hidden2 = dims.value("disc_hidden2", d.dims.disc_hidden2);
        d.dims.trunk_hidden = dims.value("trunk_hidden", d.dims.trunk_hidden);
    }
}

json to_json_dream(const dream::DreamConfig& d) {
    json dims;
    dims["gen_hidden"] = d.dims.gen_hidden;
    dims["embed_dim"] = d.dims.embed_dim;
    dims["disc_hidden1"] = d.dims.disc_hidden1;
    dims["disc_hidden2"] = d.dims.disc_hidden2;
    dims["trunk_hidden"] = d.dims.trunk_hidden;
    json j;
    j["alpha"] = d.alpha;
    j["beta"] = d.beta;
    j["lambda"] = d.lambda;
    j["batch"] = d.batch;
    j["epochs"] = d.epochs;
    j["lambda_grid"] = d.lambda_grid;
    j["non_saturating"] = d.non_saturating;
    j["update_rule"] = nn::opt_name(d.update_rule);
    j["init_sigma"] = d.init_sigma;
    j["dims"] = dims;
    return j;
}

}  // namespace

ToolkitConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open config " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw ValidationError("config parse error in " + path + ": " + e.what());
    }
    ToolkitConfig cfg = default_config();
    try {
        check_keys(j, "config root",
                   {"seed", "data", "zoo", "fingerprint", "dream", "baseline", "harness"});
        cfg.seed = j.value("seed", cfg.seed);
        if (j.contains("data")) {
            const json& d = j.at("data");
            check_keys(d, "data",
                       {"domain_count", "class_count", "image_side", "train_per_class",
                        "val_per_class", "styles"});
            cfg.data.domain_count = d.value("domain_count", cfg.data.domain_count);
            cfg.data.class_count = d.value("class_count", cfg.data.class_count);
            cfg.data.image_side = d.value("image_side", cfg.data.image_side);
            cfg.data.train_per_class = d.value("train_per_class", cfg.data.train_per_class);
            cfg.data.val_per_class = d.value("val_per_class", cfg.data.val_per_class);
            if (d.contains("styles"))
                cfg.data.styles = d.at("styles").get<std::vector<std::string>>();
        }
        if (j.contains("zoo")) {
            const json& z = j.at("zoo");
            check_keys(z, "zoo",
                       {"models_per_domain", "epochs", "lr_sgd", "lr_adam", "lr_rmsprop",
                        "conv_channels", "fc_width", "split_train", "split_val",
                        "split_test"});
            cfg.zoo.models_per_domain = z.value("models_per_domain", cfg.zoo.models_per_domain);
            cfg.zoo.epochs = z.value("epochs", cfg.zoo.epochs);
            cfg.zoo.lr_sgd = z.value("lr_sgd", cfg.zoo.lr_sgd);
            cfg.zoo.lr_adam = z.value("lr_adam", cfg.zoo.lr_adam);
            cfg.zoo.lr_rmsprop = z.value("lr_rmsprop", cfg.zoo.lr_rmsprop);
            cfg.zoo.conv_channels = z.value("conv_channels", cfg.zoo.conv_channels);
            cfg.zoo.fc_width = z.value("fc_width", cfg.zoo.fc_width);
            cfg.zoo.split_train = z.value("split_train", cfg.zoo.split_train);
            cfg.zoo.split_val = z.value("split_val", cfg.zoo.split_val);
            cfg.zoo.split_test = z.value("split_test", cfg.zoo.split_test);
        }
        if (j.contains("fingerprint")) {
            const json& f = j.at("fingerprint");
            check_keys(f, "fingerprint", {"n_queries"});
            cfg.n_queries = f.value("n_queries", cfg.n_queries);
        }
        if (j.contains("dream")) from_json_dream(j.at("dream"), cfg.dream);
        if (j.contains("baseline")) {
            const json& b = j.at("baseline");
            check_keys(b, "baseline",
                       {"lr", "epochs", "batch", "mmd_gamma", "mmd_sigma", "gamma_grid",
                        "svm_lr", "svm_epochs", "svm_reg"});
            cfg.baseline.lr = b.value("lr", cfg.baseline.lr);
            cfg.baseline.epochs = b.value("epochs", cfg.baseline.epochs);
            cfg.baseline.batch = b.value("batch", cfg.baseline.batch);
            cfg.baseline.mmd_gamma = b.value("mmd_gamma", cfg.baseline.mmd_gamma);
            cfg.baseline.mmd_sigma = b.value("mmd_sigma", cfg.baseline.mmd_sigma);
            if (b.contains("gamma_grid"))
                cfg.baseline.gamma_grid = b.at("gamma_grid").get<std::vector<double>>();
            cfg.baseline.svm_lr = b.value("svm_lr", cfg.baseline.svm_lr);
            cfg.baseline.svm_epochs = b.value("svm_epochs", cfg.baseline.svm_epochs);
            cfg.baseline.svm_reg = b.value("svm_reg", cfg.baseline.svm_reg);
        }
        if (j.contains("harness")) {
            const json& h = j.at("harness");
            check_keys(h, "harness",
                       {"trials", "methods", "jobs", "probe", "disjoint_train",
                        "disjoint_val", "disjoint_test", "class_subset"});
            cfg.harness.trials = h.value("trials", cfg.harness.trials);
            if (h.contains("methods"))
                cfg.harness.methods = h.at("methods").get<std::vector<std::string>>();
            cfg.harness.jobs = h.value("jobs", cfg.harness.jobs);
            if (h.contains("probe")) {
                const json& p = h.at("probe");
                check_keys(p, "harness.probe", {"epochs", "lr", "l2", "train_fraction"});
                cfg.harness.probe.epochs = p.value("epochs", cfg.harness.probe.epochs);
                cfg.harness.probe.lr = p.value("lr", cfg.harness.probe.lr);
                cfg.harness.probe.l2 = p.value("l2", cfg.harness.probe.l2);
                cfg.harness.probe.train_fraction =
                    p.value("train_fraction", cfg.harness.probe.train_fraction);
            }
            cfg.harness.disjoint_train = h.value("disjoint_train", cfg.harness.disjoint_train);
            cfg.harness.disjoint_val = h.value("disjoint_val", cfg.harness.disjoint_val);
            cfg.harness.disjoint_test = h.value("disjoint_test", cfg.harness.disjoint_test);
            if (h.contains("class_subset"))
                cfg.harness.class_subset = h.at("class_subset").get<std::vector<int>>();
        }
    } catch (const json::exception& e) {
        throw ValidationError("config error in " + path + ": " + e.what());
    }
    cfg.validate();
    return cfg;
}

void save_config(const ToolkitConfig& cfg, const std::string& path) {
    json j;
    j["seed"] = cfg.seed;
    j["data"] = {{"domain_count", cfg.data.domain_count},
                 {"class_count", cfg.data.class_count},
                 {"image_side", cfg.data.image_side},
                 {"train_per_class", cfg.data.train_per_class},
                 {"val_per_class", cfg.data.val_per_class},
                 {"styles", cfg.data.styles}};
    j["zoo"] = {{"models_per_domain", cfg.zoo.models_per_domain},
                {"epochs", cfg.zoo.epochs},
                {"lr_sgd", cfg.zoo.lr_sgd},
                {"lr_adam", cfg.zoo.lr_adam},
                {"lr_rmsprop", cfg.zoo.lr_rmsprop},
                {"conv_channels", cfg.zoo.conv_channels},
                {"fc_width", cfg.zoo.fc_width},
                {"split_train", cfg.zoo.split_train},
                {"split_val", cfg.zoo.split_val},
                {"split_test", cfg.zoo.split_test}};
    j["fingerprint"] = {{"n_queries", cfg.n_queries}};
    j["dream"] = to_json_dream(cfg.dream);
    j["baseline"] = {{"lr", cfg.baseline.lr},
                     {"epochs", cfg.baseline.epochs},
                     {"batch", cfg.baseline.batch},
                     {"mmd_gamma", cfg.baseline.mmd_gamma},
                     {"mmd_sigma", cfg.baseline.mmd_sigma},
                     {"gamma_grid", cfg.baseline.gamma_grid},
                     {"svm_lr", cfg.baseline.svm_lr},
                     {"svm_epochs", cfg.baseline.svm_epochs},
                     {"svm_reg", cfg.baseline.svm_reg}};
    j["harness"] = {{"trials", cfg.harness.trials},
                    {"methods", cfg.harness.methods},
                    {"jobs", cfg.harness.jobs},
                    {"probe",
                     {{"epochs", cfg.harness.probe.epochs},
                      {"lr", cfg.harness.probe.lr},
                      {"l2", cfg.harness.probe.l2},
                      {"train_fraction", cfg.harness.probe.train_fraction}}},
                    {"disjoint_train", cfg.harness.disjoint_train},
                    {"disjoint_val", cfg.harness.disjoint_val},
                    {"disjoint_test", cfg.harness.disjoint_test},
                    {"class_subset", cfg.harness.class_subset}};
    std::ofstream os(path);
    if (!os) throw ValidationError("cannot open " + path + " for writing");
    os << j.dump(2) << "\n";
    if (!os) throw ValidationError("write failed: " + path);
}

std::vector<zoo::DomainSpec> domain_specs(const ToolkitConfig& cfg) {
    std::vector<zoo::DomainSpec> specs;
    for (int d = 0; d < cfg.data.domain_count; ++d) {
        zoo::DomainSpec spec;
        spec.domain_id = d;
        spec.class_count = cfg.data.class_count;
        spec.image_side = cfg.data.image_side;
        spec.style = zoo::style_from_name(
            cfg.data.styles[static_cast<std::size_t>(d) % cfg.data.styles.size()]);
        spec.train_per_class = cfg.data.train_per_class;
        spec.val_per_class = cfg.data.val_per_class;
        specs.push_back(spec);
    }
    return specs;
}

zoo::ZooTrainConfig zoo_train_config(const ToolkitConfig& cfg, int jobs) {
    zoo::ZooTrainConfig z;
    z.epochs = cfg.zoo.epochs;
    z.lr_sgd = cfg.zoo.lr_sgd;
    z.lr_adam = cfg.zoo.lr_adam;
    z.lr_rmsprop = cfg.zoo.lr_rmsprop;
    z.conv_channels = static_cast<std::size_t>(cfg.zoo.conv_channels);
    z.fc_width = static_cast<std::size_t>(cfg.zoo.fc_width);
    z.jobs = effective_jobs(jobs);
    return z;
}

int effective_jobs(int jobs) {
    if (jobs > 0) return jobs;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

}  // namespace dreamkit
