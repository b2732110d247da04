#include "dreamkit/fingerprint.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "dreamkit/errors.hpp"
#include "dreamkit/rng.hpp"
#include "dreamkit/textio.hpp"

namespace dreamkit::fp {

QuerySet build_query_set(const std::vector<zoo::DomainData>& sources, int n_queries,
                         std::uint64_t seed) {
    if (sources.empty()) throw ValidationError("no source domains for query set");
    if (n_queries <= 0) throw ValidationError("query count must be positive");
    if (n_queries % static_cast<int>(sources.size()) != 0)
        throw ValidationError("query count " + std::to_string(n_queries) +
                              " is not divisible by " + std::to_string(sources.size()) +
                              " source domains");
    const int per_domain = n_queries / static_cast<int>(sources.size());
    const int side = sources.front().spec.image_side;
    const std::size_t px = static_cast<std::size_t>(side) * side;

    QuerySet qs;
    qs.n_queries = n_queries;
    qs.seed = seed;
    qs.images = Tensor::zeros({static_cast<std::size_t>(n_queries), 1,
                               static_cast<std::size_t>(side),
                               static_cast<std::size_t>(side)});
    qs.source_domains.resize(static_cast<std::size_t>(n_queries));

    std::size_t row = 0;
    for (const auto& dom : sources) {
        if (dom.train.count() == 0)
            throw ValidationError("domain " + std::to_string(dom.spec.domain_id) +
                                  " has no images to query from");
        if (dom.spec.image_side != side)
            throw ValidationError("query source domains disagree on image size");
        Rng rng(mix_seed(seed, 0x51535433, static_cast<std::uint64_t>(dom.spec.domain_id)));
        std::vector<std::size_t> pick;
        if (dom.train.count() >= static_cast<std::size_t>(per_domain)) {
            pick = rng.sample_without_replacement(dom.train.count(),
                                                  static_cast<std::size_t>(per_domain));
        } else {
            for (int k = 0; k < per_domain; ++k)
                pick.push_back(static_cast<std::size_t>(rng.below(dom.train.count())));
        }
        for (std::size_t p : pick) {
            std::copy_n(dom.train.images.ptr() + p * px, px, qs.images.ptr() + row * px);
            qs.source_domains[row] = dom.spec.domain_id;
            ++row;
        }
    }
    return qs;
}

Fingerprint collect_fingerprint(nn::Network& model, const QuerySet& queries) {
    if (queries.n_queries <= 0) throw ValidationError("empty query set");
    Tensor logits = model.forward(queries.images, nn::Mode::Eval);
    if (logits.ndim() != 2)
        throw ValidationError("fingerprinted model must emit a logit vector per query");
    Tensor probs = nn::softmax(logits);
    Fingerprint fpr;
    fpr.class_count = static_cast<int>(probs.shape[1]);
    fpr.n_queries = queries.n_queries;
    fpr.values = std::move(probs.data);
    return fpr;
}

void FingerprintSet::add(Fingerprint fpr) {
    if (fpr.values.size() !=
        static_cast<std::size_t>(fpr.class_count) * fpr.n_queries)
        throw ValidationError("fingerprint length is not C*N");
    if (rows.empty()) {
        class_count = fpr.class_count;
        n_queries = fpr.n_queries;
    } else if (fpr.class_count != class_count || fpr.n_queries != n_queries) {
        throw IncompatibilityError(
            "fingerprint (C=" + std::to_string(fpr.class_count) +
            ",N=" + std::to_string(fpr.n_queries) + ") does not match set (C=" +
            std::to_string(class_count) + ",N=" + std::to_string(n_queries) + ")");
    }
    rows.push_back(std::move(fpr));
    std::set<std::string> doms;
    for (const auto& r : rows)
        if (r.domain != "?") doms.insert(r.domain);
    domain_count = static_cast<int>(doms.size());
}

std::vector<std::string> FingerprintSet::domains() const {
    std::set<std::string> doms;
    for (const auto& r : rows)
        if (r.domain != "?") doms.insert(r.domain);
    return {doms.begin(), doms.end()};
}

Tensor FingerprintSet::features() const {
    const std::size_t dim = static_cast<std::size_t>(class_count) * n_queries;
    Tensor out = Tensor::zeros({rows.size(), dim});
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy_n(rows[i].values.data(), dim, out.ptr() + i * dim);
    return out;
}

void validate_set(const FingerprintSet& set) {
    const std::size_t dim =
        static_cast<std::size_t>(set.class_count) * set.n_queries;
    for (std::size_t r = 0; r < set.rows.size(); ++r) {
        const auto& row = set.rows[r];
        if (row.values.size() != dim)
            throw ValidationError("row " + std::to_string(r) + " (" + row.model_id +
                                  "): length " + std::to_string(row.values.size()) +
                                  " != C*N = " + std::to_string(dim));
        for (int q = 0; q < set.n_queries; ++q) {
            double sum = 0.0;
            for (int c = 0; c < set.class_count; ++c) {
                const double v = row.values[static_cast<std::size_t>(q) * set.class_count + c];
                if (!(v >= 0.0 && v <= 1.0))
                    throw ValidationError("row " + std::to_string(r) + " block " +
                                          std::to_string(q) +
                                          ": probability outside [0,1]");
                sum += v;
            }
            if (std::abs(sum - 1.0) > kSimplexTol)
                throw ValidationError("row " + std::to_string(r) + " block " +
                                      std::to_string(q) +
                                      ": probability block sums to " + format_f64(sum));
        }
    }
}

void write_fingerprints(const std::string& path, const FingerprintSet& set) {
    validate_set(set);
    std::ofstream os(path);
    if (!os) throw ValidationError("cannot open " + path + " for writing");
    os << "DREAMFP 1 m=" << set.domain_count << " C=" << set.class_count
       << " N=" << set.n_queries << "\n";
    for (const auto& row : set.rows) {
        os << row.model_id << ',' << row.domain << ',';
        if (row.labeled) {
            os << row.attrs.csv();
        } else {
            os << "?,?,?,?,?,?,?,?,?";
        }
        for (double v : row.values) os << ',' << format_f64(v);
        os << "\n";
    }
    if (!os) throw ValidationError("write failed: " + path);
}

FingerprintSet read_fingerprints(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open fingerprint file " + path);
    std::string line;
    if (!std::getline(is, line)) throw ValidationError("empty fingerprint file " + path);
    auto head = split_on(line, ' ');
    if (head.size() != 5 || head[0] != "DREAMFP" || head[1] != "1")
        throw ValidationError("malformed header in " + path);
    auto field = [&](const std::string& tok, const char* key) -> std::string {
        auto kv = split_on(tok, '=');
        if (kv.size() != 2 || kv[0] != key)
            throw ValidationError("malformed header field '" + tok + "' in " + path);
        return kv[1];
    };
    FingerprintSet set;
    const int header_m = static_cast<int>(parse_u64(field(head[2], "m")));
    set.class_count = static_cast<int>(parse_u64(field(head[3], "C")));
    set.n_queries = static_cast<int>(parse_u64(field(head[4], "N")));
    if (set.class_count < 1 || set.n_queries < 1)
        throw ValidationError("header C and N must be positive in " + path);

    const std::size_t dim =
        static_cast<std::size_t>(set.class_count) * set.n_queries;
    std::size_t row_index = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto tok = split_on(line, ',');
        if (tok.size() != 2 + zoo::kAttributeCount + dim)
            throw ValidationError("row " + std::to_string(row_index) + ": expected " +
                                  std::to_string(2 + zoo::kAttributeCount + dim) +
                                  " fields, got " + std::to_string(tok.size()));
        Fingerprint fpr;
        fpr.model_id = tok[0];
        fpr.domain = tok[1];
        fpr.class_count = set.class_count;
        fpr.n_queries = set.n_queries;
        const bool unlabeled = tok[2] == "?";
        if (unlabeled) {
            for (std::size_t a = 0; a < zoo::kAttributeCount; ++a)
                if (tok[2 + a] != "?")
                    throw ValidationError("row " + std::to_string(row_index) +
                                          ": mixed '?' and attribute tokens");
        } else {
            fpr.labeled = true;
            fpr.attrs = zoo::AttributeVector::from_tokens(
                std::vector<std::string>(tok.begin() + 2,
                                         tok.begin() + 2 + zoo::kAttributeCount));
        }
        fpr.values.resize(dim);
        for (std::size_t i = 0; i < dim; ++i)
            fpr.values[i] = parse_f64(tok[2 + zoo::kAttributeCount + i]);
        set.rows.push_back(std::move(fpr));
        ++row_index;
    }
    std::set<std::string> doms;
    for (const auto& r : set.rows)
        if (r.domain != "?") doms.insert(r.domain);
    set.domain_count = static_cast<int>(doms.size());
    if (set.domain_count != header_m)
        throw ValidationError("header m=" + std::to_string(header_m) + " but file has " +
                              std::to_string(set.domain_count) + " labeled domains");
    validate_set(set);
    return set;
}

Fingerprint truncate_to_classes(const Fingerprint& fpr, const std::vector<int>& classes) {
    if (classes.empty()) throw ValidationError("shared class set is empty");
    bool identity = static_cast<int>(classes.size()) == fpr.class_count;
    if (identity)
        for (std::size_t k = 0; k < classes.size(); ++k)
            if (classes[k] != static_cast<int>(k)) identity = false;
    if (identity) return fpr;

    for (int c : classes)
        if (c < 0 || c >= fpr.class_count)
            throw ValidationError("shared class index out of range");
    Fingerprint out = fpr;
    out.class_count = static_cast<int>(classes.size());
    out.values.assign(static_cast<std::size_t>(out.class_count) * fpr.n_queries, 0.0);
    for (int q = 0; q < fpr.n_queries; ++q) {
        double sum = 0.0;
        for (std::size_t k = 0; k < classes.size(); ++k)
            sum += fpr.values[static_cast<std::size_t>(q) * fpr.class_count + classes[k]];
        if (sum < 1e-9)
            throw ValidationError("block " + std::to_string(q) +
                                  ": no probability mass on the shared class set");
        for (std::size_t k = 0; k < classes.size(); ++k)
            out.values[static_cast<std::size_t>(q) * classes.size() + k] =
                fpr.values[static_cast<std::size_t>(q) * fpr.class_count + classes[k]] /
                sum;
    }
    return out;
}

}  // namespace dreamkit::fp
