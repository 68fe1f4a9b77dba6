#include "llmfp/openset.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace llmfp {

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) throw DimensionError("cosine dims", a.size(), b.size());
    if (a.size() == 0) throw std::invalid_argument("cosine of empty vectors");
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0)
        throw std::domain_error("cosine similarity undefined for zero vector");
    if (std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0)
        return 1.0;
    const double c = a.dot(b) / (na * nb);
    return std::clamp(c, -1.0, 1.0);
}

Eigen::VectorXd build_template(const std::vector<Signature>& signatures) {
    if (signatures.empty()) throw std::invalid_argument("build_template: empty signature list");
    for (const auto& s : signatures)
        if (s.size() != signatures.front().size())
            throw DimensionError("signature dims", signatures.front().size(), s.size());
    // canonical summation order makes the mean bit-identical under any
    // permutation of the input list
    std::vector<std::size_t> order(signatures.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::lexicographical_compare(
            signatures[a].data(), signatures[a].data() + signatures[a].size(),
            signatures[b].data(), signatures[b].data() + signatures[b].size());
    });
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(signatures.front().size());
    for (std::size_t i : order) acc += signatures[i];
    return acc / static_cast<double>(signatures.size());
}

namespace {

void check_fingerprint(const TemplateDB& db, const std::string& fp) {
    if (!db.net_fingerprint.empty() && !fp.empty() && db.net_fingerprint != fp)
        throw FingerprintMismatchError("signature fingerprint " + fp +
                                       " does not match database fingerprint " +
                                       db.net_fingerprint);
}

}  // namespace

void enroll(TemplateDB& db, const ModelLabel& label, const std::vector<Signature>& signatures,
            const std::string& producing_fingerprint, bool overwrite) {
    check_fingerprint(db, producing_fingerprint);
    if (db.entries.count(label) && !overwrite)
        throw std::invalid_argument("label already enrolled: " + label.display() +
                                    " (pass overwrite to replace)");
    Eigen::VectorXd mean = build_template(signatures);
    if (db.entries.empty() && db.net_fingerprint.empty())
        db.net_fingerprint = producing_fingerprint;
    db.entries[label] = TemplateEntry{mean.cast<float>(), signatures.size()};
}

void enroll_update(TemplateDB& db, const ModelLabel& label,
                   const std::vector<Signature>& signatures,
                   const std::string& producing_fingerprint) {
    check_fingerprint(db, producing_fingerprint);
    auto it = db.entries.find(label);
    if (it == db.entries.end()) {
        enroll(db, label, signatures, producing_fingerprint);
        return;
    }
    Eigen::VectorXd sum = it->second.template_vec.cast<double>() *
                          static_cast<double>(it->second.sample_count);
    for (const auto& s : signatures) {
        if (s.size() != sum.size()) throw DimensionError("signature dims", sum.size(), s.size());
        sum += s;
    }
    const std::size_t n = it->second.sample_count + signatures.size();
    it->second.template_vec = (sum / static_cast<double>(n)).cast<float>();
    it->second.sample_count = n;
}

std::vector<MatchResult> match(const TemplateDB& db, const Signature& sig,
                               const std::string& producing_fingerprint) {
    if (db.entries.empty()) throw std::invalid_argument("template database is empty");
    check_fingerprint(db, producing_fingerprint);
    std::vector<MatchResult> out;
    out.reserve(db.entries.size());
    for (const auto& [label, entry] : db.entries)
        out.push_back({label, cosine_similarity(entry.template_vec.cast<double>(), sig)});
    std::stable_sort(out.begin(), out.end(), [](const MatchResult& a, const MatchResult& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.label < b.label;
    });
    return out;
}

// ---------------------------------------------------------------------------

void save_template_db(const std::string& path, const TemplateDB& db) {
    json entries = json::array();
    for (const auto& [label, entry] : db.entries) {
        entries.push_back(json{
            {"vendor", label.vendor},
            {"model_id", label.model_id},
            {"sample_count", entry.sample_count},
            {"template",
             base64_encode(entry.template_vec.data(),
                           sizeof(float) * static_cast<std::size_t>(entry.template_vec.size()))}});
    }
    json doc{{"format", "llmfp-templatedb"},
             {"version", 1},
             {"net_fingerprint", db.net_fingerprint},
             {"entries", entries}};
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out << doc.dump(1) << '\n';
    }
    std::filesystem::rename(tmp, path);
}

TemplateDB load_template_db(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open template db " + path);
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw std::runtime_error("template db is not valid JSON: " + path);
    if (doc.value("format", std::string()) != "llmfp-templatedb")
        throw std::runtime_error("not a template db file: " + path);
    if (doc.value("version", 0) != 1)
        throw std::runtime_error("unsupported template db version in " + path);
    TemplateDB db;
    db.net_fingerprint = doc.at("net_fingerprint").get<std::string>();
    for (const auto& e : doc.at("entries")) {
        ModelLabel label{e.at("vendor").get<std::string>(), e.at("model_id").get<std::string>()};
        auto bytes = base64_decode(e.at("template").get<std::string>());
        if (bytes.size() % sizeof(float) != 0)
            throw std::runtime_error("template byte size not a multiple of 4");
        Eigen::VectorXf v(static_cast<long>(bytes.size() / sizeof(float)));
        std::memcpy(v.data(), bytes.data(), bytes.size());
        db.entries[label] = TemplateEntry{std::move(v), e.at("sample_count").get<std::size_t>()};
    }
    return db;
}

// ---------------------------------------------------------------------------

namespace {

// Fresh trace sets for one model under configurations sampled from the pool.
std::vector<TraceSet> sample_trace_sets(const SyntheticModel& model, const ConfigPool& pool,
                                        const QueryStrategy& strategy, std::size_t count,
                                        std::uint64_t seed) {
    std::vector<TraceSet> out;
    Rng rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        PromptingConfiguration cfg = sample_config(pool, rng.next_u64());
        const std::uint64_t noise_base = rng.next_u64();
        TraceSet t;
        for (const auto& q : strategy.queries)
            t.pairs.push_back({q, apply_config(cfg, model, q, noise_base ^ fnv1a64(q.id)), false});
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace

LeaveOneOutResult leave_one_out_eval(const std::vector<SyntheticModel>& models,
                                     const ConfigPool& pool, const QueryStrategy& strategy,
                                     EmbeddingProvider& provider,
                                     const LeaveOneOutOptions& options) {
    if (models.size() < 3) throw std::invalid_argument("leave-one-out needs at least 3 models");
    auto [train_pool, test_pool] = split_pools(pool, options.seed);

    LeaveOneOutResult result;
    for (std::size_t held = 0; held < models.size(); ++held) {
        std::vector<SyntheticModel> rest;
        for (std::size_t i = 0; i < models.size(); ++i)
            if (i != held) rest.push_back(models[i]);

        Dataset train_ds = make_dataset(options.train_w, strategy, train_pool, rest,
                                        options.seed + 101 * held);
        TrainConfig tc = options.train_config;
        tc.mode = TrainMode::open_set;
        InferenceModelParams params =
            train_open_set(train_ds, options.net_config, tc, provider);
        const std::string fp = net_fingerprint(params);

        TemplateDB db;
        // templates for the trained models from their training traces
        std::vector<Signature> sigs = dataset_signatures(params, train_ds, provider);
        for (const auto& m : rest) {
            std::vector<Signature> own;
            for (std::size_t i = 0; i < train_ds.entries.size(); ++i)
                if (train_ds.entries[i].label == m.label) own.push_back(sigs[i]);
            enroll(db, m.label, own, fp);
        }
        // held-out model enrolled from a disjoint batch of traces
        std::vector<Signature> enroll_sigs;
        for (const auto& t : sample_trace_sets(models[held], train_pool, strategy,
                                               options.enroll_w, options.seed + 7919 * held))
            enroll_sigs.push_back(forward(params, embed_trace_set(provider, t)));
        enroll(db, models[held].label, enroll_sigs, fp);

        // score fresh traces under held-out configurations
        std::size_t correct = 0;
        auto eval_sets = sample_trace_sets(models[held], test_pool, strategy, options.eval_w,
                                           options.seed + 104729 * held);
        for (const auto& t : eval_sets) {
            Signature sig = forward(params, embed_trace_set(provider, t));
            auto ranking = match(db, sig, fp);
            if (ranking.front().label == models[held].label) ++correct;
        }
        result.per_model_accuracy.push_back(
            {models[held].label,
             static_cast<double>(correct) / static_cast<double>(eval_sets.size())});
    }
    double sum = 0.0;
    for (const auto& [_, acc] : result.per_model_accuracy) sum += acc;
    result.mean_accuracy = sum / static_cast<double>(result.per_model_accuracy.size());
    return result;
}

}  // namespace llmfp
