// llmfp: active fingerprinting of the LLM behind a remote LLM-integrated
// application. Subcommands: scan, dataset, train, db, optimize-queries.

#include <chrono>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "llmfp/dataset.hpp"
#include "llmfp/net.hpp"
#include "llmfp/openset.hpp"
#include "llmfp/probe.hpp"
#include "llmfp/report.hpp"
#include "llmfp/simenv.hpp"
#include "llmfp/strategy.hpp"
#include "llmfp/train.hpp"

namespace {

using namespace llmfp;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitOracle = 2;
constexpr int kExitModelLoad = 3;
constexpr int kExitFingerprint = 4;

void diagnostic(const std::string& message, int code) {
    std::cerr << json{{"error", message}, {"exit_code", code}}.dump() << "\n";
}

struct ScanArgs {
    std::string endpoint;
    std::string path = "/v1/chat/completions";
    std::string auth_env;
    double timeout = 30.0;
    int retries = 2;
    int parallelism = 1;
    int queries = 8;
    std::string response_path = "choices.0.message.content";
    std::string checkpoint = "llmfp-closed.ckpt";
    std::string mode = "closed";
    std::string db_path;
    double min_similarity = -1.0;  // open mode floor, off by default
    std::string output;
};

int run_scan(const ScanArgs& args) {
    // model artifacts first: a bad checkpoint must not generate traffic
    LoadedCheckpoint ckpt;
    try {
        ckpt = load_checkpoint(args.checkpoint);
    } catch (const std::exception& e) {
        diagnostic(e.what(), kExitModelLoad);
        return kExitModelLoad;
    }
    std::shared_ptr<EmbeddingProvider> provider;
    TemplateDB db;
    try {
        provider = make_provider(ckpt.meta.embedder_name);
        if (args.mode == "open") {
            if (args.db_path.empty())
                throw std::invalid_argument("open mode requires --db");
            db = load_template_db(args.db_path);
            if (db.net_fingerprint != ckpt.fingerprint)
                throw FingerprintMismatchError("template db " + args.db_path +
                                               " was built from a different checkpoint");
        } else if (!ckpt.params.head) {
            throw ModeError("checkpoint has no closed-set head; use --mode open");
        }
    } catch (const FingerprintMismatchError& e) {
        diagnostic(e.what(), kExitFingerprint);
        return kExitFingerprint;
    } catch (const std::exception& e) {
        diagnostic(e.what(), kExitModelLoad);
        return kExitModelLoad;
    }

    OracleEndpoint endpoint;
    endpoint.base_url = args.endpoint;
    endpoint.path = args.path;
    endpoint.auth_token_ref = args.auth_env;
    endpoint.request_timeout = args.timeout;
    endpoint.max_retries = args.retries;
    endpoint.per_query_parallelism = args.parallelism;
    endpoint.response_field_path = args.response_path;

    QueryStrategy strategy = default_strategy().prefix(static_cast<std::size_t>(args.queries));

    ScanReport report;
    report.mode = args.mode;
    report.target = json{{"endpoint", endpoint.base_url},
                         {"path", endpoint.path},
                         {"auth_env", endpoint.auth_token_ref},
                         {"timeout_s", endpoint.request_timeout},
                         {"retries", endpoint.max_retries}};
    report.checkpoint_digest = ckpt.fingerprint;

    const auto t0 = std::chrono::steady_clock::now();
    try {
        report.traces = collect_traces(endpoint, strategy);
    } catch (const AuthError& e) {
        diagnostic(e.what(), kExitOracle);
        return kExitOracle;
    } catch (const std::exception& e) {
        diagnostic(e.what(), kExitOracle);
        return kExitOracle;
    }
    report.queries_used = report.traces.size();

    bool any_ok = false;
    for (const auto& p : report.traces.pairs) any_ok |= !p.error_flag;
    if (!any_ok) {
        diagnostic("oracle produced no usable responses", kExitOracle);
        return kExitOracle;
    }

    try {
        if (args.mode == "closed") {
            Prediction pred = predict(ckpt.params, *ckpt.meta.labels, report.traces, *provider);
            report.prediction = pred.label;
            report.confidence = pred.confidence;
            std::vector<std::pair<ModelLabel, double>> ranked;
            for (std::size_t i = 0; i < ckpt.meta.labels->size(); ++i)
                ranked.push_back({ckpt.meta.labels->labels[i],
                                  pred.distribution[static_cast<long>(i)]});
            std::stable_sort(ranked.begin(), ranked.end(),
                             [](const auto& a, const auto& b) { return a.second > b.second; });
            ranked.resize(std::min<std::size_t>(5, ranked.size()));
            report.ranking = std::move(ranked);
        } else {
            Signature sig =
                forward(ckpt.params, embed_trace_set(*provider, report.traces));
            auto ranking = match(db, sig, ckpt.fingerprint);
            if (args.min_similarity > -1.0 && ranking.front().similarity < args.min_similarity) {
                diagnostic("best similarity " + std::to_string(ranking.front().similarity) +
                               " below --min-similarity floor",
                           kExitOk);
            }
            report.prediction = ranking.front().label;
            report.confidence = ranking.front().similarity;
            for (std::size_t i = 0; i < std::min<std::size_t>(5, ranking.size()); ++i)
                report.ranking.push_back({ranking[i].label, ranking[i].similarity});
        }
    } catch (const FingerprintMismatchError& e) {
        diagnostic(e.what(), kExitFingerprint);
        return kExitFingerprint;
    }
    report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const std::string doc = report.to_json().dump(1) + "\n";
    std::cout << doc;
    if (!args.output.empty()) {
        std::ofstream out(args.output, std::ios::binary);
        out << doc;
    }
    return kExitOk;
}

std::vector<SyntheticModel> family_for(const std::string& kind, int n) {
    if (kind == "roster") return make_roster_family();
    return make_default_family(n);
}

int run_dataset(std::size_t w, std::uint64_t seed, std::uint64_t split_seed,
                const std::string& pool_path, int models, const std::string& family,
                int queries, const std::string& out, const std::string& split) {
    ConfigPool pool = pool_path.empty() ? default_config_pool() : load_config_pool(pool_path);
    if (split == "train")
        pool = split_pools(pool, split_seed).first;
    else if (split == "test")
        pool = split_pools(pool, split_seed).second;
    QueryStrategy strategy = default_strategy().prefix(static_cast<std::size_t>(queries));
    Dataset ds = make_dataset(w, strategy, pool, family_for(family, models), seed);
    save_dataset(out, ds);
    std::cout << json{{"entries", ds.size()},
                      {"labels", ds.label_space.size()},
                      {"queries", strategy.size()},
                      {"path", out}}
                     .dump()
              << "\n";
    return kExitOk;
}

struct TrainArgs {
    std::string mode = "closed";
    std::string dataset;
    std::string eval_dataset;
    std::string out = "llmfp-closed.ckpt";
    std::string embedder = "ngram:256";
    std::string metrics;
    std::string report;
    TrainConfig config;
    int m = 128;
    int blocks = 2;
    int heads = 2;
};

int run_train(const TrainArgs& args) {
    Dataset ds = load_dataset(args.dataset);
    auto provider = make_provider(args.embedder);

    NetConfig net;
    net.m = args.m;
    net.num_blocks = args.blocks;
    net.num_heads = args.heads;
    net.d_emb = provider->dim();

    std::ofstream metrics_file;
    MetricsSink sink = nullptr;
    if (!args.metrics.empty()) {
        metrics_file.open(args.metrics, std::ios::binary);
        if (!metrics_file) throw std::runtime_error("cannot write " + args.metrics);
        sink = [&metrics_file](const json& j) { metrics_file << j.dump() << "\n"; };
    }

    TrainConfig tc = args.config;
    tc.mode = args.mode == "open" ? TrainMode::open_set : TrainMode::closed_set;

    InferenceModelParams params;
    CheckpointMeta meta;
    meta.embedder_name = args.embedder;
    meta.embedder_dim = provider->dim();
    if (tc.mode == TrainMode::closed_set) {
        params = train_closed_set(ds, net, tc, *provider, sink);
        meta.mode = "closed_set";
        meta.labels = ds.label_space;
    } else {
        params = train_open_set(ds, net, tc, *provider, sink);
        meta.mode = "open_set";
    }
    save_checkpoint(args.out, params, meta);

    json summary{{"checkpoint", args.out},
                 {"fingerprint", net_fingerprint(params)},
                 {"param_count", param_count(params)},
                 {"mode", meta.mode}};
    if (!args.report.empty() && tc.mode == TrainMode::closed_set) {
        Dataset eval_ds = args.eval_dataset.empty() ? ds : load_dataset(args.eval_dataset);
        EvalMetrics m = evaluate(params, ds.label_space, eval_ds, *provider,
                                 eval_ds.entries.front().traces.size());
        std::ofstream rep(args.report, std::ios::binary);
        if (!rep) throw std::runtime_error("cannot write " + args.report);
        rep << m.to_json(ds.label_space).dump(1) << "\n";
        summary["eval_accuracy"] = m.accuracy;
    }
    std::cout << summary.dump() << "\n";
    return kExitOk;
}

std::vector<Signature> signatures_from_trace_files(const std::vector<std::string>& files,
                                                   const InferenceModelParams& params,
                                                   EmbeddingProvider& provider) {
    std::vector<Signature> sigs;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open trace file " + f);
        std::ostringstream buf;
        buf << in.rdbuf();
        TraceSet t = deserialize_trace_set(buf.str());
        sigs.push_back(forward(params, embed_trace_set(provider, t)));
    }
    return sigs;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Active fingerprinting for LLM-integrated applications"};
    app.set_version_flag("--version", std::string(llmfp::kToolVersion));
    app.require_subcommand(1);

    std::function<int()> action;

    // scan
    ScanArgs scan_args;
    auto* scan = app.add_subcommand("scan", "Probe a remote endpoint and identify its LLM");
    scan->add_option("--endpoint", scan_args.endpoint, "Target base URL")->required();
    scan->add_option("--path", scan_args.path, "Chat endpoint path");
    scan->add_option("--auth-env", scan_args.auth_env,
                     "Environment variable holding the bearer token");
    scan->add_option("--timeout", scan_args.timeout, "Per-request timeout, seconds");
    scan->add_option("--retries", scan_args.retries, "Retries per query");
    scan->add_option("--parallelism", scan_args.parallelism, "Concurrent queries");
    scan->add_option("--queries", scan_args.queries, "Number of probes from the default strategy")
        ->check(CLI::Range(1, 8));
    scan->add_option("--response-path", scan_args.response_path,
                     "JSON field path of the assistant text");
    scan->add_option("--checkpoint", scan_args.checkpoint, "Inference model checkpoint");
    scan->add_option("--mode", scan_args.mode, "closed or open")
        ->check(CLI::IsMember({"closed", "open"}));
    scan->add_option("--db", scan_args.db_path, "Template database (open mode)");
    scan->add_option("--min-similarity", scan_args.min_similarity,
                     "Optional similarity floor for open-mode verdicts");
    scan->add_option("--output", scan_args.output, "Also write the report to this file");
    scan->callback([&] { action = [&] { return run_scan(scan_args); }; });

    // dataset
    auto* dataset = app.add_subcommand("dataset", "Dataset generation");
    auto* gen = dataset->add_subcommand("generate", "Generate a labeled trace dataset");
    std::size_t gen_w = 25;
    std::uint64_t gen_seed = 0, gen_split_seed = 0;
    std::string gen_pool, gen_out = "dataset.jsonl", gen_family = "default", gen_split = "full";
    int gen_models = 10, gen_queries = 8;
    gen->add_option("--w", gen_w, "Trace sets per model");
    gen->add_option("--seed", gen_seed, "RNG seed");
    gen->add_option("--split-seed", gen_split_seed,
                    "Seed of the train/test pool partition (shared across the two halves)");
    gen->add_option("--pool", gen_pool, "Configuration pool file (default: bundled)");
    gen->add_option("--models", gen_models, "Number of synthetic models")->check(CLI::Range(1, 10));
    gen->add_option("--family", gen_family, "default or roster")
        ->check(CLI::IsMember({"default", "roster"}));
    gen->add_option("--queries", gen_queries, "Probes per trace set")->check(CLI::Range(1, 8));
    gen->add_option("--split", gen_split, "Use the full pool or one half")
        ->check(CLI::IsMember({"full", "train", "test"}));
    gen->add_option("--out", gen_out, "Output JSONL path");
    gen->callback([&] {
        action = [&] {
            return run_dataset(gen_w, gen_seed, gen_split_seed, gen_pool, gen_models,
                               gen_family, gen_queries, gen_out, gen_split);
        };
    });

    // train
    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Train the inference model");
    train->add_option("--mode", train_args.mode, "closed or open")
        ->check(CLI::IsMember({"closed", "open"}));
    train->add_option("--dataset", train_args.dataset, "Training dataset")->required();
    train->add_option("--eval-dataset", train_args.eval_dataset,
                      "Dataset for the final report (defaults to the training set)");
    train->add_option("--out", train_args.out, "Checkpoint output path");
    train->add_option("--embedder", train_args.embedder, "stub:<dim> or ngram:<dim>");
    train->add_option("--epochs", train_args.config.epochs, "Training epochs");
    train->add_option("--batch", train_args.config.batch_size, "Batch size");
    train->add_option("--lr", train_args.config.learning_rate, "Learning rate");
    train->add_option("--seed", train_args.config.seed, "RNG seed");
    train->add_option("--margin", train_args.config.contrastive_margin,
                      "Contrastive margin (open mode)");
    train->add_option("--val-frac", train_args.config.validation_fraction,
                      "Validation fraction");
    train->add_option("--feature-size", train_args.m, "Encoder feature size m");
    train->add_option("--blocks", train_args.blocks, "Transformer blocks");
    train->add_option("--heads", train_args.heads, "Attention heads");
    train->add_option("--metrics", train_args.metrics, "Per-epoch metrics JSONL path");
    train->add_option("--report", train_args.report, "Final evaluation report path");
    train->callback([&] { action = [&] { return run_train(train_args); }; });

    // db
    auto* db_cmd = app.add_subcommand("db", "Template database operations");
    std::string db_path = "llmfp.tdb", db_ckpt = "llmfp-open.ckpt", db_dataset, db_vendor,
                db_model_id;
    std::vector<std::string> db_traces;
    bool db_overwrite = false;
    int db_top = 5;

    auto* db_build = db_cmd->add_subcommand("build", "Build a db from a labeled dataset");
    db_build->add_option("--checkpoint", db_ckpt, "Open-set checkpoint")->required();
    db_build->add_option("--dataset", db_dataset, "Labeled dataset")->required();
    db_build->add_option("--out", db_path, "Database output path");
    db_build->callback([&] {
        action = [&] {
            LoadedCheckpoint ckpt = load_checkpoint(db_ckpt);
            auto provider = make_provider(ckpt.meta.embedder_name);
            Dataset ds = load_dataset(db_dataset);
            std::vector<Signature> sigs = dataset_signatures(ckpt.params, ds, *provider);
            TemplateDB db;
            for (const auto& label : ds.label_space.labels) {
                std::vector<Signature> own;
                for (std::size_t i = 0; i < ds.entries.size(); ++i)
                    if (ds.entries[i].label == label) own.push_back(sigs[i]);
                enroll(db, label, own, ckpt.fingerprint);
            }
            save_template_db(db_path, db);
            std::cout << json{{"db", db_path}, {"entries", db.size()}}.dump() << "\n";
            return kExitOk;
        };
    });

    auto* db_add = db_cmd->add_subcommand("add", "Enroll a model from trace files");
    db_add->add_option("--db", db_path, "Database path")->required();
    db_add->add_option("--checkpoint", db_ckpt, "Open-set checkpoint")->required();
    db_add->add_option("--traces", db_traces, "Trace file(s), one trace set each")->required();
    db_add->add_option("--vendor", db_vendor, "Label vendor");
    db_add->add_option("--model-id", db_model_id, "Label model id")->required();
    db_add->add_flag("--overwrite", db_overwrite, "Replace an existing entry");
    db_add->callback([&] {
        action = [&] {
            LoadedCheckpoint ckpt = load_checkpoint(db_ckpt);
            auto provider = make_provider(ckpt.meta.embedder_name);
            TemplateDB db = load_template_db(db_path);
            auto sigs = signatures_from_trace_files(db_traces, ckpt.params, *provider);
            enroll(db, ModelLabel{db_vendor, db_model_id}, sigs, ckpt.fingerprint, db_overwrite);
            save_template_db(db_path, db);
            std::cout << json{{"db", db_path}, {"entries", db.size()}}.dump() << "\n";
            return kExitOk;
        };
    });

    auto* db_match = db_cmd->add_subcommand("match", "Match a trace file against the db");
    db_match->add_option("--db", db_path, "Database path")->required();
    db_match->add_option("--checkpoint", db_ckpt, "Open-set checkpoint")->required();
    db_match->add_option("--traces", db_traces, "Trace file(s)")->required();
    db_match->add_option("--top", db_top, "Ranking depth");
    db_match->callback([&] {
        action = [&] {
            LoadedCheckpoint ckpt = load_checkpoint(db_ckpt);
            auto provider = make_provider(ckpt.meta.embedder_name);
            TemplateDB db = load_template_db(db_path);
            auto sigs = signatures_from_trace_files(db_traces, ckpt.params, *provider);
            json out = json::array();
            for (const auto& sig : sigs) {
                auto ranking = match(db, sig, ckpt.fingerprint);
                json r = json::array();
                for (std::size_t i = 0;
                     i < std::min<std::size_t>(static_cast<std::size_t>(db_top), ranking.size());
                     ++i)
                    r.push_back(json{{"vendor", ranking[i].label.vendor},
                                     {"model_id", ranking[i].label.model_id},
                                     {"similarity", ranking[i].similarity}});
                out.push_back(r);
            }
            std::cout << out.dump(1) << "\n";
            return kExitOk;
        };
    });

    auto* db_list = db_cmd->add_subcommand("list", "List enrolled templates");
    db_list->add_option("--db", db_path, "Database path")->required();
    db_list->callback([&] {
        action = [&] {
            TemplateDB db = load_template_db(db_path);
            json out = json::array();
            for (const auto& [label, entry] : db.entries)
                out.push_back(json{{"vendor", label.vendor},
                                   {"model_id", label.model_id},
                                   {"sample_count", entry.sample_count},
                                   {"dim", entry.template_vec.size()}});
            std::cout << json{{"net_fingerprint", db.net_fingerprint}, {"entries", out}}.dump(1)
                      << "\n";
            return kExitOk;
        };
    });

    // optimize-queries
    auto* opt = app.add_subcommand("optimize-queries", "Select the best probe subset");
    std::string opt_pool, opt_out = "strategy.json", opt_embedder = "stub:8";
    std::size_t opt_topk = 12, opt_w = 6;
    double opt_train_frac = 0.8;
    std::uint64_t opt_seed = 0;
    int opt_models = 5, opt_epochs = 30;
    opt->add_option("--pool", opt_pool, "Candidate pool file (default: bundled)");
    opt->add_option("--out", opt_out, "Chosen strategy output path");
    opt->add_option("--top-k", opt_topk, "Shortlist size");
    opt->add_option("--train-frac", opt_train_frac, "Training fraction");
    opt->add_option("--w", opt_w, "Trace sets per model for the working dataset");
    opt->add_option("--models", opt_models, "Synthetic models in the working dataset")
        ->check(CLI::Range(2, 10));
    opt->add_option("--epochs", opt_epochs, "Epochs per probe model");
    opt->add_option("--seed", opt_seed, "RNG seed");
    opt->add_option("--embedder", opt_embedder, "stub:<dim> or ngram:<dim>");
    opt->callback([&] {
        action = [&] {
            QueryPool pool = opt_pool.empty() ? default_query_pool() : load_query_pool(opt_pool);
            auto provider = make_provider(opt_embedder);
            auto models = make_default_family(opt_models);
            OptimizeOptions options;
            options.top_k = opt_topk;
            options.train_frac = opt_train_frac;
            options.seed = opt_seed;
            options.net_config.m = 16;
            options.net_config.num_blocks = 1;
            options.net_config.num_heads = 2;
            options.train_config.epochs = opt_epochs;
            options.train_config.seed = opt_seed;
            options.train_config.validation_fraction = 0.0;
            DatasetFactory factory = [&](const QueryStrategy& all) {
                return make_dataset(opt_w, all, default_config_pool(), models, opt_seed);
            };
            OptimizeResult res = optimize_query_strategy(pool, factory, *provider, options);
            QueryPool chosen;
            chosen.candidates = res.strategy.queries;
            save_query_pool(opt_out, chosen);
            json ids = json::array();
            for (const auto& q : res.strategy.queries) ids.push_back(q.id);
            std::cout << json{{"selected", ids},
                              {"best_accuracy", res.best_accuracy},
                              {"subsets_evaluated", res.subsets_evaluated},
                              {"out", opt_out}}
                             .dump()
                      << "\n";
            return kExitOk;
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        return action ? action() : kExitUsage;
    } catch (const AuthError& e) {
        diagnostic(e.what(), kExitOracle);
        return kExitOracle;
    } catch (const FingerprintMismatchError& e) {
        diagnostic(e.what(), kExitFingerprint);
        return kExitFingerprint;
    } catch (const std::exception& e) {
        diagnostic(e.what(), kExitUsage);
        return kExitUsage;
    }
}
