#include <doctest.h>

#include <cmath>
#include <fstream>
#include <cstring>
#include <filesystem>

#include "llmfp/net.hpp"
#include "llmfp/simenv.hpp"

using namespace llmfp;

namespace {

NetConfig tiny_config() {
    NetConfig cfg;
    cfg.d_emb = 8;
    cfg.m = 8;
    cfg.num_blocks = 2;
    cfg.num_heads = 2;
    return cfg;
}

std::vector<Eigen::VectorXd> random_features(int count, int dim, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Eigen::VectorXd> out;
    for (int i = 0; i < count; ++i) {
        Eigen::VectorXd v(dim);
        for (int j = 0; j < dim; ++j) v[j] = rng.normal();
        out.push_back(v);
    }
    return out;
}

bool bitwise_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

bool grads_bitwise_equal(InferenceModelParams& a, InferenceModelParams& b) {
    auto ra = tensor_refs(a);
    auto rb = tensor_refs(b);
    if (ra.size() != rb.size()) return false;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        if (ra[i].size() != rb[i].size()) return false;
        if (std::memcmp(ra[i].data, rb[i].data,
                        sizeof(double) * static_cast<std::size_t>(ra[i].size())) != 0)
            return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Straight-line reference implementation over plain vectors. Written
// independently of the Eigen code path; single feature only (no ordering
// concerns).

using Row = std::vector<double>;

Row naive_layernorm(const Row& x, const Row& gain, const Row& bias, double eps) {
    const std::size_t m = x.size();
    double mu = 0;
    for (double v : x) mu += v;
    mu /= static_cast<double>(m);
    double var = 0;
    for (double v : x) var += (v - mu) * (v - mu);
    var /= static_cast<double>(m);
    Row y(m);
    for (std::size_t i = 0; i < m; ++i)
        y[i] = (x[i] - mu) / std::sqrt(var + eps) * gain[i] + bias[i];
    return y;
}

Row naive_affine(const Eigen::MatrixXd& W, const Eigen::VectorXd& b, const Row& x) {
    Row y(static_cast<std::size_t>(W.rows()), 0.0);
    for (long r = 0; r < W.rows(); ++r) {
        double acc = b[r];
        for (long c = 0; c < W.cols(); ++c) acc += W(r, c) * x[static_cast<std::size_t>(c)];
        y[static_cast<std::size_t>(r)] = acc;
    }
    return y;
}

Row to_row(const Eigen::VectorXd& v) {
    return Row(v.data(), v.data() + v.size());
}

// forward for one raw pair embedding: sequence [token, projected]
Eigen::VectorXd naive_forward(const InferenceModelParams& p, const Eigen::VectorXd& emb) {
    const NetConfig& cfg = p.config;
    const std::size_t m = static_cast<std::size_t>(cfg.m);
    const std::size_t heads = static_cast<std::size_t>(cfg.num_heads);
    const std::size_t dh = m / heads;

    std::vector<Row> x{to_row(p.c_token), naive_affine(p.Wp, p.bp, to_row(emb))};
    for (const auto& blk : p.blocks) {
        std::vector<Row> h(2);
        for (int t = 0; t < 2; ++t)
            h[static_cast<std::size_t>(t)] = naive_layernorm(x[static_cast<std::size_t>(t)],
                                                             to_row(blk.ln1_gain),
                                                             to_row(blk.ln1_bias),
                                                             cfg.layernorm_epsilon);
        std::vector<Row> q(2), k(2), v(2);
        for (int t = 0; t < 2; ++t) {
            q[static_cast<std::size_t>(t)] = naive_affine(blk.Wq, blk.bq, h[static_cast<std::size_t>(t)]);
            k[static_cast<std::size_t>(t)] = naive_affine(blk.Wk, blk.bk, h[static_cast<std::size_t>(t)]);
            v[static_cast<std::size_t>(t)] = naive_affine(blk.Wv, blk.bv, h[static_cast<std::size_t>(t)]);
        }
        std::vector<Row> z(2, Row(m, 0.0));
        for (std::size_t head = 0; head < heads; ++head) {
            const std::size_t off = head * dh;
            for (std::size_t ti = 0; ti < 2; ++ti) {
                double scores[2];
                for (std::size_t tj = 0; tj < 2; ++tj) {
                    double s = 0;
                    for (std::size_t d = 0; d < dh; ++d)
                        s += q[ti][off + d] * k[tj][off + d];
                    scores[tj] = s / std::sqrt(static_cast<double>(dh));
                }
                const double mx = std::max(scores[0], scores[1]);
                double e0 = std::exp(scores[0] - mx), e1 = std::exp(scores[1] - mx);
                const double denom = e0 + e1;
                for (std::size_t d = 0; d < dh; ++d)
                    z[ti][off + d] = (e0 * v[0][off + d] + e1 * v[1][off + d]) / denom;
            }
        }
        for (int t = 0; t < 2; ++t) {
            Row attn = naive_affine(blk.Wo, blk.bo, z[static_cast<std::size_t>(t)]);
            for (std::size_t i = 0; i < m; ++i) x[static_cast<std::size_t>(t)][i] += attn[i];
        }
        for (int t = 0; t < 2; ++t) {
            Row h2 = naive_layernorm(x[static_cast<std::size_t>(t)], to_row(blk.ln2_gain),
                                     to_row(blk.ln2_bias), cfg.layernorm_epsilon);
            Row u = naive_affine(blk.W1, blk.b1, h2);
            for (auto& ui : u) ui = 0.5 * ui * (1.0 + std::erf(ui / std::sqrt(2.0)));
            Row out = naive_affine(blk.W2, blk.b2, u);
            for (std::size_t i = 0; i < m; ++i) x[static_cast<std::size_t>(t)][i] += out[i];
        }
    }
    return Eigen::Map<Eigen::VectorXd>(x[0].data(), static_cast<long>(m));
}

// ---------------------------------------------------------------------------
// Loss evaluators used by the finite-difference oracle. They mirror the
// documented loss definitions and share nothing with the backward path.

double closed_batch_loss(const InferenceModelParams& p, const std::vector<ClosedSetExample>& batch) {
    double loss = 0;
    for (const auto& ex : batch) {
        Eigen::VectorXd probs = classify(p, forward(p, ex.pair_embeddings));
        loss += -std::log(probs[ex.class_index]) / static_cast<double>(batch.size());
    }
    return loss;
}

double contrastive_batch_loss(const InferenceModelParams& p, const std::vector<SiameseExample>& batch,
                              double margin) {
    double loss = 0;
    for (const auto& ex : batch) {
        Eigen::VectorXd va = forward(p, ex.a);
        Eigen::VectorXd vb = forward(p, ex.b);
        const double na = std::max(va.norm(), 1e-12);
        const double nb = std::max(vb.norm(), 1e-12);
        const double d = 1.0 - va.dot(vb) / (na * nb + 1e-12);
        const double item = ex.is_positive ? d * d
                                           : std::pow(std::max(0.0, margin - d), 2.0);
        loss += item / static_cast<double>(batch.size());
    }
    return loss;
}

template <typename LossFn>
double max_grad_rel_error(InferenceModelParams& params, InferenceModelParams& analytic,
                          LossFn&& loss) {
    const double h = 1e-4;
    double worst = 0;
    auto pr = tensor_refs(params);
    auto gr = tensor_refs(analytic);
    for (std::size_t t = 0; t < pr.size(); ++t) {
        for (long i = 0; i < pr[t].size(); ++i) {
            const double orig = pr[t].data[i];
            pr[t].data[i] = orig + h;
            const double lp = loss();
            pr[t].data[i] = orig - h;
            const double lm = loss();
            pr[t].data[i] = orig;
            const double numeric = (lp - lm) / (2 * h);
            const double ana = gr[t].data[i];
            const double rel = std::abs(numeric - ana) /
                               std::max({std::abs(numeric), std::abs(ana), 1e-6});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

InferenceModelParams zero_grads(const InferenceModelParams& p) {
    InferenceModelParams g = p;
    for (auto& t : tensor_refs(g)) std::fill(t.data, t.data + t.size(), 0.0);
    return g;
}

}  // namespace

TEST_CASE("zero params propagate to a zero signature") {
    NetConfig cfg = tiny_config();
    InferenceModelParams p = make_zero_params<double>(cfg);
    for (int k : {1, 2, 5}) {
        Eigen::VectorXd v = forward(p, random_features(k, 16, 99));
        CHECK(v.norm() == 0.0);
    }
}

TEST_CASE("forward is bit-identical under input permutation") {
    InferenceModelParams p = make_random_params<double>(tiny_config(), 5);
    auto feats = random_features(3, 16, 123);
    Eigen::VectorXd base = forward(p, feats);
    std::vector<std::size_t> perm{0, 1, 2};
    do {
        std::vector<Eigen::VectorXd> shuffled;
        for (std::size_t i : perm) shuffled.push_back(feats[i]);
        CHECK(bitwise_equal(forward(p, shuffled), base));
    } while (std::next_permutation(perm.begin(), perm.end()));
}

TEST_CASE("forward matches the straight-line reference") {
    NetConfig cfg = tiny_config();
    InferenceModelParams p = make_random_params<double>(cfg, 0);
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(16);
    Eigen::VectorXd got = forward(p, {ones});
    Eigen::VectorXd expected = naive_forward(p, ones);
    REQUIRE(got.size() == expected.size());
    for (long i = 0; i < got.size(); ++i)
        CHECK(got[i] == doctest::Approx(expected[i]).epsilon(1e-12));
    // frozen reference value for seed 0, single all-ones feature
    CHECK(got[0] == doctest::Approx(0.22113583547862417).epsilon(1e-9));
}

TEST_CASE("forward rejects wrong input dims with both sizes named") {
    InferenceModelParams p = make_random_params<double>(tiny_config(), 1);
    try {
        forward(p, random_features(1, 5, 3));
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("16") != std::string::npos);
        CHECK(msg.find("5") != std::string::npos);
    }
    CHECK_THROWS_AS(forward(p, {}), std::invalid_argument);
}

TEST_CASE("classify: zero head gives the uniform distribution") {
    for (int n : {2, 4, 40}) {
        InferenceModelParams p = make_zero_params<double>(tiny_config(), n);
        Eigen::VectorXd probs = classify(p, Eigen::VectorXd::Ones(8));
        REQUIRE(probs.size() == n);
        for (long i = 0; i < n; ++i) CHECK(probs[i] == doctest::Approx(1.0 / n).epsilon(1e-12));
        CHECK(std::abs(probs.sum() - 1.0) < 1e-6);
    }
}

TEST_CASE("classify closed form for logits (1, 0)") {
    InferenceModelParams p = make_zero_params<double>(tiny_config(), 2);
    p.head->Wc(0, 0) = 1.0;  // logits = (sig[0], 0)
    Eigen::VectorXd sig = Eigen::VectorXd::Zero(8);
    sig[0] = 1.0;
    Eigen::VectorXd probs = classify(p, sig);
    const double e = std::exp(1.0);
    CHECK(probs[0] == doctest::Approx(e / (e + 1)).epsilon(1e-14));
    CHECK(probs[1] == doctest::Approx(1 / (e + 1)).epsilon(1e-14));
}

TEST_CASE("classify output is a distribution; argmax shift-invariant") {
    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        InferenceModelParams p = make_random_params<double>(tiny_config(), 7, 1000 + static_cast<std::uint64_t>(trial));
        Eigen::VectorXd sig(8);
        for (int i = 0; i < 8; ++i) sig[i] = rng.normal();
        Eigen::VectorXd probs = classify(p, sig);
        CHECK(probs.minCoeff() > 0.0);
        CHECK(std::abs(probs.sum() - 1.0) < 1e-6);

        int argmax_before = 0;
        probs.maxCoeff(&argmax_before);
        InferenceModelParams shifted = p;
        shifted.head->bc.array() += 3.7;  // constant shift of every logit
        Eigen::VectorXd probs2 = classify(shifted, sig);
        int argmax_after = 0;
        probs2.maxCoeff(&argmax_after);
        CHECK(argmax_before == argmax_after);
    }
}

TEST_CASE("classify and predict require the mode to match") {
    InferenceModelParams open = make_random_params<double>(tiny_config(), 3, 0);
    CHECK_THROWS_AS(classify(open, Eigen::VectorXd::Ones(8)), ModeError);
}

TEST_CASE("predict breaks ties toward the lowest class index") {
    NetConfig cfg = tiny_config();
    cfg.d_emb = 4;
    const auto& roster = model_roster();
    LabelSpace labels;
    labels.labels = roster;  // 40 classes
    InferenceModelParams p = make_zero_params<double>(cfg, 40);
    StubHashProvider provider(4);
    TraceSet t;
    t.pairs.push_back({{"q", "ping", QueryFamily::malformed, false}, "pong", false});
    Prediction pred = predict(p, labels, t, provider);
    CHECK(pred.label == roster[0]);
    CHECK(pred.confidence == doctest::Approx(1.0 / 40).epsilon(1e-12));
    CHECK(pred.distribution.size() == 40);
    CHECK(std::abs(pred.distribution.sum() - 1.0) < 1e-6);
}

TEST_CASE("variable trace counts need no retraining") {
    NetConfig cfg = tiny_config();
    cfg.d_emb = 4;
    InferenceModelParams p = make_random_params<double>(cfg, 9, 3);
    StubHashProvider provider(4);
    LabelSpace labels;
    labels.labels = {{"v", "a"}, {"v", "b"}, {"v", "c"}};
    for (std::size_t k : {std::size_t{1}, std::size_t{8}}) {
        TraceSet t;
        for (std::size_t i = 0; i < k; ++i)
            t.pairs.push_back({{"q" + std::to_string(i), "text", QueryFamily::malformed, false},
                               "r" + std::to_string(i), false});
        CHECK_NOTHROW(predict(p, labels, t, provider));
    }
}

TEST_CASE("analytic gradients match finite differences (cross-entropy)") {
    InferenceModelParams p = make_random_params<double>(tiny_config(), 11, 3);
    std::vector<ClosedSetExample> batch{{random_features(1, 16, 1), 0},
                                        {random_features(2, 16, 2), 1},
                                        {random_features(3, 16, 3), 2}};
    InferenceModelParams grads = zero_grads(p);
    const double loss = closed_set_loss_backward(p, batch, grads);
    CHECK(loss == doctest::Approx(closed_batch_loss(p, batch)).epsilon(1e-12));
    const double worst =
        max_grad_rel_error(p, grads, [&] { return closed_batch_loss(p, batch); });
    CHECK(worst < 1e-4);
}

TEST_CASE("analytic gradients match finite differences (contrastive)") {
    InferenceModelParams p = make_random_params<double>(tiny_config(), 13);
    std::vector<SiameseExample> batch{
        {random_features(2, 16, 4), random_features(2, 16, 5), true},
        {random_features(1, 16, 6), random_features(3, 16, 7), false},
    };
    const double margin = 0.5;
    InferenceModelParams grads = zero_grads(p);
    const double loss = contrastive_loss_backward(p, batch, margin, grads);
    CHECK(loss == doctest::Approx(contrastive_batch_loss(p, batch, margin)).epsilon(1e-12));
    const double worst = max_grad_rel_error(
        p, grads, [&] { return contrastive_batch_loss(p, batch, margin); });
    CHECK(worst < 1e-4);
}

TEST_CASE("gradients are bit-identical under permuted batches") {
    InferenceModelParams p = make_random_params<double>(tiny_config(), 17, 2);
    auto feats = random_features(4, 16, 8);
    std::vector<ClosedSetExample> batch{{feats, 1}};
    std::vector<Eigen::VectorXd> reversed(feats.rbegin(), feats.rend());
    std::vector<ClosedSetExample> batch_rev{{reversed, 1}};

    InferenceModelParams g1 = zero_grads(p);
    InferenceModelParams g2 = zero_grads(p);
    const double l1 = closed_set_loss_backward(p, batch, g1);
    const double l2 = closed_set_loss_backward(p, batch_rev, g2);
    CHECK(l1 == l2);
    CHECK(grads_bitwise_equal(g1, g2));
}

TEST_CASE("identical positive pair at zero distance contributes zero gradient") {
    InferenceModelParams p = make_random_params<double>(tiny_config(), 19);
    auto feats = random_features(2, 16, 9);
    std::vector<SiameseExample> batch{{feats, feats, true}};
    InferenceModelParams grads = zero_grads(p);
    const double loss = contrastive_loss_backward(p, batch, 0.5, grads);
    CHECK(loss < 1e-20);
    for (auto& t : tensor_refs(grads))
        for (long i = 0; i < t.size(); ++i) CHECK(std::abs(t.data[i]) < 1e-10);
}

TEST_CASE("checkpoints round-trip exactly") {
    const auto path = (std::filesystem::temp_directory_path() / "llmfp-ckpt-test.json").string();
    NetConfig cfg = tiny_config();
    InferenceModelParams p = make_random_params<double>(cfg, 21, 4);
    CheckpointMeta meta;
    meta.mode = "closed_set";
    LabelSpace ls;
    ls.labels = {{"v", "a"}, {"v", "b"}, {"v", "c"}, {"v", "d"}};
    meta.labels = ls;
    meta.embedder_name = "stub:8";
    meta.embedder_dim = 8;
    save_checkpoint(path, p, meta);

    LoadedCheckpoint loaded = load_checkpoint(path);
    CHECK(loaded.meta.mode == "closed_set");
    CHECK(loaded.meta.labels == ls);
    CHECK(loaded.meta.embedder_name == "stub:8");
    CHECK(grads_bitwise_equal(loaded.params, p));
    CHECK(loaded.fingerprint == net_fingerprint(p));

    // saving the loaded params reproduces the file byte for byte
    const auto path2 = path + ".again";
    save_checkpoint(path2, loaded.params, loaded.meta);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), {});
    std::string s2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(s1 == s2);

    // corruption is detected
    std::string tampered = s1;
    const auto pos = tampered.find("\"fingerprint\": \"");
    tampered[pos + 17] = tampered[pos + 17] == 'a' ? 'b' : 'a';
    const auto path3 = path + ".bad";
    {
        std::ofstream out(path3, std::ios::binary);
        out << tampered;
    }
    CHECK_THROWS(load_checkpoint(path3));
    CHECK_THROWS(load_checkpoint("/nonexistent/never.ckpt"));
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
    std::filesystem::remove(path3);
}

TEST_CASE("parameter count includes every tensor") {
    NetConfig cfg = tiny_config();
    InferenceModelParams p = make_zero_params<double>(cfg, 3);
    // projection 8x16+8, token 8, per block 4*(64+8)+(32*8+32)+(8*32+8)+4*8, head 3*8+3
    const long expected = (8 * 16 + 8) + 8 + 2 * (4 * (64 + 8) + (32 * 8 + 32) + (8 * 32 + 8) + 32) +
                          (3 * 8 + 3);
    CHECK(param_count(p) == expected);
}
