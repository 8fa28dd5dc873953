#include <cmath>
#include <cstdio>
#include <set>
#include <vector>

#include "doctest.h"
#include "marlab/csv.hpp"
#include "marlab/ensemble.hpp"
#include "marlab/replay.hpp"
#include "marlab/rng.hpp"
#include "marlab/stats.hpp"
#include "support/synthetic.hpp"

using namespace marlab;
using namespace marlab::testing;

namespace {

// Force every query to hit exactly unit variance: a hidden unit cannot reach
// the soft bounds when they sit at +-500, and a zeroed output layer makes
// raw = 0, so lv = 0 exactly (the >30 softplus branch is an identity).
void force_unit_variance(GaussianMlp& net) {
    net.zero_output_layer();
    net.max_lv.setConstant(500.0);
    net.min_lv.setConstant(-500.0);
}

Transition delta_transition(const Obs& s, double a, const Obs& delta) {
    Transition t;
    t.s = s;
    t.a = a;
    for (int d = 0; d < kStateDim; ++d) t.s_next[d] = s[d] + delta[d];
    return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// Gradient correctness is the blocking test: everything else in this module
// assumes backprop is right.
// ---------------------------------------------------------------------------
TEST_CASE("analytic gradients match central finite differences") {
    Rng rng(1234);
    for (int trial = 0; trial < 20; ++trial) {
        GaussianMlp net(8, kStateDim, 8, 3, rng);
        const int n = 5;
        Mat X(n, 8), T(n, kStateDim);
        for (int i = 0; i < n; ++i) {
            for (int d = 0; d < 8; ++d) X(i, d) = rng.normal();
            for (int d = 0; d < kStateDim; ++d) T(i, d) = rng.normal();
        }
        const double lambda = (trial % 2 == 0) ? 0.0 : 0.01;

        GaussianMlp::Grads g;
        net.train_loss(X, T, lambda, &g);

        // Flatten analytic grads in the same order as flat_params.
        std::vector<double> flat;
        for (std::size_t l = 0; l < g.dW.size(); ++l) {
            flat.insert(flat.end(), g.dW[l].data(), g.dW[l].data() + g.dW[l].size());
            flat.insert(flat.end(), g.db[l].data(), g.db[l].data() + g.db[l].size());
        }
        flat.insert(flat.end(), g.dmax_lv.data(), g.dmax_lv.data() + g.dmax_lv.size());
        flat.insert(flat.end(), g.dmin_lv.data(), g.dmin_lv.data() + g.dmin_lv.size());

        Vec p = net.flat_params();
        REQUIRE(static_cast<long>(flat.size()) == p.size());
        const double h = 1e-5;
        double worst = 0.0;
        for (long k = 0; k < p.size(); ++k) {
            Vec pp = p;
            pp(k) = p(k) + h;
            net.set_flat_params(pp);
            const double up = net.train_loss(X, T, lambda, nullptr);
            pp(k) = p(k) - h;
            net.set_flat_params(pp);
            const double dn = net.train_loss(X, T, lambda, nullptr);
            const double fd = (up - dn) / (2.0 * h);
            const double rel =
                std::fabs(fd - flat[k]) / std::max(1e-6, std::fabs(fd) + std::fabs(flat[k]));
            worst = std::max(worst, rel);
        }
        net.set_flat_params(p);
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("nll: exact fit at unit variance scores zero, one-hot error scores one") {
    Rng rng(7);
    ModelConfig cfg = small_model_config(1, 8);
    Ensemble ens(cfg, rng);
    force_unit_variance(ens.member(0));

    Obs s{};
    for (int d = 0; d < kStateDim; ++d) s[d] = rng.normal();

    // Perfect prediction (delta = 0 = predicted mean), sigma^2 = 1: zero loss.
    std::vector<Transition> batch{delta_transition(s, 0.3, Obs{})};
    CHECK(ens.gaussian_nll(0, batch) == 0.0);

    // Unit one-hot residual at sigma^2 = 1: loss exactly 1, any hot dim.
    for (int hot = 0; hot < kStateDim; ++hot) {
        Obs delta{};
        delta[hot] = 1.0;
        std::vector<Transition> one{delta_transition(s, -0.7, delta)};
        CHECK(ens.gaussian_nll(0, one) == doctest::Approx(1.0).epsilon(1e-12));
    }

    CHECK_THROWS_AS(ens.gaussian_nll(0, {}), EmptyBatch);
}

TEST_CASE("nll matches a termwise oracle on a random batch") {
    Rng rng(99);
    ModelConfig cfg = small_model_config(2, 16);
    Ensemble ens(cfg, rng);
    ReplayDataset data = make_linear_dataset(200, 0.01, rng);
    Rng trng(1);
    ens.train(data, trng);

    std::vector<Transition> batch;
    for (int i = 0; i < 17; ++i)
        batch.push_back(sample_linear_transition(0, 1000 + i, 0.01, 0.1, rng));

    for (int b = 0; b < 2; ++b) {
        // Oracle: recompute the diagonal-Gaussian NLL term by term from the
        // member's raw normalized-space outputs.
        Mat X(batch.size(), kStateDim + 1), T(batch.size(), kStateDim);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            for (int d = 0; d < kStateDim; ++d) {
                X(i, d) = batch[i].s[d];
                T(i, d) = batch[i].s_next[d] - batch[i].s[d];
            }
            X(i, kStateDim) = batch[i].a;
        }
        const Mat Xn = ens.input_normalizer().normalize(X);
        const Mat Tn = ens.target_normalizer().normalize(T);
        const auto out = ens.member(b).forward(Xn);
        double oracle = 0.0;
        for (int i = 0; i < Xn.rows(); ++i) {
            for (int d = 0; d < kStateDim; ++d) {
                const double var = std::exp(out.lv(i, d));
                const double e = out.mu(i, d) - Tn(i, d);
                oracle += e * e / var + std::log(var);
            }
        }
        CHECK(ens.gaussian_nll(b, batch) == doctest::Approx(oracle).epsilon(1e-10));
    }
}

TEST_CASE("training fits the linear system on held-out data") {
    Rng rng(2024);
    ModelConfig cfg = small_model_config(3, 32);
    Ensemble ens(cfg, rng);
    ReplayDataset data = make_linear_dataset(1000, 0.01, rng);
    Rng trng(55);
    const TrainReport rep = ens.train(data, trng);

    // Loss must not have increased between the first and last epoch.
    for (int m = 0; m < cfg.members; ++m)
        CHECK(rep.last_epoch_nll[m] <=
              rep.first_epoch_nll[m] + 0.01 * std::fabs(rep.first_epoch_nll[m]));

    double se = 0.0;
    int cnt = 0;
    for (int i = 0; i < 300; ++i) {
        const Transition t = sample_linear_transition(0, 5000 + i, 0.01, 0.1, rng);
        for (int m = 0; m < cfg.members; ++m) {
            const GaussianPrediction p = ens.predict(m, t.s, t.a);
            for (int d = 0; d < kStateDim; ++d) {
                const double e = p.mean[d] - t.s_next[d];
                se += e * e;
                ++cnt;
            }
        }
    }
    CHECK(std::sqrt(se / cnt) < 0.05);
}

TEST_CASE("training on one repeated transition converges to its delta") {
    Rng rng(31);
    ModelConfig cfg = small_model_config(1, 16);
    cfg.batch_size = 32;
    Ensemble ens(cfg, rng);

    Transition proto = sample_linear_transition(0, 0, 0.0, 0.1, rng);
    ReplayDataset data(256);
    for (int i = 0; i < 256; ++i) {
        Transition t = proto;
        t.global_step = i;  // distinct keys, identical content
        data.insert(t);
    }
    Rng trng(8);
    ens.train(data, trng);
    const GaussianPrediction p = ens.predict(0, proto.s, proto.a);
    for (int d = 0; d < kStateDim; ++d)
        CHECK(std::fabs(p.mean[d] - proto.s_next[d]) < 1e-2);
}

TEST_CASE("members end up parameter-distinct") {
    Rng rng(5);
    ModelConfig cfg = small_model_config(5, 16);
    Ensemble ens(cfg, rng);
    ReplayDataset data = make_linear_dataset(200, 0.01, rng);
    Rng trng(3);
    ens.train(data, trng);
    std::set<std::uint64_t> hashes;
    for (int m = 0; m < 5; ++m) {
        const Vec p = ens.member(m).flat_params();
        hashes.insert(fnv1a64(std::string(reinterpret_cast<const char*>(p.data()),
                                          p.size() * sizeof(double))));
    }
    CHECK(hashes.size() == 5);
}

TEST_CASE("training requires at least one batch of data") {
    Rng rng(6);
    ModelConfig cfg = small_model_config(1, 8);
    cfg.batch_size = 128;
    Ensemble ens(cfg, rng);
    ReplayDataset data = make_linear_dataset(100, 0.01, rng);
    Rng trng(1);
    CHECK_THROWS_AS(ens.train(data, trng), InsufficientData);
}

TEST_CASE("zeroed output layer predicts zero state change exactly") {
    Rng rng(77);
    ModelConfig cfg = small_model_config(1, 16);
    Ensemble ens(cfg, rng);  // untrained: normalizers are identity
    ens.member(0).zero_output_layer();
    for (int trial = 0; trial < 10; ++trial) {
        Obs s{};
        for (int d = 0; d < kStateDim; ++d) s[d] = rng.uniform(-5.0, 5.0);
        const GaussianPrediction p = ens.predict(0, s, rng.uniform(-1.0, 1.0));
        for (int d = 0; d < kStateDim; ++d) CHECK(p.mean[d] == s[d]);
    }
}

TEST_CASE("identity dynamics are learned to within 1e-2") {
    Rng rng(41);
    ModelConfig cfg = small_model_config(2, 16);
    Ensemble ens(cfg, rng);
    ReplayDataset data = make_identity_dataset(400, rng);
    Rng trng(4);
    ens.train(data, trng);
    for (int trial = 0; trial < 20; ++trial) {
        Obs s{};
        for (int d = 0; d < kStateDim; ++d) s[d] = rng.normal();
        const GaussianPrediction p = ens.predict(trial % 2, s, rng.uniform(-2.0, 2.0));
        for (int d = 0; d < kStateDim; ++d) CHECK(std::fabs(p.mean[d] - s[d]) < 1e-2);
    }
}

TEST_CASE("sampling: near-deterministic after a degenerate fit, clamped to boxes") {
    Rng rng(13);
    ModelConfig cfg = small_model_config(1, 16);
    Ensemble ens(cfg, rng);
    ReplayDataset data = make_identity_dataset(400, rng);
    Rng trng(14);
    ens.train(data, trng);
    // Identity targets have zero spread, so the de-normalized sampling std is
    // ~1e-8 * exp(lv/2): samples coincide with the mean to high precision.
    Rng srng(15);
    for (int trial = 0; trial < 20; ++trial) {
        Obs s{};
        for (int d = 0; d < kStateDim; ++d) s[d] = rng.normal();
        const double a = rng.uniform(-2.0, 2.0);
        const GaussianPrediction p = ens.predict(0, s, a);
        const Obs nxt = ens.sample_next(0, s, a, srng);
        for (int d = 0; d < kStateDim; ++d)
            CHECK(std::fabs(nxt[d] - p.mean[d]) < 1e-6);
    }

    // Untrained model with the traffic clamp box: samples never escape it.
    ModelConfig boxed;  // default box
    boxed.members = 1;
    boxed.hidden_width = 16;
    Rng rng2(16);
    Ensemble wild(boxed, rng2);
    Rng srng2(17);
    for (int trial = 0; trial < 2000; ++trial) {
        Obs s{};
        s[kObsV] = srng2.uniform(0.0, 13.89);
        s[kObsX] = srng2.uniform(-80.0, 80.0);
        s[kObsY] = srng2.uniform(-40.0, 40.0);
        s[kObsVa] = srng2.uniform(0.0, 13.89);
        s[kObsVe] = srng2.uniform(0.0, 13.89);
        s[kObsLa] = srng2.uniform(0.0, 75.0);
        s[kObsLe] = srng2.uniform(0.0, 75.0);
        const Obs nxt = wild.sample_next(0, s, srng2.uniform(0.0, 13.89), srng2);
        CHECK(nxt[kObsV] >= 0.0);
        CHECK(nxt[kObsV] <= 13.89);
        CHECK(nxt[kObsLa] >= 0.0);
        CHECK(nxt[kObsLa] <= 75.0);
        CHECK(nxt[kObsLe] >= 0.0);
        CHECK(nxt[kObsLe] <= 75.0);
        CHECK(nxt[kObsVa] >= 0.0);
        CHECK(nxt[kObsVa] <= 13.89);
    }
}

TEST_CASE("sampling matches the predicted Gaussian in the mean") {
    Rng rng(19);
    ModelConfig cfg = small_model_config(1, 16);
    Ensemble ens(cfg, rng);  // untrained, identity normalizers, unclamped
    Obs s{};
    for (int d = 0; d < kStateDim; ++d) s[d] = rng.normal();
    const double a = 0.5;
    const GaussianPrediction p = ens.predict(0, s, a);

    const int n = 100000;
    Mat S(n, kStateDim);
    Vec A(n);
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < kStateDim; ++d) S(i, d) = s[d];
        A(i) = a;
    }
    Rng srng(20);
    const Mat samples = ens.sample_next_batch(0, S, A, srng);
    for (int d = 0; d < kStateDim; ++d) {
        const double emp = samples.col(d).mean();
        const double tol = 4.0 * std::sqrt(p.var[d]) / std::sqrt(static_cast<double>(n));
        CHECK(std::fabs(emp - p.mean[d]) < tol);
    }
}

TEST_CASE("variance stays inside the learned soft bounds, finite everywhere") {
    Rng rng(23);
    ModelConfig cfg = small_model_config(1, 16);
    Ensemble ens(cfg, rng);  // identity normalizers: bounds act directly
    const double lo = std::exp(-10.0) * 0.99;
    const double hi = std::exp(0.5 + std::log(2.0)) * 1.01;
    const int chunks = 100, per = 10000;  // one million queries
    Rng qrng(24);
    bool all_ok = true;
    for (int c = 0; c < chunks; ++c) {
        Mat S(per, kStateDim);
        Vec A(per);
        for (int i = 0; i < per; ++i) {
            for (int d = 0; d < kStateDim; ++d) S(i, d) = qrng.uniform(-100.0, 100.0);
            A(i) = qrng.uniform(-100.0, 100.0);
        }
        Mat mean, var;
        ens.predict_batch(0, S, A, &mean, &var);
        all_ok = all_ok && mean.allFinite() && var.allFinite() &&
                 (var.array() >= lo).all() && (var.array() <= hi).all();
    }
    CHECK(all_ok);
}

TEST_CASE("bootstrap resamples contain the expected unique fraction") {
    Rng rng(29);
    const int n = 50000;
    const auto idx = bootstrap_indices(n, rng);
    std::set<int> uniq(idx.begin(), idx.end());
    const double frac = static_cast<double>(uniq.size()) / n;
    CHECK(frac == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(0.02 / 0.632));
}

TEST_CASE("ensemble disagreement is larger off-distribution than on it") {
    // Over 20 seeds, mean disagreement (variance across member means) on
    // inputs far outside the training cloud must exceed disagreement on
    // training-like inputs (one-sided sign test).
    std::vector<double> ood_scores, train_scores;
    for (int seed = 0; seed < 20; ++seed) {
        Rng rng(1000 + seed);
        ModelConfig cfg = small_model_config(3, 16);
        Ensemble ens(cfg, rng);
        ReplayDataset data = make_linear_dataset(300, 0.01, rng);
        Rng trng(2000 + seed);
        ens.train(data, trng);

        auto disagreement = [&](double offset) {
            double acc = 0.0;
            Rng qrng(3000 + seed);
            for (int q = 0; q < 30; ++q) {
                Obs s{};
                for (int d = 0; d < kStateDim; ++d) s[d] = offset + qrng.normal();
                const double a = qrng.uniform(-2.0, 2.0);
                for (int d = 0; d < kStateDim; ++d) {
                    double m1 = 0.0, m2 = 0.0;
                    for (int m = 0; m < 3; ++m) {
                        const double mu = ens.predict(m, s, a).mean[d];
                        m1 += mu / 3.0;
                        m2 += mu * mu / 3.0;
                    }
                    acc += m2 - m1 * m1;
                }
            }
            return acc;
        };
        train_scores.push_back(disagreement(0.0));
        ood_scores.push_back(disagreement(10.0));
    }
    CHECK(sign_test_p(ood_scores, train_scores) < 0.05);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    Rng rng(37);
    ModelConfig cfg = small_model_config(3, 16);
    Ensemble ens(cfg, rng);
    ReplayDataset data = make_linear_dataset(200, 0.01, rng);
    Rng trng(38);
    ens.train(data, trng);

    const char* path = "ensemble_ckpt_test.tmp";
    ens.save(path);
    Ensemble back = Ensemble::load(path);

    bool identical = true;
    for (int trial = 0; trial < 20; ++trial) {
        Obs s{};
        for (int d = 0; d < kStateDim; ++d) s[d] = rng.normal();
        const double a = rng.uniform(-2.0, 2.0);
        for (int m = 0; m < 3; ++m) {
            const GaussianPrediction p1 = ens.predict(m, s, a);
            const GaussianPrediction p2 = back.predict(m, s, a);
            for (int d = 0; d < kStateDim; ++d)
                identical = identical && p1.mean[d] == p2.mean[d] && p1.var[d] == p2.var[d];
        }
    }
    CHECK(identical);

    std::FILE* meta = std::fopen((std::string(path) + ".meta.txt").c_str(), "r");
    CHECK(meta != nullptr);
    if (meta) std::fclose(meta);
    std::remove(path);
    std::remove((std::string(path) + ".meta.txt").c_str());
}

TEST_CASE("prediction counter tracks queries and resets") {
    Rng rng(43);
    ModelConfig cfg = small_model_config(2, 8);
    Ensemble ens(cfg, rng);
    CHECK(ens.query_count() == 0);
    Obs s{};
    ens.predict(0, s, 0.0);
    Rng srng(44);
    ens.sample_next(1, s, 0.0, srng);
    CHECK(ens.query_count() == 2);
    Mat S = Mat::Zero(5, kStateDim);
    Vec A = Vec::Zero(5);
    Mat mean, var;
    ens.predict_batch(0, S, A, &mean, &var);
    CHECK(ens.query_count() == 7);
    ens.reset_query_count();
    CHECK(ens.query_count() == 0);
}

TEST_CASE("replay dataset: FIFO eviction and duplicate rejection") {
    ReplayDataset data(3);
    Transition t;
    t.agent_id = 1;
    for (int i = 0; i < 3; ++i) {
        t.global_step = i;
        t.a = i;
        CHECK(data.insert(t));
    }
    CHECK(data.size() == 3);
    t.global_step = 1;  // duplicate key
    CHECK_FALSE(data.insert(t));
    CHECK(data.size() == 3);

    t.global_step = 3;  // evicts step 0
    CHECK(data.insert(t));
    CHECK(data.size() == 3);
    CHECK(data[0].global_step == 1);

    t.global_step = 0;  // step 0 was evicted, so its key is free again
    CHECK(data.insert(t));
    CHECK(data[2].global_step == 0);

    data.clear();
    CHECK(data.size() == 0);
    t.global_step = 1;
    CHECK(data.insert(t));
}
