#include "marlab/ensemble.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace marlab {

namespace {

constexpr int kInDim = kStateDim + 1;

double softplus(double u) { return u > 30.0 ? u : std::log1p(std::exp(u)); }

double sigmoid(double u) {
    if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
    const double e = std::exp(u);
    return e / (1.0 + e);
}

Mat swish(const Mat& h) {
    return h.unaryExpr([](double x) { return x * sigmoid(x); });
}

Mat swish_grad(const Mat& h) {
    return h.unaryExpr([](double x) {
        const double s = sigmoid(x);
        return s * (1.0 + x * (1.0 - s));
    });
}

}  // namespace

GaussianMlp::GaussianMlp(int in_dim, int out_dim, int width, int layers, Rng& rng) {
    W.reserve(layers + 1);
    b.reserve(layers + 1);
    int prev = in_dim;
    for (int l = 0; l < layers; ++l) {
        W.emplace_back(width, prev);
        b.emplace_back(width);
        prev = width;
    }
    W.emplace_back(2 * out_dim, prev);
    b.emplace_back(2 * out_dim);
    max_lv = Vec::Zero(out_dim);
    min_lv = Vec::Zero(out_dim);
    reinit(rng);
}

void GaussianMlp::reinit(Rng& rng) {
    for (std::size_t l = 0; l < W.size(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(W[l].cols()));
        for (int i = 0; i < W[l].rows(); ++i)
            for (int j = 0; j < W[l].cols(); ++j) W[l](i, j) = rng.uniform(-bound, bound);
        b[l].setZero();
    }
    max_lv.setConstant(0.5);
    min_lv.setConstant(-10.0);
    reset_adam();
}

void GaussianMlp::zero_output_layer() {
    W.back().setZero();
    b.back().setZero();
}

void GaussianMlp::reset_adam() {
    mW_.clear();
    vW_.clear();
    mb_.clear();
    vb_.clear();
    for (std::size_t l = 0; l < W.size(); ++l) {
        mW_.push_back(Mat::Zero(W[l].rows(), W[l].cols()));
        vW_.push_back(Mat::Zero(W[l].rows(), W[l].cols()));
        mb_.push_back(Vec::Zero(b[l].size()));
        vb_.push_back(Vec::Zero(b[l].size()));
    }
    m_max_ = Vec::Zero(max_lv.size());
    v_max_ = Vec::Zero(max_lv.size());
    m_min_ = Vec::Zero(min_lv.size());
    v_min_ = Vec::Zero(min_lv.size());
    adam_t_ = 0;
}

GaussianMlp::Output GaussianMlp::forward(const Mat& X) const {
    const int out_dim = static_cast<int>(max_lv.size());
    Mat Z = X;
    const int layers = static_cast<int>(W.size()) - 1;
    for (int l = 0; l < layers; ++l)
        Z = swish(((Z * W[l].transpose()).rowwise() + b[l].transpose()).eval());
    Mat O = (Z * W.back().transpose()).rowwise() + b.back().transpose();

    Output out;
    out.mu = O.leftCols(out_dim);
    Mat raw = O.rightCols(out_dim);
    // Soft-clamp the raw log variance between the learned bounds.
    Mat lv1 = raw;
    for (int i = 0; i < lv1.rows(); ++i)
        for (int d = 0; d < out_dim; ++d)
            lv1(i, d) = max_lv(d) - softplus(max_lv(d) - raw(i, d));
    out.lv = lv1;
    for (int i = 0; i < lv1.rows(); ++i)
        for (int d = 0; d < out_dim; ++d)
            out.lv(i, d) = min_lv(d) + softplus(lv1(i, d) - min_lv(d));
    return out;
}

double GaussianMlp::nll_sum(const Mat& X, const Mat& T) const {
    const Output o = forward(X);
    const Mat err = o.mu - T;
    return (err.array().square() * (-o.lv).array().exp()).sum() + o.lv.sum();
}

double GaussianMlp::train_loss(const Mat& X, const Mat& T, double bound_weight,
                               Grads* grads) const {
    const int n = static_cast<int>(X.rows());
    const int out_dim = static_cast<int>(max_lv.size());
    const int layers = static_cast<int>(W.size()) - 1;

    // Forward pass, caching layer inputs and pre-activations for the backward
    // sweep.
    std::vector<Mat> Zs(layers + 1), Hs(layers);
    Zs[0] = X;
    for (int l = 0; l < layers; ++l) {
        Hs[l] = ((Zs[l] * W[l].transpose()).rowwise() + b[l].transpose()).eval();
        Zs[l + 1] = swish(Hs[l]);
    }
    Mat O = (Zs[layers] * W.back().transpose()).rowwise() + b.back().transpose();
    Mat mu = O.leftCols(out_dim);
    Mat raw = O.rightCols(out_dim);

    Mat s1(n, out_dim), s2(n, out_dim), lv(n, out_dim);
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < out_dim; ++d) {
            const double u1 = max_lv(d) - raw(i, d);
            s1(i, d) = sigmoid(u1);
            const double lv1 = max_lv(d) - softplus(u1);
            const double u2 = lv1 - min_lv(d);
            s2(i, d) = sigmoid(u2);
            lv(i, d) = min_lv(d) + softplus(u2);
        }
    }

    const Mat err = mu - T;
    const Mat inv_var = (-lv).array().exp().matrix();
    const double nll =
        ((err.array().square() * inv_var.array()).sum() + lv.sum()) / n;
    const double loss = nll + bound_weight * (max_lv.sum() - min_lv.sum());
    if (!grads) return loss;

    // Backward pass.
    Mat d_mu = (2.0 / n) * err.cwiseProduct(inv_var);
    Mat d_lv =
        (Mat::Ones(n, out_dim) - err.array().square().matrix().cwiseProduct(inv_var)) /
        n;
    Mat d_lv1 = d_lv.cwiseProduct(s2);
    Mat d_raw = d_lv1.cwiseProduct(s1);
    grads->dmax_lv =
        d_lv1.cwiseProduct(Mat::Ones(n, out_dim) - s1).colwise().sum().transpose();
    grads->dmax_lv.array() += bound_weight;
    grads->dmin_lv =
        d_lv.cwiseProduct(Mat::Ones(n, out_dim) - s2).colwise().sum().transpose();
    grads->dmin_lv.array() -= bound_weight;

    Mat dO(n, 2 * out_dim);
    dO << d_mu, d_raw;

    grads->dW.assign(W.size(), Mat());
    grads->db.assign(b.size(), Vec());
    grads->dW.back() = dO.transpose() * Zs[layers];
    grads->db.back() = dO.colwise().sum().transpose();
    Mat dZ = dO * W.back();
    for (int l = layers - 1; l >= 0; --l) {
        Mat dH = dZ.cwiseProduct(swish_grad(Hs[l]));
        grads->dW[l] = dH.transpose() * Zs[l];
        grads->db[l] = dH.colwise().sum().transpose();
        if (l > 0) dZ = dH * W[l];
    }
    return loss;
}

namespace {

void adam_update(Mat& theta, Mat& m, Mat& v, const Mat& g, double lr, double bc1,
                 double bc2) {
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g.cwiseProduct(g);
    theta.array() -=
        lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + 1e-8);
}

void adam_update(Vec& theta, Vec& m, Vec& v, const Vec& g, double lr, double bc1,
                 double bc2) {
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g.cwiseProduct(g);
    theta.array() -=
        lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + 1e-8);
}

}  // namespace

void GaussianMlp::adam_step(const Grads& g, double lr) {
    ++adam_t_;
    const double bc1 = 1.0 - std::pow(0.9, static_cast<double>(adam_t_));
    const double bc2 = 1.0 - std::pow(0.999, static_cast<double>(adam_t_));
    for (std::size_t l = 0; l < W.size(); ++l) {
        adam_update(W[l], mW_[l], vW_[l], g.dW[l], lr, bc1, bc2);
        adam_update(b[l], mb_[l], vb_[l], g.db[l], lr, bc1, bc2);
    }
    adam_update(max_lv, m_max_, v_max_, g.dmax_lv, lr, bc1, bc2);
    adam_update(min_lv, m_min_, v_min_, g.dmin_lv, lr, bc1, bc2);
}

Vec GaussianMlp::flat_params() const {
    long total = 0;
    for (std::size_t l = 0; l < W.size(); ++l) total += W[l].size() + b[l].size();
    total += max_lv.size() + min_lv.size();
    Vec p(total);
    long at = 0;
    for (std::size_t l = 0; l < W.size(); ++l) {
        std::memcpy(p.data() + at, W[l].data(), W[l].size() * sizeof(double));
        at += W[l].size();
        std::memcpy(p.data() + at, b[l].data(), b[l].size() * sizeof(double));
        at += b[l].size();
    }
    std::memcpy(p.data() + at, max_lv.data(), max_lv.size() * sizeof(double));
    at += max_lv.size();
    std::memcpy(p.data() + at, min_lv.data(), min_lv.size() * sizeof(double));
    return p;
}

void GaussianMlp::set_flat_params(const Vec& p) {
    long at = 0;
    for (std::size_t l = 0; l < W.size(); ++l) {
        std::memcpy(W[l].data(), p.data() + at, W[l].size() * sizeof(double));
        at += W[l].size();
        std::memcpy(b[l].data(), p.data() + at, b[l].size() * sizeof(double));
        at += b[l].size();
    }
    std::memcpy(max_lv.data(), p.data() + at, max_lv.size() * sizeof(double));
    at += max_lv.size();
    std::memcpy(min_lv.data(), p.data() + at, min_lv.size() * sizeof(double));
}

std::vector<int> bootstrap_indices(int n, Rng& rng) {
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = rng.uniform_int(n);
    return idx;
}

Ensemble::Ensemble(ModelConfig cfg, Rng& rng)
    : cfg_(cfg), in_norm_(kInDim), tgt_norm_(kStateDim) {
    if (cfg_.members < 1 || cfg_.hidden_width < 1 || cfg_.hidden_layers < 1 ||
        cfg_.epochs < 1 || cfg_.batch_size < 1)
        throw std::invalid_argument("model config: counts must be positive");
    nets_.reserve(cfg_.members);
    for (int b = 0; b < cfg_.members; ++b)
        nets_.emplace_back(kInDim, kStateDim, cfg_.hidden_width, cfg_.hidden_layers, rng);
}

Mat Ensemble::inputs_of(const std::vector<Transition>& batch) const {
    Mat X(batch.size(), kInDim);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        for (int d = 0; d < kStateDim; ++d) X(i, d) = batch[i].s[d];
        X(i, kStateDim) = batch[i].a;
    }
    return X;
}

Mat Ensemble::targets_of(const std::vector<Transition>& batch) const {
    Mat T(batch.size(), kStateDim);
    for (std::size_t i = 0; i < batch.size(); ++i)
        for (int d = 0; d < kStateDim; ++d) T(i, d) = batch[i].s_next[d] - batch[i].s[d];
    return T;
}

TrainReport Ensemble::train(const ReplayDataset& data, Rng& rng) {
    const int n = static_cast<int>(data.size());
    if (n < cfg_.batch_size)
        throw InsufficientData("need at least one batch (" +
                               std::to_string(cfg_.batch_size) + "), have " +
                               std::to_string(n));

    std::vector<Transition> all(n);
    for (int i = 0; i < n; ++i) all[i] = data[i];
    const Mat X = inputs_of(all);
    const Mat T = targets_of(all);
    in_norm_.fit(X);
    tgt_norm_.fit(T);
    const Mat Xn = in_norm_.normalize(X);
    const Mat Tn = tgt_norm_.normalize(T);

    TrainReport report;
    report.first_epoch_nll.resize(cfg_.members);
    report.last_epoch_nll.resize(cfg_.members);
    for (int m = 0; m < cfg_.members; ++m) {
        Rng mrng(rng.next_u64());
        if (!cfg_.warm_start || !trained_once_) nets_[m].reinit(mrng);

        const std::vector<int> boot = bootstrap_indices(n, mrng);
        Mat Xb(n, kInDim), Tb(n, kStateDim);
        for (int i = 0; i < n; ++i) {
            Xb.row(i) = Xn.row(boot[i]);
            Tb.row(i) = Tn.row(boot[i]);
        }

        std::vector<int> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        for (int e = 0; e < cfg_.epochs; ++e) {
            for (int i = n - 1; i > 0; --i)
                std::swap(perm[i], perm[mrng.uniform_int(i + 1)]);
            for (int at = 0; at < n; at += cfg_.batch_size) {
                const int len = std::min(cfg_.batch_size, n - at);
                Mat Xc(len, kInDim), Tc(len, kStateDim);
                for (int i = 0; i < len; ++i) {
                    Xc.row(i) = Xb.row(perm[at + i]);
                    Tc.row(i) = Tb.row(perm[at + i]);
                }
                GaussianMlp::Grads g;
                nets_[m].train_loss(Xc, Tc, cfg_.bound_weight, &g);
                nets_[m].adam_step(g, cfg_.lr);
            }
            if (e == 0) report.first_epoch_nll[m] = nets_[m].nll_sum(Xb, Tb) / n;
        }
        report.last_epoch_nll[m] = nets_[m].nll_sum(Xb, Tb) / n;
    }
    trained_once_ = true;
    return report;
}

void Ensemble::predict_batch(int b, const Mat& S, const Vec& A, Mat* mean,
                             Mat* var) const {
    const int n = static_cast<int>(S.rows());
    Mat X(n, kInDim);
    X.leftCols(kStateDim) = S;
    X.col(kStateDim) = A;
    const GaussianMlp::Output o = nets_.at(b).forward(in_norm_.normalize(X));
    // De-normalize: delta = mu_n * std + mean; next = s + delta.
    *mean = S + ((o.mu.array().rowwise() * tgt_norm_.std.transpose().array()).rowwise() +
                 tgt_norm_.mean.transpose().array())
                    .matrix();
    *var = (o.lv.array().exp().rowwise() *
            tgt_norm_.std.transpose().array().square())
               .matrix();
    query_count_ += n;
}

GaussianPrediction Ensemble::predict(int b, const Obs& s, double a) const {
    Mat S(1, kStateDim);
    for (int d = 0; d < kStateDim; ++d) S(0, d) = s[d];
    Vec A(1);
    A(0) = a;
    Mat mean, var;
    predict_batch(b, S, A, &mean, &var);
    GaussianPrediction p;
    for (int d = 0; d < kStateDim; ++d) {
        p.mean[d] = mean(0, d);
        p.var[d] = var(0, d);
    }
    return p;
}

Mat Ensemble::sample_next_batch(int b, const Mat& S, const Vec& A, Rng& rng) const {
    Mat mean, var;
    predict_batch(b, S, A, &mean, &var);
    Mat out(mean.rows(), mean.cols());
    for (int i = 0; i < mean.rows(); ++i) {
        for (int d = 0; d < kStateDim; ++d) {
            double x = mean(i, d) + std::sqrt(var(i, d)) * rng.normal();
            x = std::min(std::max(x, cfg_.clamp_lo[d]), cfg_.clamp_hi[d]);
            out(i, d) = x;
        }
    }
    return out;
}

Obs Ensemble::sample_next(int b, const Obs& s, double a, Rng& rng) const {
    Mat S(1, kStateDim);
    for (int d = 0; d < kStateDim; ++d) S(0, d) = s[d];
    Vec A(1);
    A(0) = a;
    const Mat out = sample_next_batch(b, S, A, rng);
    Obs next;
    for (int d = 0; d < kStateDim; ++d) next[d] = out(0, d);
    return next;
}

double Ensemble::gaussian_nll(int b, const std::vector<Transition>& batch) const {
    if (batch.empty()) throw EmptyBatch("gaussian_nll on empty batch");
    return nets_.at(b).nll_sum(in_norm_.normalize(inputs_of(batch)),
                               tgt_norm_.normalize(targets_of(batch)));
}

namespace {

void write_vec(std::ofstream& f, const Vec& v) {
    const std::int64_t n = v.size();
    f.write(reinterpret_cast<const char*>(&n), sizeof(n));
    f.write(reinterpret_cast<const char*>(v.data()), n * sizeof(double));
}

Vec read_vec(std::ifstream& f) {
    std::int64_t n = 0;
    f.read(reinterpret_cast<char*>(&n), sizeof(n));
    if (!f || n < 0 || n > (1LL << 32))
        throw std::runtime_error("corrupt checkpoint vector");
    Vec v(n);
    f.read(reinterpret_cast<char*>(v.data()), n * sizeof(double));
    return v;
}

}  // namespace

void Ensemble::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
    const char magic[4] = {'M', 'L', 'B', '1'};
    f.write(magic, 4);
    const std::int32_t fields[6] = {1 /*version*/, cfg_.members, cfg_.hidden_layers,
                                    cfg_.hidden_width, cfg_.epochs, cfg_.batch_size};
    f.write(reinterpret_cast<const char*>(fields), sizeof(fields));
    const double dfields[2] = {cfg_.lr, cfg_.bound_weight};
    f.write(reinterpret_cast<const char*>(dfields), sizeof(dfields));
    const std::int32_t warm = cfg_.warm_start ? 1 : 0;
    f.write(reinterpret_cast<const char*>(&warm), sizeof(warm));
    f.write(reinterpret_cast<const char*>(cfg_.clamp_lo.data()),
            sizeof(double) * kStateDim);
    f.write(reinterpret_cast<const char*>(cfg_.clamp_hi.data()),
            sizeof(double) * kStateDim);
    write_vec(f, in_norm_.mean);
    write_vec(f, in_norm_.std);
    write_vec(f, tgt_norm_.mean);
    write_vec(f, tgt_norm_.std);
    for (const auto& net : nets_) write_vec(f, net.flat_params());
    if (!f) throw std::runtime_error("short write on checkpoint: " + path);

    std::ofstream meta(path + ".meta.txt");
    meta << "format=MLB1\nmembers=" << cfg_.members
         << "\nhidden_layers=" << cfg_.hidden_layers
         << "\nhidden_width=" << cfg_.hidden_width << "\nstate_dim=" << kStateDim
         << "\naction_dim=1\noutput=state-delta, diagonal Gaussian\n";
}

Ensemble Ensemble::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read checkpoint: " + path);
    char magic[4];
    f.read(magic, 4);
    if (std::memcmp(magic, "MLB1", 4) != 0)
        throw std::runtime_error("bad checkpoint magic: " + path);
    std::int32_t fields[6];
    f.read(reinterpret_cast<char*>(fields), sizeof(fields));
    if (fields[0] != 1) throw std::runtime_error("unsupported checkpoint version");
    ModelConfig cfg;
    cfg.members = fields[1];
    cfg.hidden_layers = fields[2];
    cfg.hidden_width = fields[3];
    cfg.epochs = fields[4];
    cfg.batch_size = fields[5];
    double dfields[2];
    f.read(reinterpret_cast<char*>(dfields), sizeof(dfields));
    cfg.lr = dfields[0];
    cfg.bound_weight = dfields[1];
    std::int32_t warm = 1;
    f.read(reinterpret_cast<char*>(&warm), sizeof(warm));
    cfg.warm_start = warm != 0;
    f.read(reinterpret_cast<char*>(cfg.clamp_lo.data()), sizeof(double) * kStateDim);
    f.read(reinterpret_cast<char*>(cfg.clamp_hi.data()), sizeof(double) * kStateDim);

    Rng dummy(0);
    Ensemble e(cfg, dummy);
    e.in_norm_.mean = read_vec(f);
    e.in_norm_.std = read_vec(f);
    e.tgt_norm_.mean = read_vec(f);
    e.tgt_norm_.std = read_vec(f);
    for (int b = 0; b < cfg.members; ++b) e.nets_[b].set_flat_params(read_vec(f));
    if (!f) throw std::runtime_error("truncated checkpoint: " + path);
    e.trained_once_ = true;
    return e;
}

}  // namespace marlab
