#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "marlab/replay.hpp"
#include "marlab/rng.hpp"

namespace marlab {

struct EmptyBatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct InsufficientData : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct ModelConfig {
    int members = 5;  // B
    int hidden_width = 300;
    int hidden_layers = 3;
    int epochs = 5;
    int batch_size = 128;
    double lr = 1e-3;
    double bound_weight = 0.01;  // pull on the learned log-variance bounds
    bool warm_start = true;      // keep weights across train() calls
    // Per-dimension clamp box applied to sampled next states (infinities
    // disable a side). Defaults follow the traffic state layout.
    std::array<double, kStateDim> clamp_lo{0.0, -1e30, -1e30, 0.0, 0.0, 0.0, 0.0};
    std::array<double, kStateDim> clamp_hi{13.89, 1e30, 1e30, 13.89, 13.89, 75.0, 75.0};
};

struct GaussianPrediction {
    std::array<double, kStateDim> mean{};
    std::array<double, kStateDim> var{};
};

/// Per-dimension affine standardizer. Identity until fitted, so an untrained
/// model with a zeroed output layer predicts exactly zero state change.
struct Normalizer {
    Vec mean, std;
    explicit Normalizer(int dim = 0) : mean(Vec::Zero(dim)), std(Vec::Ones(dim)) {}
    void fit(const Mat& rows, double std_floor = 1e-8) {
        mean = rows.colwise().mean();
        Mat c = rows.rowwise() - mean.transpose();
        std = (c.array().square().colwise().mean()).sqrt().matrix();
        std = std.cwiseMax(std_floor);
    }
    Mat normalize(const Mat& rows) const {
        return (rows.rowwise() - mean.transpose()).array().rowwise() /
               std.transpose().array();
    }
};

/// One Gaussian-head network: hidden_layers dense layers with swish
/// activation, then a linear head producing [state-delta mean | raw
/// log-variance], the latter soft-clamped between learned bounds. All inputs,
/// targets, and outputs live in the shared normalized space; the Ensemble
/// wrapper de-normalizes.
class GaussianMlp {
public:
    GaussianMlp(int in_dim, int out_dim, int width, int layers, Rng& rng);

    struct Output {
        Mat mu;  // n x out_dim
        Mat lv;  // n x out_dim, bounded log variance
    };
    Output forward(const Mat& X) const;

    /// Eq.-style negative log-likelihood, summed over the batch:
    /// sum_i [ (mu-t)^T diag(sigma^-2) (mu-t) + sum_d log sigma^2_d ].
    double nll_sum(const Mat& X, const Mat& T) const;

    /// Batch-mean NLL plus bound_weight * sum(max_lv - min_lv); writes the
    /// analytic gradient of that objective into *grads when non-null.
    struct Grads {
        std::vector<Mat> dW;
        std::vector<Vec> db;
        Vec dmax_lv, dmin_lv;
    };
    double train_loss(const Mat& X, const Mat& T, double bound_weight,
                      Grads* grads) const;

    void adam_step(const Grads& g, double lr);
    void reset_adam();

    Vec flat_params() const;
    void set_flat_params(const Vec& p);
    void reinit(Rng& rng);
    void zero_output_layer();

    std::vector<Mat> W;
    std::vector<Vec> b;
    Vec max_lv, min_lv;  // learned soft bounds on the log variance

private:
    // Adam state, one slot per parameter tensor.
    std::vector<Mat> mW_, vW_;
    std::vector<Vec> mb_, vb_;
    Vec m_max_, v_max_, m_min_, v_min_;
    long adam_t_ = 0;
};

struct TrainReport {
    std::vector<double> first_epoch_nll;  // per member, mean NLL on its bootstrap set
    std::vector<double> last_epoch_nll;
};

/// Draw n indices uniformly with replacement (one bootstrap resample).
std::vector<int> bootstrap_indices(int n, Rng& rng);

/// B bootstrapped Gaussian-head networks over the 7-dim traffic state and the
/// 1-dim target-velocity action, predicting state deltas.
class Ensemble {
public:
    explicit Ensemble(ModelConfig cfg, Rng& rng);

    /// Refit normalizers on the full dataset, then train each member on its
    /// own bootstrap resample. Throws InsufficientData when the dataset is
    /// smaller than one batch.
    TrainReport train(const ReplayDataset& data, Rng& rng);

    GaussianPrediction predict(int b, const Obs& s, double a) const;
    /// Rows of S are states, A the matching actions; returns de-normalized
    /// per-row means and variances.
    void predict_batch(int b, const Mat& S, const Vec& A, Mat* mean, Mat* var) const;

    Obs sample_next(int b, const Obs& s, double a, Rng& rng) const;
    /// Row-major draw order, so results are independent of any batching of
    /// the same query sequence.
    Mat sample_next_batch(int b, const Mat& S, const Vec& A, Rng& rng) const;

    /// Spec'd operation: summed NLL of a transition batch under member b,
    /// computed on normalized inputs/targets (no bound regularizer).
    double gaussian_nll(int b, const std::vector<Transition>& batch) const;

    int members() const { return cfg_.members; }
    const ModelConfig& config() const { return cfg_; }
    GaussianMlp& member(int b) { return nets_.at(b); }
    const GaussianMlp& member(int b) const { return nets_.at(b); }
    const Normalizer& input_normalizer() const { return in_norm_; }
    const Normalizer& target_normalizer() const { return tgt_norm_; }

    std::int64_t query_count() const { return query_count_; }
    void reset_query_count() { query_count_ = 0; }

    void save(const std::string& path) const;
    static Ensemble load(const std::string& path);

private:
    Mat inputs_of(const std::vector<Transition>& batch) const;
    Mat targets_of(const std::vector<Transition>& batch) const;

    ModelConfig cfg_;
    Normalizer in_norm_;
    Normalizer tgt_norm_;
    std::vector<GaussianMlp> nets_;
    bool trained_once_ = false;
    mutable std::int64_t query_count_ = 0;
};

}  // namespace marlab
