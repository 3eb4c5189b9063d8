#pragma once

#include "entsched/config.hpp"
#include "entsched/env.hpp"
#include "entsched/schedulers.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace entsched {

inline constexpr int kTokenDim = 7;

/// Token sequence for the pair-level models: N_q^2 rows of width 7.
/// Row r encodes the ordered pair (i, j) with r = i*N_q + j. Dims are
/// [F, exp(-1/(R t_mem)), 1 - F exp(-1/(R t_mem)), established, both-idle,
/// i/N_q, j/N_q]; diagonal rows carry zeros in the first three dims.
Eigen::MatrixXd encode_tokens(const Env& env, const PreInfo& preinfo, double t_mem_steps);

/// Token sequence for the qubit-level model: N_q rows of width 7 holding
/// per-qubit aggregates [mean link cost, min link cost, established degree
/// fraction, idle, conditioning marker, i/N_q, 0]. `marked_qubit` = -1 for
/// the unconditioned first pass.
Eigen::MatrixXd encode_qubit_tokens(const Env& env, const PreInfo& preinfo, double t_mem_steps,
                                    int marked_qubit);

/// Portable model snapshot: text header plus named row-major float32 arrays.
struct Checkpoint {
    int format_version = 1;
    ModelConfig config;
    struct Tensor {
        std::string name;
        int rows = 0;
        int cols = 0;
        std::vector<float> data; // row-major
    };
    std::vector<Tensor> tensors;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

template <typename Real>
using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Real>
using Vec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

/// One training example: tokens plus a masked regression target.
template <typename Real>
struct RolloutSample {
    Mat<Real> tokens;                // T x n_dim
    Vec<Real> targets;               // T
    std::vector<std::uint8_t> mask;  // 1 = contributes to the loss
    double mu_peak = 0.0;
};

/// Bidirectional (non-causal) pre-norm transformer encoder with a scalar
/// head per token. Sequence-length agnostic; single attention head.
template <typename Real>
class Transformer {
public:
    explicit Transformer(const ModelConfig& config);

    const ModelConfig& config() const { return config_; }

    /// Deterministic weight init from a seed; head zero-initialized so an
    /// untrained model predicts exactly zero.
    void init_weights(std::uint64_t seed);

    /// tokens: T x n_dim -> predictions: T.
    Vec<Real> forward(const Mat<Real>& tokens) const;

    /// Masked-MSE loss over a batch plus parameter gradients (accumulated
    /// into `grads`, which mirrors visit_params order).
    Real batch_loss_and_grads(const std::vector<RolloutSample<Real>>& batch,
                              std::vector<Mat<Real>>& grads) const;

    Real batch_loss(const std::vector<RolloutSample<Real>>& batch) const;

    /// Backpropagates an externally supplied d(loss)/d(prediction) through
    /// one forward pass, accumulating into `grads`.
    void accumulate_output_grads(const Mat<Real>& tokens, const Vec<Real>& dpred,
                                 std::vector<Mat<Real>>& grads) const;

    /// Enumerates (name, matrix&) in a fixed order shared by checkpoints,
    /// the optimizer, and the gradient checker.
    template <typename F>
    void visit_params(F&& f);
    template <typename F>
    void visit_params(F&& f) const;

    Checkpoint to_checkpoint() const;
    static Transformer from_checkpoint(const Checkpoint& ckpt);

private:
    struct Block {
        Mat<Real> ln1_g, ln1_b;
        Mat<Real> wq, bq, wk, bk, wv, bv, wo, bo;
        Mat<Real> ln2_g, ln2_b;
        Mat<Real> w1, b1, w2, b2;
    };

    struct Cache; // forward activations for backward

    // The Qubit variant reuses this class at its own width (1 block).
    int effective_embed() const {
        return config_.variant == ModelVariant::Qubit ? config_.qubit_variant_embed
                                                      : config_.embed_dim;
    }
    int effective_ff() const {
        return config_.variant == ModelVariant::Qubit ? config_.qubit_variant_ff : config_.ff_dim;
    }
    int effective_blocks() const {
        return config_.variant == ModelVariant::Qubit ? 1 : config_.blocks;
    }

    Vec<Real> forward_impl(const Mat<Real>& tokens, Cache* cache) const;
    void backward_impl(const Cache& cache, const Vec<Real>& dpred,
                       std::vector<Mat<Real>>& grads) const;
    Real loss_impl(const std::vector<RolloutSample<Real>>& batch,
                   std::vector<Mat<Real>>* grads) const;

    ModelConfig config_;
    Mat<Real> we_, be_;
    std::vector<Block> blocks_;
    Mat<Real> lnf_g_, lnf_b_;
    Mat<Real> head_w_, head_b_;
};

/// Two-hidden-layer perceptron over the flattened token grid. Input size is
/// pinned to the training qubit count, so it cannot transfer across N_q.
template <typename Real>
class FcNet {
public:
    FcNet(const ModelConfig& config);

    const ModelConfig& config() const { return config_; }

    void init_weights(std::uint64_t seed);

    /// tokens: N_q^2 x n_dim; throws ShapeError when N_q differs from the
    /// configured training size.
    Vec<Real> forward(const Mat<Real>& tokens) const;

    Real batch_loss_and_grads(const std::vector<RolloutSample<Real>>& batch,
                              std::vector<Mat<Real>>& grads) const;
    Real batch_loss(const std::vector<RolloutSample<Real>>& batch) const;
    void accumulate_output_grads(const Mat<Real>& tokens, const Vec<Real>& dpred,
                                 std::vector<Mat<Real>>& grads) const;

    template <typename F>
    void visit_params(F&& f);
    template <typename F>
    void visit_params(F&& f) const;

    Checkpoint to_checkpoint() const;
    static FcNet from_checkpoint(const Checkpoint& ckpt);

private:
    struct Cache;
    Vec<Real> forward_impl(const Mat<Real>& tokens, Cache* cache) const;
    Real loss_impl(const std::vector<RolloutSample<Real>>& batch,
                   std::vector<Mat<Real>>* grads) const;

    ModelConfig config_;
    Mat<Real> w1_, b1_, w2_, b2_, w3_, b3_;
};

/// Uniform inference-side handle over the model variants.
class Agent {
public:
    virtual ~Agent() = default;
    virtual ModelVariant variant() const = 0;
    /// tokens -> per-token predictions (length = rows of tokens).
    virtual Eigen::VectorXd predict(const Eigen::MatrixXd& tokens) const = 0;
};

std::unique_ptr<Agent> make_agent(const Checkpoint& ckpt);

/// Mixed action matrix: base expected link error plus
/// mixing_weight * symmetrized prediction.
ActionMatrix action_matrix_from_predictions(const Eigen::VectorXd& predictions, const Env& env,
                                            const PreInfo& preinfo, double t_mem_steps,
                                            double mixing_weight);

/// Two-pass qubit-level selection: pick the idle qubit with the lowest
/// first-pass score, re-score conditioned on it, and return the cheapest
/// legal partner below the threshold (or Idle).
Action qubit_level_select(const Agent& agent, const Env& env, const PreInfo& preinfo,
                          double t_mem_steps, double mixing_weight, double threshold);

/// Adam with standard moment defaults.
template <typename Real>
class Adam {
public:
    Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::vector<Mat<Real>*> params, const std::vector<Mat<Real>>& grads);

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Mat<Real>> m_, v_;
};

template <typename Real>
template <typename F>
void Transformer<Real>::visit_params(F&& f) {
    f("embed.w", we_);
    f("embed.b", be_);
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
        const std::string p = "block" + std::to_string(k) + ".";
        Block& b = blocks_[k];
        f(p + "ln1.g", b.ln1_g);
        f(p + "ln1.b", b.ln1_b);
        f(p + "attn.wq", b.wq);
        f(p + "attn.bq", b.bq);
        f(p + "attn.wk", b.wk);
        f(p + "attn.bk", b.bk);
        f(p + "attn.wv", b.wv);
        f(p + "attn.bv", b.bv);
        f(p + "attn.wo", b.wo);
        f(p + "attn.bo", b.bo);
        f(p + "ln2.g", b.ln2_g);
        f(p + "ln2.b", b.ln2_b);
        f(p + "ff.w1", b.w1);
        f(p + "ff.b1", b.b1);
        f(p + "ff.w2", b.w2);
        f(p + "ff.b2", b.b2);
    }
    f("final_norm.g", lnf_g_);
    f("final_norm.b", lnf_b_);
    f("head.w", head_w_);
    f("head.b", head_b_);
}

template <typename Real>
template <typename F>
void Transformer<Real>::visit_params(F&& f) const {
    const_cast<Transformer*>(this)->visit_params(
        [&](const std::string& name, Mat<Real>& m) { f(name, static_cast<const Mat<Real>&>(m)); });
}

template <typename Real>
template <typename F>
void FcNet<Real>::visit_params(F&& f) {
    f("fc1.w", w1_);
    f("fc1.b", b1_);
    f("fc2.w", w2_);
    f("fc2.b", b2_);
    f("out.w", w3_);
    f("out.b", b3_);
}

template <typename Real>
template <typename F>
void FcNet<Real>::visit_params(F&& f) const {
    const_cast<FcNet*>(this)->visit_params(
        [&](const std::string& name, Mat<Real>& m) { f(name, static_cast<const Mat<Real>&>(m)); });
}

/// Zero-filled gradient buffers matching a model's visit_params order.
template <typename Model, typename Real = float>
std::vector<Mat<Real>> zero_grads_like(const Model& model) {
    std::vector<Mat<Real>> grads;
    model.visit_params([&](const std::string&, const Mat<Real>& m) {
        grads.push_back(Mat<Real>::Zero(m.rows(), m.cols()));
    });
    return grads;
}

struct EpochStats {
    double mean_mu;
    double loss;
};

struct TrainResult {
    Checkpoint best;          // validation winner among retained candidates
    double best_running_mu = 0.0;
    double validation_mu = 0.0; // winner's mean mu on the held-out episodes
    std::vector<EpochStats> history;
};

/// One on-policy training rollout: the masked regression sample built at
/// the mu peak, plus (when exploration is on) a subsample of the scheduling
/// states the policy was queried at and the prediction noise that was
/// injected during the episode.
struct TrainingRollout {
    RolloutSample<float> sample;
    double mu_peak = 0.0;
    std::vector<Eigen::MatrixXd> event_tokens; // subsampled policy-query states
    long total_events = 0;                     // count before subsampling
    Eigen::VectorXd noise;                     // per-token exploration draw; empty if off
};

/// Produces one rollout; the callable owns environment construction and
/// target building (see harness::make_rollout_fn).
using RolloutFn = std::function<TrainingRollout(const Agent& agent, int epoch, int episode)>;

/// Noise-free held-out episode for candidate selection; returns its mu peak.
using EvalFn = std::function<double(const Agent& agent, int episode)>;

/// Training loop: episodes_per_epoch rollouts per epoch, one Adam step on
/// the masked MSE plus the advantage-weighted exploration gradient.
/// Checkpoints are retained along the way (best running-average mu plus
/// periodic snapshots) and the returned model is the winner of a final
/// common-seed validation pass.
TrainResult train(Transformer<float>& model, const RolloutFn& rollout, const EvalFn& evaluate,
                  const TrainConfig& cfg, int validation_episodes = 32);
TrainResult train(FcNet<float>& model, const RolloutFn& rollout, const EvalFn& evaluate,
                  const TrainConfig& cfg, int validation_episodes = 32);

} // namespace entsched
