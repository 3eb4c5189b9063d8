#include "entsched/agents.hpp"

#include "entsched/common.hpp"
#include "entsched/metrics.hpp"
#include "entsched/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace entsched {

// ---------------------------------------------------------------------------
// token encodings

Eigen::MatrixXd encode_tokens(const Env& env, const PreInfo& preinfo, double t_mem_steps) {
    const int n = env.config().n_qubits;
    Eigen::MatrixXd tokens(static_cast<long>(n) * n, kTokenDim);
    for (int i = 0; i < n; ++i) {
        const double pos_i = static_cast<double>(i) / n;
        for (int j = 0; j < n; ++j) {
            const long r = static_cast<long>(i) * n + j;
            if (i == j) {
                tokens(r, 0) = 0.0;
                tokens(r, 1) = 0.0;
                tokens(r, 2) = 0.0;
            } else {
                const double f = preinfo.fidelity(i, j);
                const double decay = std::exp(-1.0 / (preinfo.success_prob(i, j) * t_mem_steps));
                tokens(r, 0) = f;
                tokens(r, 1) = decay;
                tokens(r, 2) = 1.0 - f * decay;
            }
            tokens(r, 3) = (i != j && env.established(i, j)) ? 1.0 : 0.0;
            tokens(r, 4) = (!env.qubit_busy(i) && !env.qubit_busy(j)) ? 1.0 : 0.0;
            tokens(r, 5) = pos_i;
            tokens(r, 6) = static_cast<double>(j) / n;
        }
    }
    return tokens;
}

Eigen::MatrixXd encode_qubit_tokens(const Env& env, const PreInfo& preinfo, double t_mem_steps,
                                    int marked_qubit) {
    const int n = env.config().n_qubits;
    Eigen::MatrixXd tokens(n, kTokenDim);
    for (int i = 0; i < n; ++i) {
        double sum = 0.0;
        double least = 1.0;
        int degree = 0;
        for (int j = 0; j < n; ++j) {
            if (j == i)
                continue;
            const double cost = expected_link_error(preinfo.fidelity(i, j),
                                                    preinfo.success_prob(i, j), t_mem_steps);
            sum += cost;
            least = std::min(least, cost);
            if (env.established(i, j))
                ++degree;
        }
        tokens(i, 0) = sum / (n - 1);
        tokens(i, 1) = least;
        tokens(i, 2) = static_cast<double>(degree) / (n - 1);
        tokens(i, 3) = env.qubit_busy(i) ? 0.0 : 1.0;
        tokens(i, 4) = (i == marked_qubit) ? 1.0 : 0.0;
        tokens(i, 5) = static_cast<double>(i) / n;
        tokens(i, 6) = 0.0;
    }
    return tokens;
}

// ---------------------------------------------------------------------------
// transformer

namespace {

constexpr double kLayerNormEps = 1e-5;

template <typename Real>
Mat<Real> layer_norm(const Mat<Real>& x, const Mat<Real>& g, const Mat<Real>& b, Mat<Real>& xhat,
                     Vec<Real>& inv_std) {
    Vec<Real> mean = x.rowwise().mean();
    Mat<Real> centered = x.colwise() - mean;
    Vec<Real> var = centered.array().square().rowwise().mean().matrix();
    inv_std = (var.array() + Real(kLayerNormEps)).rsqrt().matrix();
    xhat = (centered.array().colwise() * inv_std.array()).matrix();
    Mat<Real> y = xhat;
    for (long r = 0; r < y.rows(); ++r)
        y.row(r) = xhat.row(r).cwiseProduct(g.row(0)) + b.row(0);
    return y;
}

/// dx from dy through layer norm; accumulates dg, db.
template <typename Real>
Mat<Real> layer_norm_backward(const Mat<Real>& dy, const Mat<Real>& xhat,
                              const Vec<Real>& inv_std, const Mat<Real>& g, Mat<Real>& dg,
                              Mat<Real>& db) {
    dg.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
    db.row(0) += dy.colwise().sum();
    Mat<Real> dxhat = dy;
    for (long r = 0; r < dy.rows(); ++r)
        dxhat.row(r) = dy.row(r).cwiseProduct(g.row(0));
    Vec<Real> m1 = dxhat.rowwise().mean();
    Vec<Real> m2 = (dxhat.array() * xhat.array()).rowwise().mean().matrix();
    Mat<Real> dx = dxhat.colwise() - m1;
    dx.array() -= xhat.array().colwise() * m2.array();
    dx.array().colwise() *= inv_std.array();
    return dx;
}

template <typename Real>
Mat<Real> row_softmax(const Mat<Real>& scores) {
    Mat<Real> p = scores;
    for (long r = 0; r < p.rows(); ++r) {
        const Real m = p.row(r).maxCoeff();
        p.row(r) = (p.row(r).array() - m).exp();
        p.row(r) /= p.row(r).sum();
    }
    return p;
}

} // namespace

template <typename Real>
struct Transformer<Real>::Cache {
    Mat<Real> tokens;
    Mat<Real> x0; // embedding output
    struct BlockCache {
        Mat<Real> x_in;
        Mat<Real> ln1_xhat, u;
        Vec<Real> ln1_inv;
        Mat<Real> q, k, v, p, a;
        Mat<Real> x_mid;
        Mat<Real> ln2_xhat, w;
        Vec<Real> ln2_inv;
        Mat<Real> h_pre, h;
    };
    std::vector<BlockCache> blocks;
    Mat<Real> y_in, lnf_xhat, y;
    Vec<Real> lnf_inv;
};

template <typename Real>
Transformer<Real>::Transformer(const ModelConfig& config) : config_(config) {
    config_.validate();
    if (config_.variant == ModelVariant::Fc)
        throw ConfigError("Transformer cannot be built from an FC model config");
    const int e = effective_embed();
    const int f = effective_ff();
    if (config_.heads != 1)
        throw ConfigError("only single-head attention is supported");
    we_ = Mat<Real>::Zero(kTokenDim, e);
    be_ = Mat<Real>::Zero(1, e);
    blocks_.resize(effective_blocks());
    for (auto& b : blocks_) {
        b.ln1_g = Mat<Real>::Ones(1, e);
        b.ln1_b = Mat<Real>::Zero(1, e);
        b.wq = Mat<Real>::Zero(e, e);
        b.bq = Mat<Real>::Zero(1, e);
        b.wk = Mat<Real>::Zero(e, e);
        b.bk = Mat<Real>::Zero(1, e);
        b.wv = Mat<Real>::Zero(e, e);
        b.bv = Mat<Real>::Zero(1, e);
        b.wo = Mat<Real>::Zero(e, e);
        b.bo = Mat<Real>::Zero(1, e);
        b.ln2_g = Mat<Real>::Ones(1, e);
        b.ln2_b = Mat<Real>::Zero(1, e);
        b.w1 = Mat<Real>::Zero(e, f);
        b.b1 = Mat<Real>::Zero(1, f);
        b.w2 = Mat<Real>::Zero(f, e);
        b.b2 = Mat<Real>::Zero(1, e);
    }
    lnf_g_ = Mat<Real>::Ones(1, e);
    lnf_b_ = Mat<Real>::Zero(1, e);
    head_w_ = Mat<Real>::Zero(e, 1);
    head_b_ = Mat<Real>::Zero(1, 1);
}

template <typename Real>
void Transformer<Real>::init_weights(std::uint64_t seed) {
    Rng rng = Rng::derived(seed, StreamTag::ModelInit, 0);
    visit_params([&](const std::string& name, Mat<Real>& m) {
        const bool is_norm = name.find("ln") != std::string::npos ||
                             name.find("final_norm") != std::string::npos;
        const bool is_bias = name.size() >= 2 && name.compare(name.size() - 2, 2, ".b") == 0;
        const bool is_head = name.rfind("head.", 0) == 0;
        if (is_norm || is_bias || is_head)
            return; // keep the constructor's values (ones / zeros)
        const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
        for (long r = 0; r < m.rows(); ++r)
            for (long c = 0; c < m.cols(); ++c)
                m(r, c) = static_cast<Real>(rng.uniform(-bound, bound));
    });
}

template <typename Real>
Vec<Real> Transformer<Real>::forward_impl(const Mat<Real>& tokens, Cache* cache) const {
    if (tokens.cols() != kTokenDim)
        throw ShapeError("token width " + std::to_string(tokens.cols()) + " != " +
                         std::to_string(kTokenDim));
    const Real scale = Real(1) / std::sqrt(static_cast<Real>(we_.cols()));

    Mat<Real> x = tokens * we_;
    x.rowwise() += be_.row(0);
    if (cache) {
        cache->tokens = tokens;
        cache->x0 = x;
        cache->blocks.resize(blocks_.size());
    }

    for (std::size_t kb = 0; kb < blocks_.size(); ++kb) {
        const Block& b = blocks_[kb];
        typename Cache::BlockCache* bc = cache ? &cache->blocks[kb] : nullptr;
        if (bc)
            bc->x_in = x;

        Mat<Real> xhat;
        Vec<Real> inv;
        Mat<Real> u = layer_norm(x, b.ln1_g, b.ln1_b, xhat, inv);
        Mat<Real> q = u * b.wq;
        q.rowwise() += b.bq.row(0);
        Mat<Real> k = u * b.wk;
        k.rowwise() += b.bk.row(0);
        Mat<Real> v = u * b.wv;
        v.rowwise() += b.bv.row(0);
        Mat<Real> p = row_softmax<Real>(q * k.transpose() * scale);
        Mat<Real> a = p * v;
        Mat<Real> attn_out = a * b.wo;
        attn_out.rowwise() += b.bo.row(0);
        x += attn_out;
        if (bc) {
            bc->ln1_xhat = std::move(xhat);
            bc->ln1_inv = std::move(inv);
            bc->u = std::move(u);
            bc->q = std::move(q);
            bc->k = std::move(k);
            bc->v = std::move(v);
            bc->p = std::move(p);
            bc->a = std::move(a);
            bc->x_mid = x;
        }

        Mat<Real> xhat2;
        Vec<Real> inv2;
        Mat<Real> w = layer_norm(x, b.ln2_g, b.ln2_b, xhat2, inv2);
        Mat<Real> h_pre = w * b.w1;
        h_pre.rowwise() += b.b1.row(0);
        Mat<Real> h = h_pre.cwiseMax(Real(0));
        Mat<Real> ff_out = h * b.w2;
        ff_out.rowwise() += b.b2.row(0);
        x += ff_out;
        if (bc) {
            bc->ln2_xhat = std::move(xhat2);
            bc->ln2_inv = std::move(inv2);
            bc->w = std::move(w);
            bc->h_pre = std::move(h_pre);
            bc->h = std::move(h);
        }
    }

    Mat<Real> xhatf;
    Vec<Real> invf;
    if (cache)
        cache->y_in = x;
    Mat<Real> y = layer_norm(x, lnf_g_, lnf_b_, xhatf, invf);
    Vec<Real> pred = (y * head_w_).col(0);
    pred.array() += head_b_(0, 0);
    if (cache) {
        cache->lnf_xhat = std::move(xhatf);
        cache->lnf_inv = std::move(invf);
        cache->y = std::move(y);
    }
    return pred;
}

template <typename Real>
Vec<Real> Transformer<Real>::forward(const Mat<Real>& tokens) const {
    return forward_impl(tokens, nullptr);
}

template <typename Real>
void Transformer<Real>::backward_impl(const Cache& cache, const Vec<Real>& dpred,
                                      std::vector<Mat<Real>>& grads) const {
    // Map the flat grads vector back onto named parameters.
    std::vector<Mat<Real>*> slot;
    slot.reserve(grads.size());
    for (auto& g : grads)
        slot.push_back(&g);
    std::size_t cursor = 0;
    auto next = [&]() -> Mat<Real>& { return *slot[cursor++]; };

    Mat<Real>& d_we = next();
    Mat<Real>& d_be = next();
    struct BlockGrads {
        Mat<Real>*ln1_g, *ln1_b, *wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo, *ln2_g, *ln2_b, *w1,
            *b1, *w2, *b2;
    };
    std::vector<BlockGrads> bg(blocks_.size());
    for (auto& g : bg) {
        g.ln1_g = &next();
        g.ln1_b = &next();
        g.wq = &next();
        g.bq = &next();
        g.wk = &next();
        g.bk = &next();
        g.wv = &next();
        g.bv = &next();
        g.wo = &next();
        g.bo = &next();
        g.ln2_g = &next();
        g.ln2_b = &next();
        g.w1 = &next();
        g.b1 = &next();
        g.w2 = &next();
        g.b2 = &next();
    }
    Mat<Real>& d_lnf_g = next();
    Mat<Real>& d_lnf_b = next();
    Mat<Real>& d_head_w = next();
    Mat<Real>& d_head_b = next();

    const Real scale = Real(1) / std::sqrt(static_cast<Real>(we_.cols()));

    d_head_w += cache.y.transpose() * dpred;
    d_head_b(0, 0) += dpred.sum();
    Mat<Real> dy = dpred * head_w_.transpose(); // T x E
    Mat<Real> dx = layer_norm_backward(dy, cache.lnf_xhat, cache.lnf_inv, lnf_g_, d_lnf_g, d_lnf_b);

    for (long kb = static_cast<long>(blocks_.size()) - 1; kb >= 0; --kb) {
        const Block& b = blocks_[kb];
        const auto& bc = cache.blocks[kb];
        BlockGrads& g = bg[kb];

        // feed-forward sub-layer
        Mat<Real> dh = dx * b.w2.transpose();
        *g.w2 += bc.h.transpose() * dx;
        g.b2->row(0) += dx.colwise().sum();
        Mat<Real> dh_pre =
            (bc.h_pre.array() > Real(0)).select(dh, Mat<Real>::Zero(dh.rows(), dh.cols()));
        Mat<Real> dw = dh_pre * b.w1.transpose();
        *g.w1 += bc.w.transpose() * dh_pre;
        g.b1->row(0) += dh_pre.colwise().sum();
        dx += layer_norm_backward(dw, bc.ln2_xhat, bc.ln2_inv, b.ln2_g, *g.ln2_g, *g.ln2_b);

        // attention sub-layer
        Mat<Real> da = dx * b.wo.transpose();
        *g.wo += bc.a.transpose() * dx;
        g.bo->row(0) += dx.colwise().sum();
        Mat<Real> dp = da * bc.v.transpose();
        Mat<Real> dv = bc.p.transpose() * da;
        // softmax backward, rowwise
        Vec<Real> row_dot = (dp.array() * bc.p.array()).rowwise().sum().matrix();
        Mat<Real> ds = bc.p.cwiseProduct(dp.colwise() - row_dot);
        Mat<Real> dq = ds * bc.k * scale;
        Mat<Real> dk = ds.transpose() * bc.q * scale;
        Mat<Real> du = dq * b.wq.transpose() + dk * b.wk.transpose() + dv * b.wv.transpose();
        *g.wq += bc.u.transpose() * dq;
        g.bq->row(0) += dq.colwise().sum();
        *g.wk += bc.u.transpose() * dk;
        g.bk->row(0) += dk.colwise().sum();
        *g.wv += bc.u.transpose() * dv;
        g.bv->row(0) += dv.colwise().sum();
        dx += layer_norm_backward(du, bc.ln1_xhat, bc.ln1_inv, b.ln1_g, *g.ln1_g, *g.ln1_b);
    }

    d_we += cache.tokens.transpose() * dx;
    d_be.row(0) += dx.colwise().sum();
}

template <typename Real>
Real Transformer<Real>::loss_impl(const std::vector<RolloutSample<Real>>& batch,
                                  std::vector<Mat<Real>>* grads) const {
    if (batch.empty())
        throw ConfigError("empty training batch");
    Real total = 0;
    const Real inv_batch = Real(1) / static_cast<Real>(batch.size());
    for (const auto& sample : batch) {
        Cache cache;
        Vec<Real> pred = forward_impl(sample.tokens, grads ? &cache : nullptr);
        if (pred.size() != sample.targets.size() ||
            static_cast<std::size_t>(pred.size()) != sample.mask.size())
            throw ShapeError("target/mask length does not match prediction length");
        long unmasked = 0;
        for (auto m : sample.mask)
            unmasked += (m != 0);
        if (unmasked == 0)
            continue;
        Real loss = 0;
        Vec<Real> dpred = Vec<Real>::Zero(pred.size());
        const Real inv_u = Real(1) / static_cast<Real>(unmasked);
        for (long t = 0; t < pred.size(); ++t) {
            if (!sample.mask[t])
                continue;
            const Real r = pred(t) - sample.targets(t);
            loss += r * r * inv_u;
            dpred(t) = Real(2) * r * inv_u * inv_batch;
        }
        total += loss * inv_batch;
        if (grads)
            backward_impl(cache, dpred, *grads);
    }
    return total;
}

template <typename Real>
Real Transformer<Real>::batch_loss_and_grads(const std::vector<RolloutSample<Real>>& batch,
                                             std::vector<Mat<Real>>& grads) const {
    return loss_impl(batch, &grads);
}

template <typename Real>
Real Transformer<Real>::batch_loss(const std::vector<RolloutSample<Real>>& batch) const {
    return loss_impl(batch, nullptr);
}

template <typename Real>
void Transformer<Real>::accumulate_output_grads(const Mat<Real>& tokens, const Vec<Real>& dpred,
                                                std::vector<Mat<Real>>& grads) const {
    Cache cache;
    forward_impl(tokens, &cache);
    backward_impl(cache, dpred, grads);
}

// ---------------------------------------------------------------------------
// fully-connected baseline

template <typename Real>
struct FcNet<Real>::Cache {
    Mat<Real> x;  // 1 x In
    Mat<Real> h1_pre, h1, h2_pre, h2;
};

template <typename Real>
FcNet<Real>::FcNet(const ModelConfig& config) : config_(config) {
    config_.validate();
    if (config_.variant != ModelVariant::Fc)
        throw ConfigError("FcNet requires an FC model config");
    if (config_.fc_n_qubits < 2)
        throw ConfigError("fc_n_qubits must be set for the FC variant");
    const long in = static_cast<long>(config_.fc_n_qubits) * config_.fc_n_qubits * kTokenDim;
    const long out = static_cast<long>(config_.fc_n_qubits) * config_.fc_n_qubits;
    const int h = config_.fc_hidden;
    w1_ = Mat<Real>::Zero(in, h);
    b1_ = Mat<Real>::Zero(1, h);
    w2_ = Mat<Real>::Zero(h, h);
    b2_ = Mat<Real>::Zero(1, h);
    w3_ = Mat<Real>::Zero(h, out);
    b3_ = Mat<Real>::Zero(1, out);
}

template <typename Real>
void FcNet<Real>::init_weights(std::uint64_t seed) {
    Rng rng = Rng::derived(seed, StreamTag::ModelInit, 1);
    visit_params([&](const std::string& name, Mat<Real>& m) {
        const bool is_bias = name.size() >= 2 && name.compare(name.size() - 2, 2, ".b") == 0;
        if (is_bias || name.rfind("out.", 0) == 0)
            return; // zero output layer: untrained FC predicts zero
        const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
        for (long r = 0; r < m.rows(); ++r)
            for (long c = 0; c < m.cols(); ++c)
                m(r, c) = static_cast<Real>(rng.uniform(-bound, bound));
    });
}

template <typename Real>
Vec<Real> FcNet<Real>::forward_impl(const Mat<Real>& tokens, Cache* cache) const {
    if (tokens.cols() != kTokenDim)
        throw ShapeError("token width " + std::to_string(tokens.cols()));
    const long expect_rows = static_cast<long>(config_.fc_n_qubits) * config_.fc_n_qubits;
    if (tokens.rows() != expect_rows)
        throw ShapeError("FC model was trained for n_qubits=" +
                         std::to_string(config_.fc_n_qubits) + "; got a sequence of " +
                         std::to_string(tokens.rows()) + " tokens");
    // row-major flatten: token-major, feature-minor
    Mat<Real> x(1, tokens.size());
    for (long t = 0; t < tokens.rows(); ++t)
        for (long d = 0; d < tokens.cols(); ++d)
            x(0, t * kTokenDim + d) = tokens(t, d);

    Mat<Real> h1_pre = x * w1_ + b1_;
    Mat<Real> h1 = h1_pre.cwiseMax(Real(0));
    Mat<Real> h2_pre = h1 * w2_ + b2_;
    Mat<Real> h2 = h2_pre.cwiseMax(Real(0));
    Mat<Real> out = h2 * w3_ + b3_;
    if (cache) {
        cache->x = std::move(x);
        cache->h1_pre = std::move(h1_pre);
        cache->h1 = std::move(h1);
        cache->h2_pre = std::move(h2_pre);
        cache->h2 = std::move(h2);
    }
    return out.row(0).transpose();
}

template <typename Real>
Vec<Real> FcNet<Real>::forward(const Mat<Real>& tokens) const {
    return forward_impl(tokens, nullptr);
}

namespace {

template <typename Real>
Mat<Real> relu_backward(const Mat<Real>& pre, const Mat<Real>& dpost) {
    return (pre.array() > Real(0)).select(dpost, Mat<Real>::Zero(dpost.rows(), dpost.cols()));
}

} // namespace

template <typename Real>
Real FcNet<Real>::loss_impl(const std::vector<RolloutSample<Real>>& batch,
                            std::vector<Mat<Real>>* grads) const {
    if (batch.empty())
        throw ConfigError("empty training batch");
    Real total = 0;
    const Real inv_batch = Real(1) / static_cast<Real>(batch.size());
    for (const auto& sample : batch) {
        Cache cache;
        Vec<Real> pred = forward_impl(sample.tokens, grads ? &cache : nullptr);
        if (pred.size() != sample.targets.size() ||
            static_cast<std::size_t>(pred.size()) != sample.mask.size())
            throw ShapeError("target/mask length does not match prediction length");
        long unmasked = 0;
        for (auto m : sample.mask)
            unmasked += (m != 0);
        if (unmasked == 0)
            continue;
        Real loss = 0;
        Vec<Real> dpred = Vec<Real>::Zero(pred.size());
        const Real inv_u = Real(1) / static_cast<Real>(unmasked);
        for (long t = 0; t < pred.size(); ++t) {
            if (!sample.mask[t])
                continue;
            const Real r = pred(t) - sample.targets(t);
            loss += r * r * inv_u;
            dpred(t) = Real(2) * r * inv_u * inv_batch;
        }
        total += loss * inv_batch;
        if (grads) {
            std::vector<Mat<Real>>& g = *grads;
            Mat<Real> dout = dpred.transpose();
            g[4] += cache.h2.transpose() * dout;
            g[5] += dout;
            Mat<Real> dh2 = relu_backward<Real>(cache.h2_pre, dout * w3_.transpose());
            g[2] += cache.h1.transpose() * dh2;
            g[3] += dh2;
            Mat<Real> dh1 = relu_backward<Real>(cache.h1_pre, dh2 * w2_.transpose());
            g[0] += cache.x.transpose() * dh1;
            g[1] += dh1;
        }
    }
    return total;
}

template <typename Real>
Real FcNet<Real>::batch_loss_and_grads(const std::vector<RolloutSample<Real>>& batch,
                                       std::vector<Mat<Real>>& grads) const {
    return loss_impl(batch, &grads);
}

template <typename Real>
Real FcNet<Real>::batch_loss(const std::vector<RolloutSample<Real>>& batch) const {
    return loss_impl(batch, nullptr);
}

template <typename Real>
void FcNet<Real>::accumulate_output_grads(const Mat<Real>& tokens, const Vec<Real>& dpred,
                                          std::vector<Mat<Real>>& grads) const {
    Cache cache;
    forward_impl(tokens, &cache);
    Mat<Real> dout = dpred.transpose();
    grads[4] += cache.h2.transpose() * dout;
    grads[5] += dout;
    Mat<Real> dh2 = relu_backward<Real>(cache.h2_pre, dout * w3_.transpose());
    grads[2] += cache.h1.transpose() * dh2;
    grads[3] += dh2;
    Mat<Real> dh1 = relu_backward<Real>(cache.h1_pre, dh2 * w2_.transpose());
    grads[0] += cache.x.transpose() * dh1;
    grads[1] += dh1;
}

// ---------------------------------------------------------------------------
// checkpoints

namespace {

const char* variant_name(ModelVariant v) {
    switch (v) {
    case ModelVariant::QuPairs: return "qupairs";
    case ModelVariant::Qubit: return "qubit";
    case ModelVariant::Fc: return "fc";
    }
    return "?";
}

ModelVariant variant_from_name(const std::string& name) {
    if (name == "qupairs")
        return ModelVariant::QuPairs;
    if (name == "qubit")
        return ModelVariant::Qubit;
    if (name == "fc")
        return ModelVariant::Fc;
    throw IoError("checkpoint: unknown variant '" + name + "'");
}

template <typename Real, typename Model>
Checkpoint checkpoint_from_model(const Model& model) {
    Checkpoint ckpt;
    ckpt.config = model.config();
    model.visit_params([&](const std::string& name, const Mat<Real>& m) {
        Checkpoint::Tensor t;
        t.name = name;
        t.rows = static_cast<int>(m.rows());
        t.cols = static_cast<int>(m.cols());
        t.data.resize(static_cast<std::size_t>(m.rows()) * m.cols());
        std::size_t k = 0;
        for (long r = 0; r < m.rows(); ++r)
            for (long c = 0; c < m.cols(); ++c)
                t.data[k++] = static_cast<float>(m(r, c));
        ckpt.tensors.push_back(std::move(t));
    });
    return ckpt;
}

template <typename Real, typename Model>
void model_from_checkpoint(Model& model, const Checkpoint& ckpt) {
    std::size_t index = 0;
    model.visit_params([&](const std::string& name, Mat<Real>& m) {
        if (index >= ckpt.tensors.size())
            throw IoError("checkpoint: missing tensor '" + name + "'");
        const auto& t = ckpt.tensors[index++];
        if (t.name != name)
            throw IoError("checkpoint: expected tensor '" + name + "', found '" + t.name + "'");
        if (t.rows != m.rows() || t.cols != m.cols())
            throw IoError("checkpoint: tensor '" + name + "' has shape " +
                          std::to_string(t.rows) + "x" + std::to_string(t.cols) + ", expected " +
                          std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
        std::size_t k = 0;
        for (long r = 0; r < m.rows(); ++r)
            for (long c = 0; c < m.cols(); ++c)
                m(r, c) = static_cast<Real>(t.data[k++]);
    });
    if (index != ckpt.tensors.size())
        throw IoError("checkpoint: " + std::to_string(ckpt.tensors.size() - index) +
                      " unexpected trailing tensors");
}

} // namespace

void Checkpoint::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write checkpoint: " + path);
    out << "ENTSCHED-CKPT " << format_version << "\n";
    out << "variant " << variant_name(config.variant) << "\n";
    out << "blocks " << config.blocks << "\n";
    out << "embed_dim " << config.embed_dim << "\n";
    out << "heads " << config.heads << "\n";
    out << "ff_dim " << config.ff_dim << "\n";
    out << "n_dim " << kTokenDim << "\n";
    out << "qubit_variant_embed " << config.qubit_variant_embed << "\n";
    out << "qubit_variant_ff " << config.qubit_variant_ff << "\n";
    out << "fc_hidden " << config.fc_hidden << "\n";
    out << "fc_n_qubits " << config.fc_n_qubits << "\n";
    out << "tensors " << tensors.size() << "\n";
    for (const auto& t : tensors)
        out << "tensor " << t.name << " " << t.rows << " " << t.cols << "\n";
    out << "DATA\n";
    for (const auto& t : tensors)
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (!out)
        throw IoError("short write to checkpoint: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open checkpoint: " + path);
    Checkpoint ckpt;
    std::string line;
    if (!std::getline(in, line))
        throw IoError("checkpoint: empty file");
    {
        std::istringstream head(line);
        std::string magic;
        head >> magic >> ckpt.format_version;
        if (magic != "ENTSCHED-CKPT")
            throw IoError("checkpoint: bad magic '" + magic + "'");
        if (ckpt.format_version != 1)
            throw IoError("checkpoint: unsupported format version " +
                          std::to_string(ckpt.format_version));
    }
    long tensor_count = -1;
    while (std::getline(in, line)) {
        if (line == "DATA")
            break;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "variant") {
            std::string v;
            ls >> v;
            ckpt.config.variant = variant_from_name(v);
        } else if (key == "blocks") {
            ls >> ckpt.config.blocks;
        } else if (key == "embed_dim") {
            ls >> ckpt.config.embed_dim;
        } else if (key == "heads") {
            ls >> ckpt.config.heads;
        } else if (key == "ff_dim") {
            ls >> ckpt.config.ff_dim;
        } else if (key == "n_dim") {
            int n_dim = 0;
            ls >> n_dim;
            if (n_dim != kTokenDim)
                throw IoError("checkpoint: n_dim " + std::to_string(n_dim) + " unsupported");
        } else if (key == "qubit_variant_embed") {
            ls >> ckpt.config.qubit_variant_embed;
        } else if (key == "qubit_variant_ff") {
            ls >> ckpt.config.qubit_variant_ff;
        } else if (key == "fc_hidden") {
            ls >> ckpt.config.fc_hidden;
        } else if (key == "fc_n_qubits") {
            ls >> ckpt.config.fc_n_qubits;
        } else if (key == "tensors") {
            ls >> tensor_count;
        } else if (key == "tensor") {
            Checkpoint::Tensor t;
            ls >> t.name >> t.rows >> t.cols;
            if (t.name.empty() || t.rows < 1 || t.cols < 1)
                throw IoError("checkpoint: malformed tensor line '" + line + "'");
            ckpt.tensors.push_back(std::move(t));
        } else {
            throw IoError("checkpoint: unknown header field '" + key + "'");
        }
        if (!ls)
            throw IoError("checkpoint: malformed header line '" + line + "'");
    }
    if (line != "DATA")
        throw IoError("checkpoint: missing DATA marker (truncated header)");
    if (tensor_count != static_cast<long>(ckpt.tensors.size()))
        throw IoError("checkpoint: tensor count mismatch");
    for (auto& t : ckpt.tensors) {
        t.data.resize(static_cast<std::size_t>(t.rows) * t.cols);
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(float)));
        if (in.gcount() != static_cast<std::streamsize>(t.data.size() * sizeof(float)))
            throw IoError("checkpoint: truncated data for tensor '" + t.name + "'");
    }
    return ckpt;
}

template <typename Real>
Checkpoint Transformer<Real>::to_checkpoint() const {
    return checkpoint_from_model<Real>(*this);
}

template <typename Real>
Transformer<Real> Transformer<Real>::from_checkpoint(const Checkpoint& ckpt) {
    Transformer model(ckpt.config);
    model_from_checkpoint<Real>(model, ckpt);
    return model;
}

template <typename Real>
Checkpoint FcNet<Real>::to_checkpoint() const {
    return checkpoint_from_model<Real>(*this);
}

template <typename Real>
FcNet<Real> FcNet<Real>::from_checkpoint(const Checkpoint& ckpt) {
    FcNet model(ckpt.config);
    model_from_checkpoint<Real>(model, ckpt);
    return model;
}

// ---------------------------------------------------------------------------
// agents

namespace {

class TransformerAgent : public Agent {
public:
    explicit TransformerAgent(Transformer<float> model) : model_(std::move(model)) {}
    ModelVariant variant() const override { return model_.config().variant; }
    Eigen::VectorXd predict(const Eigen::MatrixXd& tokens) const override {
        Vec<float> pred = model_.forward(tokens.cast<float>());
        return pred.cast<double>();
    }

private:
    Transformer<float> model_;
};

class FcAgent : public Agent {
public:
    explicit FcAgent(FcNet<float> model) : model_(std::move(model)) {}
    ModelVariant variant() const override { return ModelVariant::Fc; }
    Eigen::VectorXd predict(const Eigen::MatrixXd& tokens) const override {
        Vec<float> pred = model_.forward(tokens.cast<float>());
        return pred.cast<double>();
    }

private:
    FcNet<float> model_;
};

/// Non-owning view over a model being trained.
template <typename Model>
class LiveAgent : public Agent {
public:
    explicit LiveAgent(const Model& model) : model_(model) {}
    ModelVariant variant() const override { return model_.config().variant; }
    Eigen::VectorXd predict(const Eigen::MatrixXd& tokens) const override {
        Vec<float> pred = model_.forward(tokens.cast<float>());
        return pred.cast<double>();
    }

private:
    const Model& model_;
};

} // namespace

std::unique_ptr<Agent> make_agent(const Checkpoint& ckpt) {
    if (ckpt.config.variant == ModelVariant::Fc)
        return std::make_unique<FcAgent>(FcNet<float>::from_checkpoint(ckpt));
    return std::make_unique<TransformerAgent>(Transformer<float>::from_checkpoint(ckpt));
}

ActionMatrix action_matrix_from_predictions(const Eigen::VectorXd& predictions, const Env& env,
                                            const PreInfo& preinfo, double t_mem_steps,
                                            double mixing_weight) {
    const int n = env.config().n_qubits;
    if (predictions.size() != static_cast<long>(n) * n)
        throw ShapeError("predictions length " + std::to_string(predictions.size()) +
                         " != n_qubits^2 = " + std::to_string(static_cast<long>(n) * n));
    if (!(mixing_weight >= 0.0 && mixing_weight <= 1.0))
        throw ConfigError("mixing_weight must be in [0, 1]");
    ActionMatrix m(n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (env.established(i, j))
                continue;
            if (!env.config().allow_intra_component_links && env.same_component(i, j))
                continue;
            const double base = expected_link_error(preinfo.fidelity(i, j),
                                                    preinfo.success_prob(i, j), t_mem_steps);
            const double sym =
                0.5 * (predictions(static_cast<long>(i) * n + j) +
                       predictions(static_cast<long>(j) * n + i));
            m.set_cost(i, j, base + mixing_weight * sym);
        }
    }
    return m;
}

Action qubit_level_select(const Agent& agent, const Env& env, const PreInfo& preinfo,
                          double t_mem_steps, double mixing_weight, double threshold) {
    const int n = env.config().n_qubits;
    const Eigen::VectorXd first = agent.predict(encode_qubit_tokens(env, preinfo, t_mem_steps, -1));
    if (first.size() != n)
        throw ShapeError("qubit-level model must emit one score per qubit");

    int anchor = -1;
    for (int q = 0; q < n; ++q) {
        if (env.qubit_busy(q))
            continue;
        if (anchor < 0 || first(q) < first(anchor))
            anchor = q;
    }
    if (anchor < 0)
        return Action::idle();

    const Eigen::VectorXd second =
        agent.predict(encode_qubit_tokens(env, preinfo, t_mem_steps, anchor));
    int partner = -1;
    double best_cost = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
        if (j == anchor || env.qubit_busy(j) || !env.assignable(anchor, j))
            continue;
        const double base = expected_link_error(preinfo.fidelity(anchor, j),
                                                preinfo.success_prob(anchor, j), t_mem_steps);
        const double cost = base + mixing_weight * 0.5 * (first(anchor) + second(j));
        if (cost < best_cost) {
            best_cost = cost;
            partner = j;
        }
    }
    if (partner < 0 || best_cost >= threshold)
        return Action::idle();
    return Action::pair(anchor, partner);
}

// ---------------------------------------------------------------------------
// optimizer and training loop

template <typename Real>
void Adam<Real>::step(std::vector<Mat<Real>*> params, const std::vector<Mat<Real>>& grads) {
    if (params.size() != grads.size())
        throw ConfigError("Adam: param/grad count mismatch");
    if (m_.empty()) {
        for (const auto* p : params) {
            m_.push_back(Mat<Real>::Zero(p->rows(), p->cols()));
            v_.push_back(Mat<Real>::Zero(p->rows(), p->cols()));
        }
    }
    ++t_;
    const Real c1 = Real(1) - std::pow(Real(beta1_), Real(t_));
    const Real c2 = Real(1) - std::pow(Real(beta2_), Real(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
        m_[k] = Real(beta1_) * m_[k] + (Real(1) - Real(beta1_)) * grads[k];
        v_[k].array() =
            Real(beta2_) * v_[k].array() + (Real(1) - Real(beta2_)) * grads[k].array().square();
        Mat<Real> mhat = m_[k] / c1;
        Mat<Real> vhat = v_[k] / c2;
        params[k]->array() -= Real(lr_) * mhat.array() / (vhat.array().sqrt() + Real(eps_));
    }
}

namespace {

template <typename Model>
TrainResult train_impl(Model& model, const RolloutFn& rollout, const EvalFn& evaluate,
                       const TrainConfig& cfg, int validation_episodes) {
    cfg.validate();

    TrainResult result;
    result.best_running_mu = -std::numeric_limits<double>::infinity();
    LiveAgent<Model> live(model);

    // candidate pool for the final validation pass: initial weights,
    // periodic snapshots, and the best-running-average point of each restart
    std::vector<Checkpoint> candidates;
    candidates.push_back(model.to_checkpoint());
    const int snapshot_stride = std::max(1, cfg.epochs / 10);

    for (int restart = 0; restart < cfg.restarts; ++restart) {
        if (restart > 0)
            model.init_weights(derive_seed(cfg.rng_seed, StreamTag::ModelInit, restart));
        Adam<float> adam(cfg.learning_rate);
        std::vector<Mat<float>*> params;
        params.clear();
        model.visit_params([&](const std::string&, Mat<float>& m) { params.push_back(&m); });
        double running_mu = 0.0;
        double best_running = -std::numeric_limits<double>::infinity();
        double baseline = 0.0;
        bool baseline_set = false;
        const std::size_t best_slot = candidates.size();
        candidates.push_back(model.to_checkpoint()); // reserved best-running slot

        for (int local_epoch = 0; local_epoch < cfg.epochs; ++local_epoch) {
            const int epoch = restart * cfg.epochs + local_epoch;
            std::vector<TrainingRollout> rollouts;
            rollouts.reserve(cfg.episodes_per_epoch);
            std::vector<RolloutSample<float>> batch;
            batch.reserve(cfg.episodes_per_epoch);
            double mu_sum = 0.0;
            for (int episode = 0; episode < cfg.episodes_per_epoch; ++episode) {
                rollouts.push_back(rollout(live, epoch, episode));
                batch.push_back(rollouts.back().sample);
                mu_sum += rollouts.back().mu_peak;
            }
            const double mu_epoch = mu_sum / cfg.episodes_per_epoch;
            running_mu = (local_epoch == 0) ? mu_epoch : 0.9 * running_mu + 0.1 * mu_epoch;
            if (running_mu > best_running) {
                best_running = running_mu;
                candidates[best_slot] = model.to_checkpoint();
            }
            result.best_running_mu = std::max(result.best_running_mu, best_running);
            if (local_epoch > 0 && local_epoch % snapshot_stride == 0)
                candidates.push_back(model.to_checkpoint());
            if (!baseline_set) {
                baseline = mu_epoch;
                baseline_set = true;
            }

            auto grads = zero_grads_like<Model, float>(model);
            const float loss = model.batch_loss_and_grads(batch, grads);
            if (!std::isfinite(loss))
                throw NumericError("training diverged: non-finite loss at epoch " +
                                   std::to_string(epoch));

            // Exploration gradient: the antithetic noise injected into each
            // rollout's predictions, weighted by the episode's advantage
            // against its pair partner, estimates d(reward)/d(predictions)
            // along the explored direction with the environment noise
            // cancelled to first order.
            if (cfg.explore_sigma > 0.0 && cfg.reward_weight > 0.0) {
                for (std::size_t e = 0; e < rollouts.size(); ++e) {
                    const auto& ep = rollouts[e];
                    if (ep.noise.size() == 0 || ep.event_tokens.empty())
                        continue;
                    if (ep.mu_peak <= 1.0)
                        continue; // no links landed: no reward signal
                    const std::size_t partner = e ^ 1;
                    const double reference =
                        partner < rollouts.size() ? rollouts[partner].mu_peak : baseline;
                    const double advantage = std::clamp(ep.mu_peak - reference, -1.0, 1.0);
                    if (advantage == 0.0)
                        continue;
                    const double resample =
                        static_cast<double>(ep.total_events) / ep.event_tokens.size();
                    // minus: Adam minimizes, the reward is maximized
                    const double scale = -cfg.reward_weight * advantage * resample /
                                         (cfg.explore_sigma * cfg.episodes_per_epoch);
                    const Vec<float> dpred = (scale * ep.noise).cast<float>();
                    for (const auto& tokens : ep.event_tokens)
                        model.accumulate_output_grads(tokens.cast<float>(), dpred, grads);
                }
            }
            for (const auto& ep : rollouts)
                baseline = 0.9 * baseline + 0.1 * ep.mu_peak;

            adam.step(params, grads);
            result.history.push_back({mu_epoch, static_cast<double>(loss)});
        }
    }

    // validation tournament over the retained candidates, paired on common
    // held-out episode seeds
    result.validation_mu = -std::numeric_limits<double>::infinity();
    for (const Checkpoint& candidate : candidates) {
        const Model scored = Model::from_checkpoint(candidate);
        LiveAgent<Model> scored_agent(scored);
        double mu_sum = 0.0;
        for (int v = 0; v < validation_episodes; ++v)
            mu_sum += evaluate(scored_agent, v);
        const double mean_mu = mu_sum / validation_episodes;
        if (mean_mu > result.validation_mu) {
            result.validation_mu = mean_mu;
            result.best = candidate;
        }
    }
    return result;
}

} // namespace

TrainResult train(Transformer<float>& model, const RolloutFn& rollout, const EvalFn& evaluate,
                  const TrainConfig& cfg, int validation_episodes) {
    return train_impl(model, rollout, evaluate, cfg, validation_episodes);
}

TrainResult train(FcNet<float>& model, const RolloutFn& rollout, const EvalFn& evaluate,
                  const TrainConfig& cfg, int validation_episodes) {
    return train_impl(model, rollout, evaluate, cfg, validation_episodes);
}

// ---------------------------------------------------------------------------

template class Transformer<float>;
template class Transformer<double>;
template class FcNet<float>;
template class FcNet<double>;
template class Adam<float>;
template class Adam<double>;

} // namespace entsched
