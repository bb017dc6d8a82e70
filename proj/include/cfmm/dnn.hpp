// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Unsupervised power-control network.
//
// A four-layer fully connected model maps the (normalized) large-scale
// fading of every AP/user pair to one power coefficient per user. It is
// trained without labels: the loss is the negated minimum user rate, and
// gradients are propagated in reverse mode through the rate formula (in its
// linear-fractional SINR form) and then through the layers.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfmm/errors.hpp"
#include "cfmm/geometry.hpp"
#include "cfmm/rate_model.hpp"

namespace cfmm {

// ---------------------------------------------------------------------------
// Activations

enum class Activation : std::uint8_t { elu = 0, sigmoid = 1 };

inline const char* to_string(Activation a)
{
    return a == Activation::elu ? "elu" : "sigmoid";
}

inline double elu(double x)
{
    return x >= 0.0 ? x : std::expm1(x);
}

inline double elu_derivative(double x)
{
    return x >= 0.0 ? 1.0 : std::exp(x);
}

/// Logistic function, overflow-safe and kept strictly inside (0, 1).
inline double sigmoid(double x)
{
    double s;
    if (x >= 0.0) {
        s = 1.0 / (1.0 + std::exp(-x));
    } else {
        const double e = std::exp(x);
        s = e / (1.0 + e);
    }
    constexpr double lo = std::numeric_limits<double>::denorm_min();
    const double hi = std::nextafter(1.0, 0.0);
    return std::clamp(s, lo, hi);
}

inline double sigmoid_derivative(double x)
{
    const double s = sigmoid(x);
    return s * (1.0 - s);
}

// ---------------------------------------------------------------------------
// Input normalization

enum class InputTransform : std::uint8_t { log_db = 0, linear = 1 };

inline const char* to_string(InputTransform t)
{
    return t == InputTransform::log_db ? "log_db" : "linear";
}

/// Flattens beta (M x K) m-major into a length-MK feature vector.
inline Eigen::VectorXd beta_features(const Eigen::MatrixXd& beta, InputTransform transform)
{
    const Eigen::Index M = beta.rows();
    const Eigen::Index K = beta.cols();
    Eigen::VectorXd x(M * K);
    for (Eigen::Index m = 0; m < M; ++m)
        for (Eigen::Index k = 0; k < K; ++k)
            x(m * K + k) = transform == InputTransform::log_db ? 10.0 * std::log10(beta(m, k)) : beta(m, k);
    return x;
}

struct Normalizer {
    InputTransform transform = InputTransform::linear;
    Eigen::VectorXd mean;
    Eigen::VectorXd std;

    static constexpr double std_floor = 1e-12;

    /// Fit per-feature statistics; `raw` holds one transformed sample per column.
    static Normalizer fit(const Eigen::MatrixXd& raw, InputTransform transform)
    {
        require(raw.cols() >= 1, "cannot fit a normalizer on an empty set");
        Normalizer n;
        n.transform = transform;
        n.mean = raw.rowwise().mean();
        const Eigen::MatrixXd centered = raw.colwise() - n.mean;
        n.std = (centered.array().square().rowwise().sum() / static_cast<double>(raw.cols()))
                    .sqrt()
                    .max(std_floor)
                    .matrix();
        return n;
    }

    static Normalizer identity(Eigen::Index dim, InputTransform transform)
    {
        return {transform, Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
    }

    Eigen::VectorXd apply_raw(const Eigen::VectorXd& raw) const
    {
        require(raw.size() == mean.size(), "feature length does not match normalizer");
        return ((raw - mean).array() / std.array()).matrix();
    }

    Eigen::VectorXd operator()(const Eigen::MatrixXd& beta) const
    {
        return apply_raw(beta_features(beta, transform));
    }
};

// ---------------------------------------------------------------------------
// Model

struct DenseLayer {
    Eigen::MatrixXd weights; // out x in
    Eigen::VectorXd bias;
    Activation activation = Activation::elu;

    Eigen::Index inputs() const { return weights.cols(); }
    Eigen::Index outputs() const { return weights.rows(); }
};

struct Mlp {
    int num_aps = 0;
    int num_users = 0;
    std::vector<DenseLayer> layers;
    Normalizer normalizer;

    Eigen::Index input_dim() const { return static_cast<Eigen::Index>(num_aps) * num_users; }

    std::size_t parameter_count() const
    {
        std::size_t n = 0;
        for (const auto& l : layers)
            n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
        return n;
    }

    void validate() const
    {
        require(!layers.empty(), "model has no layers");
        require(layers.front().inputs() == input_dim(), "first layer width must be M*K");
        require(layers.back().outputs() == num_users, "output width must be K");
        require(layers.back().activation == Activation::sigmoid, "output activation must be sigmoid");
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const auto& l = layers[i];
            require(l.bias.size() == l.outputs(), "bias length mismatch");
            require(l.weights.allFinite() && l.bias.allFinite(), "non-finite parameters");
            if (i > 0)
                require(l.inputs() == layers[i - 1].outputs(), "layer widths do not chain");
        }
        require(normalizer.mean.size() == input_dim() && normalizer.std.size() == input_dim(),
                "normalizer dimension mismatch");
    }
};

/// Layer widths MK -> MK -> K -> M -> K with eLU, eLU, eLU, sigmoid.
/// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
inline Mlp build_model(int num_aps, int num_users, std::uint64_t seed,
                       InputTransform transform = InputTransform::linear)
{
    require(num_aps >= 1 && num_users >= 1, "M and K must be >= 1");
    Mlp model;
    model.num_aps = num_aps;
    model.num_users = num_users;
    const int n0 = num_aps * num_users;
    const int widths[] = {n0, n0, num_users, num_aps, num_users};
    const Activation acts[] = {Activation::elu, Activation::elu, Activation::elu, Activation::sigmoid};

    Rng rng(seed);
    for (int l = 0; l < 4; ++l) {
        const int fan_in = widths[l];
        const int fan_out = widths[l + 1];
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> u(-limit, limit);
        DenseLayer layer;
        layer.weights.resize(fan_out, fan_in);
        for (Eigen::Index i = 0; i < layer.weights.size(); ++i)
            layer.weights.data()[i] = u(rng);
        layer.bias = Eigen::VectorXd::Zero(fan_out);
        layer.activation = acts[l];
        model.layers.push_back(std::move(layer));
    }
    model.normalizer = Normalizer::identity(n0, transform);
    return model;
}

/// Views of every parameter block: W_1, b_1, W_2, b_2, ...
inline std::vector<std::span<double>> parameter_blocks(Mlp& model)
{
    std::vector<std::span<double>> out;
    for (auto& l : model.layers) {
        out.emplace_back(l.weights.data(), static_cast<std::size_t>(l.weights.size()));
        out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    }
    return out;
}

inline Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation a)
{
    return a == Activation::elu ? z.unaryExpr([](double v) { return elu(v); }).eval()
                                : z.unaryExpr([](double v) { return sigmoid(v); }).eval();
}

/// Intermediate values kept for the backward pass.
struct ForwardCache {
    std::vector<Eigen::MatrixXd> pre;  // z_l
    std::vector<Eigen::MatrixXd> post; // x_l, post[0] is the input
};

/// Forward pass on normalized features, one sample per column. Returns K x n.
inline Eigen::MatrixXd forward_features(const Mlp& model, const Eigen::MatrixXd& features,
                                        ForwardCache* cache = nullptr)
{
    require(features.rows() == model.input_dim(), "input dimension mismatch");
    if (cache) {
        cache->pre.clear();
        cache->post.clear();
        cache->post.push_back(features);
    }
    Eigen::MatrixXd x = features;
    for (const auto& l : model.layers) {
        Eigen::MatrixXd z = l.weights * x;
        z.colwise() += l.bias;
        x = activate(z, l.activation);
        if (cache) {
            cache->pre.push_back(std::move(z));
            cache->post.push_back(x);
        }
    }
    return x;
}

/// Power allocation for one realization (beta is M x K, linear).
inline Eigen::VectorXd forward(const Mlp& model, const Eigen::MatrixXd& beta)
{
    require(beta.rows() == model.num_aps && beta.cols() == model.num_users, "beta shape does not match model");
    return forward_features(model, model.normalizer(beta)).col(0);
}

// ---------------------------------------------------------------------------
// Loss and gradients

/// Normalized inputs and SINR coefficients for a set of realizations.
struct ProblemSet {
    Eigen::MatrixXd features; // input_dim x n
    std::vector<SinrCoefficients> coeffs;

    std::size_t size() const { return coeffs.size(); }
};

inline ProblemSet make_problem_set(const Normalizer& normalizer, const std::vector<Eigen::MatrixXd>& betas,
                                   const SystemConfig& cfg)
{
    ProblemSet set;
    if (betas.empty())
        return set;
    set.features.resize(betas.front().size(), static_cast<Eigen::Index>(betas.size()));
    set.coeffs.reserve(betas.size());
    for (std::size_t i = 0; i < betas.size(); ++i) {
        set.features.col(static_cast<Eigen::Index>(i)) = normalizer(betas[i]);
        set.coeffs.push_back(sinr_coefficients(make_rate_context(betas[i], cfg)));
    }
    return set;
}

/// Raw transformed features (before standardization), one column per sample.
inline Eigen::MatrixXd raw_features(const std::vector<Eigen::MatrixXd>& betas, InputTransform transform)
{
    require(!betas.empty(), "empty sample set");
    Eigen::MatrixXd out(betas.front().size(), static_cast<Eigen::Index>(betas.size()));
    for (std::size_t i = 0; i < betas.size(); ++i)
        out.col(static_cast<Eigen::Index>(i)) = beta_features(betas[i], transform);
    return out;
}

/// Minimum rate per column of q (K x n).
inline Eigen::VectorXd min_rates(const Eigen::MatrixXd& q, std::span<const SinrCoefficients* const> coeffs)
{
    Eigen::VectorXd out(q.cols());
    for (Eigen::Index i = 0; i < q.cols(); ++i)
        out(i) = min_rate_of(coeffs[static_cast<std::size_t>(i)]->rates(q.col(i))).value;
    return out;
}

/// Loss = -(1/n) sum_i min_k R_k(q_i) over the selected samples.
inline double batch_loss(const Mlp& model, const ProblemSet& set, std::span<const std::size_t> indices)
{
    require(!indices.empty(), "batch must be non-empty");
    Eigen::MatrixXd x(model.input_dim(), static_cast<Eigen::Index>(indices.size()));
    std::vector<const SinrCoefficients*> co;
    co.reserve(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        x.col(static_cast<Eigen::Index>(i)) = set.features.col(static_cast<Eigen::Index>(indices[i]));
        co.push_back(&set.coeffs[indices[i]]);
    }
    return -min_rates(forward_features(model, x), co).mean();
}

inline double full_loss(const Mlp& model, const ProblemSet& set)
{
    std::vector<std::size_t> all(set.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return batch_loss(model, set, all);
}

/// d(min_k R_k)/dq using the subgradient through the lowest-index argmin user.
inline Eigen::VectorXd min_rate_gradient(const SinrCoefficients& co, const Eigen::VectorXd& q)
{
    const Eigen::Index K = q.size();
    const Eigen::VectorXd denom = co.B * q + co.C;
    const Eigen::VectorXd sinr = (q.array() * co.A.array() / denom.array()).matrix();
    Eigen::Index k = 0;
    for (Eigen::Index j = 1; j < K; ++j)
        if (std::log2(1.0 + sinr(j)) < std::log2(1.0 + sinr(k)))
            k = j;
    // dR_k/dq_j = (dS_k/dq_j) / ((1 + S_k) ln 2)
    // dS_k/dq_j = [j == k] A_k / D_k - q_k A_k B_kj / D_k^2
    const double outer = 1.0 / ((1.0 + sinr(k)) * std::log(2.0));
    Eigen::VectorXd g = (-q(k) * co.A(k) / (denom(k) * denom(k))) * co.B.row(k).transpose();
    g(k) += co.A(k) / denom(k);
    return outer * g;
}

struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> bias;

    std::vector<std::span<const double>> blocks() const
    {
        std::vector<std::span<const double>> out;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            out.emplace_back(weights[l].data(), static_cast<std::size_t>(weights[l].size()));
            out.emplace_back(bias[l].data(), static_cast<std::size_t>(bias[l].size()));
        }
        return out;
    }
};

struct LossAndGradients {
    double loss = 0.0;
    Eigen::MatrixXd q; // K x n outputs of the forward pass
    Eigen::VectorXd min_rates;
    Gradients grads;
};

/// Reverse-mode gradient of the batch loss on already-normalized features.
inline LossAndGradients loss_and_gradients(const Mlp& model, const Eigen::MatrixXd& features,
                                           std::span<const SinrCoefficients* const> coeffs)
{
    const Eigen::Index n = features.cols();
    require(n >= 1 && static_cast<std::size_t>(n) == coeffs.size(), "batch must be non-empty and consistent");

    ForwardCache cache;
    LossAndGradients out;
    out.q = forward_features(model, features, &cache);
    out.min_rates = min_rates(out.q, coeffs);
    out.loss = -out.min_rates.mean();

    // dLoss/dq, K x n
    Eigen::MatrixXd upstream(out.q.rows(), n);
    for (Eigen::Index i = 0; i < n; ++i)
        upstream.col(i) = -min_rate_gradient(*coeffs[static_cast<std::size_t>(i)], out.q.col(i)) / double(n);

    const std::size_t L = model.layers.size();
    out.grads.weights.resize(L);
    out.grads.bias.resize(L);
    for (std::size_t l = L; l-- > 0;) {
        const auto& layer = model.layers[l];
        const Eigen::MatrixXd& z = cache.pre[l];
        Eigen::MatrixXd dz;
        if (layer.activation == Activation::sigmoid) {
            const Eigen::MatrixXd& s = cache.post[l + 1];
            dz = upstream.array() * s.array() * (1.0 - s.array());
        } else {
            dz = upstream.array() * z.unaryExpr([](double v) { return elu_derivative(v); }).array();
        }
        out.grads.weights[l].noalias() = dz * cache.post[l].transpose();
        out.grads.bias[l] = dz.rowwise().sum();
        if (l > 0)
            upstream.noalias() = layer.weights.transpose() * dz;
    }
    return out;
}

inline LossAndGradients gradients(const Mlp& model, const ProblemSet& set, std::span<const std::size_t> indices)
{
    require(!indices.empty(), "batch must be non-empty");
    Eigen::MatrixXd x(model.input_dim(), static_cast<Eigen::Index>(indices.size()));
    std::vector<const SinrCoefficients*> co;
    co.reserve(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        x.col(static_cast<Eigen::Index>(i)) = set.features.col(static_cast<Eigen::Index>(indices[i]));
        co.push_back(&set.coeffs[indices[i]]);
    }
    return loss_and_gradients(model, x, co);
}

// ---------------------------------------------------------------------------
// Adam

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<std::vector<double>> first;
    std::vector<std::vector<double>> second;
    std::int64_t step = 0;

    static AdamState for_model(const Mlp& model)
    {
        AdamState s;
        for (const auto& l : model.layers) {
            s.first.emplace_back(static_cast<std::size_t>(l.weights.size()), 0.0);
            s.first.emplace_back(static_cast<std::size_t>(l.bias.size()), 0.0);
        }
        s.second = s.first;
        return s;
    }
};

/// One bias-corrected Adam update of every parameter.
inline void adam_step(Mlp& model, const Gradients& grads, AdamState& state, double lr,
                      const AdamParams& params = {})
{
    auto theta = parameter_blocks(model);
    const auto g = grads.blocks();
    require(theta.size() == g.size() && theta.size() == state.first.size() && theta.size() == state.second.size(),
            "gradient/optimizer block count mismatch");
    for (std::size_t b = 0; b < theta.size(); ++b)
        require(theta[b].size() == g[b].size() && theta[b].size() == state.first[b].size()
                    && theta[b].size() == state.second[b].size(),
                "gradient/optimizer block shape mismatch");

    ++state.step;
    const double c1 = 1.0 - std::pow(params.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(params.beta2, static_cast<double>(state.step));
    for (std::size_t b = 0; b < theta.size(); ++b) {
        auto& m = state.first[b];
        auto& v = state.second[b];
        for (std::size_t i = 0; i < theta[b].size(); ++i) {
            const double gi = g[b][i];
            m[i] = params.beta1 * m[i] + (1.0 - params.beta1) * gi;
            v[i] = params.beta2 * v[i] + (1.0 - params.beta2) * gi * gi;
            theta[b][i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + params.epsilon);
        }
    }
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    int iterations = 10000;
    int batch_size = 100;
    double learning_rate = 0.01;
    int validation_every = 50;
    AdamParams adam;
    std::uint64_t seed = 1;
    InputTransform input_transform = InputTransform::linear;

    void validate() const
    {
        require(iterations >= 0, "iterations must be >= 0");
        require(batch_size >= 1, "batch_size must be >= 1");
        require(validation_every >= 1, "validation_every must be >= 1");
        require(learning_rate > 0, "learning_rate must be positive");
        require(adam.beta1 >= 0 && adam.beta1 < 1 && adam.beta2 >= 0 && adam.beta2 < 1 && adam.epsilon > 0,
                "invalid Adam constants");
    }
};

struct HistoryEntry {
    std::int64_t iteration = 0;
    double train_loss = 0.0; // mini-batch loss at that iteration (NaN at iteration 0)
    double validation_loss = 0.0;
};

struct TrainResult {
    Mlp model; // best-validation parameters
    std::vector<HistoryEntry> history;
    std::int64_t best_iteration = 0;
    double best_validation_loss = 0.0;
};

/// Mini-batch Adam on the negated min-rate loss. Validation runs at
/// iteration 0, every `validation_every` iterations and after the last one;
/// the parameters with the lowest validation loss are returned.
inline TrainResult train(Mlp model, const ProblemSet& train_set, const ProblemSet& val_set, const TrainConfig& cfg)
{
    cfg.validate();
    model.validate();
    require(train_set.size() >= 1 && val_set.size() >= 1, "training and validation sets must be non-empty");

    TrainResult result;
    AdamState adam = AdamState::for_model(model);
    Rng rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> pick(0, train_set.size() - 1);
    std::vector<std::size_t> batch(static_cast<std::size_t>(cfg.batch_size));

    result.best_validation_loss = full_loss(model, val_set);
    result.best_iteration = 0;
    result.model = model;
    result.history.push_back({0, std::numeric_limits<double>::quiet_NaN(), result.best_validation_loss});

    for (int it = 1; it <= cfg.iterations; ++it) {
        for (auto& b : batch)
            b = pick(rng);
        auto lg = gradients(model, train_set, batch);
        adam_step(model, lg.grads, adam, cfg.learning_rate, cfg.adam);

        if (it % cfg.validation_every == 0 || it == cfg.iterations) {
            const double val = full_loss(model, val_set);
            result.history.push_back({it, lg.loss, val});
            if (val < result.best_validation_loss) {
                result.best_validation_loss = val;
                result.best_iteration = it;
                result.model = model;
            }
        }
    }
    return result;
}

/// Convenience wrapper: fits the normalizer on the training betas, builds
/// both problem sets and trains a freshly initialized model.
inline TrainResult train(const std::vector<Eigen::MatrixXd>& train_betas,
                         const std::vector<Eigen::MatrixXd>& val_betas, const SystemConfig& sys,
                         const TrainConfig& cfg)
{
    require(!train_betas.empty() && !val_betas.empty(), "training and validation sets must be non-empty");
    Mlp model = build_model(sys.num_aps, sys.num_users, cfg.seed, cfg.input_transform);
    model.normalizer = Normalizer::fit(raw_features(train_betas, cfg.input_transform), cfg.input_transform);
    const ProblemSet tr = make_problem_set(model.normalizer, train_betas, sys);
    const ProblemSet va = make_problem_set(model.normalizer, val_betas, sys);
    return train(std::move(model), tr, va, cfg);
}

// ---------------------------------------------------------------------------
// Online fine-tuning

struct FinetuneConfig {
    int iterations = 100;
    double learning_rate = 0.01;
    AdamParams adam;
};

struct FinetuneResult {
    Eigen::VectorXd q;        // best allocation seen
    double min_rate = 0.0;    // its minimum user rate
    double initial_min_rate = 0.0;
    int best_iteration = 0;   // 0 means the offline model's own output
};

/// Continues unsupervised training on a private copy of the model using a
/// single realization, and returns the best allocation seen at any step
/// (the untouched model's output included).
inline FinetuneResult online_finetune(const Mlp& model, const Eigen::VectorXd& features,
                                      const SinrCoefficients& coeffs, const FinetuneConfig& cfg = {})
{
    require(cfg.iterations >= 0 && cfg.learning_rate > 0, "invalid fine-tuning configuration");
    Mlp local = model;
    AdamState adam = AdamState::for_model(local);
    const SinrCoefficients* co[] = {&coeffs};
    const Eigen::MatrixXd x = features;

    FinetuneResult out;
    for (int it = 0;; ++it) {
        if (it == cfg.iterations) {
            const Eigen::VectorXd q = forward_features(local, x).col(0);
            const double r = min_rate_of(coeffs.rates(q)).value;
            if (it == 0) {
                out.initial_min_rate = r;
                out.min_rate = r;
                out.q = q;
            } else if (r > out.min_rate) {
                out.min_rate = r;
                out.q = q;
                out.best_iteration = it;
            }
            break;
        }
        auto lg = loss_and_gradients(local, x, co);
        const double r = lg.min_rates(0);
        if (it == 0) {
            out.initial_min_rate = r;
            out.min_rate = r;
            out.q = lg.q.col(0);
        } else if (r > out.min_rate) {
            out.min_rate = r;
            out.q = lg.q.col(0);
            out.best_iteration = it;
        }
        adam_step(local, lg.grads, adam, cfg.learning_rate, cfg.adam);
    }
    return out;
}

inline FinetuneResult online_finetune(const Mlp& model, const Eigen::MatrixXd& beta, const SystemConfig& sys,
                                      const FinetuneConfig& cfg = {})
{
    return online_finetune(model, model.normalizer(beta), sinr_coefficients(make_rate_context(beta, sys)), cfg);
}

} // namespace cfmm
