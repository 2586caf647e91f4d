#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gradforge/backprop.hpp"
#include "gradforge/data.hpp"
#include "gradforge/errors.hpp"
#include "gradforge/loss.hpp"
#include "gradforge/network.hpp"
#include "gradforge/rng.hpp"

namespace gradforge {

enum class Scheme { FullBatch, SingleWithReplacement, EpochShuffle, MiniBatch };

struct SamplingScheme {
    Scheme kind = Scheme::SingleWithReplacement;
    std::size_t batch = 1;          // MiniBatch only
    bool with_replacement = false;  // MiniBatch only

    static SamplingScheme full_batch() { return {Scheme::FullBatch, 0, false}; }
    static SamplingScheme single_with_replacement() {
        return {Scheme::SingleWithReplacement, 1, true};
    }
    static SamplingScheme epoch_shuffle() { return {Scheme::EpochShuffle, 1, false}; }
    static SamplingScheme mini_batch(std::size_t m, bool with_replacement = false) {
        return {Scheme::MiniBatch, m, with_replacement};
    }
};

/// One learning-rate entry: eta applies to units lo..hi inclusive, where a
/// unit is an epoch when the budget is epochs and a step otherwise.
struct LrRange {
    std::size_t lo = 0;
    std::size_t hi = 0;
    double eta = 0.0;
};

struct TrainConfig {
    SamplingScheme scheme = SamplingScheme::single_with_replacement();
    std::vector<LrRange> lr_schedule;   // must cover the whole budget
    double momentum = 0.0;              // in [0,1)
    std::vector<double> dropout_probs;  // per layer, drop probability; empty = none
    bool budget_is_epochs = false;
    std::size_t budget = 0;             // Niter, or epochs when budget_is_epochs
    std::uint64_t seed = 0;
    std::size_t cost_log_stride = 1;
    bool log_sample_indices = false;    // records every visited index; tests only

    static TrainConfig fixed_eta(double eta, std::size_t niter) {
        TrainConfig c;
        c.lr_schedule = {{0, niter == 0 ? 0 : niter - 1, eta}};
        c.budget = niter;
        return c;
    }
};

struct CostPoint {
    std::size_t step = 0; // number of completed updates
    double train_cost = 0.0;
    std::optional<double> val_cost;
};

struct TrainReport {
    std::vector<CostPoint> cost_history;
    NetworkSpec final_net;
    std::size_t steps_taken = 0;
    std::vector<std::size_t> sample_log; // only when log_sample_indices
};

/// Polyak momentum update: v <- momentum * v - eta * g; p <- p + v.
/// With momentum 0 this is exactly p <- p - eta * g.
inline void sgd_step(NetworkSpec& net, const GradientBundle& grad, double eta,
                     double momentum, GradientBundle& velocity) {
    std::vector<double*> params = param_ptrs(net);
    GradientBundle g_check = GradientBundle::zeros_like(net);
    if (!grad.same_shape(g_check) || !velocity.same_shape(g_check))
        throw std::logic_error("sgd_step: gradient/velocity shape does not mirror the network");
    std::size_t r = 0;
    for (std::size_t l = 0; l < grad.layers.size(); ++l) {
        for (std::size_t i = 0; i < grad.layers[l].weights.size(); ++i, ++r) {
            double& v = velocity.layers[l].weights[i];
            v = momentum * v - eta * grad.layers[l].weights[i];
            *params[r] += v;
        }
        for (std::size_t i = 0; i < grad.layers[l].biases.size(); ++i, ++r) {
            double& v = velocity.layers[l].biases[i];
            v = momentum * v - eta * grad.layers[l].biases[i];
            *params[r] += v;
        }
    }
}

/// Bernoulli keep/drop mask: 0 with probability p_drop, else 1.
inline Vector draw_dropout_mask(std::size_t n, double p_drop, Pcg32& rng) {
    if (!(p_drop >= 0.0 && p_drop < 1.0))
        throw ConfigError("dropout: p_drop must be in [0,1), got " + std::to_string(p_drop));
    Vector mask(n, 1.0);
    if (p_drop > 0.0)
        for (double& m : mask)
            if (rng.bernoulli(p_drop)) m = 0.0;
    return mask;
}

/// Folds train-time dropout into the weights for full-network inference:
/// a layer whose outputs were dropped with probability p has the next
/// parameterized layer's weights scaled by the retention factor (1 - p).
/// Pool layers in between are fine (positively homogeneous); an activation
/// layer in between has no equivalent weight scaling and is rejected.
inline NetworkSpec inference_scaled(NetworkSpec net, const std::vector<double>& dropout_probs) {
    if (dropout_probs.empty()) return net;
    if (dropout_probs.size() != net.layers.size())
        throw ConfigError("dropout: " + std::to_string(dropout_probs.size()) +
                          " probabilities for " + std::to_string(net.layers.size()) + " layers");
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const double p = dropout_probs[l];
        if (p == 0.0) continue;
        if (!(p > 0.0 && p < 1.0))
            throw ConfigError("dropout: probabilities must be in [0,1), got " +
                              std::to_string(p));
        std::size_t k = l + 1;
        while (k < net.layers.size() && std::holds_alternative<PoolLayer>(net.layers[k])) ++k;
        if (k == net.layers.size())
            throw ConfigError("dropout: layer " + std::to_string(l + 1) +
                              " has no following parameterized layer to fold the retention "
                              "factor into");
        const double retain = 1.0 - p;
        if (auto* d = std::get_if<DenseLayer>(&net.layers[k]))
            scale_in_place(d->weights.data, retain);
        else if (auto* c = std::get_if<ConvLayer>(&net.layers[k]))
            scale_in_place(c->filters.data, retain);
        else
            throw ConfigError("dropout: layer " + std::to_string(l + 1) +
                              " is followed by an activation layer; the retention factor "
                              "cannot be folded through it");
    }
    return net;
}

/// Mean of the per-sample data gradients over `indices` plus the dataset
/// regularization pull (2 lambda / N) W, N the full training-set size.
inline GradientBundle batch_gradient(const NetworkSpec& net, const LabeledDataset& data,
                                     const std::vector<std::size_t>& indices,
                                     const LossKind& loss, std::size_t dataset_size,
                                     const DropoutPlan* dropout = nullptr) {
    GradientBundle sum = GradientBundle::zeros_like(net);
    const LossKind data_only{loss.tag, 0.0};
    const double inv_m = 1.0 / static_cast<double>(indices.size());
    ForwardTrace trace;
    for (std::size_t idx : indices) {
        forward_into(net, data.inputs[idx], trace, dropout);
        sum.scaled_add(backward(net, trace, target_for(loss, data, idx), data_only), inv_m);
    }
    detail::add_regularization(net, loss.lambda, 1.0 / static_cast<double>(dataset_size), sum);
    return sum;
}

/// Gradient of dataset_cost: batch over every index in order.
inline GradientBundle full_batch_gradient(const NetworkSpec& net, const LabeledDataset& data,
                                          const LossKind& loss) {
    if (data.empty()) throw DomainError("full_batch_gradient: empty dataset");
    std::vector<std::size_t> all(data.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return batch_gradient(net, data, all, loss, data.size());
}

namespace detail {

inline std::size_t steps_per_epoch(const SamplingScheme& s, std::size_t n) {
    switch (s.kind) {
        case Scheme::FullBatch: return 1;
        case Scheme::SingleWithReplacement:
        case Scheme::EpochShuffle: return n;
        case Scheme::MiniBatch: return (n + s.batch - 1) / s.batch;
    }
    return 1;
}

inline double schedule_lookup(const std::vector<LrRange>& schedule, std::size_t unit) {
    for (const LrRange& r : schedule)
        if (unit >= r.lo && unit <= r.hi) return r.eta;
    throw ConfigError("lr_schedule: no entry covers unit " + std::to_string(unit));
}

inline void validate_train_config(const TrainConfig& cfg, const NetworkSpec& net,
                                  std::size_t n) {
    if (n == 0) throw DomainError("train: empty training set");
    if (cfg.scheme.kind == Scheme::MiniBatch) {
        if (cfg.scheme.batch < 1)
            throw ConfigError("scheme: mini-batch size must be at least 1");
        if (cfg.scheme.batch > n)
            throw ConfigError("scheme: mini-batch size " + std::to_string(cfg.scheme.batch) +
                              " exceeds training-set size " + std::to_string(n));
    }
    if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0))
        throw ConfigError("momentum: must be in [0,1), got " + std::to_string(cfg.momentum));
    if (cfg.lr_schedule.empty()) throw ConfigError("lr_schedule: empty");
    for (const LrRange& r : cfg.lr_schedule) {
        if (!(r.eta > 0.0))
            throw ConfigError("lr_schedule: eta must be positive, got " + std::to_string(r.eta));
        if (r.hi < r.lo) throw ConfigError("lr_schedule: range has hi < lo");
    }
    if (!cfg.dropout_probs.empty()) {
        if (cfg.dropout_probs.size() != net.layers.size())
            throw ConfigError("dropout: " + std::to_string(cfg.dropout_probs.size()) +
                              " probabilities for " + std::to_string(net.layers.size()) +
                              " layers");
        for (double p : cfg.dropout_probs)
            if (!(p >= 0.0 && p < 1.0))
                throw ConfigError("dropout: probabilities must be in [0,1), got " +
                                  std::to_string(p));
    }
    if (cfg.cost_log_stride == 0) throw ConfigError("cost_log_stride: must be at least 1");
}

} // namespace detail

/// The training loop: forward, backward, update, per step, under the
/// configured sampling scheme. Deterministic given (config, seed); sampling,
/// shuffling and dropout draw from independent seed-derived streams.
inline TrainReport train(const NetworkSpec& initial, const LabeledDataset& train_data,
                         const LabeledDataset* val_data, const LossKind& loss,
                         const TrainConfig& cfg) {
    const std::size_t n = train_data.size();
    detail::validate_train_config(cfg, initial, n);
    const std::vector<Shape3> shapes = layer_shapes(initial);

    const std::size_t per_epoch = detail::steps_per_epoch(cfg.scheme, n);
    const std::size_t total_steps = cfg.budget_is_epochs ? cfg.budget * per_epoch : cfg.budget;
    const std::size_t schedule_units =
        cfg.budget_is_epochs ? cfg.budget : total_steps;
    for (std::size_t u = 0; u < schedule_units; ++u)
        detail::schedule_lookup(cfg.lr_schedule, u); // fail fast on gaps

    Pcg32 sample_rng = make_rng(cfg.seed, RngStream::Sampling);
    Pcg32 shuffle_rng = make_rng(cfg.seed, RngStream::Shuffle);
    Pcg32 dropout_rng = make_rng(cfg.seed, RngStream::Dropout);

    TrainReport report;
    report.final_net = initial;
    NetworkSpec& net = report.final_net;

    GradientBundle velocity = GradientBundle::zeros_like(net);
    const bool use_dropout =
        !cfg.dropout_probs.empty() &&
        std::any_of(cfg.dropout_probs.begin(), cfg.dropout_probs.end(),
                    [](double p) { return p > 0.0; });
    DropoutPlan plan;
    if (use_dropout) plan.masks.resize(net.layers.size());

    const auto log_costs = [&](std::size_t step) {
        CostPoint p;
        p.step = step;
        p.train_cost = dataset_cost(loss, net, train_data);
        if (val_data && !val_data->empty())
            p.val_cost = dataset_cost(loss, net, *val_data);
        if (!std::isfinite(p.train_cost))
            throw NumericError("train: cost became non-finite at step " + std::to_string(step));
        report.cost_history.push_back(std::move(p));
    };
    log_costs(0);

    std::vector<std::size_t> permutation;
    std::size_t cursor = 0;
    std::vector<std::size_t> batch;

    for (std::size_t step = 0; step < total_steps; ++step) {
        const std::size_t unit = cfg.budget_is_epochs ? step / per_epoch : step;
        const double eta = detail::schedule_lookup(cfg.lr_schedule, unit);

        batch.clear();
        switch (cfg.scheme.kind) {
            case Scheme::FullBatch:
                for (std::size_t i = 0; i < n; ++i) batch.push_back(i);
                break;
            case Scheme::SingleWithReplacement:
                batch.push_back(sample_rng.uniform_below(static_cast<std::uint32_t>(n)));
                break;
            case Scheme::EpochShuffle:
                if (cursor == permutation.size()) {
                    permutation = shuffled_indices(n, shuffle_rng);
                    cursor = 0;
                }
                batch.push_back(permutation[cursor++]);
                break;
            case Scheme::MiniBatch:
                if (cfg.scheme.with_replacement) {
                    for (std::size_t i = 0; i < cfg.scheme.batch; ++i)
                        batch.push_back(
                            sample_rng.uniform_below(static_cast<std::uint32_t>(n)));
                } else {
                    for (std::size_t i = 0; i < cfg.scheme.batch; ++i) {
                        if (cursor == permutation.size()) {
                            permutation = shuffled_indices(n, shuffle_rng);
                            cursor = 0;
                        }
                        batch.push_back(permutation[cursor++]);
                    }
                }
                break;
        }
        if (cfg.log_sample_indices)
            report.sample_log.insert(report.sample_log.end(), batch.begin(), batch.end());

        const DropoutPlan* plan_ptr = nullptr;
        if (use_dropout) {
            for (std::size_t l = 0; l < net.layers.size(); ++l) {
                const double p = cfg.dropout_probs[l];
                plan.masks[l] =
                    p > 0.0 ? draw_dropout_mask(shapes[l + 1].volume(), p, dropout_rng)
                            : Vector{};
            }
            plan_ptr = &plan;
        }

        GradientBundle grad = batch_gradient(net, train_data, batch, loss, n, plan_ptr);
        sgd_step(net, grad, eta, cfg.momentum, velocity);
        report.steps_taken = step + 1;

        const std::size_t done = step + 1;
        if (done % cfg.cost_log_stride == 0 || done == total_steps) log_costs(done);
    }
    return report;
}

} // namespace gradforge
