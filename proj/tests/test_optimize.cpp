#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "gradforge/model_io.hpp"
#include "gradforge/optimize.hpp"
#include "test_util.hpp"

using namespace gradforge;

namespace {

LabeledDataset two_class_blobs(std::size_t n, std::uint64_t seed) {
    Pcg32 rng(seed, 0);
    LabeledDataset d;
    d.num_classes = 2;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t label = i % 2;
        const double cx = label == 0 ? 0.25 : 0.75;
        d.append({cx + 0.1 * rng.normal(), 0.5 + 0.1 * rng.normal()}, label);
    }
    return d;
}

GradientBundle random_bundle_like(const NetworkSpec& net, Pcg32& rng) {
    GradientBundle g = GradientBundle::zeros_like(net);
    for (double* p : bundle_param_ptrs(g)) *p = rng.normal();
    return g;
}

} // namespace

TEST(SgdStep, ZeroGradientIsFixedPoint) {
    NetworkSpec net = gftest::dense_net({2, 3, 2}, ActivationKind::sigmoid(), 3);
    const std::string before = model_to_string(net);
    GradientBundle zero = GradientBundle::zeros_like(net);
    GradientBundle velocity = GradientBundle::zeros_like(net);
    sgd_step(net, zero, 0.5, 0.0, velocity);
    EXPECT_EQ(model_to_string(net), before);
}

TEST(SgdStep, ScalarQuadraticStep) {
    // C(w) = 1/2 w^2, eta = 0.1, w0 = 1 -> w1 = 0.9.
    NetworkSpec net = NetworkSpec::dense(1).add_dense(1, ActivationKind::identity());
    std::get<DenseLayer>(net.layers[0]).weights = Matrix(1, 1, {1.0});
    GradientBundle g = GradientBundle::zeros_like(net);
    g.layers[0].weights[0] = 1.0; // dC/dw = w = 1
    GradientBundle velocity = GradientBundle::zeros_like(net);
    sgd_step(net, g, 0.1, 0.0, velocity);
    EXPECT_DOUBLE_EQ(std::get<DenseLayer>(net.layers[0]).weights.data[0], 0.9);
}

TEST(SgdStep, MomentumZeroIsPlainSgdBitwise) {
    Pcg32 rng(17, 0);
    for (int trial = 0; trial < 20; ++trial) {
        NetworkSpec net = gftest::dense_net({3, 4, 2}, ActivationKind::sigmoid(),
                                            600 + static_cast<std::uint64_t>(trial));
        NetworkSpec manual = net;
        const GradientBundle g = random_bundle_like(net, rng);
        const double eta = 0.05 + rng.uniform_double();

        GradientBundle velocity = GradientBundle::zeros_like(net);
        sgd_step(net, g, eta, 0.0, velocity);

        // p <- p - eta * g, written out by hand.
        std::vector<double*> params = param_ptrs(manual);
        GradientBundle gc = g;
        std::vector<double*> grads = bundle_param_ptrs(gc);
        for (std::size_t r = 0; r < params.size(); ++r) *params[r] -= eta * *grads[r];

        EXPECT_EQ(model_to_string(net), model_to_string(manual));
    }
}

TEST(SgdStep, MiniBatchOfFullSizeEqualsFullBatchStepBitwise) {
    const LabeledDataset data = two_class_blobs(8, 9);
    NetworkSpec a = gftest::dense_net({2, 3, 2}, ActivationKind::sigmoid(), 31);
    NetworkSpec b = a;
    std::vector<std::size_t> all(data.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

    // Same index order, same averaging: the two steps are the same numbers.
    const GradientBundle ga = batch_gradient(a, data, all, LossKind::quadratic(), data.size());
    const GradientBundle gb = full_batch_gradient(b, data, LossKind::quadratic());
    GradientBundle va = GradientBundle::zeros_like(a);
    GradientBundle vb = GradientBundle::zeros_like(b);
    sgd_step(a, ga, 0.05, 0.0, va);
    sgd_step(b, gb, 0.05, 0.0, vb);
    EXPECT_EQ(model_to_string(a), model_to_string(b));
}

TEST(Gradient, MiniBatchOfFullSizeMatchesDatasetGradient) {
    const LabeledDataset data = two_class_blobs(12, 10);
    const NetworkSpec net = gftest::dense_net({2, 4, 2}, ActivationKind::sigmoid(), 33);
    // Shuffled visiting order, as an epoch of the m = N scheme would use.
    Pcg32 rng(44, 0);
    std::vector<std::size_t> order = shuffled_indices(data.size(), rng);
    const GradientBundle shuffled =
        batch_gradient(net, data, order, LossKind::quadratic(0.1), data.size());
    const GradientBundle full = full_batch_gradient(net, data, LossKind::quadratic(0.1));
    EXPECT_LT(compare_bundles(shuffled, full).max_rel, 1e-12);
}

TEST(Gradient, FullBatchMatchesFiniteDifferencesOfDatasetCost) {
    const LabeledDataset data = two_class_blobs(6, 11);
    const LossKind loss = LossKind::quadratic(0.2);
    const NetworkSpec net = gftest::dense_net({2, 3, 2}, ActivationKind::sigmoid(), 71);
    const GradientBundle analytic = full_batch_gradient(net, data, loss);
    const GradientBundle fd = fd_gradient_of(
        net, [&](const NetworkSpec& n) { return dataset_cost(loss, n, data); });
    EXPECT_LT(compare_bundles(analytic, fd).max_rel, 1e-6);
}

TEST(Train, ZeroBudgetReturnsInitialNet) {
    const LabeledDataset data = toy_dataset();
    const NetworkSpec net = gftest::dense_net({2, 2, 3, 2}, ActivationKind::sigmoid(), 1);
    TrainConfig cfg = TrainConfig::fixed_eta(0.05, 0);
    cfg.lr_schedule = {{0, 0, 0.05}};
    const TrainReport report = train(net, data, nullptr, LossKind::quadratic(), cfg);
    EXPECT_EQ(report.steps_taken, 0u);
    EXPECT_EQ(model_to_string(report.final_net), model_to_string(net));
    ASSERT_EQ(report.cost_history.size(), 1u);
    EXPECT_EQ(report.cost_history[0].step, 0u);
}

TEST(Train, EpochShuffleVisitsEachIndexOncePerEpoch) {
    const LabeledDataset data = two_class_blobs(5, 12);
    const NetworkSpec net = gftest::dense_net({2, 2}, ActivationKind::sigmoid(), 5);
    TrainConfig cfg;
    cfg.scheme = SamplingScheme::epoch_shuffle();
    cfg.lr_schedule = {{0, 2, 0.01}};
    cfg.budget_is_epochs = true;
    cfg.budget = 3;
    cfg.seed = 99;
    cfg.cost_log_stride = 100;
    cfg.log_sample_indices = true;
    const TrainReport report = train(net, data, nullptr, LossKind::quadratic(), cfg);
    ASSERT_EQ(report.sample_log.size(), 15u);
    for (int epoch = 0; epoch < 3; ++epoch) {
        std::vector<std::size_t> seen(report.sample_log.begin() + epoch * 5,
                                      report.sample_log.begin() + (epoch + 1) * 5);
        std::sort(seen.begin(), seen.end());
        EXPECT_EQ(seen, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
    }
}

TEST(Train, DeterministicGivenSeed) {
    const LabeledDataset data = toy_dataset();
    const NetworkSpec net = gftest::dense_net({2, 2, 3, 2}, ActivationKind::sigmoid(), 4);
    TrainConfig cfg = TrainConfig::fixed_eta(0.05, 500);
    cfg.seed = 7;
    cfg.cost_log_stride = 50;
    cfg.dropout_probs = {0.2, 0.2, 0.0};
    const TrainReport a = train(net, data, nullptr, LossKind::quadratic(), cfg);
    const TrainReport b = train(net, data, nullptr, LossKind::quadratic(), cfg);
    EXPECT_EQ(model_to_string(a.final_net), model_to_string(b.final_net));
    ASSERT_EQ(a.cost_history.size(), b.cost_history.size());
    for (std::size_t i = 0; i < a.cost_history.size(); ++i) {
        EXPECT_EQ(a.cost_history[i].step, b.cost_history[i].step);
        EXPECT_EQ(a.cost_history[i].train_cost, b.cost_history[i].train_cost);
    }
}

TEST(Train, MomentumZeroMatchesManualLoopBitwise) {
    const LabeledDataset data = two_class_blobs(6, 13);
    const NetworkSpec initial = gftest::dense_net({2, 3, 2}, ActivationKind::sigmoid(), 8);
    TrainConfig cfg = TrainConfig::fixed_eta(0.1, 50);
    cfg.seed = 21;
    cfg.cost_log_stride = 1000;
    const TrainReport report = train(initial, data, nullptr, LossKind::quadratic(), cfg);

    // Replicate the loop: same sampling stream, plain p -= eta * g updates.
    NetworkSpec net = initial;
    Pcg32 sample_rng = make_rng(cfg.seed, RngStream::Sampling);
    GradientBundle velocity = GradientBundle::zeros_like(net);
    for (int step = 0; step < 50; ++step) {
        const std::size_t idx =
            sample_rng.uniform_below(static_cast<std::uint32_t>(data.size()));
        const GradientBundle g =
            batch_gradient(net, data, {idx}, LossKind::quadratic(), data.size());
        sgd_step(net, g, 0.1, 0.0, velocity);
    }
    EXPECT_EQ(model_to_string(report.final_net), model_to_string(net));
}

// Full-batch steepest descent on a linear least-squares problem (identity
// activation): strictly convex, so small steps decrease the cost every time.
TEST(Train, FullBatchMonotoneOnConvexProblem) {
    const LabeledDataset data = two_class_blobs(10, 14);
    const NetworkSpec net = gftest::dense_net({2, 2}, ActivationKind::identity(), 9);
    double bound = 0.0;
    for (const Vector& x : data.inputs) bound = std::max(bound, sq_norm(x) + 1.0);
    TrainConfig cfg;
    cfg.scheme = SamplingScheme::full_batch();
    cfg.lr_schedule = {{0, 199, 0.5 / bound}};
    cfg.budget = 200;
    cfg.cost_log_stride = 1;
    const TrainReport report = train(net, data, nullptr, LossKind::quadratic(), cfg);
    for (std::size_t i = 1; i < report.cost_history.size(); ++i)
        EXPECT_LT(report.cost_history[i].train_cost, report.cost_history[i - 1].train_cost);
}

// The directional derivative of the cost along -gradient is nonpositive.
TEST(Gradient, NegativeGradientIsDescentDirection) {
    const LabeledDataset data = two_class_blobs(8, 15);
    const LossKind loss = LossKind::quadratic();
    for (int trial = 0; trial < 5; ++trial) {
        NetworkSpec net = gftest::dense_net({2, 4, 2}, ActivationKind::sigmoid(),
                                            300 + static_cast<std::uint64_t>(trial));
        const GradientBundle g = full_batch_gradient(net, data, loss);
        const double t = 1e-6;
        NetworkSpec plus = net, minus = net;
        std::vector<double*> pp = param_ptrs(plus), pm = param_ptrs(minus);
        GradientBundle gc = g;
        std::vector<double*> gp = bundle_param_ptrs(gc);
        for (std::size_t r = 0; r < pp.size(); ++r) {
            *pp[r] -= t * *gp[r];
            *pm[r] += t * *gp[r];
        }
        const double directional =
            (dataset_cost(loss, plus, data) - dataset_cost(loss, minus, data)) / (2 * t);
        EXPECT_LE(directional, 1e-10);
    }
}

TEST(Dropout, DisabledMaskIsAllOnes) {
    Pcg32 rng(16, 0);
    const Vector mask = draw_dropout_mask(50, 0.0, rng);
    for (double m : mask) EXPECT_EQ(m, 1.0);
}

TEST(Dropout, EmpiricalRateMatchesProbability) {
    for (double p : {0.15, 0.35, 0.5}) {
        Pcg32 rng(17, static_cast<std::uint64_t>(p * 100));
        std::size_t dropped = 0;
        const std::size_t n = 100000;
        for (std::size_t i = 0; i < n; i += 1000) {
            const Vector mask = draw_dropout_mask(1000, p, rng);
            for (double m : mask)
                if (m == 0.0) ++dropped;
        }
        EXPECT_NEAR(static_cast<double>(dropped) / static_cast<double>(n), p, 0.01);
    }
}

TEST(Dropout, MaskedCoordinateHasZeroDelta) {
    NetworkSpec net = gftest::dense_net({2, 4, 2}, ActivationKind::sigmoid(), 18);
    DropoutPlan plan;
    plan.masks.resize(2);
    plan.masks[0] = {1.0, 0.0, 1.0, 0.0}; // drop hidden units 1 and 3

    ForwardTrace trace;
    forward_into(net, {0.3, -0.6}, trace, &plan);
    EXPECT_EQ(trace.activations[1][1], 0.0);
    EXPECT_EQ(trace.activations[1][3], 0.0);

    const GradientBundle g =
        backward(net, trace, Target{Vector{1.0, 0.0}}, LossKind::quadratic());
    // delta^[1] is the layer-0 bias gradient; masked coordinates carry none.
    EXPECT_EQ(g.layers[0].biases[1], 0.0);
    EXPECT_EQ(g.layers[0].biases[3], 0.0);
    EXPECT_NE(g.layers[0].biases[0], 0.0);
    // and the weight rows feeding them are zero too
    EXPECT_EQ(g.layers[0].weights[1 * 2 + 0], 0.0);
    EXPECT_EQ(g.layers[0].weights[3 * 2 + 1], 0.0);
}

TEST(Dropout, TrainingWithMasksMatchesFiniteDifferenceOfMaskedNet) {
    // With a fixed mask, gradients must match finite differences of the
    // masked forward map.
    NetworkSpec net = gftest::dense_net({2, 3, 2}, ActivationKind::sigmoid(), 19);
    DropoutPlan plan;
    plan.masks.resize(2);
    plan.masks[0] = {1.0, 0.0, 1.0};
    const Vector x{0.4, 0.9};
    const Target target{Vector{0.0, 1.0}};
    ForwardTrace trace;
    forward_into(net, x, trace, &plan);
    const GradientBundle bp = backward(net, trace, target, LossKind::quadratic());
    const GradientBundle fd = fd_gradient_of(net, [&](const NetworkSpec& n) {
        ForwardTrace t;
        forward_into(n, x, t, &plan);
        return sample_cost(LossKind::quadratic(), t.output(), target);
    });
    EXPECT_LT(compare_bundles(bp, fd).max_rel, 1e-6);
}

TEST(Dropout, InferenceScalingFoldsRetentionIntoNextLayer) {
    NetworkSpec net = gftest::dense_net({2, 3, 2}, ActivationKind::sigmoid(), 20);
    const Matrix before = std::get<DenseLayer>(net.layers[1]).weights;
    const NetworkSpec scaled = inference_scaled(net, {0.25, 0.0});
    const Matrix& after = std::get<DenseLayer>(scaled.layers[1]).weights;
    for (std::size_t i = 0; i < before.data.size(); ++i)
        EXPECT_DOUBLE_EQ(after.data[i], 0.75 * before.data[i]);
    // First layer untouched.
    EXPECT_EQ(std::get<DenseLayer>(scaled.layers[0]).weights.data,
              std::get<DenseLayer>(net.layers[0]).weights.data);
}

TEST(Dropout, InferenceScalingWalksThroughPoolLayers) {
    NetworkSpec net;
    net.input_shape = {4, 4, 1};
    net.add_conv(3, 3, 2, 1, 1, ActivationKind::relu());
    net.add_pool(PoolMode::Max, 2, 2);
    net.add_dense(3, ActivationKind::identity());
    net = init_params(std::move(net), 21);
    const Vector before = std::get<DenseLayer>(net.layers[2]).weights.data;
    const NetworkSpec scaled = inference_scaled(net, {0.5, 0.0, 0.0});
    const Vector& after = std::get<DenseLayer>(scaled.layers[2]).weights.data;
    for (std::size_t i = 0; i < before.size(); ++i)
        EXPECT_DOUBLE_EQ(after[i], 0.5 * before[i]);

    // Dropout on the last layer has nowhere to fold into.
    EXPECT_THROW(inference_scaled(net, {0.0, 0.0, 0.5}), ConfigError);
}

TEST(Train, ValidatesConfig) {
    const LabeledDataset data = toy_dataset();
    const NetworkSpec net = gftest::dense_net({2, 2}, ActivationKind::sigmoid(), 1);
    TrainConfig cfg = TrainConfig::fixed_eta(0.05, 10);

    TrainConfig bad = cfg;
    bad.momentum = 1.0;
    EXPECT_THROW(train(net, data, nullptr, LossKind::quadratic(), bad), ConfigError);

    bad = cfg;
    bad.scheme = SamplingScheme::mini_batch(11); // larger than N = 10
    EXPECT_THROW(train(net, data, nullptr, LossKind::quadratic(), bad), ConfigError);

    bad = cfg;
    bad.lr_schedule = {{0, 9, -0.1}};
    EXPECT_THROW(train(net, data, nullptr, LossKind::quadratic(), bad), ConfigError);

    bad = cfg;
    bad.lr_schedule = {{0, 3, 0.1}}; // does not cover steps 4..9
    EXPECT_THROW(train(net, data, nullptr, LossKind::quadratic(), bad), ConfigError);

    LabeledDataset empty;
    empty.num_classes = 2;
    EXPECT_THROW(train(net, empty, nullptr, LossKind::quadratic(), cfg), DomainError);
}

TEST(Train, ValidationCostsLoggedWhenRequested) {
    const LabeledDataset data = two_class_blobs(10, 22);
    const Split s = split(data, 0.3, 5);
    const NetworkSpec net = gftest::dense_net({2, 3, 2}, ActivationKind::sigmoid(), 2);
    TrainConfig cfg = TrainConfig::fixed_eta(0.05, 20);
    cfg.cost_log_stride = 5;
    const TrainReport report = train(net, s.train, &s.validation, LossKind::quadratic(), cfg);
    for (const CostPoint& p : report.cost_history) EXPECT_TRUE(p.val_cost.has_value());
}

TEST(Train, DivergenceRaisesNumericError) {
    // Identity activations and a huge learning rate blow the iterates up
    // past the largest double within a few steps.
    const LabeledDataset data = two_class_blobs(4, 23);
    const NetworkSpec net = gftest::dense_net({2, 4, 4, 2}, ActivationKind::identity(), 3);
    TrainConfig cfg = TrainConfig::fixed_eta(1e12, 2000);
    cfg.scheme = SamplingScheme::full_batch();
    cfg.cost_log_stride = 1;
    EXPECT_THROW(train(net, data, nullptr, LossKind::quadratic(), cfg), NumericError);
}

TEST(Train, MiniBatchSchedulesAndEpochBudgets) {
    const LabeledDataset data = two_class_blobs(10, 24);
    const NetworkSpec net = gftest::dense_net({2, 3, 2}, ActivationKind::sigmoid(), 6);
    TrainConfig cfg;
    cfg.scheme = SamplingScheme::mini_batch(3); // ceil(10/3) = 4 steps per epoch
    cfg.lr_schedule = {{0, 1, 0.1}, {2, 2, 0.01}};
    cfg.budget_is_epochs = true;
    cfg.budget = 3;
    cfg.seed = 31;
    cfg.cost_log_stride = 100;
    cfg.log_sample_indices = true;
    const TrainReport report = train(net, data, nullptr, LossKind::quadratic(), cfg);
    EXPECT_EQ(report.steps_taken, 12u);
    EXPECT_EQ(report.sample_log.size(), 36u);
    // Without replacement: each consecutive block of 10 visits is a permutation.
    for (int block = 0; block < 3; ++block) {
        std::vector<std::size_t> seen(report.sample_log.begin() + block * 10,
                                      report.sample_log.begin() + (block + 1) * 10);
        std::sort(seen.begin(), seen.end());
        for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(seen[i], i);
    }
}
