#include <gtest/gtest.h>

#include <cmath>

#include "gradforge/activation.hpp"
#include "gradforge/rng.hpp"

using namespace gradforge;

TEST(Activation, SigmoidAtZero) {
    EXPECT_EQ(apply(ActivationKind::sigmoid(), {0.0}), Vector{0.5});
}

TEST(Activation, ReluClampsNonPositive) {
    EXPECT_EQ(apply(ActivationKind::relu(), {-2, 0, 3}), (Vector{0, 0, 3}));
}

TEST(Activation, LeakyReluScalesNegative) {
    EXPECT_EQ(apply(ActivationKind::leaky_relu(0.01), {-100, 5}), (Vector{-1, 5}));
}

TEST(Activation, StepForwardOnly) {
    EXPECT_EQ(apply(ActivationKind::step(), {-1, 0, 2}), (Vector{0, 0, 1}));
    EXPECT_THROW(derivative(ActivationKind::step(), {1.0}), ConfigError);
}

TEST(Activation, SigmoidRangeAndIdentityBounds) {
    Pcg32 rng(3, 0);
    for (int i = 0; i < 200; ++i) {
        const double z = 40.0 * (rng.uniform_double() - 0.5);
        const double s = apply_scalar(ActivationKind::sigmoid(), z);
        EXPECT_GT(s, 0.0);
        EXPECT_LT(s, 1.0);
        EXPECT_GE(apply_scalar(ActivationKind::relu(), z), 0.0);
    }
}

TEST(Activation, SigmoidDerivativeAtZero) {
    EXPECT_EQ(derivative(ActivationKind::sigmoid(), {0.0}), Vector{0.25});
}

TEST(Activation, ReluDerivativeSlopes) {
    EXPECT_EQ(derivative(ActivationKind::relu(), {-1, 2}), (Vector{0, 1}));
    EXPECT_EQ(derivative_scalar(ActivationKind::relu(), 0.0), 0.0); // kink: lower branch
    EXPECT_EQ(derivative_scalar(ActivationKind::leaky_relu(0.2), 0.0), 0.2);
}

TEST(Activation, SigmoidDerivativeMatchesFiniteDifference) {
    const double h = 1e-6;
    for (double z : {-3.0, -1.0, 0.0, 1.0, 3.0}) {
        const double fd = (apply_scalar(ActivationKind::sigmoid(), z + h) -
                           apply_scalar(ActivationKind::sigmoid(), z - h)) /
                          (2 * h);
        EXPECT_NEAR(derivative_scalar(ActivationKind::sigmoid(), z), fd, 1e-8);
    }
}

// Every differentiable kind against central differences at random points,
// staying clear of the ReLU/leaky kink.
TEST(Activation, DerivativesMatchFiniteDifferencesEverywhere) {
    const double h = 1e-6;
    Pcg32 rng(17, 0);
    const ActivationKind kinds[] = {ActivationKind::sigmoid(), ActivationKind::relu(),
                                    ActivationKind::leaky_relu(0.01),
                                    ActivationKind::identity()};
    for (const ActivationKind& kind : kinds) {
        int checked = 0;
        while (checked < 100) {
            const double z = 8.0 * (rng.uniform_double() - 0.5);
            if ((kind.tag == Activation::ReLU || kind.tag == Activation::LeakyReLU) &&
                std::abs(z) < 1e-4)
                continue;
            const double fd =
                (apply_scalar(kind, z + h) - apply_scalar(kind, z - h)) / (2 * h);
            const double an = derivative_scalar(kind, z);
            const double denom = std::max({1.0, std::abs(fd), std::abs(an)});
            EXPECT_LT(std::abs(an - fd) / denom, 1e-6) << to_string(kind) << " at z=" << z;
            ++checked;
        }
    }
}

TEST(Activation, SigmoidDerivativeIdentityExact) {
    Pcg32 rng(19, 0);
    for (int i = 0; i < 100; ++i) {
        const double z = 20.0 * (rng.uniform_double() - 0.5);
        const double s = apply_scalar(ActivationKind::sigmoid(), z);
        EXPECT_EQ(derivative_scalar(ActivationKind::sigmoid(), z), s * (1.0 - s));
    }
}

TEST(Softmax, UniformOnEqualInputs) {
    const Vector s = softmax({0, 0, 0});
    for (double x : s) EXPECT_NEAR(x, 1.0 / 3.0, 1e-15);
}

TEST(Softmax, HugeLogitsDoNotOverflow) {
    EXPECT_EQ(softmax({1000, 1000}), (Vector{0.5, 0.5}));
}

TEST(Softmax, KnownRatios) {
    const Vector s = softmax({std::log(1.0), std::log(2.0), std::log(3.0)});
    EXPECT_NEAR(s[0], 1.0 / 6.0, 1e-12);
    EXPECT_NEAR(s[1], 2.0 / 6.0, 1e-12);
    EXPECT_NEAR(s[2], 3.0 / 6.0, 1e-12);
}

TEST(Softmax, ShiftInvarianceAndUnitSum) {
    Pcg32 rng(29, 0);
    for (int trial = 0; trial < 50; ++trial) {
        Vector v(4);
        for (double& x : v) x = 10.0 * rng.normal();
        const double c = 100.0 * rng.normal();
        Vector shifted = v;
        for (double& x : shifted) x += c;
        const Vector a = softmax(v), b = softmax(shifted);
        double sum = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            EXPECT_NEAR(a[i], b[i], 1e-12);
            EXPECT_GT(a[i], 0.0);
            sum += a[i];
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(Activation, ParseAndFormatRoundTrip) {
    for (const char* name : {"sigmoid", "relu", "step", "identity"})
        EXPECT_EQ(to_string(parse_activation(name)), name);
    const ActivationKind leaky = parse_activation("leaky_relu:0.05");
    EXPECT_EQ(leaky.tag, Activation::LeakyReLU);
    EXPECT_EQ(leaky.slope, 0.05);
    EXPECT_EQ(parse_activation("leaky_relu").slope, 0.01); // default per the reference
    EXPECT_THROW(parse_activation("tanh"), ParseError);
    EXPECT_THROW(parse_activation("leaky_relu:1.5"), ConfigError);
}
