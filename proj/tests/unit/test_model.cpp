#include "fmprog/error.hpp"
#include "fmprog/joint/losses.hpp"
#include "fmprog/joint/model.hpp"
#include "fmprog/joint/train.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace fmprog;
using namespace fmprog::joint;

namespace {

struct Toy {
    std::vector<RowMatrix> windows;
    Batch batch;
};

// One unit with consecutive windows plus a second unit; targets near the model's output scale.
Toy toy_batch(const Architecture& arch, int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Toy toy;
    for (int i = 0; i < n; ++i) toy.windows.push_back(fixtures::random_matrix(arch.window, arch.features, rng));
    for (int i = 0; i < n; ++i) {
        toy.batch.inputs.push_back(&toy.windows[static_cast<std::size_t>(i)]);
        toy.batch.targets.push_back(20.0 - 3.0 * i);
        toy.batch.modes.push_back(i % arch.modes);
        toy.batch.unit_ids.push_back(i < n - 1 ? 1 : 2);
        toy.batch.end_cycles.push_back(10 + i);
    }
    return toy;
}

Architecture small_arch(int modes = 2) {
    Architecture a;
    a.window = 5;
    a.features = 3;
    a.modes = modes;
    a.hidden1 = 8;
    a.hidden2 = 8;
    return a;
}

}  // namespace

TEST(JointModel, ParameterCountMatchesLayout) {
    const auto a = small_arch();
    // classifier 15*8+8 + 8*8+8 + 8*2+2; per mode 4*8*(3+8+1) + 4*8*(8+8+1) + 8+1
    EXPECT_EQ(a.classifier_size(), 218u);
    EXPECT_EQ(a.regressor_size(), 937u);
    EXPECT_EQ(a.parameter_count(), 218u + 2 * 937u);
    EXPECT_EQ(small_arch(1).parameter_count(), 937u);
}

TEST(JointModel, SoftmaxSumsToOneAndCombinationIsConvex) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto a = small_arch(static_cast<int>(2 + seed % 3));
        JointModel m(a, 50.0, 30.0, seed);
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> jitter(0.0, 0.5);
        for (Eigen::Index j = 0; j < m.parameters().size(); ++j) m.parameters()[j] += jitter(rng);
        auto toy = toy_batch(a, 7, seed);
        const auto out = m.forward(toy.batch.inputs);
        for (Eigen::Index i = 0; i < out.probabilities.rows(); ++i) {
            EXPECT_NEAR(out.probabilities.row(i).sum(), 1.0, 1e-9);
            EXPECT_GE(out.probabilities.row(i).minCoeff(), 0.0);
            const double combined = out.probabilities.row(i).dot(out.mode_rul.row(i));
            EXPECT_NEAR(out.rul[i], combined, 1e-9 * (1.0 + combined));
            EXPECT_GE(out.rul[i], out.mode_rul.row(i).minCoeff() - 1e-9);
            EXPECT_LE(out.rul[i], out.mode_rul.row(i).maxCoeff() + 1e-9);
            EXPECT_GE(out.mode_rul.row(i).minCoeff(), 0.0);
        }
    }
}

TEST(JointModel, InitialOutputNearOffset) {
    const auto a = small_arch();
    JointModel m(a, 100.0, 60.0, 4);
    auto toy = toy_batch(a, 4, 4);
    const auto out = m.forward(toy.batch.inputs);
    for (Eigen::Index i = 0; i < out.rul.size(); ++i) EXPECT_NEAR(out.rul[i], 60.0, 100.0);
}

TEST(JointModel, ShapeMismatchIsContractError) {
    const auto a = small_arch();
    JointModel m(a, 10.0, 5.0, 1);
    RowMatrix wrong = RowMatrix::Zero(4, 3);
    try {
        m.forward({&wrong});
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Contract);
    }
}

TEST(JointModel, TotalLossMatchesScalarRecomputation) {
    const auto a = small_arch();
    JointModel m(a, 30.0, 15.0, 9);
    auto toy = toy_batch(a, 2, 9);
    toy.batch.unit_ids = {1, 1};
    toy.batch.end_cycles = {10, 11};
    LossConfig c;
    c.lambda = 10.0;
    c.eta = 0.5;
    c.zeta = -1.0;
    c.a = 0.5;
    const auto out = m.forward(toy.batch.inputs);
    double expected = 0.0;
    for (int i = 0; i < 2; ++i) {
        const double p = out.probabilities(i, toy.batch.modes[static_cast<std::size_t>(i)]);
        const double yhat = out.rul[i], y = toy.batch.targets[static_cast<std::size_t>(i)];
        expected += -std::log(p);
        expected += 10.0 * (yhat >= y ? std::exp((yhat - y) / 10.0) - 1.0 : std::exp((y - yhat) / 13.0) - 1.0);
    }
    const double slope = out.rul[1] - out.rul[0];
    expected += 0.5 * std::max(0.0, std::abs(slope + 1.0) - 0.5);
    const auto got = m.loss(toy.batch, c);
    EXPECT_NEAR(got.total, expected, 1e-10 * (1.0 + std::abs(expected)));
    EXPECT_EQ(got.pairs, 1u);
}

TEST(JointModel, EtaZeroGivesPlainObjectiveAndLambdaZeroGivesClassification) {
    const auto a = small_arch();
    JointModel m(a, 30.0, 15.0, 2);
    auto toy = toy_batch(a, 6, 2);
    LossConfig plain;
    plain.eta = 0.0;
    const auto l = m.loss(toy.batch, plain);
    EXPECT_NEAR(l.total, l.classification + 10.0 * l.regression, 1e-9 * (1.0 + l.total));
    LossConfig ce_only;
    ce_only.lambda = 0.0;
    const auto c = m.loss(toy.batch, ce_only);
    EXPECT_NEAR(c.total, c.classification, 1e-12);
}

TEST(JointModel, InfiniteLambdaDropsClassification) {
    const auto a = small_arch();
    JointModel m(a, 30.0, 15.0, 2);
    auto toy = toy_batch(a, 6, 2);
    toy.batch.modes.assign(6, -1);  // labels are not needed without the classification term
    LossConfig c;
    c.lambda = std::numeric_limits<double>::infinity();
    const auto l = m.loss(toy.batch, c);
    EXPECT_NEAR(l.total, l.regression, 1e-12 * (1.0 + l.total));
}

TEST(JointModel, PenaltyEqualsDeadBandSumOverConsecutivePairs) {
    const auto a = small_arch(1);
    JointModel m(a, 30.0, 15.0, 5);
    auto toy = toy_batch(a, 6, 5);
    toy.batch.unit_ids = {1, 1, 1, 2, 2, 2};
    toy.batch.end_cycles = {3, 4, 6, 1, 2, 3};  // 4 -> 6 is not consecutive
    LossConfig c;
    c.eta = 2.0;
    c.zeta = -1.0;
    c.a = 0.9;
    const auto out = m.forward(toy.batch.inputs);
    double expected = 0.0;
    for (int i : {1, 4, 5}) expected += loss_mono(out.rul[i] - out.rul[i - 1], -1.0, 0.9);
    const auto l = m.loss(toy.batch, c);
    EXPECT_EQ(l.pairs, 3u);
    EXPECT_NEAR(l.monotonic, expected, 1e-12 * (1.0 + expected));
    LossConfig off = c;
    off.eta = 0.0;
    EXPECT_NEAR(l.total - m.loss(toy.batch, off).total, 2.0 * expected, 1e-9 * (1.0 + l.total));
}

TEST(JointModel, MissingModeLabelIsContractError) {
    const auto a = small_arch();
    JointModel m(a, 30.0, 15.0, 5);
    auto toy = toy_batch(a, 3, 5);
    toy.batch.modes[1] = -1;
    EXPECT_THROW(m.loss(toy.batch, LossConfig{}), Error);
}

TEST(GradCheck, LinearHeadOfSingleModeModel) {
    // The head weights and bias enter the prediction linearly.
    const auto a = small_arch(1);
    JointModel m(a, 30.0, 15.0, 11);
    auto toy = toy_batch(a, 5, 11);
    LossConfig c;
    c.eta = 0.0;
    std::vector<Eigen::Index> head;
    for (int j = 0; j <= a.hidden2; ++j) head.push_back(static_cast<Eigen::Index>(a.parameter_count()) - 1 - j);
    const auto r = grad_check(m, toy.batch, c, 1e-5, head);
    EXPECT_EQ(r.parameters, 9u);
    EXPECT_LT(r.max_relative_error, 1e-6) << "worst parameter " << r.worst_parameter;
}

TEST(GradCheck, FullJointModelEtaZero) {
    const auto a = small_arch();
    JointModel m(a, 30.0, 15.0, 21);
    auto toy = toy_batch(a, 6, 21);
    LossConfig c;
    c.eta = 0.0;
    const auto r = grad_check(m, toy.batch, c);
    EXPECT_GT(r.kink_margin, 1e-3);
    EXPECT_LT(r.max_relative_error, 1e-4) << "worst parameter " << r.worst_parameter;
}

TEST(GradCheck, FullJointModelWithPenalty) {
    const auto a = small_arch();
    JointModel m(a, 30.0, 15.0, 22);
    auto toy = toy_batch(a, 6, 22);
    LossConfig c;
    c.eta = 0.5;
    c.a = 0.05;  // narrow band so the penalty is active on most pairs
    const auto r = grad_check(m, toy.batch, c);
    EXPECT_GT(r.kink_margin, 1e-3);
    EXPECT_LT(r.max_relative_error, 1e-4) << "worst parameter " << r.worst_parameter;
}
