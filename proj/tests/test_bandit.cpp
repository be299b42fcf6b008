// Copyright 2026 The metalic Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "metalic/bandit.hpp"

#include <gtest/gtest.h>

#include <bit>
#include <map>
#include <sstream>

namespace metalic {
namespace {

constexpr std::pair<double, double> kRange{0.0, 1.0};

int hamming(const Action& a, const Action& b) {
    return std::popcount(static_cast<unsigned>(action_index(a) ^ action_index(b)));
}

const Action kOptimal = action_from_index(0b101100110);

/// Final error exp(Hamming(a, a_opt)), so the reward is -Hamming.
TrialFn hamming_trial(int* calls = nullptr) {
    return [calls](const TrialRequest&, const Action& a1, const SecondChooser& choose) {
        if (calls) ++*calls;
        const double err = std::exp(static_cast<double>(hamming(a1, kOptimal)));
        TrialResult r;
        r.loss_adam = 1.0;
        r.err_adam = err;
        r.action_lbfgs = choose({1.0, err});
        r.err_lbfgs = err;
        return r;
    };
}

BanditConfig config(int plays, std::uint64_t seed = 1) {
    BanditConfig c;
    c.plays = plays;
    c.seed = seed;
    return c;
}

TEST(Scores, UcbArithmetic) {
    EXPECT_DOUBLE_EQ(ucb_score(0.5, 0.2, 1.0), 0.7);
    EXPECT_EQ(ucb_score(0.5, 0.2, 0.0), 0.5);
    EXPECT_EQ(ucb_score(-1.25, 0.0, 7.0), -1.25);
}

TEST(Scores, ThompsonDegenerateAndReproducible) {
    auto rng = make_stream(3, {});
    EXPECT_EQ(ts_score(0.4, 0.0, rng), 0.4);
    auto a = make_stream(9, {}), b = make_stream(9, {});
    EXPECT_EQ(ts_score(1.0, 2.0, a), ts_score(1.0, 2.0, b));
}

TEST(Scores, ThompsonMoments) {
    auto rng = make_stream(4, {});
    const int n = 100000;
    double s = 0.0, ss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = ts_score(0.0, 1.0, rng);
        s += x;
        ss += x * x;
    }
    const double mean = s / n, var = ss / n - mean * mean;
    EXPECT_NEAR(mean, 0.0, 0.02);
    EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(Rewards, DiscountedArithmetic) {
    EXPECT_NEAR(discounted_reward(0.1, 0.01, 0.9), -0.109, 1e-15);
    EXPECT_EQ(discounted_reward(0.1, 0.01, 0.0), -0.1);
    EXPECT_NEAR(discounted_reward(std::log(0.1), std::log(0.01), 0.9), -std::log(0.1) - 0.9 * std::log(0.01), 1e-15);
}

TEST(Select, PriorTiesAreUniform) {
    const GpPosterior prior = gp_fit(RewardDataset(1), KernelParams{});
    const auto preds = prior.predict_all(std::vector<double>{0.5});
    std::map<int, int> counts;
    auto rng = make_stream(5, {});
    const int draws = 51200;
    for (int i = 0; i < draws; ++i) ++counts[action_index(select_from_predictions(preds, Scorer::ucb, 1.0, rng).action)];
    EXPECT_EQ(counts.size(), static_cast<std::size_t>(kNumActions));
    // Binomial(51200, 1/512): mean 100, sd about 10.
    for (const auto& [a, c] : counts) {
        EXPECT_GT(c, 50) << a;
        EXPECT_LT(c, 160) << a;
    }
}

TEST(Select, DominantMeanIsChosen) {
    std::vector<GpPrediction> preds(kNumActions, GpPrediction{0.0, 0.25});
    preds[77].mean = 2.0;
    auto rng = make_stream(6, {});
    for (int i = 0; i < 20; ++i) EXPECT_EQ(action_index(select_from_predictions(preds, Scorer::ucb, 1.0, rng).action), 77);
}

TEST(Select, ArgmaxInvariantUnderConstantShift) {
    auto rng = make_stream(7, {});
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<GpPrediction> preds(kNumActions);
        for (auto& p : preds) p = {standard_normal(rng), std::abs(standard_normal(rng))};
        auto shifted = preds;
        for (auto& p : shifted) p.mean += 3.5;
        auto r1 = make_stream(8, {static_cast<std::uint64_t>(trial)});
        auto r2 = make_stream(8, {static_cast<std::uint64_t>(trial)});
        EXPECT_EQ(action_index(select_from_predictions(preds, Scorer::ucb, 1.0, r1).action),
                  action_index(select_from_predictions(shifted, Scorer::ucb, 1.0, r2).action));
        auto r3 = make_stream(9, {static_cast<std::uint64_t>(trial)});
        auto r4 = make_stream(9, {static_cast<std::uint64_t>(trial)});
        EXPECT_EQ(action_index(select_from_predictions(preds, Scorer::ts, 1.0, r3).action),
                  action_index(select_from_predictions(shifted, Scorer::ts, 1.0, r4).action));
    }
}

TEST(Select, FrozenPosteriorIsPureInSeed) {
    const BanditRun run = metalic_single(hamming_trial(), config(15), kRange);
    const std::vector<double> ctx{0.3};
    auto a = make_stream(11, {}), b = make_stream(11, {});
    EXPECT_EQ(action_index(run.first.select(ctx, Scorer::ucb, 1.0, a).action),
              action_index(run.first.select(ctx, Scorer::ucb, 1.0, b).action));
}

TEST(Offline, EqualsUcbWithZeroBonus) {
    const BanditRun run = metalic_single(hamming_trial(), config(20), kRange);
    for (double beta : {0.1, 0.5, 0.9}) {
        const std::vector<double> ctx{beta};
        auto rng = make_stream(12, {});
        EXPECT_EQ(action_index(offline_select(run.first, ctx)),
                  action_index(run.first.select(ctx, Scorer::ucb, 0.0, rng).action));
    }
}

TEST(Offline, UniqueMaxMeanArm) {
    Surrogate s = make_first_surrogate(kRange, BanditConfig{});
    const std::vector<double> ctx{0.5};
    s.add(ctx, action_from_index(300), 5.0);
    s.add(ctx, action_from_index(12), -5.0);
    EXPECT_EQ(action_index(offline_select(s, ctx)), 300);
}

TEST(MetalicSingle, ZeroPlaysGiveEmptyDataset) {
    int calls = 0;
    const BanditRun run = metalic_single(hamming_trial(&calls), config(0), kRange);
    EXPECT_EQ(run.first.data().size(), 0u);
    EXPECT_TRUE(run.plays.empty());
    EXPECT_EQ(calls, 0);
}

TEST(MetalicSingle, StubBookkeeping) {
    const std::vector<double> errs{0.5, 0.02, 3.0};
    TrialFn stub = [&](const TrialRequest& req, const Action& a1, const SecondChooser& choose) {
        TrialResult r;
        r.loss_adam = 0.1;
        r.err_adam = 1.0;
        r.action_lbfgs = choose({0.1, 1.0});
        EXPECT_EQ(action_index(r.action_lbfgs), action_index(a1));
        r.err_lbfgs = errs.at(req.play);
        return r;
    };
    const BanditRun run = metalic_single(stub, config(3), kRange);
    ASSERT_EQ(run.first.data().size(), 3u);
    ASSERT_EQ(run.plays.size(), 3u);
    for (int t = 0; t < 3; ++t) {
        EXPECT_EQ(run.first.data().reward(t), -std::log(errs[t]));
        EXPECT_EQ(run.plays[t].reward1, -std::log(errs[t]));
        EXPECT_EQ(run.first.data().context(t)[0], run.plays[t].beta);
        EXPECT_GE(run.plays[t].beta, 0.0);
        EXPECT_LT(run.plays[t].beta, 1.0);
        EXPECT_TRUE(std::isnan(run.plays[t].reward2));
    }
    EXPECT_FALSE(run.second.has_value());
}

TEST(MetalicSingle, FailedTrialIsRecordedAndLoopContinues) {
    TrialFn stub = [](const TrialRequest& req, const Action&, const SecondChooser&) -> TrialResult {
        if (req.play == 1) throw NumericalError("loss term boundary is not finite");
        TrialResult r;
        r.loss_adam = 1.0;
        r.err_adam = r.err_lbfgs = 0.1;
        return r;
    };
    const BanditRun run = metalic_single(stub, config(3), kRange);
    ASSERT_EQ(run.plays.size(), 3u);
    EXPECT_TRUE(run.plays[1].failed);
    EXPECT_EQ(run.plays[1].err_lbfgs, 10.0);
    EXPECT_EQ(run.plays[1].loss_adam, 1e6);
    EXPECT_EQ(run.first.data().reward(1), -std::log(10.0));
    EXPECT_FALSE(run.plays[2].failed);
}

TEST(MetalicSingle, Deterministic) {
    const BanditRun a = metalic_single(hamming_trial(), config(25, 3), kRange);
    const BanditRun b = metalic_single(hamming_trial(), config(25, 3), kRange);
    for (std::size_t t = 0; t < a.plays.size(); ++t) {
        EXPECT_EQ(action_index(a.plays[t].action1), action_index(b.plays[t].action1));
        EXPECT_EQ(a.plays[t].beta, b.plays[t].beta);
    }
}

TEST(MetalicSingle, LearnsHammingOptimum) {
    const BanditRun run = metalic_single(hamming_trial(), config(100, 21), kRange);
    int hits = 0;
    for (int t = 80; t < 100; ++t) hits += action_index(run.plays[t].action1) == action_index(kOptimal);
    EXPECT_GE(hits, 14) << "optimal in " << hits << " of the last 20 plays";

    auto rng = make_stream(22, {});
    int offline_hits = 0;
    for (int i = 0; i < 50; ++i) {
        const std::vector<double> ctx{uniform(rng, 0.0, 1.0)};
        offline_hits += action_index(offline_select(run.first, ctx)) == action_index(kOptimal);
    }
    EXPECT_GE(offline_hits, 45) << offline_hits << " of 50";
}

TEST(MetalicSingle, AccumulatedErrorGrowsSublinearly) {
    for (Scorer sc : {Scorer::ucb, Scorer::ts}) {
        BanditConfig c = config(100, 31);
        c.scorer = sc;
        const auto acc = accumulated_error(metalic_single(hamming_trial(), c, kRange).plays);
        const double first = acc[49], second = acc[99] - acc[49];
        EXPECT_LT(second, 0.9 * first) << to_string(sc);

        const auto rnd = accumulated_error(run_bandit(Policy::random_single, hamming_trial(), kRange, c).plays);
        EXPECT_GT(rnd[99] - rnd[49], 0.5 * rnd[49]);
        EXPECT_LT(acc[99], rnd[99]);
    }
}

/// The second-phase optimum flips with the first-phase loss: condition slot 0 should be on
/// exactly when ln l >= 1.5. The other slots do not affect the error.
bool wants_slot0(double loss) { return std::log(loss) >= 1.5; }

TrialFn loss_dependent_trial() {
    return [](const TrialRequest& req, const Action& a1, const SecondChooser& choose) {
        auto rng = make_stream(req.seed, {1});
        const double loss = std::exp(3.0 * uniform01(rng));
        TrialResult r;
        r.loss_adam = loss;
        r.err_adam = std::exp(0.2 * hamming(a1, kOptimal));
        r.action_lbfgs = choose({loss, r.err_adam});
        r.err_lbfgs = std::exp(r.action_lbfgs.mask[0] == wants_slot0(loss) ? 0.0 : 2.0);
        return r;
    };
}

TEST(MetalicSeq, SecondBanditTracksLoss) {
    const BanditRun run = metalic_seq(loss_dependent_trial(), config(50, 41), kRange);
    ASSERT_TRUE(run.second.has_value());
    EXPECT_EQ(run.first.data().size(), 50u);
    EXPECT_EQ(run.second->data().size(), 50u);
    int hits = 0;
    for (int t = 40; t < 50; ++t) hits += run.plays[t].action2.mask[0] == wants_slot0(run.plays[t].loss_adam);
    EXPECT_GE(hits, 7) << hits << " of the last 10";
}

TEST(MetalicSeq, RewardsFollowLoggedErrors) {
    BanditConfig c = config(12, 42);
    const BanditRun run = metalic_seq(loss_dependent_trial(), c, kRange);
    for (std::size_t t = 0; t < run.plays.size(); ++t) {
        const auto& p = run.plays[t];
        EXPECT_EQ(p.reward1, -std::log(p.err_adam) - c.gamma * std::log(p.err_lbfgs));
        EXPECT_EQ(p.reward2, -std::log(p.err_lbfgs));
        EXPECT_EQ(run.first.data().reward(t), p.reward1);
        EXPECT_EQ(run.second->data().reward(t), p.reward2);
        EXPECT_EQ(run.first.data().action(t), action_index(p.action1));
        EXPECT_EQ(run.second->data().action(t), action_index(p.action2));
        EXPECT_EQ(run.second->data().context(t)[1], std::log(p.loss_adam));
    }
}

TEST(MetalicSeq, ZeroDiscountIsFirstPhaseCredit) {
    BanditConfig c = config(6, 43);
    c.gamma = 0.0;
    const BanditRun run = metalic_seq(loss_dependent_trial(), c, kRange);
    for (const auto& p : run.plays) EXPECT_EQ(p.reward1, -std::log(p.err_adam));
}

TEST(MetalicSeq, FailedFirstPhaseStillAppendsBothRows) {
    TrialFn stub = [](const TrialRequest& req, const Action& a1, const SecondChooser& choose) -> TrialResult {
        TrialResult r;
        if (req.play == 2) {
            r.failed = true;
            r.loss_adam = 1e6;
            r.err_adam = r.err_lbfgs = 10.0;
            r.action_lbfgs = a1;
            return r;
        }
        r.loss_adam = 0.5;
        r.err_adam = 0.2;
        r.action_lbfgs = choose({0.5, 0.2});
        r.err_lbfgs = 0.05;
        return r;
    };
    const BanditRun run = metalic_seq(stub, config(4, 44), kRange);
    EXPECT_EQ(run.first.data().size(), 4u);
    EXPECT_EQ(run.second->data().size(), 4u);
    EXPECT_TRUE(run.plays[2].failed);
    EXPECT_EQ(run.second->data().context(2)[1], std::log(1e6));
}

TEST(RandomPolicy, SequentialDrawsTwoActions) {
    const BanditRun run = run_bandit(Policy::random_seq, loss_dependent_trial(), kRange, config(40, 45));
    int differ = 0;
    for (const auto& p : run.plays) differ += action_index(p.action1) != action_index(p.action2);
    EXPECT_GT(differ, 30);
    EXPECT_EQ(run.plays[0].scorer, "random");
}

TEST(Surrogate, StandardizesLossColumn) {
    Surrogate s = make_second_surrogate({1.0, 3.0}, BanditConfig{});
    const std::vector<double> ctx_raw{2.0, 5.0};
    s.add(std::vector<double>{1.0, 1.0}, Action{}, 0.0);
    s.add(std::vector<double>{3.0, 3.0}, Action{}, 0.0);
    // Column 1 has mean 2 and sample sd sqrt(2).
    const auto n = s.normalize(ctx_raw);
    EXPECT_DOUBLE_EQ(n[0], 0.5);
    EXPECT_NEAR(n[1], 3.0 / std::sqrt(2.0), 1e-15);
}

TEST(Config, Validation) {
    BanditConfig c;
    c.gamma = 1.5;
    EXPECT_THROW(c.validate(), ConfigError);
    c = BanditConfig{};
    c.plays = -1;
    EXPECT_THROW(c.validate(), ConfigError);
    c = BanditConfig{};
    c.ucb_c = -0.1;
    EXPECT_THROW(c.validate(), ConfigError);
    EXPECT_THROW(scorer_from_string("greedy"), ConfigError);
    EXPECT_EQ(policy_from_string("metalic_seq"), Policy::metalic_seq);
}

TEST(PlayLog, Columns) {
    const BanditRun run = metalic_seq(loss_dependent_trial(), config(3, 46), kRange);
    std::stringstream ss;
    write_play_log(run.plays, ss);
    const CsvTable t = read_csv(ss);
    EXPECT_EQ(t.header, play_log_header());
    ASSERT_EQ(t.rows.size(), 3u);
    EXPECT_EQ(t.text(0, "scorer"), "ucb");
    EXPECT_EQ(t.real(1, "reward2"), run.plays[1].reward2);
    EXPECT_EQ(static_cast<int>(t.real(2, "action2_idx")), action_index(run.plays[2].action2));
}

}  // namespace
}  // namespace metalic
