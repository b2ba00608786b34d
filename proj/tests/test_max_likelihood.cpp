#include <gtest/gtest.h>

#include "mcpe/max_likelihood.hpp"
#include "mcpe/mrp.hpp"
#include "mcpe/sampling.hpp"

using namespace mcpe;

TEST(MlUpdate, SingleIncrement) {
    MlModel m(2);
    ml_update(m, {0, 2.0, 1, 0, false});
    EXPECT_EQ(m.state_counts, (std::vector<std::uint64_t>{1, 0}));
    EXPECT_EQ(m.reward_sums, (std::vector<double>{2.0, 0.0}));
    EXPECT_EQ(m.transition_counts[0].at(1), 1u);
}

TEST(MlUpdate, RowEstimate) {
    MlModel m(2);
    for (int k = 0; k < 3; ++k) ml_update(m, {0, 0.0, 1, 0, false});
    ml_update(m, {0, 0.0, 0, 0, false});
    const auto row = m.transition_row(0);
    EXPECT_EQ(row.at(1), 0.75);
    EXPECT_EQ(row.at(0), 0.25);
    EXPECT_TRUE(m.transition_row(1).empty());
}

TEST(MlUpdate, RejectsOutOfRange) {
    MlModel m(2);
    EXPECT_THROW(ml_update(m, {0, 0.0, 2, 0, false}), ValidationError);
}

TEST(MlValue, TwoCycle) {
    const std::vector<StepRecord> s = {{0, 1.0, 1, 0, false}, {1, 0.0, 0, 0, true}};
    const auto v = ml_value(ml_fit(s, 2), 0.5);
    EXPECT_NEAR(v.values[0], 4.0 / 3.0, 1e-15);
    EXPECT_NEAR(v.values[1], 2.0 / 3.0, 1e-15);
}

TEST(MlValue, SingleState) {
    const std::vector<StepRecord> s = {{0, 1.0, 0, 0, false}, {0, 1.0, 0, 0, false}, {0, 1.0, 0, 0, true}};
    EXPECT_NEAR(ml_value(ml_fit(s, 1), 0.8).values[0], 5.0, 1e-12);
}

TEST(MlValue, UnvisitedStateIsZero) {
    const std::vector<StepRecord> s = {{0, 1.0, 0, 0, false}, {0, 1.0, 2, 0, true}};
    const auto v = ml_value(ml_fit(s, 3), 0.5);
    EXPECT_EQ(v.values[1], 0.0);
    EXPECT_EQ(v.values[2], 0.0);
    EXPECT_EQ(v.visited, (std::vector<bool>{true, false, false}));
    // v0 = 1 + 0.5 * (0.5 v0 + 0.5 * 0) => v0 = 1 / 0.75.
    EXPECT_NEAR(v.values[0], 4.0 / 3.0, 1e-15);
}

TEST(MlValue, EmptyModel) { EXPECT_THROW(ml_value(MlModel(3), 0.8), ValidationError); }

TEST(MlValue, RowsOfVisitedStatesSumToOne) {
    const Mrp mrp = random_mrp(10, 4, {}, RngStream{1, 0});
    Rng rng(RngStream{1, 1});
    const auto model = ml_fit(sample_stream(mrp, default_strategy(mrp), 3000, rng), 10);
    for (StateIndex s = 0; s < 10; ++s) {
        std::uint64_t total = 0;
        for (auto [m, c] : model.transition_counts[s]) total += c;
        EXPECT_EQ(total, model.state_counts[s]);
    }
}

TEST(MlValue, ErrorShrinksWithMoreSamples) {
    const Mrp mrp = random_mrp(10, 10, {}, RngStream{2, 0});
    const auto truth = exact_value(mrp);
    std::vector<double> mean_err;
    for (std::size_t t : {1000u, 10000u, 100000u}) {
        double sum = 0.0;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            Rng rng(RngStream{100 + seed, 0});
            const auto s = sample_stream(mrp, {SamplingMode::single_random_walk}, t, rng);
            sum += rel_residual_error(ml_value(ml_fit(s, 10), mrp.gamma()), truth);
        }
        mean_err.push_back(sum / 20.0);
    }
    EXPECT_GT(mean_err[0], mean_err[1]);
    EXPECT_GT(mean_err[1], mean_err[2]);
}
