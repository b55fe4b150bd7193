#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mhc/errors.hpp"
#include "mhc/optim.hpp"
#include "mhc/planner.hpp"
#include "mhc/task.hpp"
#include "mhc/train.hpp"
#include "oracles.hpp"

using namespace mhc;

namespace {

TaskSpec tiny_task(std::uint64_t seed = 1) {
    TaskSpec t;
    t.vocab_size = 5;
    t.seq_len = 3;
    t.modulus = 5;
    t.eval_size = 256;
    t.seed = seed;
    return t;
}

ModelConfig tiny_model(std::size_t depth = 1, std::size_t heads = 2) {
    return make_model_config(depth, heads, 4, 2.0, 5, 3, 5);
}

TrainConfig short_run(std::size_t steps) {
    TrainConfig tc;
    tc.steps = steps;
    tc.batch_size = 16;
    tc.warmup_steps = std::min<std::size_t>(10, steps);
    tc.probe_every = std::max<std::size_t>(1, steps / 2);
    tc.probe_batch = 4;
    return tc;
}

Parameters filled(const ModelConfig& c, double v) {
    Parameters p(c);
    for (double& x : p.values()) x = v;
    return p;
}

}  // namespace

TEST(Task, SumModLabels) {
    TaskSpec t;
    t.modulus = 5;
    EXPECT_EQ(task_label(t, std::vector<int>{1, 2, 3}), 1);
    EXPECT_EQ(task_label(t, std::vector<int>{0, 0, 0, 0}), 0);
}

TEST(Task, NeedleLabelIsMarkerPosition) {
    TaskSpec t;
    t.kind = TaskKind::needle_index;
    t.vocab_size = 4;
    t.seq_len = 5;
    EXPECT_EQ(task_label(t, std::vector<int>{0, 1, 2, 3, 0}), 3);
    EXPECT_THROW(task_label(t, std::vector<int>{0, 1, 2, 0, 0}), ValidationError);
    const TokenBatch b = generate_batch(t, 50, Stream::train, 3);
    for (std::size_t i = 0; i < b.size(); ++i) EXPECT_EQ(b.sample(i)[static_cast<std::size_t>(b.labels[i])], 3);
    EXPECT_EQ(t.num_classes(), 5u);
}

TEST(Task, BatchesAreDeterministicPerStream) {
    const TaskSpec t = tiny_task();
    EXPECT_EQ(generate_batch(t, 8, Stream::train, 4), generate_batch(t, 8, Stream::train, 4));
    EXPECT_FALSE(generate_batch(t, 8, Stream::train, 4) == generate_batch(t, 8, Stream::eval, 4));
    EXPECT_FALSE(generate_batch(t, 8, Stream::train, 4) == generate_batch(t, 8, Stream::train, 5));
    const TokenBatch b = generate_batch(t, 100, Stream::eval, 0);
    for (std::size_t i = 0; i < b.size(); ++i) EXPECT_EQ(b.labels[i], task_label(t, b.sample(i)));
    EXPECT_EQ(task_kind_from_string(to_string(TaskKind::needle_index)), TaskKind::needle_index);
    EXPECT_THROW(task_kind_from_string("parity"), ValidationError);
}

TEST(AdamW, ZeroGradientZeroDecayLeavesParams) {
    const ModelConfig c = tiny_model();
    Parameters p = init_parameters(c, 1);
    const Parameters before = p;
    AdamW opt(p.count());
    AdamWConfig cfg;
    cfg.weight_decay = 0.0;
    opt.step(p, p.zeros_like(), cfg, 1);
    EXPECT_EQ(p, before);
}

TEST(AdamW, FirstStepMovesByLearningRate) {
    const ModelConfig c = tiny_model();
    Parameters p = filled(c, 1.0);
    AdamW opt(p.count());
    AdamWConfig cfg{0.1, 0.0, 0.9, 0.999, 1e-8, 0};
    opt.step(p, filled(c, 1.0), cfg, 1);
    for (double w : p.values()) EXPECT_NEAR(w, 0.9, 1e-8);
}

TEST(AdamW, DecayOnlyIsExactShrink) {
    const ModelConfig c = tiny_model();
    Parameters p = init_parameters(c, 4);
    const Parameters before = p;
    AdamW opt(p.count());
    AdamWConfig cfg{0.01, 0.3, 0.9, 0.999, 1e-8, 0};
    opt.step(p, p.zeros_like(), cfg, 1);
    for (std::size_t i = 0; i < p.count(); ++i) EXPECT_EQ(p.values()[i], before.values()[i] * (1.0 - 0.01 * 0.3));
}

TEST(AdamW, MatchesScalarReferenceOverTrajectories) {
    const ModelConfig c = tiny_model();
    Parameters p = init_parameters(c, 8);
    std::vector<oracle::ScalarAdamW> refs(p.count());
    std::vector<double> ref_w(p.values().begin(), p.values().end());
    AdamW opt(p.count());
    const AdamWConfig cfg{3e-3, 0.05, 0.9, 0.999, 1e-8, 10};
    std::mt19937_64 rng(2);
    std::normal_distribution<double> noise(0.0, 1.0);
    Parameters g = p.zeros_like();
    for (int t = 1; t <= 50; ++t) {
        for (double& x : g.values()) x = noise(rng);
        opt.step(p, g, cfg, static_cast<std::size_t>(t));
        const double lr = scheduled_learning_rate(cfg, static_cast<std::size_t>(t));
        for (std::size_t i = 0; i < ref_w.size(); ++i)
            ref_w[i] = refs[i].step(ref_w[i], g.values()[i], lr, cfg.weight_decay, cfg.beta1, cfg.beta2, cfg.epsilon, t);
    }
    for (std::size_t i = 0; i < ref_w.size(); ++i) EXPECT_NEAR(p.values()[i], ref_w[i], 1e-12);
}

TEST(AdamW, WarmupIsLinearFromOneBasedStep) {
    AdamWConfig cfg;
    cfg.learning_rate = 1.0;
    cfg.warmup_steps = 4;
    EXPECT_DOUBLE_EQ(scheduled_learning_rate(cfg, 1), 0.25);
    EXPECT_DOUBLE_EQ(scheduled_learning_rate(cfg, 4), 1.0);
    EXPECT_DOUBLE_EQ(scheduled_learning_rate(cfg, 400), 1.0);
}

TEST(AdamW, NonFiniteGradientNamesBlock) {
    const ModelConfig c = tiny_model();
    Parameters p = init_parameters(c, 1);
    const Parameters before = p;
    Parameters g = p.zeros_like();
    g.block(p.layout().head_w)(0, 0) = std::nan("");
    AdamW opt(p.count());
    try {
        opt.step(p, g, AdamWConfig{}, 7);
        FAIL() << "expected DivergenceError";
    } catch (const DivergenceError& e) {
        EXPECT_EQ(e.block(), "head_w");
        EXPECT_EQ(e.last_good_step(), 6u);
    }
    EXPECT_EQ(p, before);
}

TEST(Train, ZeroStepsIsChanceLevel) {
    TaskSpec t = tiny_task();
    t.eval_size = 1024;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        TrainConfig tc = short_run(0);
        tc.init_seed = seed;
        const RunResult r = train(tiny_model(), t, tc);
        EXPECT_NEAR(r.final_eval_accuracy, 1.0 / 5.0, 0.05) << "seed " << seed;
        EXPECT_TRUE(std::isnan(r.final_train_loss));
        EXPECT_EQ(r.conditioning.size(), 1u);
    }
}

TEST(Train, RunsAreReproducible) {
    const RunResult a = train(tiny_model(), tiny_task(), short_run(30));
    const RunResult b = train(tiny_model(), tiny_task(), short_run(30));
    EXPECT_EQ(a.loss_curve, b.loss_curve);
    EXPECT_EQ(a.final_params, b.final_params);
    EXPECT_EQ(a.final_eval_accuracy, b.final_eval_accuracy);
    ASSERT_EQ(a.conditioning.size(), 3u);
    EXPECT_EQ(a.conditioning.back().step, 30u);
    EXPECT_EQ(a.param_count, count_params(arch_from_model(tiny_model())).total);
}

TEST(Train, FixedPoolMatchesItsOwnRerun) {
    TaskSpec t = tiny_task();
    t.train_size = 64;
    const RunResult a = train(tiny_model(), t, short_run(20));
    EXPECT_EQ(a.loss_curve, train(tiny_model(), t, short_run(20)).loss_curve);
    EXPECT_NE(a.loss_curve, train(tiny_model(), tiny_task(), short_run(20)).loss_curve);
}

TEST(Train, LearnsTinySumTask) {
    TrainConfig tc = short_run(600);
    tc.batch_size = 32;
    tc.learning_rate = 3e-3;
    const RunResult r = train(make_model_config(1, 4, 8, 4.0, 5, 3, 5), tiny_task(), tc);
    EXPECT_GT(r.final_eval_accuracy, 0.9);
    EXPECT_LT(r.loss_curve.back(), r.loss_curve.front());
}

TEST(Train, RejectsInconsistentConfigs) {
    EXPECT_THROW(train(make_model_config(1, 2, 4, 2.0, 6, 3, 5), tiny_task(), short_run(1)), ValidationError);
    EXPECT_THROW(train(make_model_config(1, 2, 4, 2.0, 5, 4, 5), tiny_task(), short_run(1)), ValidationError);
    EXPECT_THROW(train(make_model_config(1, 2, 4, 2.0, 5, 3, 4), tiny_task(), short_run(1)), ValidationError);
    TrainConfig tc = short_run(5);
    tc.warmup_steps = 6;
    EXPECT_THROW(train(tiny_model(), tiny_task(), tc), ValidationError);
}

TEST(Train, HugeLearningRateDiverges) {
    TrainConfig tc = short_run(50);
    tc.learning_rate = 1e250;
    tc.warmup_steps = 0;
    EXPECT_THROW(train(tiny_model(), tiny_task(), tc), DivergenceError);
}

TEST(Grid, PointsSortedAndBaseReproducesStandalone) {
    GridSpec g;
    g.depths = {2, 1};
    g.head_counts = {2, 1};
    g.seeds = 2;
    const TrainConfig tc = short_run(15);
    const GridResult r = depth_heads_grid(tiny_model(1, 2), g, tiny_task(), tc);
    ASSERT_EQ(r.points.size(), 4u);
    EXPECT_TRUE(r.failures.empty());
    const std::vector<std::pair<std::size_t, std::size_t>> order = {{1, 1}, {1, 2}, {2, 1}, {2, 2}};
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(r.points[i].depth, order[i].first);
        EXPECT_EQ(r.points[i].heads, order[i].second);
        EXPECT_EQ(r.points[i].runs.size(), 2u);
        EXPECT_EQ(r.points[i].param_count, r.points[i].runs[0].param_count);
    }
    EXPECT_LT(r.points[0].param_count, r.points[1].param_count);
    EXPECT_LT(r.points[2].param_count, r.points[3].param_count);

    const RunResult solo = train(tiny_model(1, 2), tiny_task(), tc);
    EXPECT_EQ(r.points[1].runs[0].loss_curve, solo.loss_curve);
    EXPECT_EQ(r.points[1].runs[0].final_params, solo.final_params);
}

TEST(Grid, DivergedSeedsAreRecordedAndGridContinues) {
    GridSpec g;
    g.depths = {1};
    g.head_counts = {1, 2};
    g.seeds = 1;
    TrainConfig tc = short_run(20);
    tc.learning_rate = 1e250;
    tc.warmup_steps = 0;
    const GridResult r = depth_heads_grid(tiny_model(), g, tiny_task(), tc);
    EXPECT_EQ(r.points.size(), 2u);
    EXPECT_EQ(r.failures.size(), 2u);
    EXPECT_TRUE(r.points[0].runs.empty());
}
