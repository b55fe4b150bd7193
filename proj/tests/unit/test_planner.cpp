#include <gtest/gtest.h>

#include <random>

#include "mhc/errors.hpp"
#include "mhc/planner.hpp"

using namespace mhc;

namespace {

// Closed-form ViT count written out term by term.
std::size_t vit_closed_form(std::size_t patch, std::size_t channels, std::size_t tokens, std::size_t dm,
                            std::size_t depth, std::size_t hidden, std::size_t classes) {
    const std::size_t embed = patch * patch * channels * dm + dm + dm + (tokens + 1) * dm;
    const std::size_t layer = 3 * (dm * dm + dm) + dm * dm + dm + 2 * dm * hidden + hidden + dm + 4 * dm;
    return embed + depth * layer + 2 * dm + dm * classes + classes;
}

std::size_t sum_of_parts(const ParamBreakdown& b) {
    std::size_t s = b.patch_or_token_embed + b.position_embed + b.cls + b.final_norm + b.head;
    for (const LayerParamCount& l : b.per_layer) s += l.qkv + l.proj + l.mlp + l.norms;
    return s;
}

}  // namespace

TEST(CountParams, VitBaseMatchesReferenceTotal) {
    const ParamBreakdown b = count_params(vit_base());
    EXPECT_EQ(b.total, 86567656u);
    EXPECT_EQ(b.total, vit_closed_form(16, 3, 196, 768, 12, 3072, 1000));
    EXPECT_NEAR(static_cast<double>(b.total), 86.6e6, 0.01 * 86.6e6);
    EXPECT_EQ(b.per_layer.size(), 12u);
    EXPECT_EQ(sum_of_parts(b), b.total);
}

TEST(CountParams, DepthZeroHasNoLayers) {
    ArchSpec s = vit_base();
    s.depth = 0;
    const ParamBreakdown b = count_params(s);
    EXPECT_TRUE(b.per_layer.empty());
    EXPECT_EQ(b.total, b.patch_or_token_embed + b.position_embed + b.cls + b.final_norm + b.head);
}

TEST(CountParams, TinyTokenSpecMatchesInstantiatedModel) {
    ArchSpec s;
    s.vocab_size = 16;
    s.seq_len = 16;
    s.embed_dim = 64;
    s.depth = 2;
    s.num_heads = 4;
    s.head_dim = 16;
    s.mlp_hidden = 128;
    s.num_classes = 8;
    const ModelConfig c = make_model_config(2, 4, 16, 2.0, 16, 16, 8);
    EXPECT_EQ(arch_from_model(c), s);
    EXPECT_EQ(count_params(s).total, Parameters(c).count());
}

TEST(CountParams, RandomConfigsMatchInstantiation) {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<std::size_t> small(1, 6);
    for (int i = 0; i < 50; ++i) {
        ModelConfig c = make_model_config(small(rng) - 1, small(rng), small(rng), 0.5 * static_cast<double>(small(rng)),
                                          small(rng), small(rng), small(rng));
        c.use_layernorm = i % 4 != 0;
        const ParamBreakdown b = count_params(arch_from_model(c));
        EXPECT_EQ(b.total, Parameters(c).count());
        EXPECT_EQ(sum_of_parts(b), b.total);
    }
}

TEST(CountParams, InvalidSpecsThrow) {
    ArchSpec s = vit_base();
    s.head_dim = 32;
    EXPECT_THROW(count_params(s), ValidationError);
    s = vit_base();
    s.patch_size = 15;
    EXPECT_THROW(count_params(s), ValidationError);
    s = vit_base();
    s.patch_size = 0;
    EXPECT_THROW(count_params(s), ValidationError);
}

// Fixed head dim 64, MLP width kept at 3072. Heads 12..16 come in under the
// base model; 17 and 18 do not.
TEST(Tradeoff, DepthEightHeadSweepAgainstBase) {
    const std::vector<std::size_t> depths = {8};
    const std::vector<std::size_t> heads = {12, 13, 14, 15, 16, 17, 18};
    const auto rows = tradeoff_table(vit_base(), depths, heads, true);
    ASSERT_EQ(rows.size(), 7u);
    const std::size_t base = count_params(vit_base()).total;
    for (const TradeoffRow& r : rows) {
        EXPECT_EQ(r.embed_dim, 64 * r.heads);
        EXPECT_EQ(r.total_params, vit_closed_form(16, 3, 196, r.embed_dim, 8, 3072, 1000));
        if (r.heads <= 16) EXPECT_LT(r.total_params, base) << r.heads;
        else EXPECT_GT(r.total_params, base) << r.heads;
    }
    EXPECT_EQ(rows.front().total_params, 58216168u);
    EXPECT_EQ(rows[4].total_params, 86001640u);
}

TEST(Tradeoff, KeepRatioScalesMlp) {
    const std::vector<std::size_t> depths = {8};
    const std::vector<std::size_t> heads = {12, 18};
    const auto rows = tradeoff_table(vit_base(), depths, heads, true, MlpPolicy::keep_ratio);
    EXPECT_EQ(rows[1].mlp_hidden, 4608u);
    EXPECT_GT(rows[1].total_params, rows[0].total_params);
}

TEST(Tradeoff, BaseShapeHasZeroDelta) {
    const std::vector<std::size_t> depths = {12};
    const std::vector<std::size_t> heads = {12};
    for (bool fixed : {true, false}) {
        const auto rows = tradeoff_table(vit_base(), depths, heads, fixed);
        EXPECT_EQ(rows[0].delta_vs_base_percent, 0.0);
    }
}

TEST(Tradeoff, MonotoneInHeadsAndDepth) {
    const std::vector<std::size_t> depths = {2, 4, 6, 8};
    const std::vector<std::size_t> heads = {4, 8, 12, 16};
    const auto rows = tradeoff_table(vit_base(), depths, heads, true);
    ASSERT_EQ(rows.size(), depths.size() * heads.size());
    for (std::size_t di = 0; di < depths.size(); ++di)
        for (std::size_t hi = 0; hi < heads.size(); ++hi) {
            const auto& r = rows[di * heads.size() + hi];
            if (hi > 0) EXPECT_GT(r.total_params, rows[di * heads.size() + hi - 1].total_params);
            if (di > 0) EXPECT_GT(r.total_params, rows[(di - 1) * heads.size() + hi].total_params);
        }
}

TEST(Tradeoff, FixedWidthSplitsEmbedding) {
    const std::vector<std::size_t> depths = {7};
    const std::vector<std::size_t> heads = {16};
    const auto rows = tradeoff_table(vit_base(), depths, heads, false);
    EXPECT_EQ(rows[0].embed_dim, 768u);
    EXPECT_EQ(rows[0].head_dim, 48u);
    EXPECT_THROW(tradeoff_variant(vit_base(), 7, 13, false), ValidationError);
}

TEST(Tradeoff, WidestMlpWithReduction) {
    const ModelConfig ref = make_model_config(4, 4, 8, 4.0, 4, 4, 4);
    const ArchSpec variant = arch_from_model(make_model_config(2, 8, 8, 4.0, 4, 4, 4));
    const std::vector<std::size_t> candidates = {16, 32, 64, 128, 256};
    const auto best = widest_mlp_with_reduction(arch_from_model(ref), variant, candidates, 0.15);
    ASSERT_TRUE(best.has_value());
    EXPECT_EQ(*best, 32u);
    ArchSpec chosen = variant;
    chosen.mlp_hidden = *best;
    EXPECT_LE(static_cast<double>(count_params(chosen).total), 0.85 * count_params(arch_from_model(ref)).total);
    const std::vector<std::size_t> too_wide = {512};
    EXPECT_FALSE(widest_mlp_with_reduction(arch_from_model(ref), variant, too_wide, 0.15).has_value());
}
