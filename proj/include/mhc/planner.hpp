#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "mhc/model.hpp"

namespace mhc {

// ViT-style encoder description. Image mode when patch_size > 0, token mode
// (vocab_size x seq_len inputs) otherwise.
struct ArchSpec {
    std::size_t image_size = 0;
    std::size_t patch_size = 0;
    std::size_t in_channels = 0;
    std::size_t vocab_size = 0;
    std::size_t seq_len = 0;

    std::size_t embed_dim = 0;
    std::size_t depth = 0;
    std::size_t num_heads = 0;
    std::size_t head_dim = 0;  // 0: derived as embed_dim / num_heads
    std::size_t mlp_hidden = 0;
    std::size_t num_classes = 0;
    bool cls_token = false;
    bool qkv_bias = false;
    bool layernorm = true;

    bool image_mode() const noexcept { return patch_size > 0; }
    std::size_t num_tokens() const;
    std::size_t effective_head_dim() const;
    void validate() const;

    friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

// Canonical ViT-B/16 at 224 px, 1000 classes.
ArchSpec vit_base();

struct LayerParamCount {
    std::size_t qkv = 0;
    std::size_t proj = 0;
    std::size_t mlp = 0;
    std::size_t norms = 0;
    std::size_t total() const noexcept { return qkv + proj + mlp + norms; }
};

struct ParamBreakdown {
    std::size_t patch_or_token_embed = 0;
    std::size_t position_embed = 0;
    std::size_t cls = 0;
    std::vector<LayerParamCount> per_layer;
    std::size_t final_norm = 0;
    std::size_t head = 0;
    std::size_t total = 0;
};

ParamBreakdown count_params(const ArchSpec& spec);

// Token-mode spec describing exactly the parameters init_parameters creates.
ArchSpec arch_from_model(const ModelConfig& config);

enum class MlpPolicy {
    keep_hidden,  // mlp_hidden stays at the base value
    keep_ratio,   // mlp_hidden / embed_dim stays at the base ratio
};

struct TradeoffRow {
    std::size_t depth = 0;
    std::size_t heads = 0;
    std::size_t embed_dim = 0;
    std::size_t head_dim = 0;
    std::size_t mlp_hidden = 0;
    std::size_t total_params = 0;
    double delta_vs_base_percent = 0.0;
};

// The variant of `base` with the given depth and head count. With
// head_dim_fixed, embed_dim = heads * base head dim; otherwise embed_dim is kept
// and head_dim = embed_dim / heads (must divide).
ArchSpec tradeoff_variant(const ArchSpec& base, std::size_t depth, std::size_t heads, bool head_dim_fixed,
                          MlpPolicy mlp = MlpPolicy::keep_hidden);

// Rows ordered by depth, then heads (input order).
std::vector<TradeoffRow> tradeoff_table(const ArchSpec& base, std::span<const std::size_t> depths,
                                        std::span<const std::size_t> head_counts, bool head_dim_fixed,
                                        MlpPolicy mlp = MlpPolicy::keep_hidden);

// Widest candidate MLP hidden size for which `variant` has at least
// `min_reduction` (fraction) fewer parameters than `reference`.
std::optional<std::size_t> widest_mlp_with_reduction(const ArchSpec& reference, const ArchSpec& variant,
                                                     std::span<const std::size_t> hidden_candidates,
                                                     double min_reduction);

}  // namespace mhc
