#include "mhc/planner.hpp"

#include <cmath>
#include <string>

namespace mhc {

std::size_t ArchSpec::num_tokens() const {
    if (image_mode()) {
        const std::size_t per_side = image_size / patch_size;
        return per_side * per_side;
    }
    return seq_len;
}

std::size_t ArchSpec::effective_head_dim() const {
    if (head_dim != 0) return head_dim;
    return num_heads == 0 ? 0 : embed_dim / num_heads;
}

void ArchSpec::validate() const {
    if (embed_dim == 0) throw ValidationError("arch: embed_dim must be >= 1");
    if (num_heads == 0) throw ValidationError("arch: num_heads must be >= 1");
    if (mlp_hidden == 0) throw ValidationError("arch: mlp_hidden must be >= 1");
    if (num_classes == 0) throw ValidationError("arch: num_classes must be >= 1");
    if (head_dim != 0 && embed_dim != num_heads * head_dim)
        throw ValidationError("arch: embed_dim (" + std::to_string(embed_dim) + ") != num_heads * head_dim (" +
                              std::to_string(num_heads * head_dim) + ")");
    if (head_dim == 0 && embed_dim % num_heads != 0)
        throw ValidationError("arch: num_heads must divide embed_dim when head_dim is not given");
    if (image_mode()) {
        if (image_size == 0 || in_channels == 0) throw ValidationError("arch: image_size and in_channels must be >= 1");
        if (image_size % patch_size != 0) throw ValidationError("arch: patch_size must divide image_size");
    } else if (vocab_size == 0 || seq_len == 0) {
        throw ValidationError("arch: token mode needs vocab_size and seq_len (or set patch_size for image mode)");
    }
}

ArchSpec vit_base() {
    ArchSpec s;
    s.image_size = 224;
    s.patch_size = 16;
    s.in_channels = 3;
    s.embed_dim = 768;
    s.depth = 12;
    s.num_heads = 12;
    s.head_dim = 64;
    s.mlp_hidden = 3072;
    s.num_classes = 1000;
    s.cls_token = true;
    s.qkv_bias = true;
    s.layernorm = true;
    return s;
}

ParamBreakdown count_params(const ArchSpec& spec) {
    spec.validate();
    const std::size_t dm = spec.embed_dim;
    ParamBreakdown b;
    b.patch_or_token_embed = spec.image_mode()
                                 ? spec.patch_size * spec.patch_size * spec.in_channels * dm + dm
                                 : spec.vocab_size * dm;
    b.cls = spec.cls_token ? dm : 0;
    b.position_embed = (spec.num_tokens() + (spec.cls_token ? 1 : 0)) * dm;

    LayerParamCount layer;
    layer.qkv = 3 * (dm * dm + (spec.qkv_bias ? dm : 0));
    layer.proj = dm * dm + dm;
    layer.mlp = dm * spec.mlp_hidden + spec.mlp_hidden + spec.mlp_hidden * dm + dm;
    layer.norms = spec.layernorm ? 2 * 2 * dm : 0;
    b.per_layer.assign(spec.depth, layer);

    b.final_norm = spec.layernorm ? 2 * dm : 0;
    b.head = dm * spec.num_classes + spec.num_classes;

    b.total = b.patch_or_token_embed + b.position_embed + b.cls + b.final_norm + b.head;
    for (const LayerParamCount& l : b.per_layer) b.total += l.total();
    return b;
}

ArchSpec arch_from_model(const ModelConfig& config) {
    config.validate();
    ArchSpec s;
    s.vocab_size = config.vocab_size;
    s.seq_len = config.seq_len;
    s.embed_dim = config.embed_dim;
    s.depth = config.depth;
    s.num_heads = config.num_heads;
    s.head_dim = config.head_dim;
    s.mlp_hidden = config.hidden_dim();
    s.num_classes = config.num_classes;
    s.cls_token = false;
    s.qkv_bias = false;
    s.layernorm = config.use_layernorm;
    return s;
}

ArchSpec tradeoff_variant(const ArchSpec& base, std::size_t depth, std::size_t heads, bool head_dim_fixed,
                          MlpPolicy mlp) {
    base.validate();
    if (heads == 0) throw ValidationError("tradeoff: head count must be >= 1");
    ArchSpec v = base;
    v.depth = depth;
    v.num_heads = heads;
    if (head_dim_fixed) {
        v.head_dim = base.effective_head_dim();
        v.embed_dim = heads * v.head_dim;
    } else {
        if (base.embed_dim % heads != 0)
            throw ValidationError("tradeoff: " + std::to_string(heads) + " heads do not divide embed_dim " +
                                  std::to_string(base.embed_dim));
        v.head_dim = base.embed_dim / heads;
    }
    if (mlp == MlpPolicy::keep_ratio) {
        const double ratio = static_cast<double>(base.mlp_hidden) / static_cast<double>(base.embed_dim);
        v.mlp_hidden = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(v.embed_dim)));
    }
    v.validate();
    return v;
}

std::vector<TradeoffRow> tradeoff_table(const ArchSpec& base, std::span<const std::size_t> depths,
                                        std::span<const std::size_t> head_counts, bool head_dim_fixed,
                                        MlpPolicy mlp) {
    const double base_total = static_cast<double>(count_params(base).total);
    std::vector<TradeoffRow> rows;
    for (std::size_t depth : depths)
        for (std::size_t heads : head_counts) {
            const ArchSpec v = tradeoff_variant(base, depth, heads, head_dim_fixed, mlp);
            TradeoffRow r;
            r.depth = depth;
            r.heads = heads;
            r.embed_dim = v.embed_dim;
            r.head_dim = v.effective_head_dim();
            r.mlp_hidden = v.mlp_hidden;
            r.total_params = count_params(v).total;
            r.delta_vs_base_percent = 100.0 * (static_cast<double>(r.total_params) - base_total) / base_total;
            rows.push_back(r);
        }
    return rows;
}

std::optional<std::size_t> widest_mlp_with_reduction(const ArchSpec& reference, const ArchSpec& variant,
                                                     std::span<const std::size_t> hidden_candidates,
                                                     double min_reduction) {
    const double ref_total = static_cast<double>(count_params(reference).total);
    std::optional<std::size_t> best;
    for (std::size_t hidden : hidden_candidates) {
        ArchSpec v = variant;
        v.mlp_hidden = hidden;
        const double total = static_cast<double>(count_params(v).total);
        if (total <= (1.0 - min_reduction) * ref_total && (!best || hidden > *best)) best = hidden;
    }
    return best;
}

}  // namespace mhc
