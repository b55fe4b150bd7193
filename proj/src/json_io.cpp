#include "mhc/json_io.hpp"

#include <cmath>
#include <set>
#include <string>

namespace mhc {
namespace {

using nlohmann::json;

void require_object(const json& j, const std::string& what, const std::set<std::string>& known) {
    if (!j.is_object()) throw ValidationError(what + ": expected a JSON object");
    for (const auto& [key, value] : j.items())
        if (!known.contains(key)) throw ValidationError(what + ": unknown field '" + key + "'");
}

std::size_t get_size(const json& j, const std::string& what, const char* key, std::size_t fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ValidationError(what + "." + key + ": expected a non-negative integer");
    return v.get<std::size_t>();
}

std::uint64_t get_u64(const json& j, const std::string& what, const char* key, std::uint64_t fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        throw ValidationError(what + "." + key + ": expected an unsigned integer");
    return v.get<std::uint64_t>();
}

double get_double(const json& j, const std::string& what, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number()) throw ValidationError(what + "." + key + ": expected a number");
    return v.get<double>();
}

bool get_bool(const json& j, const std::string& what, const char* key, bool fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_boolean()) throw ValidationError(what + "." + key + ": expected true or false");
    return v.get<bool>();
}

std::vector<std::size_t> get_sizes(const json& j, const std::string& what, const char* key) {
    if (!j.contains(key)) return {};
    const json& v = j.at(key);
    if (!v.is_array()) throw ValidationError(what + "." + key + ": expected an array of integers");
    std::vector<std::size_t> out;
    for (const json& e : v) {
        if (!e.is_number_integer() || e.get<long long>() < 0)
            throw ValidationError(what + "." + key + ": expected an array of non-negative integers");
        out.push_back(e.get<std::size_t>());
    }
    return out;
}

}  // namespace

json number_or_flag(double v) {
    if (std::isnan(v)) return nullptr;
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

json to_json(const ModelConfig& c) {
    return json{{"depth", c.depth},           {"num_heads", c.num_heads},         {"head_dim", c.head_dim},
                {"embed_dim", c.embed_dim},   {"mlp_ratio", c.mlp_ratio},         {"vocab_size", c.vocab_size},
                {"seq_len", c.seq_len},       {"num_classes", c.num_classes},     {"causal", c.causal},
                {"use_layernorm", c.use_layernorm}, {"attn_scale", c.attn_scale}};
}

ModelConfig model_config_from_json(const json& j, ModelConfig d) {
    const std::string w = "model";
    require_object(j, w,
                   {"depth", "num_heads", "head_dim", "embed_dim", "mlp_ratio", "vocab_size", "seq_len", "num_classes",
                    "causal", "use_layernorm", "attn_scale"});
    d.depth = get_size(j, w, "depth", d.depth);
    d.num_heads = get_size(j, w, "num_heads", d.num_heads);
    d.head_dim = get_size(j, w, "head_dim", d.head_dim);
    // embed_dim follows heads * head_dim unless given explicitly.
    d.embed_dim = get_size(j, w, "embed_dim", d.num_heads * d.head_dim);
    d.mlp_ratio = get_double(j, w, "mlp_ratio", d.mlp_ratio);
    d.vocab_size = get_size(j, w, "vocab_size", d.vocab_size);
    d.seq_len = get_size(j, w, "seq_len", d.seq_len);
    d.num_classes = get_size(j, w, "num_classes", d.num_classes);
    d.causal = get_bool(j, w, "causal", d.causal);
    d.use_layernorm = get_bool(j, w, "use_layernorm", d.use_layernorm);
    d.attn_scale = get_bool(j, w, "attn_scale", d.attn_scale);
    d.validate();
    return d;
}

json to_json(const TaskSpec& t) {
    return json{{"kind", to_string(t.kind)},     {"vocab_size", t.vocab_size}, {"seq_len", t.seq_len},
                {"modulus", t.modulus},          {"train_size", t.train_size}, {"eval_size", t.eval_size},
                {"seed", t.seed}};
}

TaskSpec task_spec_from_json(const json& j, TaskSpec d) {
    const std::string w = "task";
    require_object(j, w, {"kind", "vocab_size", "seq_len", "modulus", "train_size", "eval_size", "seed"});
    if (j.contains("kind")) {
        if (!j.at("kind").is_string()) throw ValidationError("task.kind: expected a string");
        d.kind = task_kind_from_string(j.at("kind").get<std::string>());
    }
    d.vocab_size = get_size(j, w, "vocab_size", d.vocab_size);
    d.seq_len = get_size(j, w, "seq_len", d.seq_len);
    d.modulus = get_size(j, w, "modulus", d.modulus);
    d.train_size = get_size(j, w, "train_size", d.train_size);
    d.eval_size = get_size(j, w, "eval_size", d.eval_size);
    d.seed = get_u64(j, w, "seed", d.seed);
    d.validate();
    return d;
}

json to_json(const TrainConfig& t) {
    return json{{"steps", t.steps},
                {"batch_size", t.batch_size},
                {"learning_rate", t.learning_rate},
                {"weight_decay", t.weight_decay},
                {"warmup_steps", t.warmup_steps},
                {"beta1", t.beta1},
                {"beta2", t.beta2},
                {"epsilon", t.epsilon},
                {"seed", t.seed},
                {"init_seed", t.init_seed},
                {"probe_every", t.probe_every},
                {"probe_batch", t.probe_batch},
                {"probe_target", t.probe_target == ProbeTarget::pre_projection ? "pre_projection" : "post_projection"}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig d) {
    const std::string w = "train";
    require_object(j, w,
                   {"steps", "batch_size", "learning_rate", "weight_decay", "warmup_steps", "beta1", "beta2", "epsilon",
                    "seed", "init_seed", "probe_every", "probe_batch", "probe_target"});
    d.steps = get_size(j, w, "steps", d.steps);
    d.batch_size = get_size(j, w, "batch_size", d.batch_size);
    d.learning_rate = get_double(j, w, "learning_rate", d.learning_rate);
    d.weight_decay = get_double(j, w, "weight_decay", d.weight_decay);
    d.warmup_steps = get_size(j, w, "warmup_steps", std::min(d.warmup_steps, d.steps));
    d.beta1 = get_double(j, w, "beta1", d.beta1);
    d.beta2 = get_double(j, w, "beta2", d.beta2);
    d.epsilon = get_double(j, w, "epsilon", d.epsilon);
    d.seed = get_u64(j, w, "seed", d.seed);
    d.init_seed = get_u64(j, w, "init_seed", d.init_seed);
    d.probe_every = get_size(j, w, "probe_every", d.probe_every);
    d.probe_batch = get_size(j, w, "probe_batch", d.probe_batch);
    if (j.contains("probe_target")) {
        const json& v = j.at("probe_target");
        if (v == "pre_projection")
            d.probe_target = ProbeTarget::pre_projection;
        else if (v == "post_projection")
            d.probe_target = ProbeTarget::post_projection;
        else
            throw ValidationError("train.probe_target: expected \"pre_projection\" or \"post_projection\"");
    }
    d.validate();
    return d;
}

json to_json(const ArchSpec& a) {
    return json{{"image_size", a.image_size}, {"patch_size", a.patch_size}, {"in_channels", a.in_channels},
                {"vocab_size", a.vocab_size}, {"seq_len", a.seq_len},       {"embed_dim", a.embed_dim},
                {"depth", a.depth},           {"num_heads", a.num_heads},   {"head_dim", a.head_dim},
                {"mlp_hidden", a.mlp_hidden}, {"num_classes", a.num_classes}, {"cls_token", a.cls_token},
                {"qkv_bias", a.qkv_bias},     {"layernorm", a.layernorm}};
}

ArchSpec arch_spec_from_json(const json& j) {
    const std::string w = "arch";
    require_object(j, w,
                   {"image_size", "patch_size", "in_channels", "vocab_size", "seq_len", "embed_dim", "depth",
                    "num_heads", "head_dim", "mlp_hidden", "num_classes", "cls_token", "qkv_bias", "layernorm"});
    ArchSpec a;
    a.image_size = get_size(j, w, "image_size", 0);
    a.patch_size = get_size(j, w, "patch_size", 0);
    a.in_channels = get_size(j, w, "in_channels", 0);
    a.vocab_size = get_size(j, w, "vocab_size", 0);
    a.seq_len = get_size(j, w, "seq_len", 0);
    a.embed_dim = get_size(j, w, "embed_dim", 0);
    a.depth = get_size(j, w, "depth", 0);
    a.num_heads = get_size(j, w, "num_heads", 0);
    a.head_dim = get_size(j, w, "head_dim", 0);
    if (a.embed_dim == 0 && a.head_dim != 0) a.embed_dim = a.num_heads * a.head_dim;
    a.mlp_hidden = get_size(j, w, "mlp_hidden", 0);
    a.num_classes = get_size(j, w, "num_classes", 0);
    a.cls_token = get_bool(j, w, "cls_token", false);
    a.qkv_bias = get_bool(j, w, "qkv_bias", false);
    a.layernorm = get_bool(j, w, "layernorm", true);
    a.validate();
    return a;
}

json to_json(const SweepSpec& s) {
    return json{{"N", s.seq_len},  {"d", s.head_dim}, {"heads", s.head_counts},
                {"trials", s.trials}, {"seed", s.seed}, {"rank_tol", s.rank_tol}};
}

SweepSpec sweep_spec_from_json(const json& j) {
    const std::string w = "sweep";
    require_object(j, w, {"N", "d", "heads", "trials", "seed", "rank_tol"});
    SweepSpec s;
    s.seq_len = get_size(j, w, "N", s.seq_len);
    s.head_dim = get_size(j, w, "d", s.head_dim);
    s.head_counts = get_sizes(j, w, "heads");
    s.trials = get_size(j, w, "trials", s.trials);
    s.seed = get_u64(j, w, "seed", s.seed);
    s.rank_tol = get_double(j, w, "rank_tol", s.rank_tol);
    s.validate();
    return s;
}

json to_json(const GridSpec& g) { return json{{"depths", g.depths}, {"heads", g.head_counts}, {"seeds", g.seeds}}; }

GridSpec grid_spec_from_json(const json& j) {
    const std::string w = "grid";
    require_object(j, w, {"depths", "heads", "seeds"});
    GridSpec g;
    g.depths = get_sizes(j, w, "depths");
    g.head_counts = get_sizes(j, w, "heads");
    g.seeds = get_size(j, w, "seeds", 1);
    if (g.depths.empty() || g.head_counts.empty()) throw ValidationError("grid: depths and heads must be non-empty");
    if (g.seeds == 0) throw ValidationError("grid.seeds: must be >= 1");
    return g;
}

}  // namespace mhc
