#pragma once

#include <cstddef>
#include <vector>

#include "mhc/linalg.hpp"
#include "mhc/model.hpp"
#include "mhc/task.hpp"

namespace mhc {

// Which matrix counts as "the layer's attention matrix".
enum class ProbeTarget {
    pre_projection,   // [A_1, ..., A_h]
    post_projection,  // [A_1, ..., A_h] W_proj + b
};

struct ProbeOptions {
    ProbeTarget target = ProbeTarget::pre_projection;
    double rank_tol = kDefaultRankTol;
};

struct LayerConditioning {
    std::size_t layer = 0;
    // Batch means over samples with finite kappa; infinite only if every sample was flagged.
    std::vector<Kappa> per_head_kappa;
    Kappa concat_kappa;
};

struct ConditioningReport {
    std::size_t step = 0;
    std::vector<LayerConditioning> per_layer;
    // Mean of the finite per-layer concat kappas; +inf when none are finite.
    double mean_concat_kappa_across_layers = 0.0;
    std::size_t excluded_layers = 0;
    std::size_t batch_size_measured = 0;
    // (sample, layer, head) triples whose kappa was flagged infinite.
    std::size_t rank_deficient_heads = 0;
};

// Kappa per sample, then averaged over the batch. Aggregation sorts the
// per-sample values first, so the report does not depend on batch order.
ConditioningReport probe_batch(const Parameters& params, const TokenBatch& batch, const ProbeOptions& options = {},
                               std::size_t step = 0);

// Steps at which a run of `total_steps` is probed: 0, k, 2k, ... <= total_steps.
std::vector<std::size_t> probe_schedule(std::size_t total_steps, std::size_t every_k_steps);

}  // namespace mhc
