#include "mhc/probe.hpp"

#include <algorithm>
#include <limits>

namespace mhc {
namespace {

struct SampleKappas {
    std::vector<std::vector<Kappa>> head;  // [layer][head]
    std::vector<Kappa> concat;             // [layer]
};

SampleKappas measure_sample(const Parameters& params, std::span<const int> tokens, const ProbeOptions& options) {
    const ForwardResult fwd = model_forward(tokens, params);
    SampleKappas out;
    for (const LayerTrace& layer : fwd.trace.layers) {
        std::vector<Kappa> heads;
        heads.reserve(layer.head_outputs.size());
        for (const Matrix& a : layer.head_outputs) heads.push_back(condition_number(a, options.rank_tol));
        out.head.push_back(std::move(heads));
        const Matrix& target = options.target == ProbeTarget::pre_projection ? layer.concat : layer.projected;
        out.concat.push_back(condition_number(target, options.rank_tol));
    }
    return out;
}

// Mean of the finite entries, summed in sorted order.
Kappa batch_mean(std::vector<Kappa> values) {
    std::vector<double> finite;
    for (const Kappa& k : values)
        if (k.is_finite()) finite.push_back(k.value());
    if (finite.empty()) return Kappa::infinite();
    std::sort(finite.begin(), finite.end());
    double sum = 0.0;
    for (double v : finite) sum += v;
    return Kappa::finite(sum / static_cast<double>(finite.size()));
}

}  // namespace

ConditioningReport probe_batch(const Parameters& params, const TokenBatch& batch, const ProbeOptions& options,
                               std::size_t step) {
    if (batch.size() == 0) throw ValidationError("probe_batch: batch must be non-empty");
    const ModelConfig& config = params.config();

    std::vector<SampleKappas> samples(batch.size());
    const auto n = static_cast<std::ptrdiff_t>(batch.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i)
        samples[static_cast<std::size_t>(i)] = measure_sample(params, batch.sample(static_cast<std::size_t>(i)), options);

    ConditioningReport report;
    report.step = step;
    report.batch_size_measured = batch.size();
    for (std::size_t l = 0; l < config.depth; ++l) {
        LayerConditioning lc;
        lc.layer = l;
        for (std::size_t h = 0; h < config.num_heads; ++h) {
            std::vector<Kappa> values;
            for (const SampleKappas& s : samples) {
                values.push_back(s.head[l][h]);
                if (s.head[l][h].is_infinite()) ++report.rank_deficient_heads;
            }
            lc.per_head_kappa.push_back(batch_mean(std::move(values)));
        }
        std::vector<Kappa> concat;
        for (const SampleKappas& s : samples) concat.push_back(s.concat[l]);
        lc.concat_kappa = batch_mean(std::move(concat));
        report.per_layer.push_back(std::move(lc));
    }

    double sum = 0.0;
    std::size_t finite = 0;
    for (const LayerConditioning& lc : report.per_layer) {
        if (lc.concat_kappa.is_finite()) {
            sum += lc.concat_kappa.value();
            ++finite;
        } else {
            ++report.excluded_layers;
        }
    }
    report.mean_concat_kappa_across_layers =
        finite > 0 ? sum / static_cast<double>(finite) : std::numeric_limits<double>::infinity();
    return report;
}

std::vector<std::size_t> probe_schedule(std::size_t total_steps, std::size_t every_k_steps) {
    if (every_k_steps == 0) throw ValidationError("probe_schedule: every_k_steps must be >= 1");
    std::vector<std::size_t> steps;
    for (std::size_t s = 0; s <= total_steps; s += every_k_steps) steps.push_back(s);
    return steps;
}

}  // namespace mhc
