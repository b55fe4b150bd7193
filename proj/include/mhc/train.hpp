#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mhc/model.hpp"
#include "mhc/optim.hpp"
#include "mhc/probe.hpp"
#include "mhc/task.hpp"

namespace mhc {

struct TrainConfig {
    std::size_t steps = 3000;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    double weight_decay = 0.05;
    std::size_t warmup_steps = 100;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;       // minibatch order
    std::uint64_t init_seed = 0;  // parameter initialization
    std::size_t probe_every = 500;
    std::size_t probe_batch = 8;  // taken from the front of the eval set
    ProbeTarget probe_target = ProbeTarget::pre_projection;

    void validate() const;
    AdamWConfig optimizer() const;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct RunResult {
    ModelConfig model;
    TaskSpec task;
    TrainConfig train;
    double final_train_loss = 0.0;  // mean over the last min(10, steps) steps; NaN when steps = 0
    double final_eval_accuracy = 0.0;
    std::vector<double> loss_curve;
    std::vector<double> lr_curve;
    std::vector<ConditioningReport> conditioning;
    std::size_t param_count = 0;
    Parameters final_params;

    // mean_concat_kappa_across_layers of the last report.
    double final_mean_kappa() const;
};

// Checks that model and task agree on vocabulary, length and class count.
void check_compatible(const ModelConfig& model, const TaskSpec& task);

double evaluate_accuracy(const Parameters& params, const TokenBatch& batch);

// Minibatch AdamW with conditioning probes on the schedule from probe_schedule.
// Throws DivergenceError when the loss or a gradient becomes non-finite.
RunResult train(const ModelConfig& model, const TaskSpec& task, const TrainConfig& tc);

struct GridSpec {
    std::vector<std::size_t> depths;
    std::vector<std::size_t> head_counts;
    std::size_t seeds = 3;
};

struct GridPoint {
    std::size_t depth = 0;
    std::size_t heads = 0;
    ModelConfig model;
    std::size_t param_count = 0;
    std::vector<RunResult> runs;  // by seed index; diverged seeds are absent
    std::vector<std::size_t> seed_indices;
    double mean_acc = 0.0;
    double std_acc = 0.0;
    double final_mean_kappa = 0.0;
};

struct GridFailure {
    std::size_t depth = 0;
    std::size_t heads = 0;
    std::size_t seed_index = 0;
    std::string message;
};

struct GridResult {
    std::vector<GridPoint> points;  // sorted by (depth, heads)
    std::vector<GridFailure> failures;
};

// Seed s trains with (init_seed + s, seed + s); s = 0 reproduces a standalone
// train() call with the base TrainConfig. Embed dim tracks heads * base head_dim.
GridResult depth_heads_grid(const ModelConfig& base, const GridSpec& grid, const TaskSpec& task,
                            const TrainConfig& tc);

ModelConfig with_depth_heads(const ModelConfig& base, std::size_t depth, std::size_t heads);

}  // namespace mhc
