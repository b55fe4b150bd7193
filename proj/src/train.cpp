#include "mhc/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "mhc/planner.hpp"
#include "mhc/random_matrix.hpp"

namespace mhc {
namespace {

// Fixed gradient partition: samples are split into at most this many
// contiguous chunks regardless of the thread count, and chunk sums are added
// in chunk order.
constexpr std::size_t kGradientChunks = 8;

TokenBatch take_front(const TokenBatch& batch, std::size_t count) {
    TokenBatch out;
    out.seq_len = batch.seq_len;
    count = std::min(count, batch.size());
    out.tokens.assign(batch.tokens.begin(), batch.tokens.begin() + static_cast<std::ptrdiff_t>(count * batch.seq_len));
    out.labels.assign(batch.labels.begin(), batch.labels.begin() + static_cast<std::ptrdiff_t>(count));
    return out;
}

TokenBatch draw_from_pool(const TokenBatch& pool, std::size_t batch_size, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    TokenBatch out;
    out.seq_len = pool.seq_len;
    out.tokens.reserve(batch_size * pool.seq_len);
    for (std::size_t b = 0; b < batch_size; ++b) {
        const std::size_t i = pick(rng);
        const auto s = pool.sample(i);
        out.tokens.insert(out.tokens.end(), s.begin(), s.end());
        out.labels.push_back(pool.labels[i]);
    }
    return out;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

void TrainConfig::validate() const {
    if (steps > 0 && batch_size == 0) throw ValidationError("train: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ValidationError("train: learning_rate must be positive");
    if (weight_decay < 0.0) throw ValidationError("train: weight_decay must be >= 0");
    if (warmup_steps > steps) throw ValidationError("train: warmup_steps must be <= steps");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw ValidationError("train: betas must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw ValidationError("train: epsilon must be positive");
    if (probe_every == 0) throw ValidationError("train: probe_every must be >= 1");
    if (probe_batch == 0) throw ValidationError("train: probe_batch must be >= 1");
}

AdamWConfig TrainConfig::optimizer() const {
    return AdamWConfig{learning_rate, weight_decay, beta1, beta2, epsilon, warmup_steps};
}

double RunResult::final_mean_kappa() const {
    if (conditioning.empty()) return std::numeric_limits<double>::quiet_NaN();
    return conditioning.back().mean_concat_kappa_across_layers;
}

void check_compatible(const ModelConfig& model, const TaskSpec& task) {
    if (model.vocab_size != task.vocab_size) throw ValidationError("model and task disagree on vocab_size");
    if (model.seq_len != task.seq_len) throw ValidationError("model and task disagree on seq_len");
    if (model.num_classes != task.num_classes())
        throw ValidationError("model num_classes must equal the task's class count (" +
                              std::to_string(task.num_classes()) + ")");
}

double evaluate_accuracy(const Parameters& params, const TokenBatch& batch) {
    if (batch.size() == 0) return 0.0;
    std::vector<unsigned char> hit(batch.size(), 0);
    const auto n = static_cast<std::ptrdiff_t>(batch.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        const std::vector<double> logits = model_logits(batch.sample(idx), params);
        const auto best = std::max_element(logits.begin(), logits.end()) - logits.begin();
        hit[idx] = best == batch.labels[idx] ? 1 : 0;
    }
    std::size_t correct = 0;
    for (unsigned char h : hit) correct += h;
    return static_cast<double>(correct) / static_cast<double>(batch.size());
}

RunResult train(const ModelConfig& model, const TaskSpec& task, const TrainConfig& tc) {
    model.validate();
    task.validate();
    tc.validate();
    check_compatible(model, task);

    RunResult result;
    result.model = model;
    result.task = task;
    result.train = tc;

    Parameters params = init_parameters(model, tc.init_seed);
    result.param_count = params.count();
    AdamW optimizer(params.count());
    const AdamWConfig opt = tc.optimizer();

    const TokenBatch eval = generate_batch(task, task.eval_size, Stream::eval, 0);
    const TokenBatch probe_set = take_front(eval, tc.probe_batch);
    const TokenBatch pool =
        task.train_size > 0 ? generate_batch(task, task.train_size, Stream::train, 0) : TokenBatch{};
    ProbeOptions probe_options;
    probe_options.target = tc.probe_target;

    const std::vector<std::size_t> schedule = probe_schedule(tc.steps, tc.probe_every);
    std::size_t next_probe = 0;
    auto maybe_probe = [&](std::size_t step) {
        if (next_probe < schedule.size() && schedule[next_probe] == step) {
            result.conditioning.push_back(probe_batch(params, probe_set, probe_options, step));
            ++next_probe;
        }
    };

    const std::size_t chunks = std::min(kGradientChunks, std::max<std::size_t>(tc.batch_size, 1));
    std::vector<Parameters> chunk_grads;
    std::vector<GradientEngine> engines;
    for (std::size_t c = 0; c < chunks; ++c) {
        chunk_grads.push_back(params.zeros_like());
        engines.emplace_back(model);
    }
    Parameters grads = params.zeros_like();
    std::vector<double> chunk_loss(chunks);
    const double weight = 1.0 / static_cast<double>(tc.batch_size);

    for (std::size_t step = 0; step < tc.steps; ++step) {
        maybe_probe(step);
        const std::uint64_t counter = mix_seed(tc.seed, step);
        const TokenBatch batch = task.train_size > 0 ? draw_from_pool(pool, tc.batch_size, counter)
                                                     : generate_batch(task, tc.batch_size, Stream::train, counter);

        const auto nchunks = static_cast<std::ptrdiff_t>(chunks);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t ci = 0; ci < nchunks; ++ci) {
            const auto c = static_cast<std::size_t>(ci);
            const std::size_t begin = c * tc.batch_size / chunks;
            const std::size_t end = (c + 1) * tc.batch_size / chunks;
            chunk_grads[c].set_zero();
            double loss = 0.0;
            for (std::size_t i = begin; i < end; ++i)
                loss += engines[c].accumulate(batch.sample(i), batch.labels[i], params, chunk_grads[c], weight);
            chunk_loss[c] = loss;
        }

        grads.set_zero();
        double loss = 0.0;
        for (std::size_t c = 0; c < chunks; ++c) {
            std::span<double> g = grads.values();
            std::span<const double> cg = chunk_grads[c].values();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += cg[i];
            loss += chunk_loss[c];
        }
        loss *= weight;
        if (!std::isfinite(loss))
            throw DivergenceError("training diverged: non-finite loss at step " + std::to_string(step + 1), step, "loss");

        optimizer.step(params, grads, opt, step + 1);
        result.loss_curve.push_back(loss);
        result.lr_curve.push_back(scheduled_learning_rate(opt, step + 1));
    }
    maybe_probe(tc.steps);

    const std::size_t tail = std::min<std::size_t>(10, result.loss_curve.size());
    if (tail == 0) {
        result.final_train_loss = std::numeric_limits<double>::quiet_NaN();
    } else {
        double s = 0.0;
        for (std::size_t i = result.loss_curve.size() - tail; i < result.loss_curve.size(); ++i) s += result.loss_curve[i];
        result.final_train_loss = s / static_cast<double>(tail);
    }
    result.final_eval_accuracy = evaluate_accuracy(params, eval);
    result.final_params = std::move(params);
    return result;
}

ModelConfig with_depth_heads(const ModelConfig& base, std::size_t depth, std::size_t heads) {
    ModelConfig c = base;
    c.depth = depth;
    c.num_heads = heads;
    c.embed_dim = heads * base.head_dim;
    return c;
}

GridResult depth_heads_grid(const ModelConfig& base, const GridSpec& grid, const TaskSpec& task,
                            const TrainConfig& tc) {
    if (grid.depths.empty() || grid.head_counts.empty()) throw ValidationError("grid: depths and heads must be non-empty");
    if (grid.seeds == 0) throw ValidationError("grid: seeds must be >= 1");

    std::map<std::pair<std::size_t, std::size_t>, GridPoint> points;
    GridResult out;
    for (std::size_t depth : grid.depths)
        for (std::size_t heads : grid.head_counts) {
            GridPoint p;
            p.depth = depth;
            p.heads = heads;
            p.model = with_depth_heads(base, depth, heads);
            p.model.validate();
            p.param_count = count_params(arch_from_model(p.model)).total;
            for (std::size_t s = 0; s < grid.seeds; ++s) {
                TrainConfig run_tc = tc;
                run_tc.seed = tc.seed + s;
                run_tc.init_seed = tc.init_seed + s;
                try {
                    p.runs.push_back(train(p.model, task, run_tc));
                    p.seed_indices.push_back(s);
                } catch (const DivergenceError& e) {
                    out.failures.push_back(GridFailure{depth, heads, s, e.what()});
                }
            }
            std::vector<double> accs, kappas;
            for (const RunResult& r : p.runs) {
                accs.push_back(r.final_eval_accuracy);
                if (std::isfinite(r.final_mean_kappa())) kappas.push_back(r.final_mean_kappa());
            }
            p.mean_acc = mean_of(accs);
            double ss = 0.0;
            for (double a : accs) ss += (a - p.mean_acc) * (a - p.mean_acc);
            p.std_acc = accs.size() > 1 ? std::sqrt(ss / static_cast<double>(accs.size() - 1)) : 0.0;
            p.final_mean_kappa = kappas.empty() ? std::numeric_limits<double>::quiet_NaN() : mean_of(kappas);
            points[{depth, heads}] = std::move(p);
        }
    for (auto& [key, p] : points) out.points.push_back(std::move(p));
    return out;
}

}  // namespace mhc
