#include "mhc/task.hpp"

#include <random>

#include "mhc/errors.hpp"
#include "mhc/random_matrix.hpp"

namespace mhc {

std::string to_string(TaskKind kind) {
    switch (kind) {
        case TaskKind::seq_sum_mod:
            return "seq_sum_mod";
        case TaskKind::needle_index:
            return "needle_index";
    }
    return "unknown";
}

TaskKind task_kind_from_string(const std::string& name) {
    if (name == "seq_sum_mod") return TaskKind::seq_sum_mod;
    if (name == "needle_index") return TaskKind::needle_index;
    throw ValidationError("unknown task kind '" + name + "'");
}

std::size_t TaskSpec::num_classes() const { return kind == TaskKind::seq_sum_mod ? modulus : seq_len; }

void TaskSpec::validate() const {
    if (seq_len == 0) throw ValidationError("task: seq_len must be >= 1");
    if (eval_size == 0) throw ValidationError("task: eval_size must be >= 1");
    if (kind == TaskKind::seq_sum_mod) {
        if (vocab_size == 0) throw ValidationError("task: vocab_size must be >= 1");
        if (modulus == 0) throw ValidationError("task: modulus must be >= 1");
    } else if (vocab_size < 2) {
        throw ValidationError("task: needle_index needs vocab_size >= 2");
    }
}

int task_label(const TaskSpec& task, std::span<const int> tokens) {
    if (task.kind == TaskKind::seq_sum_mod) {
        long long sum = 0;
        for (int t : tokens) sum += t;
        return static_cast<int>(sum % static_cast<long long>(task.modulus));
    }
    const int marker = static_cast<int>(task.vocab_size) - 1;
    int found = -1;
    for (std::size_t i = 0; i < tokens.size(); ++i)
        if (tokens[i] == marker) {
            if (found >= 0) throw ValidationError("needle_index: more than one marker token");
            found = static_cast<int>(i);
        }
    if (found < 0) throw ValidationError("needle_index: no marker token");
    return found;
}

TokenBatch generate_batch(const TaskSpec& task, std::size_t batch_size, Stream stream, std::uint64_t counter) {
    task.validate();
    std::mt19937_64 rng(mix_seed(task.seed, static_cast<std::uint64_t>(stream), counter));
    TokenBatch batch;
    batch.seq_len = task.seq_len;
    batch.tokens.resize(batch_size * task.seq_len);
    batch.labels.resize(batch_size);

    const int vocab = static_cast<int>(task.vocab_size);
    for (std::size_t b = 0; b < batch_size; ++b) {
        int* row = batch.tokens.data() + b * task.seq_len;
        if (task.kind == TaskKind::seq_sum_mod) {
            std::uniform_int_distribution<int> tok(0, vocab - 1);
            for (std::size_t i = 0; i < task.seq_len; ++i) row[i] = tok(rng);
        } else {
            std::uniform_int_distribution<int> filler(0, vocab - 2);
            std::uniform_int_distribution<std::size_t> where(0, task.seq_len - 1);
            for (std::size_t i = 0; i < task.seq_len; ++i) row[i] = filler(rng);
            row[where(rng)] = vocab - 1;
        }
        batch.labels[b] = task_label(task, batch.sample(b));
    }
    return batch;
}

}  // namespace mhc
