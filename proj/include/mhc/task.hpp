#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mhc {

enum class TaskKind { seq_sum_mod, needle_index };

std::string to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& name);

// Synthetic sequence classification tasks.
//   seq_sum_mod:  label = (sum of tokens) mod modulus
//   needle_index: one marker token (vocab_size - 1) among fillers; label = its position
struct TaskSpec {
    TaskKind kind = TaskKind::seq_sum_mod;
    std::size_t vocab_size = 16;
    std::size_t seq_len = 16;
    std::size_t modulus = 8;
    // 0 = draw fresh training samples every step; otherwise a fixed pool.
    std::size_t train_size = 0;
    std::size_t eval_size = 512;
    std::uint64_t seed = 0;

    std::size_t num_classes() const;
    void validate() const;

    friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

enum class Stream : std::uint64_t { train = 1, eval = 2 };

// Row-major batch x seq_len tokens plus one label per row.
struct TokenBatch {
    std::size_t seq_len = 0;
    std::vector<int> tokens;
    std::vector<int> labels;

    std::size_t size() const noexcept { return labels.size(); }
    std::span<const int> sample(std::size_t i) const { return std::span<const int>(tokens).subspan(i * seq_len, seq_len); }

    friend bool operator==(const TokenBatch&, const TokenBatch&) = default;
};

int task_label(const TaskSpec& task, std::span<const int> tokens);

// Deterministic in (task.seed, stream, counter).
TokenBatch generate_batch(const TaskSpec& task, std::size_t batch_size, Stream stream, std::uint64_t counter);

}  // namespace mhc
