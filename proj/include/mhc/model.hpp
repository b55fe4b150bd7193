#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mhc/matrix.hpp"

namespace mhc {

// Hyperparameters that fully determine a toy encoder.
struct ModelConfig {
    std::size_t depth = 2;
    std::size_t num_heads = 4;
    std::size_t head_dim = 16;
    std::size_t embed_dim = 64;
    double mlp_ratio = 4.0;
    std::size_t vocab_size = 16;
    std::size_t seq_len = 16;
    std::size_t num_classes = 8;
    bool causal = false;
    bool use_layernorm = true;
    bool attn_scale = true;

    // round(mlp_ratio * embed_dim)
    std::size_t hidden_dim() const;
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Convenience for the common case embed_dim = heads * head_dim.
ModelConfig make_model_config(std::size_t depth, std::size_t heads, std::size_t head_dim, double mlp_ratio,
                              std::size_t vocab, std::size_t seq_len, std::size_t classes);

enum class BlockKind { weight, bias, gain };

struct ParamBlock {
    std::string name;
    BlockKind kind = BlockKind::weight;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t size() const { return rows * cols; }
};

inline constexpr std::size_t kNoBlock = static_cast<std::size_t>(-1);

// Indices into ParamLayout::blocks. Norm entries are kNoBlock when layernorm is off.
struct LayerBlocks {
    std::vector<std::size_t> query, key, value;  // one D x d block per head
    std::size_t proj_w = kNoBlock, proj_b = kNoBlock;
    std::size_t mlp_w1 = kNoBlock, mlp_b1 = kNoBlock, mlp_w2 = kNoBlock, mlp_b2 = kNoBlock;
    std::size_t ln1_g = kNoBlock, ln1_b = kNoBlock, ln2_g = kNoBlock, ln2_b = kNoBlock;
};

// Fixed block order: token embedding, positions, then per layer Q/K/V (by head),
// projection, MLP, norms, then final norm and classifier head.
struct ParamLayout {
    std::vector<ParamBlock> blocks;
    std::size_t token_embed = kNoBlock;
    std::size_t pos_embed = kNoBlock;
    std::vector<LayerBlocks> layers;
    std::size_t final_ln_g = kNoBlock, final_ln_b = kNoBlock;
    std::size_t head_w = kNoBlock, head_b = kNoBlock;
    std::size_t total = 0;

    static ParamLayout build(const ModelConfig& config);
};

// Views of one layer's weights.
struct LayerParams {
    std::vector<ConstMatrixView> query, key, value;
    ConstMatrixView proj_w, proj_b, mlp_w1, mlp_b1, mlp_w2, mlp_b2;
    ConstMatrixView ln1_g, ln1_b, ln2_g, ln2_b;  // empty views without layernorm
};

struct HeadParams {
    ConstMatrixView query, key, value;
};

// Flat storage plus a shared layout. Gradients use the same type.
class Parameters {
public:
    Parameters() = default;
    explicit Parameters(const ModelConfig& config);  // zero-filled

    const ModelConfig& config() const noexcept { return config_; }
    const ParamLayout& layout() const noexcept { return *layout_; }
    std::size_t count() const noexcept { return values_.size(); }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    MatrixView block(std::size_t index);
    ConstMatrixView block(std::size_t index) const;
    const ParamBlock& block_info(std::size_t index) const { return layout_->blocks.at(index); }
    std::size_t block_count() const noexcept { return layout_->blocks.size(); }

    LayerParams layer(std::size_t index) const;
    HeadParams head(std::size_t layer_index, std::size_t head_index) const;

    void set_zero();
    Parameters zeros_like() const { return Parameters(config_); }

    friend bool operator==(const Parameters& a, const Parameters& b) {
        return a.config_ == b.config_ && a.values_ == b.values_;
    }

private:
    ModelConfig config_;
    std::shared_ptr<const ParamLayout> layout_;
    std::vector<double> values_;
};

// Weights ~ N(0, 1/D) truncated at 3 sigma; biases 0; norm gains 1.
Parameters init_parameters(const ModelConfig& config, std::uint64_t seed);

struct HeadOutput {
    Matrix output;   // A_i = W v, N x d
    Matrix weights;  // W = softmax(q k^T [/ sqrt d]), N x N, row-stochastic
};

HeadOutput attention_head_forward(ConstMatrixView x, const HeadParams& head, const ModelConfig& config);

// One encoder block: X + proj([A_1..A_h]) then + MLP, with pre-norms when enabled.
Matrix block_forward(ConstMatrixView x, const LayerParams& layer, const ModelConfig& config);

struct LayerTrace {
    std::vector<Matrix> attention_weights;  // per head, N x N
    std::vector<Matrix> head_outputs;       // per head, N x d
    Matrix concat;                          // [A_1, ..., A_h], N x D
    Matrix projected;                       // concat * W_proj + b, N x D
};

struct ForwardTrace {
    std::vector<LayerTrace> layers;
    std::vector<double> logits;
};

struct ForwardResult {
    std::vector<double> logits;
    ForwardTrace trace;
};

ForwardResult model_forward(std::span<const int> tokens, const Parameters& params);

// Logits only; no trace copies.
std::vector<double> model_logits(std::span<const int> tokens, const Parameters& params);

struct BackwardResult {
    double loss = 0.0;
    Parameters gradients;
};

// Cross-entropy loss of the logits against `label` and its exact gradient.
BackwardResult backward(std::span<const int> tokens, int label, const Parameters& params);

// Scratch buffers reused across samples by the training loop.
class Workspace;

class GradientEngine {
public:
    explicit GradientEngine(const ModelConfig& config);
    ~GradientEngine();
    GradientEngine(GradientEngine&&) noexcept;
    GradientEngine& operator=(GradientEngine&&) noexcept;

    // Adds d(loss)/d(params) * weight into `grads`; returns the unweighted loss.
    double accumulate(std::span<const int> tokens, int label, const Parameters& params, Parameters& grads,
                      double weight = 1.0);

private:
    std::unique_ptr<Workspace> ws_;
};

double cross_entropy(std::span<const double> logits, int label);

// Binary container: magic, version, config JSON, then length-prefixed float64
// blocks in layout order. Little-endian.
void save_parameters(std::ostream& out, const Parameters& params);
Parameters load_parameters(std::istream& in);

}  // namespace mhc
