#include "mhc/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>

#include "mhc/json_io.hpp"
#include "mhc/kernels.hpp"

namespace mhc {

using kernels::Mode;

// ---------------------------------------------------------------------------
// Config and layout

std::size_t ModelConfig::hidden_dim() const {
    return static_cast<std::size_t>(std::llround(mlp_ratio * static_cast<double>(embed_dim)));
}

void ModelConfig::validate() const {
    if (num_heads == 0 || head_dim == 0 || embed_dim == 0 || vocab_size == 0 || seq_len == 0 || num_classes == 0)
        throw ValidationError("model config: all dimensions must be >= 1");
    if (embed_dim != num_heads * head_dim)
        throw ValidationError("model config: embed_dim (" + std::to_string(embed_dim) + ") must equal num_heads * head_dim (" +
                              std::to_string(num_heads * head_dim) + ")");
    if (!(mlp_ratio > 0.0) || !std::isfinite(mlp_ratio)) throw ValidationError("model config: mlp_ratio must be positive");
    if (hidden_dim() == 0) throw ValidationError("model config: mlp_ratio * embed_dim rounds to 0");
}

ModelConfig make_model_config(std::size_t depth, std::size_t heads, std::size_t head_dim, double mlp_ratio,
                              std::size_t vocab, std::size_t seq_len, std::size_t classes) {
    ModelConfig c;
    c.depth = depth;
    c.num_heads = heads;
    c.head_dim = head_dim;
    c.embed_dim = heads * head_dim;
    c.mlp_ratio = mlp_ratio;
    c.vocab_size = vocab;
    c.seq_len = seq_len;
    c.num_classes = classes;
    c.validate();
    return c;
}

ParamLayout ParamLayout::build(const ModelConfig& config) {
    config.validate();
    ParamLayout l;
    const std::size_t dm = config.embed_dim;
    const std::size_t hidden = config.hidden_dim();
    auto add = [&l](std::string name, BlockKind kind, std::size_t rows, std::size_t cols) {
        l.blocks.push_back(ParamBlock{std::move(name), kind, l.total, rows, cols});
        l.total += rows * cols;
        return l.blocks.size() - 1;
    };

    l.token_embed = add("token_embed", BlockKind::weight, config.vocab_size, dm);
    l.pos_embed = add("pos_embed", BlockKind::weight, config.seq_len, dm);
    for (std::size_t i = 0; i < config.depth; ++i) {
        const std::string p = "layer" + std::to_string(i) + ".";
        LayerBlocks lb;
        for (std::size_t h = 0; h < config.num_heads; ++h)
            lb.query.push_back(add(p + "q" + std::to_string(h), BlockKind::weight, dm, config.head_dim));
        for (std::size_t h = 0; h < config.num_heads; ++h)
            lb.key.push_back(add(p + "k" + std::to_string(h), BlockKind::weight, dm, config.head_dim));
        for (std::size_t h = 0; h < config.num_heads; ++h)
            lb.value.push_back(add(p + "v" + std::to_string(h), BlockKind::weight, dm, config.head_dim));
        lb.proj_w = add(p + "proj_w", BlockKind::weight, dm, dm);
        lb.proj_b = add(p + "proj_b", BlockKind::bias, 1, dm);
        lb.mlp_w1 = add(p + "mlp_w1", BlockKind::weight, dm, hidden);
        lb.mlp_b1 = add(p + "mlp_b1", BlockKind::bias, 1, hidden);
        lb.mlp_w2 = add(p + "mlp_w2", BlockKind::weight, hidden, dm);
        lb.mlp_b2 = add(p + "mlp_b2", BlockKind::bias, 1, dm);
        if (config.use_layernorm) {
            lb.ln1_g = add(p + "ln1_g", BlockKind::gain, 1, dm);
            lb.ln1_b = add(p + "ln1_b", BlockKind::bias, 1, dm);
            lb.ln2_g = add(p + "ln2_g", BlockKind::gain, 1, dm);
            lb.ln2_b = add(p + "ln2_b", BlockKind::bias, 1, dm);
        }
        l.layers.push_back(std::move(lb));
    }
    if (config.use_layernorm) {
        l.final_ln_g = add("final_ln_g", BlockKind::gain, 1, dm);
        l.final_ln_b = add("final_ln_b", BlockKind::bias, 1, dm);
    }
    l.head_w = add("head_w", BlockKind::weight, dm, config.num_classes);
    l.head_b = add("head_b", BlockKind::bias, 1, config.num_classes);
    return l;
}

Parameters::Parameters(const ModelConfig& config)
    : config_(config), layout_(std::make_shared<const ParamLayout>(ParamLayout::build(config))),
      values_(layout_->total, 0.0) {}

MatrixView Parameters::block(std::size_t index) {
    const ParamBlock& b = layout_->blocks.at(index);
    return {values_.data() + b.offset, b.rows, b.cols};
}

ConstMatrixView Parameters::block(std::size_t index) const {
    const ParamBlock& b = layout_->blocks.at(index);
    return {values_.data() + b.offset, b.rows, b.cols};
}

LayerParams Parameters::layer(std::size_t index) const {
    const LayerBlocks& lb = layout_->layers.at(index);
    LayerParams p;
    for (std::size_t h = 0; h < config_.num_heads; ++h) {
        p.query.push_back(block(lb.query[h]));
        p.key.push_back(block(lb.key[h]));
        p.value.push_back(block(lb.value[h]));
    }
    p.proj_w = block(lb.proj_w);
    p.proj_b = block(lb.proj_b);
    p.mlp_w1 = block(lb.mlp_w1);
    p.mlp_b1 = block(lb.mlp_b1);
    p.mlp_w2 = block(lb.mlp_w2);
    p.mlp_b2 = block(lb.mlp_b2);
    if (config_.use_layernorm) {
        p.ln1_g = block(lb.ln1_g);
        p.ln1_b = block(lb.ln1_b);
        p.ln2_g = block(lb.ln2_g);
        p.ln2_b = block(lb.ln2_b);
    }
    return p;
}

HeadParams Parameters::head(std::size_t layer_index, std::size_t head_index) const {
    const LayerBlocks& lb = layout_->layers.at(layer_index);
    return {block(lb.query.at(head_index)), block(lb.key.at(head_index)), block(lb.value.at(head_index))};
}

void Parameters::set_zero() { std::fill(values_.begin(), values_.end(), 0.0); }

Parameters init_parameters(const ModelConfig& config, std::uint64_t seed) {
    Parameters p(config);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sigma = 1.0 / std::sqrt(static_cast<double>(config.embed_dim));
    for (std::size_t i = 0; i < p.block_count(); ++i) {
        const ParamBlock& info = p.block_info(i);
        auto values = p.values().subspan(info.offset, info.size());
        switch (info.kind) {
            case BlockKind::gain:
                std::fill(values.begin(), values.end(), 1.0);
                break;
            case BlockKind::bias:
                std::fill(values.begin(), values.end(), 0.0);
                break;
            case BlockKind::weight:
                for (double& v : values) {
                    double z = normal(rng);
                    while (std::abs(z) > 3.0) z = normal(rng);
                    v = sigma * z;
                }
                break;
        }
    }
    return p;
}

// ---------------------------------------------------------------------------
// Elementwise pieces

namespace {

constexpr double kLayerNormEps = 1e-5;

void resize(Matrix& m, std::size_t rows, std::size_t cols) {
    if (m.rows() != rows || m.cols() != cols) m = Matrix(rows, cols);
}

void add_row_bias(MatrixView m, ConstMatrixView bias) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double* row = m.row(r);
        for (std::size_t c = 0; c < m.cols(); ++c) row[c] += bias(0, c);
    }
}

void accumulate_column_sums(ConstMatrixView m, MatrixView out) {
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) out(0, c) += m(r, c);
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

// y = g * (x - mean) / sqrt(var + eps) + b per row; keeps xhat and 1/sigma.
void layernorm_forward(ConstMatrixView x, ConstMatrixView g, ConstMatrixView b, Matrix& y, Matrix& xhat,
                       std::vector<double>& rstd) {
    const std::size_t n = x.rows(), dm = x.cols();
    resize(y, n, dm);
    resize(xhat, n, dm);
    rstd.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        const double* xr = x.row(r);
        double mean = 0.0;
        for (std::size_t c = 0; c < dm; ++c) mean += xr[c];
        mean /= static_cast<double>(dm);
        double var = 0.0;
        for (std::size_t c = 0; c < dm; ++c) var += (xr[c] - mean) * (xr[c] - mean);
        var /= static_cast<double>(dm);
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        rstd[r] = inv;
        for (std::size_t c = 0; c < dm; ++c) {
            const double h = (xr[c] - mean) * inv;
            xhat(r, c) = h;
            y(r, c) = h * g(0, c) + b(0, c);
        }
    }
}

// dx += LN'(dy); dg, db accumulate.
void layernorm_backward(ConstMatrixView dy, const Matrix& xhat, const std::vector<double>& rstd, ConstMatrixView g,
                        MatrixView dg, MatrixView db, MatrixView dx) {
    const std::size_t n = dy.rows(), dm = dy.cols();
    std::vector<double> dxhat(dm);
    for (std::size_t r = 0; r < n; ++r) {
        double mean_d = 0.0, mean_dx = 0.0;
        for (std::size_t c = 0; c < dm; ++c) {
            const double d = dy(r, c);
            dg(0, c) += d * xhat(r, c);
            db(0, c) += d;
            dxhat[c] = d * g(0, c);
            mean_d += dxhat[c];
            mean_dx += dxhat[c] * xhat(r, c);
        }
        mean_d /= static_cast<double>(dm);
        mean_dx /= static_cast<double>(dm);
        for (std::size_t c = 0; c < dm; ++c) dx(r, c) += rstd[r] * (dxhat[c] - mean_d - xhat(r, c) * mean_dx);
    }
}

// Row-wise softmax of scores in place; entries above the diagonal are zeroed when causal.
void softmax_rows(MatrixView s, bool causal) {
    for (std::size_t r = 0; r < s.rows(); ++r) {
        double* row = s.row(r);
        const std::size_t valid = causal ? r + 1 : s.cols();
        double mx = row[0];
        for (std::size_t c = 1; c < valid; ++c) mx = std::max(mx, row[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < valid; ++c) {
            row[c] = std::exp(row[c] - mx);
            sum += row[c];
        }
        const double inv = 1.0 / sum;
        for (std::size_t c = 0; c < valid; ++c) row[c] *= inv;
        for (std::size_t c = valid; c < s.cols(); ++c) row[c] = 0.0;
    }
}

double score_scale(const ModelConfig& config) {
    return config.attn_scale ? 1.0 / std::sqrt(static_cast<double>(config.head_dim)) : 1.0;
}

// q, k, v slices are written by the caller's projections; produces W and A_i.
void head_attention(ConstMatrixView q, ConstMatrixView k, ConstMatrixView v, const ModelConfig& config,
                    Matrix& weights, MatrixView out) {
    const std::size_t n = q.rows();
    resize(weights, n, n);
    kernels::matmul_nt(q, k, weights);
    const double scale = score_scale(config);
    if (scale != 1.0)
        for (double& x : weights.values()) x *= scale;
    softmax_rows(weights, config.causal);
    kernels::matmul(weights, v, out);
}

void check_input(ConstMatrixView x, const ModelConfig& config) {
    if (x.rows() == 0 || x.rows() > config.seq_len)
        throw ValidationError("input must have between 1 and seq_len rows");
    if (x.cols() != config.embed_dim) throw ValidationError("input width must equal embed_dim");
}

void check_layer(const LayerParams& p, const ModelConfig& config) {
    const std::size_t dm = config.embed_dim, d = config.head_dim;
    if (p.query.size() != config.num_heads || p.key.size() != config.num_heads || p.value.size() != config.num_heads)
        throw ValidationError("layer: head count mismatch");
    for (std::size_t h = 0; h < config.num_heads; ++h)
        for (ConstMatrixView w : {p.query[h], p.key[h], p.value[h]})
            if (w.rows() != dm || w.cols() != d) throw ValidationError("layer: head projection must be D x d");
    if (p.proj_w.rows() != dm || p.proj_w.cols() != dm) throw ValidationError("layer: projection must be D x D");
    if (p.mlp_w1.rows() != dm || p.mlp_w2.cols() != dm || p.mlp_w1.cols() != p.mlp_w2.rows())
        throw ValidationError("layer: MLP shape mismatch");
}

}  // namespace

// ---------------------------------------------------------------------------
// Forward state

struct LayerState {
    Matrix x_in;
    Matrix y, y_hat;
    std::vector<double> y_rstd;
    Matrix q, k, v;  // N x D, head i in columns [i*d, (i+1)*d)
    std::vector<Matrix> weights;
    Matrix a;
    Matrix o;
    Matrix x1;
    Matrix z, z_hat;
    std::vector<double> z_rstd;
    Matrix hpre, hact;
    Matrix x_out;
};

class Workspace {
public:
    explicit Workspace(const ModelConfig& c) : config(c), layers(c.depth) {}

    ModelConfig config;
    std::vector<LayerState> layers;
    Matrix x0;
    Matrix xf, xf_hat;
    std::vector<double> xf_rstd;
    std::vector<double> pooled, logits;

    // backward scratch
    Matrix dx, dx1, dz, dh, dy, da, dq, dk, dv, dw;
    std::vector<double> dpooled, dlogits;
};

namespace {

void layer_forward(const LayerParams& p, const ModelConfig& config, LayerState& s) {
    const std::size_t n = s.x_in.rows(), dm = config.embed_dim, d = config.head_dim;
    const std::size_t hidden = p.mlp_w1.cols();
    if (config.use_layernorm) {
        layernorm_forward(s.x_in, p.ln1_g, p.ln1_b, s.y, s.y_hat, s.y_rstd);
    } else {
        s.y = s.x_in;
    }
    resize(s.q, n, dm);
    resize(s.k, n, dm);
    resize(s.v, n, dm);
    resize(s.a, n, dm);
    s.weights.resize(config.num_heads);
    for (std::size_t h = 0; h < config.num_heads; ++h) {
        MatrixView qh = s.q.view().col_slice(h * d, d);
        MatrixView kh = s.k.view().col_slice(h * d, d);
        MatrixView vh = s.v.view().col_slice(h * d, d);
        kernels::matmul(s.y, p.query[h], qh);
        kernels::matmul(s.y, p.key[h], kh);
        kernels::matmul(s.y, p.value[h], vh);
        head_attention(qh, kh, vh, config, s.weights[h], s.a.view().col_slice(h * d, d));
    }
    resize(s.o, n, dm);
    kernels::matmul(s.a, p.proj_w, s.o);
    add_row_bias(s.o, p.proj_b);

    resize(s.x1, n, dm);
    for (std::size_t i = 0; i < s.x1.size(); ++i) s.x1.data()[i] = s.x_in.data()[i] + s.o.data()[i];

    if (config.use_layernorm) {
        layernorm_forward(s.x1, p.ln2_g, p.ln2_b, s.z, s.z_hat, s.z_rstd);
    } else {
        s.z = s.x1;
    }
    resize(s.hpre, n, hidden);
    resize(s.hact, n, hidden);
    kernels::matmul(s.z, p.mlp_w1, s.hpre);
    add_row_bias(s.hpre, p.mlp_b1);
    for (std::size_t i = 0; i < s.hpre.size(); ++i) s.hact.data()[i] = gelu(s.hpre.data()[i]);

    resize(s.x_out, n, dm);
    kernels::matmul(s.hact, p.mlp_w2, s.x_out);
    add_row_bias(s.x_out, p.mlp_b2);
    for (std::size_t i = 0; i < s.x_out.size(); ++i) s.x_out.data()[i] += s.x1.data()[i];
}

void check_tokens(std::span<const int> tokens, const ModelConfig& config) {
    if (tokens.empty() || tokens.size() > config.seq_len)
        throw ValidationError("token sequence length must be in [1, seq_len]");
    for (int t : tokens)
        if (t < 0 || static_cast<std::size_t>(t) >= config.vocab_size)
            throw ValidationError("token " + std::to_string(t) + " outside vocabulary [0, " +
                                  std::to_string(config.vocab_size) + ")");
}

void forward_into(std::span<const int> tokens, const Parameters& params, Workspace& ws) {
    const ModelConfig& config = params.config();
    check_tokens(tokens, config);
    const std::size_t n = tokens.size(), dm = config.embed_dim;
    const ParamLayout& layout = params.layout();

    resize(ws.x0, n, dm);
    ConstMatrixView embed = params.block(layout.token_embed);
    ConstMatrixView pos = params.block(layout.pos_embed);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < dm; ++c) ws.x0(r, c) = embed(static_cast<std::size_t>(tokens[r]), c) + pos(r, c);

    const Matrix* current = &ws.x0;
    for (std::size_t l = 0; l < config.depth; ++l) {
        LayerState& s = ws.layers[l];
        s.x_in = *current;
        layer_forward(params.layer(l), config, s);
        current = &s.x_out;
    }
    if (config.use_layernorm) {
        layernorm_forward(*current, params.block(layout.final_ln_g), params.block(layout.final_ln_b), ws.xf,
                          ws.xf_hat, ws.xf_rstd);
    } else {
        ws.xf = *current;
    }
    ws.pooled.assign(dm, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < dm; ++c) ws.pooled[c] += ws.xf(r, c);
    for (double& v : ws.pooled) v /= static_cast<double>(n);

    ConstMatrixView head_w = params.block(layout.head_w);
    ConstMatrixView head_b = params.block(layout.head_b);
    ws.logits.assign(config.num_classes, 0.0);
    for (std::size_t j = 0; j < config.num_classes; ++j) {
        double s = head_b(0, j);
        for (std::size_t c = 0; c < dm; ++c) s += ws.pooled[c] * head_w(c, j);
        ws.logits[j] = s;
    }
}

double backward_into(std::span<const int> tokens, int label, const Parameters& params, Parameters& grads,
                     double weight, Workspace& ws) {
    const ModelConfig& config = params.config();
    if (label < 0 || static_cast<std::size_t>(label) >= config.num_classes)
        throw ValidationError("label outside [0, num_classes)");
    forward_into(tokens, params, ws);
    const double loss = cross_entropy(ws.logits, label);

    const std::size_t n = tokens.size(), dm = config.embed_dim, d = config.head_dim;
    const ParamLayout& layout = params.layout();

    // Softmax cross-entropy gradient, pre-scaled by the sample weight.
    const double mx = *std::max_element(ws.logits.begin(), ws.logits.end());
    double z = 0.0;
    for (double v : ws.logits) z += std::exp(v - mx);
    ws.dlogits.resize(config.num_classes);
    for (std::size_t j = 0; j < config.num_classes; ++j)
        ws.dlogits[j] = weight * (std::exp(ws.logits[j] - mx) / z - (static_cast<int>(j) == label ? 1.0 : 0.0));

    MatrixView g_head_w = grads.block(layout.head_w);
    MatrixView g_head_b = grads.block(layout.head_b);
    ConstMatrixView head_w = params.block(layout.head_w);
    ws.dpooled.assign(dm, 0.0);
    for (std::size_t c = 0; c < dm; ++c)
        for (std::size_t j = 0; j < config.num_classes; ++j) {
            g_head_w(c, j) += ws.pooled[c] * ws.dlogits[j];
            ws.dpooled[c] += head_w(c, j) * ws.dlogits[j];
        }
    for (std::size_t j = 0; j < config.num_classes; ++j) g_head_b(0, j) += ws.dlogits[j];

    // Mean pooling spreads the gradient evenly over rows.
    Matrix dxf(n, dm);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < dm; ++c) dxf(r, c) = ws.dpooled[c] / static_cast<double>(n);

    resize(ws.dx, n, dm);
    if (config.use_layernorm) {
        ws.dx.fill(0.0);
        layernorm_backward(dxf, ws.xf_hat, ws.xf_rstd, params.block(layout.final_ln_g), grads.block(layout.final_ln_g),
                           grads.block(layout.final_ln_b), ws.dx);
    } else {
        ws.dx = dxf;
    }

    const double scale = score_scale(config);
    for (std::size_t li = config.depth; li-- > 0;) {
        const LayerState& s = ws.layers[li];
        const LayerParams p = params.layer(li);
        const LayerBlocks& lb = layout.layers[li];
        const std::size_t hidden = p.mlp_w1.cols();

        // x_out = x1 + gelu(z W1 + b1) W2 + b2
        kernels::matmul_tn(s.hact, ws.dx, grads.block(lb.mlp_w2), Mode::accumulate);
        accumulate_column_sums(ws.dx, grads.block(lb.mlp_b2));
        resize(ws.dh, n, hidden);
        kernels::matmul_nt(ws.dx, p.mlp_w2, ws.dh);
        for (std::size_t i = 0; i < ws.dh.size(); ++i) ws.dh.data()[i] *= gelu_grad(s.hpre.data()[i]);
        kernels::matmul_tn(s.z, ws.dh, grads.block(lb.mlp_w1), Mode::accumulate);
        accumulate_column_sums(ws.dh, grads.block(lb.mlp_b1));
        resize(ws.dz, n, dm);
        kernels::matmul_nt(ws.dh, p.mlp_w1, ws.dz);

        ws.dx1 = ws.dx;
        if (config.use_layernorm) {
            layernorm_backward(ws.dz, s.z_hat, s.z_rstd, p.ln2_g, grads.block(lb.ln2_g), grads.block(lb.ln2_b), ws.dx1);
        } else {
            for (std::size_t i = 0; i < ws.dx1.size(); ++i) ws.dx1.data()[i] += ws.dz.data()[i];
        }

        // x1 = x_in + [A_1..A_h] W_proj + b_proj
        kernels::matmul_tn(s.a, ws.dx1, grads.block(lb.proj_w), Mode::accumulate);
        accumulate_column_sums(ws.dx1, grads.block(lb.proj_b));
        resize(ws.da, n, dm);
        kernels::matmul_nt(ws.dx1, p.proj_w, ws.da);

        resize(ws.dy, n, dm);
        ws.dy.fill(0.0);
        resize(ws.dq, n, d);
        resize(ws.dk, n, d);
        resize(ws.dv, n, d);
        resize(ws.dw, n, n);
        for (std::size_t h = 0; h < config.num_heads; ++h) {
            ConstMatrixView da_h = ws.da.view().col_slice(h * d, d);
            ConstMatrixView q_h = s.q.view().col_slice(h * d, d);
            ConstMatrixView k_h = s.k.view().col_slice(h * d, d);
            ConstMatrixView v_h = s.v.view().col_slice(h * d, d);
            const Matrix& w = s.weights[h];

            kernels::matmul_nt(da_h, v_h, ws.dw);  // dL/dW
            kernels::matmul_tn(w, da_h, ws.dv);
            // softmax Jacobian, row by row; masked entries have w = 0.
            for (std::size_t r = 0; r < n; ++r) {
                double dot = 0.0;
                for (std::size_t c = 0; c < n; ++c) dot += w(r, c) * ws.dw(r, c);
                for (std::size_t c = 0; c < n; ++c) ws.dw(r, c) = w(r, c) * (ws.dw(r, c) - dot) * scale;
            }
            kernels::matmul(ws.dw, k_h, ws.dq);
            kernels::matmul_tn(ws.dw, q_h, ws.dk);

            kernels::matmul_tn(s.y, ws.dq, grads.block(lb.query[h]), Mode::accumulate);
            kernels::matmul_tn(s.y, ws.dk, grads.block(lb.key[h]), Mode::accumulate);
            kernels::matmul_tn(s.y, ws.dv, grads.block(lb.value[h]), Mode::accumulate);
            kernels::matmul_nt(ws.dq, p.query[h], ws.dy, Mode::accumulate);
            kernels::matmul_nt(ws.dk, p.key[h], ws.dy, Mode::accumulate);
            kernels::matmul_nt(ws.dv, p.value[h], ws.dy, Mode::accumulate);
        }

        ws.dx = ws.dx1;
        if (config.use_layernorm) {
            layernorm_backward(ws.dy, s.y_hat, s.y_rstd, p.ln1_g, grads.block(lb.ln1_g), grads.block(lb.ln1_b), ws.dx);
        } else {
            for (std::size_t i = 0; i < ws.dx.size(); ++i) ws.dx.data()[i] += ws.dy.data()[i];
        }
    }

    MatrixView g_embed = grads.block(layout.token_embed);
    MatrixView g_pos = grads.block(layout.pos_embed);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < dm; ++c) {
            g_embed(static_cast<std::size_t>(tokens[r]), c) += ws.dx(r, c);
            g_pos(r, c) += ws.dx(r, c);
        }
    return loss;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public entry points

HeadOutput attention_head_forward(ConstMatrixView x, const HeadParams& head, const ModelConfig& config) {
    check_input(x, config);
    for (ConstMatrixView w : {head.query, head.key, head.value})
        if (w.rows() != config.embed_dim || w.cols() != config.head_dim)
            throw ValidationError("attention head: projection must be D x d");
    const std::size_t n = x.rows(), d = config.head_dim;
    Matrix q(n, d), k(n, d), v(n, d);
    kernels::matmul(x, head.query, q);
    kernels::matmul(x, head.key, k);
    kernels::matmul(x, head.value, v);
    HeadOutput out{Matrix(n, d), Matrix()};
    head_attention(q, k, v, config, out.weights, out.output);
    return out;
}

Matrix block_forward(ConstMatrixView x, const LayerParams& layer, const ModelConfig& config) {
    check_input(x, config);
    check_layer(layer, config);
    LayerState s;
    s.x_in = Matrix::from(x);
    layer_forward(layer, config, s);
    return std::move(s.x_out);
}

ForwardResult model_forward(std::span<const int> tokens, const Parameters& params) {
    const ModelConfig& config = params.config();
    Workspace ws(config);
    forward_into(tokens, params, ws);
    ForwardResult out;
    out.logits = ws.logits;
    out.trace.logits = ws.logits;
    const std::size_t d = config.head_dim;
    for (const LayerState& s : ws.layers) {
        LayerTrace t;
        t.attention_weights = s.weights;
        for (std::size_t h = 0; h < config.num_heads; ++h)
            t.head_outputs.push_back(Matrix::from(s.a.view().col_slice(h * d, d)));
        t.concat = s.a;
        t.projected = s.o;
        out.trace.layers.push_back(std::move(t));
    }
    return out;
}

std::vector<double> model_logits(std::span<const int> tokens, const Parameters& params) {
    Workspace ws(params.config());
    forward_into(tokens, params, ws);
    return ws.logits;
}

double cross_entropy(std::span<const double> logits, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
        throw ValidationError("label outside [0, num_classes)");
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double v : logits) z += std::exp(v - mx);
    return std::log(z) + mx - logits[static_cast<std::size_t>(label)];
}

BackwardResult backward(std::span<const int> tokens, int label, const Parameters& params) {
    BackwardResult out{0.0, params.zeros_like()};
    Workspace ws(params.config());
    out.loss = backward_into(tokens, label, params, out.gradients, 1.0, ws);
    return out;
}

GradientEngine::GradientEngine(const ModelConfig& config) : ws_(std::make_unique<Workspace>(config)) {}
GradientEngine::~GradientEngine() = default;
GradientEngine::GradientEngine(GradientEngine&&) noexcept = default;
GradientEngine& GradientEngine::operator=(GradientEngine&&) noexcept = default;

double GradientEngine::accumulate(std::span<const int> tokens, int label, const Parameters& params, Parameters& grads,
                                  double weight) {
    return backward_into(tokens, label, params, grads, weight, *ws_);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr char kMagic[4] = {'M', 'H', 'C', 'P'};
constexpr std::uint32_t kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little, "serialization assumes a little-endian host");

template <typename T>
void write_pod(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) throw ValidationError("parameter file truncated");
    return value;
}

}  // namespace

void save_parameters(std::ostream& out, const Parameters& params) {
    const std::string header = to_json(params.config()).dump();
    out.write(kMagic, sizeof kMagic);
    write_pod<std::uint32_t>(out, kFormatVersion);
    write_pod<std::uint64_t>(out, header.size());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    write_pod<std::uint64_t>(out, params.block_count());
    for (std::size_t i = 0; i < params.block_count(); ++i) {
        const ParamBlock& b = params.block_info(i);
        write_pod<std::uint64_t>(out, b.size());
        out.write(reinterpret_cast<const char*>(params.values().data() + b.offset),
                  static_cast<std::streamsize>(b.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("failed writing parameters");
}

Parameters load_parameters(std::istream& in) {
    char magic[4];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
        throw ValidationError("not a parameter file (bad magic)");
    if (read_pod<std::uint32_t>(in) != kFormatVersion) throw ValidationError("unsupported parameter file version");
    const auto header_len = read_pod<std::uint64_t>(in);
    std::string header(header_len, '\0');
    if (!in.read(header.data(), static_cast<std::streamsize>(header_len)))
        throw ValidationError("parameter file truncated");
    Parameters params(model_config_from_json(nlohmann::json::parse(header)));
    if (read_pod<std::uint64_t>(in) != params.block_count()) throw ValidationError("parameter block count mismatch");
    for (std::size_t i = 0; i < params.block_count(); ++i) {
        const ParamBlock& b = params.block_info(i);
        if (read_pod<std::uint64_t>(in) != b.size())
            throw ValidationError("parameter block '" + b.name + "' has unexpected length");
        if (!in.read(reinterpret_cast<char*>(params.values().data() + b.offset),
                     static_cast<std::streamsize>(b.size() * sizeof(double))))
            throw ValidationError("parameter file truncated");
    }
    for (double v : params.values())
        if (!std::isfinite(v)) throw ValidationError("parameter file contains non-finite values");
    return params;
}

}  // namespace mhc
