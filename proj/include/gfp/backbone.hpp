#pragma once

#include "gfp/tokenizer.hpp"
#include "gfp/types.hpp"

#include <string>
#include <unordered_map>
#include <vector>

namespace gfp::backbone {

struct TransformerConfig {
  int width = 256;
  int heads = 8;
  int ffn_hidden = 1024;
  int layers = 8;
  double layer_norm_eps = 1e-5;

  void validate() const {
    require(width >= 1 && heads >= 1 && ffn_hidden >= 1, "TransformerConfig: counts must be >= 1");
    require(layers >= 0, "TransformerConfig: layers must be >= 0");
    require(width % heads == 0, "TransformerConfig: width must be divisible by heads");
    require(layer_norm_eps > 0.0, "TransformerConfig: layer_norm_eps must be positive");
  }
};

/// Flat, path-addressable view of every learnable tensor. Layers own their
/// matrices; the registry holds non-owning pointers in registration order,
/// which fixes the init draw order, the optimizer walk order, and the
/// checkpoint record order.
class ParamRegistry {
 public:
  struct Entry {
    std::string path;
    Matrix* value;
    Matrix* grad;
    bool decay;  // false for biases, norm gains, positional tables, mask token
  };

  void add(const std::string& path, Matrix& value, Matrix& grad, bool decay) {
    require(index_.find(path) == index_.end(), "ParamRegistry: duplicate path " + path);
    index_[path] = entries_.size();
    entries_.push_back(Entry{path, &value, &grad, decay});
  }

  const std::vector<Entry>& entries() const { return entries_; }

  const Entry& at(const std::string& path) const {
    auto it = index_.find(path);
    require(it != index_.end(), "ParamRegistry: unknown path " + path);
    return entries_[it->second];
  }

  Index total_coeffs() const {
    Index n = 0;
    for (const auto& e : entries_) n += e.value->size();
    return n;
  }

  Vector flat_values() const {
    Vector flat(total_coeffs());
    Index at = 0;
    for (const auto& e : entries_) {
      flat.segment(at, e.value->size()) = Eigen::Map<const Vector>(e.value->data(), e.value->size());
      at += e.value->size();
    }
    return flat;
  }

  void set_flat_values(const Vector& flat) {
    require(flat.size() == total_coeffs(), "ParamRegistry: flat view size mismatch");
    Index at = 0;
    for (const auto& e : entries_) {
      Eigen::Map<Vector>(e.value->data(), e.value->size()) = flat.segment(at, e.value->size());
      at += e.value->size();
    }
  }

  /// Grad matrices start unsized; training paths allocate them on demand so
  /// inference-only use never pays for them.
  void alloc_grads() {
    for (auto& e : entries_)
      if (e.grad->rows() != e.value->rows() || e.grad->cols() != e.value->cols())
        *e.grad = Matrix::Zero(e.value->rows(), e.value->cols());
  }

  void zero_grads() {
    alloc_grads();
    for (auto& e : entries_) e.grad->setZero();
  }

  uint64_t values_hash() const {
    uint64_t h = 14695981039346656037ull;
    for (const auto& e : entries_) {
      h = fnv1a(e.path, h);
      h = fnv1a(e.value->data(), sizeof(double) * static_cast<size_t>(e.value->size()), h);
    }
    return h;
  }

  void check_grads_finite() const {
    for (const auto& e : entries_)
      if (e.grad->size() > 0 && !e.grad->allFinite())
        throw NumericError("non-finite gradient", e.path);
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, size_t> index_;
};

/// Fills every registered tensor: truncated normal (std 0.02) where decay
/// applies, zeros for biases, ones for paths ending in ".gain", and plain
/// N(0, 0.02^2) for the mask token.
void init_params(ParamRegistry& registry, uint64_t seed);

struct Dense {
  Matrix w;  // in x out
  Matrix b;  // 1 x out
  Matrix gw, gb;

  void configure(ParamRegistry& reg, const std::string& prefix, int in, int out) {
    w.resize(in, out);
    b.resize(1, out);
    reg.add(prefix + ".weight", w, gw, true);
    reg.add(prefix + ".bias", b, gb, false);
  }

  Matrix forward(const Matrix& x) const {
    Matrix y = x * w;
    y.rowwise() += b.row(0);
    return y;
  }

  /// Accumulates gw/gb, returns dL/dx.
  Matrix backward(const Matrix& x, const Matrix& gy) {
    gw.noalias() += x.transpose() * gy;
    gb.row(0) += gy.colwise().sum();
    return gy * w.transpose();
  }
};

struct LayerNorm {
  Matrix gain;  // 1 x d
  Matrix bias;  // 1 x d
  Matrix ggain, gbias;
  double eps = 1e-5;

  struct Cache {
    Matrix xhat;
    Vector rstd;
  };

  void configure(ParamRegistry& reg, const std::string& prefix, int d, double eps_in) {
    gain.resize(1, d);
    bias.resize(1, d);
    eps = eps_in;
    reg.add(prefix + ".gain", gain, ggain, false);
    reg.add(prefix + ".bias", bias, gbias, false);
  }

  Matrix forward(const Matrix& x, Cache& cache) const;
  Matrix backward(const Cache& cache, const Matrix& gy);
};

struct MultiHeadAttention {
  int heads = 1;
  Dense wq, wk, wv, wo;

  struct Cache {
    Matrix x, q, k, v;
    Matrix concat;                    // pre-output-projection head concat
    std::vector<Matrix> probs;        // one n x n row-stochastic matrix per head
  };

  void configure(ParamRegistry& reg, const std::string& prefix, int width, int heads_in) {
    heads = heads_in;
    wq.configure(reg, prefix + ".wq", width, width);
    wk.configure(reg, prefix + ".wk", width, width);
    wv.configure(reg, prefix + ".wv", width, width);
    wo.configure(reg, prefix + ".wo", width, width);
  }

  Matrix forward(const Matrix& x, Cache& cache) const;
  Matrix backward(Cache& cache, const Matrix& gy);
};

struct FeedForward {
  Dense fc1, fc2;

  struct Cache {
    Matrix x, pre;  // pre-activation of the hidden layer
  };

  void configure(ParamRegistry& reg, const std::string& prefix, int width, int hidden) {
    fc1.configure(reg, prefix + ".fc1", width, hidden);
    fc2.configure(reg, prefix + ".fc2", hidden, width);
  }

  Matrix forward(const Matrix& x, Cache& cache) const;
  Matrix backward(Cache& cache, const Matrix& gy);
};

/// Pre-norm residual block: x + Attn(LN(x)), then + FFN(LN(.)), GELU inside
/// the FFN, numerically stable softmax in the attention.
struct TransformerBlock {
  LayerNorm ln1, ln2;
  MultiHeadAttention attn;
  FeedForward ffn;

  struct Cache {
    LayerNorm::Cache ln1, ln2;
    MultiHeadAttention::Cache attn;
    FeedForward::Cache ffn;
  };

  void configure(ParamRegistry& reg, const std::string& prefix, const TransformerConfig& cfg) {
    ln1.configure(reg, prefix + ".ln1", cfg.width, cfg.layer_norm_eps);
    attn.configure(reg, prefix + ".attn", cfg.width, cfg.heads);
    ln2.configure(reg, prefix + ".ln2", cfg.width, cfg.layer_norm_eps);
    ffn.configure(reg, prefix + ".ffn", cfg.width, cfg.ffn_hidden);
  }

  Matrix forward(const Matrix& x, Cache& cache) const;
  Matrix backward(Cache& cache, const Matrix& gy);
};

/// GELU-separated dense stack; `dims` lists layer boundaries, so
/// {in, h, out} is a 2-layer MLP and {in, h, h, out} a 3-layer one.
struct Mlp {
  std::vector<Dense> layers;

  struct Cache {
    std::vector<Matrix> inputs;  // input of each dense layer
    std::vector<Matrix> pre;     // pre-activation outputs (all but last feed GELU)
  };

  void configure(ParamRegistry& reg, const std::string& prefix, const std::vector<int>& dims);

  Matrix forward(const Matrix& x, Cache& cache) const;
  Matrix backward(Cache& cache, const Matrix& gy);
};

/// Encoder: `layers` blocks plus a final layer norm. A zero-layer stack is
/// the identity (no final norm), so empty composition stays exact.
struct EncoderStack {
  TransformerConfig cfg;
  std::vector<TransformerBlock> blocks;
  LayerNorm final_ln;

  struct Cache {
    std::vector<Matrix> inputs;  // input to each block
    std::vector<TransformerBlock::Cache> blocks;
    LayerNorm::Cache ln;
  };

  void configure(ParamRegistry& reg, const std::string& prefix, const TransformerConfig& cfg_in);

  Matrix forward(const Matrix& tokens, Cache& cache) const;
  Matrix backward(Cache& cache, const Matrix& gy);
};

/// Runs the encoder over the visible-token subsequence only; row order of
/// the output matches plan.visible.
Matrix encode_visible(const EncoderStack& encoder, const Matrix& embedded,
                      const tokenizer::MaskPlan& plan, EncoderStack::Cache& cache);

Matrix gelu_matrix(const Matrix& x);

}  // namespace gfp::backbone
