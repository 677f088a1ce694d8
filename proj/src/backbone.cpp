#include "gfp/backbone.hpp"

#include <cmath>

namespace gfp::backbone {

void init_params(ParamRegistry& registry, uint64_t seed) {
  RngStream rng(seed, "param-init");
  for (const auto& e : registry.entries()) {
    Matrix& m = *e.value;
    if (e.path.ends_with(".gain")) {
      m.setOnes();
    } else if (e.path.ends_with(".bias")) {
      m.setZero();
    } else if (e.path == "mask_token") {
      for (Index i = 0; i < m.size(); ++i) m.data()[i] = 0.02 * rng.normal();
    } else {
      for (Index i = 0; i < m.size(); ++i) m.data()[i] = 0.02 * rng.truncated_normal();
    }
  }
}

Matrix gelu_matrix(const Matrix& x) {
  return x.unaryExpr([](double v) { return gelu(v); });
}

Matrix LayerNorm::forward(const Matrix& x, Cache& cache) const {
  require(x.cols() == gain.cols(), "LayerNorm: width mismatch");
  const Index n = x.rows(), d = x.cols();
  cache.xhat.resize(n, d);
  cache.rstd.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().mean();
    const double rstd = 1.0 / std::sqrt(var + eps);
    cache.rstd[i] = rstd;
    cache.xhat.row(i) = (x.row(i).array() - mean) * rstd;
  }
  Matrix y = cache.xhat.array().rowwise() * gain.row(0).array();
  y.rowwise() += bias.row(0);
  return y;
}

Matrix LayerNorm::backward(const Cache& cache, const Matrix& gy) {
  const Index n = gy.rows(),
              d = gy.cols();
  gbias.row(0) += gy.colwise().sum();
  ggain.row(0) += (gy.array() * cache.xhat.array()).colwise().sum().matrix();

  Matrix gx(n, d);
  for (Index i = 0; i < n; ++i) {
    const auto gyr = gy.row(i).array();
    const auto xhat = cache.xhat.row(i).array();
    Eigen::ArrayXd gxhat = (gyr * gain.row(0).array()).transpose();
    const double mean_g = gxhat.mean();
    const double mean_gx = (gxhat * xhat.transpose()).mean();
    gx.row(i) = (cache.rstd[i] * (gxhat - mean_g - xhat.transpose() * mean_gx)).matrix().transpose();
  }
  return gx;
}

namespace {
// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& scores) {
  Matrix probs(scores.rows(), scores.cols());
  for (Index i = 0; i < scores.rows(); ++i) {
    const double mx = scores.row(i).maxCoeff();
    Eigen::ArrayXd e = (scores.row(i).array() - mx).exp();
    probs.row(i) = e / e.sum();
  }
  return probs;
}

// dL/dS given P = softmax(S) row-wise and G = dL/dP.
Matrix softmax_rows_backward(const Matrix& probs, const Matrix& gprobs) {
  Matrix gs(probs.rows(), probs.cols());
  for (Index i = 0; i < probs.rows(); ++i) {
    const double dot = probs.row(i).dot(gprobs.row(i));
    gs.row(i) = probs.row(i).array() * (gprobs.row(i).array() - dot);
  }
  return gs;
}
}  // namespace

Matrix MultiHeadAttention::forward(const Matrix& x, Cache& cache) const {
  const Index n = x.rows(), d = x.cols();
  const Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  cache.x = x;
  cache.q = wq.forward(x);
  cache.k = wk.forward(x);
  cache.v = wv.forward(x);
  cache.concat.resize(n, d);
  cache.probs.assign(static_cast<size_t>(heads), Matrix());

  for (int h = 0; h < heads; ++h) {
    const auto q = cache.q.middleCols(h * dh, dh);
    const auto k = cache.k.middleCols(h * dh, dh);
    const auto v = cache.v.middleCols(h * dh, dh);
    Matrix scores = scale * (q * k.transpose());
    cache.probs[h] = softmax_rows(scores);
    cache.concat.middleCols(h * dh, dh).noalias() = cache.probs[h] * v;
  }
  return wo.forward(cache.concat);
}

Matrix MultiHeadAttention::backward(Cache& cache, const Matrix& gy) {
  if (cache.probs.empty()) throw StateError("attention backward before forward");
  const Index d = cache.x.cols();
  const Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix gconcat = wo.backward(cache.concat, gy);
  Matrix gq(cache.q.rows(), d), gk(cache.k.rows(), d), gv(cache.v.rows(), d);
  for (int h = 0; h < heads; ++h) {
    const auto q = cache.q.middleCols(h * dh, dh);
    const auto k = cache.k.middleCols(h * dh, dh);
    const auto v = cache.v.middleCols(h * dh, dh);
    const auto go = gconcat.middleCols(h * dh, dh);
    const Matrix& probs = cache.probs[h];

    Matrix gprobs = go * v.transpose();
    gv.middleCols(h * dh, dh).noalias() = probs.transpose() * go;
    Matrix gscores = softmax_rows_backward(probs, gprobs);
    gq.middleCols(h * dh, dh).noalias() = scale * (gscores * k);
    gk.middleCols(h * dh, dh).noalias() = scale * (gscores.transpose() * q);
  }

  Matrix gx = wq.backward(cache.x, gq);
  gx += wk.backward(cache.x, gk);
  gx += wv.backward(cache.x, gv);
  return gx;
}

Matrix FeedForward::forward(const Matrix& x, Cache& cache) const {
  cache.x = x;
  cache.pre = fc1.forward(x);
  return fc2.forward(gelu_matrix(cache.pre));
}

Matrix FeedForward::backward(Cache& cache, const Matrix& gy) {
  Matrix ghidden = fc2.backward(gelu_matrix(cache.pre), gy);
  Matrix gpre = ghidden.array() * cache.pre.unaryExpr([](double v) { return gelu_grad(v); }).array();
  return fc1.backward(cache.x, gpre);
}

Matrix TransformerBlock::forward(const Matrix& x, Cache& cache) const {
  Matrix u = ln1.forward(x, cache.ln1);
  Matrix r = x + attn.forward(u, cache.attn);
  Matrix v = ln2.forward(r, cache.ln2);
  return r + ffn.forward(v, cache.ffn);
}

Matrix TransformerBlock::backward(Cache& cache, const Matrix& gy) {
  Matrix gr = gy + ln2.backward(cache.ln2, ffn.backward(cache.ffn, gy));
  return gr + ln1.backward(cache.ln1, attn.backward(cache.attn, gr));
}

void Mlp::configure(ParamRegistry& reg, const std::string& prefix, const std::vector<int>& dims) {
  require(dims.size() >= 2, "Mlp: need at least input and output dims");
  layers.resize(dims.size() - 1);
  for (size_t i = 0; i + 1 < dims.size(); ++i)
    layers[i].configure(reg, prefix + ".l" + std::to_string(i), dims[i], dims[i + 1]);
}

Matrix Mlp::forward(const Matrix& x, Cache& cache) const {
  cache.inputs.clear();
  cache.pre.clear();
  Matrix h = x;
  for (size_t i = 0; i < layers.size(); ++i) {
    cache.inputs.push_back(h);
    Matrix pre = layers[i].forward(h);
    cache.pre.push_back(pre);
    h = (i + 1 < layers.size()) ? gelu_matrix(pre) : pre;
  }
  return h;
}

Matrix Mlp::backward(Cache& cache, const Matrix& gy) {
  if (cache.inputs.size() != layers.size()) throw StateError("Mlp backward before forward");
  Matrix g = gy;
  for (size_t i = layers.size(); i-- > 0;) {
    if (i + 1 < layers.size())
      g = g.array() * cache.pre[i].unaryExpr([](double v) { return gelu_grad(v); }).array();
    g = layers[i].backward(cache.inputs[i], g);
  }
  return g;
}

void EncoderStack::configure(ParamRegistry& reg, const std::string& prefix,
                             const TransformerConfig& cfg_in) {
  cfg = cfg_in;
  cfg.validate();
  blocks.resize(static_cast<size_t>(cfg.layers));
  for (int i = 0; i < cfg.layers; ++i)
    blocks[static_cast<size_t>(i)].configure(reg, prefix + ".block" + std::to_string(i), cfg);
  if (cfg.layers > 0) final_ln.configure(reg, prefix + ".final_ln", cfg.width, cfg.layer_norm_eps);
}

Matrix EncoderStack::forward(const Matrix& tokens, Cache& cache) const {
  require(tokens.cols() == cfg.width, "EncoderStack: token width mismatch");
  cache.inputs.clear();
  cache.blocks.assign(blocks.size(), TransformerBlock::Cache{});
  Matrix h = tokens;
  for (size_t i = 0; i < blocks.size(); ++i) {
    cache.inputs.push_back(h);
    h = blocks[i].forward(h, cache.blocks[i]);
    if (!h.allFinite())
      throw NumericError("non-finite activations", "encoder.block" + std::to_string(i));
  }
  if (!blocks.empty()) h = final_ln.forward(h, cache.ln);
  return h;
}

Matrix EncoderStack::backward(Cache& cache, const Matrix& gy) {
  if (cache.blocks.size() != blocks.size()) throw StateError("encoder backward before forward");
  Matrix g = blocks.empty() ? gy : final_ln.backward(cache.ln, gy);
  for (size_t i = blocks.size(); i-- > 0;) g = blocks[i].backward(cache.blocks[i], g);
  return g;
}

Matrix encode_visible(const EncoderStack& encoder, const Matrix& embedded,
                      const tokenizer::MaskPlan& plan, EncoderStack::Cache& cache) {
  plan.validate(embedded.rows());
  require(!plan.visible.empty(), "encode_visible: visible set must not be empty");
  Matrix selected(static_cast<Index>(plan.visible.size()), embedded.cols());
  for (size_t i = 0; i < plan.visible.size(); ++i)
    selected.row(static_cast<Index>(i)) = embedded.row(plan.visible[i]);
  return encoder.forward(selected, cache);
}

}  // namespace gfp::backbone
