#pragma once

// Building blocks. Each layer has a declare_* function that creates its
// parameters under a name prefix and a forward function that reads them.

#include "rgk/model/params.hpp"
#include "rgk/numerics/ops.hpp"

namespace rgk::nn {

inline void declare_linear(ParamStore& P, const std::string& name, std::size_t in, std::size_t out, double gain = 1.0) {
  P.xavier(name + ".w", {in, out}, in, out, gain);
  P.zeros(name + ".b", {out});
}

inline Tensor linear(const ParamStore& P, const std::string& name, const Tensor& x) {
  return add(matmul(x, P.get(name + ".w")), P.get(name + ".b"));
}

inline void declare_norm(ParamStore& P, const std::string& name, std::size_t width) {
  P.constant(name + ".g", {width}, 1.0);
  P.zeros(name + ".b", {width});
}

inline Tensor norm(const ParamStore& P, const std::string& name, const Tensor& x) {
  return layer_norm(x, P.get(name + ".g"), P.get(name + ".b"));
}

// Linear -> GELU -> Linear.
inline void declare_mlp(ParamStore& P, const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
                        double out_gain = 1.0) {
  declare_linear(P, name + ".fc1", in, hidden);
  declare_linear(P, name + ".fc2", hidden, out, out_gain);
}

inline Tensor mlp(const ParamStore& P, const std::string& name, const Tensor& x) {
  return linear(P, name + ".fc2", gelu(linear(P, name + ".fc1", x)));
}

inline void declare_attention(ParamStore& P, const std::string& name, std::size_t d) {
  for (const char* part : {".q", ".k", ".v", ".o"}) declare_linear(P, name + part, d, d);
}

// Multi-head scaled dot-product attention of queries (n x d) over
// keys/values (m x d).
inline Tensor attention(const ParamStore& P, const std::string& name, const Tensor& queries, const Tensor& context,
                        std::size_t heads) {
  Tensor q = linear(P, name + ".q", queries);
  Tensor k = linear(P, name + ".k", context);
  Tensor v = linear(P, name + ".v", context);
  std::size_t d = q.dim(1), dh = d / heads;
  double scale_factor = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> outs;
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor qh = slice(q, 1, h * dh, dh), kh = slice(k, 1, h * dh, dh), vh = slice(v, 1, h * dh, dh);
    Tensor a = softmax(scale(matmul(qh, transpose(kh)), scale_factor), 1);
    outs.push_back(matmul(a, vh));
  }
  return linear(P, name + ".o", heads == 1 ? outs[0] : concat(outs, 1));
}

inline void declare_ffn(ParamStore& P, const std::string& name, std::size_t d, std::size_t ratio) {
  declare_norm(P, name + ".ln", d);
  declare_mlp(P, name + ".mlp", d, ratio * d, d);
}

// x + MLP(LN(x))
inline Tensor ffn(const ParamStore& P, const std::string& name, const Tensor& x) {
  return add(x, mlp(P, name + ".mlp", norm(P, name + ".ln", x)));
}

// Pre-norm transformer block: x + MHSA(LN(x)), then x + FFN(LN(x)).
inline void declare_block(ParamStore& P, const std::string& name, std::size_t d, std::size_t ratio) {
  declare_norm(P, name + ".ln", d);
  declare_attention(P, name + ".attn", d);
  declare_ffn(P, name + ".ffn", d, ratio);
}

inline Tensor block(const ParamStore& P, const std::string& name, const Tensor& x, std::size_t heads) {
  Tensor h = norm(P, name + ".ln", x);
  Tensor y = add(x, attention(P, name + ".attn", h, h, heads));
  return ffn(P, name + ".ffn", y);
}

inline void declare_stack(ParamStore& P, const std::string& name, std::size_t depth, std::size_t d, std::size_t ratio) {
  for (std::size_t i = 0; i < depth; ++i) declare_block(P, name + ".block" + std::to_string(i), d, ratio);
}

inline Tensor stack(const ParamStore& P, const std::string& name, std::size_t depth, Tensor x, std::size_t heads) {
  for (std::size_t i = 0; i < depth; ++i) x = block(P, name + ".block" + std::to_string(i), x, heads);
  return x;
}

}  // namespace rgk::nn
