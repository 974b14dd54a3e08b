#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "common/blas.hpp"
#include "common/tensor.hpp"

namespace ctig::nn {

// Learnable tensor plus its gradient accumulator. `decay` marks parameters
// that take weight decay (matrices yes, biases/gains/embeddings no).
struct Param {
  Tensor w;
  Tensor g;
  bool decay = true;
  bool frozen = false;
  std::string name;

  void init(std::vector<int64_t> shape, bool decay_, std::string name_) {
    w = Tensor(shape);
    g = Tensor(shape);
    decay = decay_;
    name = std::move(name_);
  }
  void zero_grad() { g.zero(); }
};

using ParamRefs = std::vector<Param*>;

inline real sigmoid(real x) { return real(1) / (real(1) + std::exp(-x)); }

void fan_in_uniform(Tensor& w, int64_t fan_in, Rng& rng);

// ---------------------------------------------------------------------------

struct Linear {
  Param W, b;
  int64_t in = 0, out = 0;
  Tensor x_;  // saved input (N, in)

  void init(int64_t in_, int64_t out_, Rng& rng, const std::string& name,
            bool zero_init = false);
  void collect(ParamRefs& ps) {
    ps.push_back(&W);
    ps.push_back(&b);
  }
  // x: (N, in) -> (N, out); any leading batch flattened by caller.
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
};

struct Conv2d {
  Param W, b;  // W: (cout, cin, k, k)
  int64_t cin = 0, cout = 0, k = 3, stride = 1, pad = 1;
  Tensor x_;                  // saved input (B, cin, H, W)
  std::vector<real> cols_;    // im2col workspace, one sample
  int64_t H_ = 0, W_ = 0, Ho_ = 0, Wo_ = 0;

  void init(int64_t cin_, int64_t cout_, int64_t k_, int64_t stride_, int64_t pad_,
            Rng& rng, const std::string& name, bool zero_init = false);
  void collect(ParamRefs& ps) {
    ps.push_back(&W);
    ps.push_back(&b);
  }
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);

 private:
  void im2col(const real* img, real* cols) const;
  void col2im(const real* cols, real* img) const;
};

struct GroupNorm {
  Param gamma, beta;
  int64_t C = 0, groups = 1;
  real eps = real(1e-5);
  Tensor x_hat_;   // normalized input
  Tensor invstd_;  // (B, groups)

  static int64_t pick_groups(int64_t C);
  void init(int64_t C_, int64_t groups_, Rng& rng, const std::string& name);
  void collect(ParamRefs& ps) {
    ps.push_back(&gamma);
    ps.push_back(&beta);
  }
  // x: (B, C, H, W) or (B, C) treated as H=W=1.
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
};

struct SiLU {
  Tensor x_;
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
};

struct ReLU {
  Tensor x_;
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
};

struct MaxPool2d {
  int64_t kh = 2, kw = 2;
  std::vector<int64_t> argmax_;
  std::vector<int64_t> in_shape_;
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
};

struct UpsampleNearest2x {
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
};

struct Embedding {
  Param table;  // (rows, dim)
  int64_t rows = 0, dim = 0;
  std::vector<int64_t> idx_;

  void init(int64_t rows_, int64_t dim_, Rng& rng, const std::string& name);
  void collect(ParamRefs& ps) { ps.push_back(&table); }
  Tensor forward(const std::vector<int64_t>& idx);
  void backward(const Tensor& dy);
};

// Learned-query attention pooling over a (B, T, D) sequence -> (B, D).
// Values are the inputs themselves so a zero query degenerates to mean
// pooling, which doubles as the test oracle.
struct AttnPool {
  Param q;  // (D)
  int64_t D = 0;
  Tensor x_;
  Tensor attn_;  // (B, T)

  void init(int64_t D_, Rng& rng, const std::string& name);
  void collect(ParamRefs& ps) { ps.push_back(&q); }
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
  const Tensor& last_attention() const { return attn_; }
};

// Single-head spatial self-attention with pre-norm and residual.
struct SelfAttention2d {
  GroupNorm norm;
  Conv2d qkv;   // 1x1, C -> 3C
  Conv2d proj;  // 1x1, C -> C, zero-init
  int64_t C = 0;
  Tensor h_, q_, k_, v_, attn_;

  void init(int64_t C_, Rng& rng, const std::string& name);
  void collect(ParamRefs& ps) {
    norm.collect(ps);
    qkv.collect(ps);
    proj.collect(ps);
  }
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
};

// Single-direction GRU, torch gate conventions.
struct GRU {
  Param Wx, bx;  // (3H, in), (3H)
  Param Uh, bu;  // (3H, H), (3H)
  int64_t in = 0, H = 0;
  bool reverse = false;

  Tensor x_, A_, U_, r_, z_, n_, hs_;  // saved activations
  int64_t B_ = 0, T_ = 0;

  void init(int64_t in_, int64_t H_, bool reverse_, Rng& rng, const std::string& name);
  void collect(ParamRefs& ps) {
    ps.push_back(&Wx);
    ps.push_back(&bx);
    ps.push_back(&Uh);
    ps.push_back(&bu);
  }
  // x: (B, T, in) -> (B, T, H)
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
};

struct BiGRU {
  GRU fwd, bwd;
  void init(int64_t in, int64_t H, Rng& rng, const std::string& name);
  void collect(ParamRefs& ps) {
    fwd.collect(ps);
    bwd.collect(ps);
  }
  // x: (B, T, in) -> (B, T, 2H)
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
};

// Row-wise softmax utilities (also used by attention backward).
void softmax_rows(const real* x, real* y, int64_t rows, int64_t cols);
void softmax_backward_rows(const real* y, const real* dy, real* dx, int64_t rows,
                           int64_t cols);

// Channel concat/split for skip connections. x1:(B,C1,H,W) x2:(B,C2,H,W).
Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& d, int64_t c1, Tensor& da, Tensor& db);

}  // namespace ctig::nn
