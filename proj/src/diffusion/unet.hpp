#pragma once

#include <optional>
#include <string>
#include <vector>

#include "common/serial.hpp"
#include "nn/layers.hpp"

namespace ctig::diffusion {

struct UnetConfig {
  int in_ch = 1;
  int base = 64;
  std::vector<int> mults = {1, 2, 4};
  int n_res = 1;
  std::vector<int> attn_levels = {2};  // levels with spatial self-attention
  bool mid_attn = true;
  int time_dim = 64;     // sinusoidal width
  int emb_dim = 0;       // 0 -> max(128, 4 * base)
  int cond_width = 512;  // per condition slot; the bundle concat is 3x this
  int img_h = 64;
  int img_w = 256;
  uint64_t init_seed = 0;

  int embed_width() const { return emb_dim > 0 ? emb_dim : std::max(128, 4 * base); }

  nlohmann::ordered_json to_json() const;
  static UnetConfig from_json(const nlohmann::ordered_json& j);
};

// DDPM residual block with additive (time+condition) embedding modulation.
struct ResBlock {
  nn::GroupNorm n1, n2;
  nn::SiLU s1, s2, semb;
  nn::Conv2d conv1, conv2;
  nn::Linear emb_proj;
  std::optional<nn::Conv2d> skip;  // 1x1 when channel count changes
  int64_t cin = 0, cout = 0;

  void init(int64_t cin_, int64_t cout_, int64_t emb_dim, Rng& rng,
            const std::string& name);
  void collect(nn::ParamRefs& ps);
  Tensor forward(const Tensor& x, const Tensor& emb);
  // accumulates the embedding gradient into demb
  Tensor backward(const Tensor& dy, Tensor& demb);
};

// The noise predictor eps_theta. Conditioning: sinusoidal step embedding
// through a 2-layer MLP, concatenated with [c_i, c_t, c_s] and linearly
// fused; the fused vector modulates every residual block.
class Unet {
 public:
  Unet() = default;
  explicit Unet(const UnetConfig& cfg);

  const UnetConfig& config() const { return cfg_; }

  // x: (B, in_ch, H, W); nsteps: per-sample diffusion step in 1..N;
  // cond: (B, 3 * cond_width). Returns predicted noise, same shape as x.
  Tensor forward(const Tensor& x, const std::vector<int>& nsteps, const Tensor& cond);

  // dy: gradient w.r.t. the prediction. Accumulates parameter gradients and
  // returns the gradient w.r.t. `cond` (for the conditional encoder).
  Tensor backward(const Tensor& dy);

  nn::ParamRefs params();
  void save(Checkpoint& ck, const std::string& prefix) const;
  void load(const Checkpoint& ck, const std::string& prefix);

  int64_t param_count();

 private:
  enum class Op { ConvIn, DownRes, Down, Mid1, MidAttn, Mid2, UpRes, Up, Out };
  struct Step {
    Op op;
    int idx = 0;        // index into the per-kind vectors
    bool attn = false;  // res step followed by attention
    int attn_idx = 0;
  };

  UnetConfig cfg_;
  nn::Linear time_fc1_, time_fc2_;
  nn::SiLU time_act_;
  nn::Linear fuse_;
  nn::Conv2d conv_in_;
  std::vector<ResBlock> down_res_, up_res_;
  std::vector<nn::Conv2d> downs_;
  std::vector<nn::UpsampleNearest2x> ups_;
  std::vector<nn::Conv2d> up_convs_;
  ResBlock mid1_, mid2_;
  std::optional<nn::SelfAttention2d> mid_attn_;
  std::vector<nn::SelfAttention2d> attns_;
  nn::GroupNorm out_norm_;
  nn::SiLU out_act_;
  nn::Conv2d conv_out_;

  std::vector<Step> plan_;
  std::vector<int> up_skip_channels_;  // per UpRes block: popped skip width

  // forward bookkeeping for backward
  std::vector<Tensor> skips_;
  std::vector<int> consumed_;  // per UpRes block: skip index it consumed
  std::vector<int> push_at_;   // per plan step: skip index pushed (-1 none)
  Tensor emb_, t_sin_;
  int64_t batch_ = 0;

  Tensor time_embedding(const std::vector<int>& nsteps) const;
};

}  // namespace ctig::diffusion
