#pragma once

#include <string>
#include <vector>

#include "common/serial.hpp"
#include "corpus/alphabet.hpp"
#include "nn/layers.hpp"

namespace ctig::recognizer {

struct CrnnConfig {
  int img_h = 64;
  int img_w = 256;
  std::vector<int> conv_widths = {24, 48, 64, 96, 128};
  int gru_hidden = 256;  // per direction; feature width = 2 * hidden
  uint64_t init_seed = 0;

  int frames() const { return img_w / 4; }
  int feature_width() const { return 2 * gru_hidden; }

  nlohmann::ordered_json to_json() const;
  static CrnnConfig from_json(const nlohmann::ordered_json& j);
};

// CRNN: conv stack collapsing height, bidirectional GRU over width frames,
// linear classifier on top. The pre-classifier frame features double as the
// condition source (F_enc) and the classifier weight rows as the character
// embedding table (W_c).
class Crnn {
 public:
  Crnn() = default;
  Crnn(const CrnnConfig& cfg, const corpus::Alphabet& alphabet);

  // x: (B, 1, H, W) -> features (B, T, 512)
  Tensor forward_features(const Tensor& x);
  // features -> logits (B, T, A)
  Tensor logits_from_features(const Tensor& features);

  struct Forward {
    Tensor features;
    Tensor logits;
  };
  Forward forward(const Tensor& x);

  // dlogits: (B, T, A); propagates through the whole net, accumulating
  // parameter gradients.
  void backward_from_logits(const Tensor& dlogits);

  nn::ParamRefs params();
  void set_frozen(bool frozen);

  // Classifier weight row for a character index (length 512 view into W_c).
  const real* classifier_row(int char_index) const;

  const CrnnConfig& config() const { return cfg_; }
  const corpus::Alphabet& alphabet() const { return alphabet_; }

  void save(Checkpoint& ck, const std::string& prefix) const;
  void load(const Checkpoint& ck, const std::string& prefix);

 private:
  CrnnConfig cfg_;
  corpus::Alphabet alphabet_;

  std::vector<nn::Conv2d> convs_;
  std::vector<nn::GroupNorm> norms_;
  std::vector<nn::ReLU> relus_;
  std::vector<nn::MaxPool2d> pools_;
  nn::BiGRU gru_;
  nn::Linear cls_;

  int64_t seq_b_ = 0, seq_c_ = 0, seq_h_ = 0, seq_w_ = 0;  // pre-sequence shape

  Tensor to_sequence(const Tensor& x);    // (B,C,H,W) -> (B, W, C*H)
  Tensor from_sequence(const Tensor& d);  // gradient of the permutation
};

}  // namespace ctig::recognizer
