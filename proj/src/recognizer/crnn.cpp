#include "recognizer/crnn.hpp"

#include "common/error.hpp"

namespace ctig::recognizer {

nlohmann::ordered_json CrnnConfig::to_json() const {
  nlohmann::ordered_json j;
  j["img_h"] = img_h;
  j["img_w"] = img_w;
  j["conv_widths"] = conv_widths;
  j["gru_hidden"] = gru_hidden;
  j["init_seed"] = init_seed;
  return j;
}

CrnnConfig CrnnConfig::from_json(const nlohmann::ordered_json& j) {
  CrnnConfig c;
  c.img_h = j.value("img_h", c.img_h);
  c.img_w = j.value("img_w", c.img_w);
  c.conv_widths = j.value("conv_widths", c.conv_widths);
  c.gru_hidden = j.value("gru_hidden", c.gru_hidden);
  c.init_seed = j.value("init_seed", uint64_t(0));
  return c;
}

Crnn::Crnn(const CrnnConfig& cfg, const corpus::Alphabet& alphabet)
    : cfg_(cfg), alphabet_(alphabet) {
  Rng rng(hash_combine(cfg.init_seed, 0x43524e4eu));
  const size_t n = cfg.conv_widths.size();
  if (n != 5) throw InvalidArg("crnn: expects 5 conv widths");
  convs_.resize(n);
  norms_.resize(n);
  relus_.resize(n);
  pools_.resize(n);
  int64_t cin = 1;
  for (size_t i = 0; i < n; ++i) {
    int64_t cout = cfg.conv_widths[i];
    convs_[i].init(cin, cout, 3, 1, 1, rng, "crnn.conv" + std::to_string(i));
    norms_[i].init(cout, 0, rng, "crnn.norm" + std::to_string(i));
    // two (2,2) pools, then (2,1): height 64 -> 2, width 256 -> 64
    pools_[i].kh = 2;
    pools_[i].kw = i < 2 ? 2 : 1;
    cin = cout;
  }
  int64_t seq_in = cfg.conv_widths.back() * (cfg.img_h / 32);
  gru_.init(seq_in, cfg.gru_hidden, rng, "crnn.gru");
  cls_.init(cfg.feature_width(), alphabet.size(), rng, "crnn.cls");
}

Tensor Crnn::to_sequence(const Tensor& x) {
  seq_b_ = x.dim(0);
  seq_c_ = x.dim(1);
  seq_h_ = x.dim(2);
  seq_w_ = x.dim(3);
  Tensor y({seq_b_, seq_w_, seq_c_ * seq_h_});
  for (int64_t b = 0; b < seq_b_; ++b)
    for (int64_t c = 0; c < seq_c_; ++c)
      for (int64_t h = 0; h < seq_h_; ++h) {
        const real* src = x.data() + ((b * seq_c_ + c) * seq_h_ + h) * seq_w_;
        real* dst = y.data() + (b * seq_w_) * (seq_c_ * seq_h_) + c * seq_h_ + h;
        for (int64_t w = 0; w < seq_w_; ++w) dst[w * seq_c_ * seq_h_] = src[w];
      }
  return y;
}

Tensor Crnn::from_sequence(const Tensor& d) {
  Tensor y({seq_b_, seq_c_, seq_h_, seq_w_});
  for (int64_t b = 0; b < seq_b_; ++b)
    for (int64_t c = 0; c < seq_c_; ++c)
      for (int64_t h = 0; h < seq_h_; ++h) {
        real* dst = y.data() + ((b * seq_c_ + c) * seq_h_ + h) * seq_w_;
        const real* src = d.data() + (b * seq_w_) * (seq_c_ * seq_h_) + c * seq_h_ + h;
        for (int64_t w = 0; w < seq_w_; ++w) dst[w] = src[w * seq_c_ * seq_h_];
      }
  return y;
}

Tensor Crnn::forward_features(const Tensor& x) {
  if (x.dim(2) != cfg_.img_h || x.dim(3) != cfg_.img_w)
    throw InvalidArg("crnn: input must be " + std::to_string(cfg_.img_h) + "x" +
                     std::to_string(cfg_.img_w) + ", got " + shape_str(x));
  Tensor h = x;
  for (size_t i = 0; i < convs_.size(); ++i) {
    h = convs_[i].forward(h);
    h = norms_[i].forward(h);
    h = relus_[i].forward(h);
    h = pools_[i].forward(h);
  }
  Tensor seq = to_sequence(h);  // (B, T, C*H)
  return gru_.forward(seq);     // (B, T, 512)
}

Tensor Crnn::logits_from_features(const Tensor& features) {
  int64_t B = features.dim(0), T = features.dim(1);
  Tensor logits = cls_.forward(features);
  logits.reshape({B, T, alphabet_.size()});
  return logits;
}

Crnn::Forward Crnn::forward(const Tensor& x) {
  Forward f;
  f.features = forward_features(x);
  f.logits = logits_from_features(f.features);
  return f;
}

void Crnn::backward_from_logits(const Tensor& dlogits) {
  Tensor dfeat = cls_.backward(dlogits);
  Tensor dseq = gru_.backward(dfeat);
  Tensor dh = from_sequence(dseq);
  for (size_t i = convs_.size(); i-- > 0;) {
    dh = pools_[i].backward(dh);
    dh = relus_[i].backward(dh);
    dh = norms_[i].backward(dh);
    dh = convs_[i].backward(dh);
  }
}

nn::ParamRefs Crnn::params() {
  nn::ParamRefs ps;
  for (size_t i = 0; i < convs_.size(); ++i) {
    convs_[i].collect(ps);
    norms_[i].collect(ps);
  }
  gru_.collect(ps);
  cls_.collect(ps);
  return ps;
}

void Crnn::set_frozen(bool frozen) {
  for (nn::Param* p : params()) p->frozen = frozen;
}

const real* Crnn::classifier_row(int char_index) const {
  return cls_.W.w.data() + static_cast<int64_t>(char_index) * cfg_.feature_width();
}

void Crnn::save(Checkpoint& ck, const std::string& prefix) const {
  for (nn::Param* p : const_cast<Crnn*>(this)->params()) ck.put(prefix + p->name, p->w);
}

void Crnn::load(const Checkpoint& ck, const std::string& prefix) {
  for (nn::Param* p : params()) {
    const Tensor& t = ck.get(prefix + p->name);
    if (t.shape != p->w.shape)
      throw IoError("checkpoint shape mismatch for " + prefix + p->name);
    p->w = t;
  }
}

}  // namespace ctig::recognizer
