#include "cond/condenc.hpp"

#include <algorithm>

#include "common/error.hpp"

namespace ctig::cond {

GenerationMode mode_from_string(const std::string& s) {
  if (s == "synthesis") return GenerationMode::synthesis;
  if (s == "augmentation") return GenerationMode::augmentation;
  if (s == "recovery") return GenerationMode::recovery;
  if (s == "imitation") return GenerationMode::imitation;
  throw InvalidArg("unknown generation mode: " + s);
}

std::string mode_to_string(GenerationMode m) {
  switch (m) {
    case GenerationMode::synthesis: return "synthesis";
    case GenerationMode::augmentation: return "augmentation";
    case GenerationMode::recovery: return "recovery";
    case GenerationMode::imitation: return "imitation";
  }
  return "?";
}

std::array<bool, 3> presence_for_mode(GenerationMode m) {
  switch (m) {
    case GenerationMode::synthesis: return {false, true, false};
    case GenerationMode::augmentation: return {true, false, false};
    case GenerationMode::recovery: return {true, true, false};
    case GenerationMode::imitation: return {true, true, true};
  }
  return {false, false, false};
}

nlohmann::ordered_json CondConfig::to_json() const {
  nlohmann::ordered_json j;
  j["cond_width"] = cond_width;
  j["frames"] = frames;
  j["max_text_len"] = max_text_len;
  j["num_writers"] = num_writers;
  j["style_width"] = style_width;
  j["init_seed"] = init_seed;
  return j;
}

CondConfig CondConfig::from_json(const nlohmann::ordered_json& j) {
  CondConfig c;
  c.cond_width = j.at("cond_width").get<int>();
  c.frames = j.at("frames").get<int>();
  c.max_text_len = j.at("max_text_len").get<int>();
  c.num_writers = j.at("num_writers").get<int>();
  c.style_width = j.at("style_width").get<int>();
  c.init_seed = j.value("init_seed", uint64_t(0));
  return c;
}

Tensor BundleBatch::concat() const {
  int64_t B = batch(), D = ci.dim(1);
  Tensor c({B, 3 * D});
  for (int64_t b = 0; b < B; ++b) {
    std::copy_n(ci.data() + b * D, D, c.data() + b * 3 * D);
    std::copy_n(ct.data() + b * D, D, c.data() + b * 3 * D + D);
    std::copy_n(cs.data() + b * D, D, c.data() + b * 3 * D + 2 * D);
  }
  return c;
}

CondEncoder::CondEncoder(const CondConfig& cfg) : cfg_(cfg) {
  Rng rng(hash_combine(cfg.init_seed, 0x434f4e44u));
  const int64_t D = cfg.cond_width;
  attn_pool_.init(D, rng, "enc.attn_pool");
  pos_emb_image_.init({cfg.frames, D}, false, "enc.pos_emb_image");
  pos_emb_text_.init({cfg.max_text_len, D}, false, "enc.pos_emb_text");
  for (auto& x : pos_emb_image_.w.v) x = static_cast<real>(rng.normal()) * real(0.02);
  for (auto& x : pos_emb_text_.w.v) x = static_cast<real>(rng.normal()) * real(0.02);
  text_proj_.init(D, D, rng, "enc.text_proj");
  style_table_.init(cfg.num_writers, cfg.style_width, rng, "enc.style_table");
  style_proj_.init(cfg.style_width, D, rng, "enc.style_proj");
  null_i_.init({D}, false, "enc.null_i");
  null_t_.init({D}, false, "enc.null_t");
  null_s_.init({D}, false, "enc.null_s");
  for (auto& x : null_i_.w.v) x = static_cast<real>(rng.normal()) * real(0.02);
  for (auto& x : null_t_.w.v) x = static_cast<real>(rng.normal()) * real(0.02);
  for (auto& x : null_s_.w.v) x = static_cast<real>(rng.normal()) * real(0.02);
}

Tensor CondEncoder::image_condition(const Tensor& features) {
  const int64_t B = features.dim(0), T = features.dim(1), D = features.dim(2);
  if (T != cfg_.frames || D != cfg_.cond_width)
    throw InvalidArg("image_condition: features must be (B," + std::to_string(cfg_.frames) +
                     "," + std::to_string(cfg_.cond_width) + "), got " + shape_str(features));
  Tensor x = features;
  for (int64_t b = 0; b < B; ++b)
    for (int64_t i = 0; i < T * D; ++i) x[b * T * D + i] += pos_emb_image_.w[i];
  has_image_path_ = true;
  return attn_pool_.forward(x);
}

Tensor CondEncoder::text_condition(const std::vector<std::string>& texts,
                                   const recognizer::Crnn& recognizer) {
  const int64_t B = static_cast<int64_t>(texts.size());
  const int64_t D = cfg_.cond_width;
  const auto& alphabet = recognizer.alphabet();
  text_offsets_.assign(1, 0);
  text_positions_.clear();
  int64_t total = 0;
  for (const auto& t : texts) {
    if (t.empty()) throw InvalidArg("text_condition: empty text");
    if (static_cast<int>(t.size()) > cfg_.max_text_len)
      throw InvalidArg("text_condition: text longer than " +
                       std::to_string(cfg_.max_text_len) + ": \"" + t + "\"");
    total += static_cast<int64_t>(t.size());
    text_offsets_.push_back(total);
  }
  // per-character embeddings: classifier row of the char + text position
  Tensor chars({total, D});
  text_positions_.resize(static_cast<size_t>(total));
  int64_t row = 0;
  for (const auto& t : texts) {
    for (size_t k = 0; k < t.size(); ++k, ++row) {
      int ci = alphabet.index_of(t[k]);
      const real* wc = recognizer.classifier_row(ci);
      const real* pe = pos_emb_text_.w.data() + static_cast<int64_t>(k) * D;
      real* dst = chars.data() + row * D;
      for (int64_t d = 0; d < D; ++d) dst[d] = wc[d] + pe[d];
      text_positions_[static_cast<size_t>(row)] = static_cast<int>(k);
    }
  }
  Tensor proj = text_proj_.forward(chars);  // (total, D)
  Tensor ct({B, D});
  for (int64_t b = 0; b < B; ++b) {
    int64_t lo = text_offsets_[static_cast<size_t>(b)], hi = text_offsets_[static_cast<size_t>(b) + 1];
    real inv = real(1) / static_cast<real>(hi - lo);
    for (int64_t r = lo; r < hi; ++r)
      for (int64_t d = 0; d < D; ++d) ct[b * D + d] += proj[r * D + d] * inv;
  }
  has_text_path_ = true;
  return ct;
}

Tensor CondEncoder::style_condition(const std::vector<int>& writer_ids) {
  std::vector<int64_t> idx;
  idx.reserve(writer_ids.size());
  for (int w : writer_ids) {
    if (w < 0 || w >= cfg_.num_writers)
      throw InvalidArg("style_condition: writer_id out of range: " + std::to_string(w));
    idx.push_back(w);
  }
  Tensor emb = style_table_.forward(idx);
  has_style_path_ = true;
  return style_proj_.forward(emb);
}

BundleBatch CondEncoder::full_bundle(const Tensor& features,
                                     const std::vector<std::string>& texts,
                                     const std::vector<int>& writer_ids,
                                     const recognizer::Crnn& recognizer) {
  BundleBatch b;
  b.ci = image_condition(features);
  b.ct = text_condition(texts, recognizer);
  b.cs = style_condition(writer_ids);
  b.presence.assign(texts.size(), {true, true, true});
  return b;
}

void CondEncoder::apply_dropout(BundleBatch& bundle, const std::array<double, 3>& rates,
                                Rng& rng) {
  const int64_t D = cfg_.cond_width;
  Tensor* slots[3] = {&bundle.ci, &bundle.ct, &bundle.cs};
  const nn::Param* nulls[3] = {&null_i_, &null_t_, &null_s_};
  for (int64_t b = 0; b < bundle.batch(); ++b) {
    for (int k = 0; k < 3; ++k) {
      double u = rng.uniform();
      if (u < rates[static_cast<size_t>(k)]) {
        bundle.presence[static_cast<size_t>(b)][static_cast<size_t>(k)] = false;
        std::copy_n(nulls[k]->w.data(), D, slots[k]->data() + b * D);
      }
    }
  }
}

void CondEncoder::backward(const Tensor& dci, const Tensor& dct, const Tensor& dcs,
                           const std::vector<std::array<bool, 3>>& presence) {
  const int64_t B = static_cast<int64_t>(presence.size());
  const int64_t D = cfg_.cond_width;

  // Null-embedding gradients for absent slots; zero-mask the path gradient.
  auto route = [&](const Tensor& d, int k, nn::Param& null_param, Tensor& masked) {
    masked = d;
    for (int64_t b = 0; b < B; ++b) {
      if (!presence[static_cast<size_t>(b)][static_cast<size_t>(k)]) {
        const real* src = d.data() + b * D;
        for (int64_t j = 0; j < D; ++j) null_param.g[j] += src[j];
        std::fill_n(masked.data() + b * D, D, real(0));
      }
    }
  };

  Tensor mi, mt, ms;
  route(dci, 0, null_i_, mi);
  route(dct, 1, null_t_, mt);
  route(dcs, 2, null_s_, ms);

  if (has_image_path_) {
    Tensor dx = attn_pool_.backward(mi);  // (B, T, D)
    const int64_t T = cfg_.frames;
    for (int64_t b = 0; b < B; ++b)
      for (int64_t i = 0; i < T * D; ++i) pos_emb_image_.g[i] += dx[b * T * D + i];
    // recognizer features are frozen inputs; their gradient is dropped
  }

  if (has_text_path_) {
    int64_t total = text_offsets_.back();
    Tensor dproj({total, D});
    for (int64_t b = 0; b < B; ++b) {
      int64_t lo = text_offsets_[static_cast<size_t>(b)], hi = text_offsets_[static_cast<size_t>(b) + 1];
      real inv = real(1) / static_cast<real>(hi - lo);
      for (int64_t r = lo; r < hi; ++r)
        for (int64_t d = 0; d < D; ++d) dproj[r * D + d] = mt[b * D + d] * inv;
    }
    Tensor dchars = text_proj_.backward(dproj);
    for (int64_t r = 0; r < total; ++r) {
      int k = text_positions_[static_cast<size_t>(r)];
      real* dst = pos_emb_text_.g.data() + static_cast<int64_t>(k) * D;
      const real* src = dchars.data() + r * D;
      for (int64_t d = 0; d < D; ++d) dst[d] += src[d];
      // classifier rows W_c stay frozen by contract
    }
  }

  if (has_style_path_) {
    Tensor demb = style_proj_.backward(ms);
    style_table_.backward(demb);
  }
}

Tensor CondEncoder::image_condition_one(const Image& image, recognizer::Crnn& recognizer) {
  Tensor x = image.to_tensor();
  Tensor features = recognizer.forward_features(x);  // (1, T, D)
  return image_condition(features);
}

Tensor CondEncoder::text_condition_one(const std::string& text,
                                       const recognizer::Crnn& recognizer) {
  return text_condition({text}, recognizer);
}

Tensor CondEncoder::style_condition_one(int writer_id) {
  return style_condition(std::vector<int>{writer_id});
}

ConditionBundle CondEncoder::assemble_conditions(GenerationMode mode, const Image* image,
                                                 const std::string* text,
                                                 const int* writer_id,
                                                 recognizer::Crnn& recognizer) {
  auto need = presence_for_mode(mode);
  const std::string mname = mode_to_string(mode);
  if (need[0] && !image)
    throw InvalidArg("assemble_conditions: mode '" + mname + "' requires an image");
  if (need[1] && !text)
    throw InvalidArg("assemble_conditions: mode '" + mname + "' requires text");
  if (need[2] && !writer_id)
    throw InvalidArg("assemble_conditions: mode '" + mname + "' requires a writer_id");

  const int64_t D = cfg_.cond_width;
  ConditionBundle b;
  b.presence = need;
  auto take_row = [D](const Tensor& t) {
    Tensor r({D});
    std::copy_n(t.data(), D, r.data());
    return r;
  };
  b.ci = need[0] ? take_row(image_condition_one(*image, recognizer)) : null_i_.w;
  b.ct = need[1] ? take_row(text_condition_one(*text, recognizer)) : null_t_.w;
  b.cs = need[2] ? take_row(style_condition_one(*writer_id)) : null_s_.w;
  return b;
}

ConditionBundle CondEncoder::null_bundle() const {
  ConditionBundle b;
  b.ci = null_i_.w;
  b.ct = null_t_.w;
  b.cs = null_s_.w;
  b.presence = {false, false, false};
  return b;
}

const Tensor& CondEncoder::null_embedding(int slot) const {
  switch (slot) {
    case 0: return null_i_.w;
    case 1: return null_t_.w;
    default: return null_s_.w;
  }
}

nn::ParamRefs CondEncoder::params() {
  nn::ParamRefs ps;
  attn_pool_.collect(ps);
  ps.push_back(&pos_emb_image_);
  ps.push_back(&pos_emb_text_);
  text_proj_.collect(ps);
  style_table_.collect(ps);
  style_proj_.collect(ps);
  ps.push_back(&null_i_);
  ps.push_back(&null_t_);
  ps.push_back(&null_s_);
  return ps;
}

void CondEncoder::save(Checkpoint& ck, const std::string& prefix) const {
  for (nn::Param* p : const_cast<CondEncoder*>(this)->params()) ck.put(prefix + p->name, p->w);
}

void CondEncoder::load(const Checkpoint& ck, const std::string& prefix) {
  for (nn::Param* p : params()) {
    const Tensor& t = ck.get(prefix + p->name);
    if (t.shape != p->w.shape) throw IoError("checkpoint shape mismatch for " + p->name);
    p->w = t;
  }
}

}  // namespace ctig::cond
