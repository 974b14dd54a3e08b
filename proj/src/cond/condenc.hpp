#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "common/serial.hpp"
#include "recognizer/crnn.hpp"

namespace ctig::cond {

// Table-1 generation modes; the mode fixes which condition slots are live.
enum class GenerationMode { synthesis, augmentation, recovery, imitation };

GenerationMode mode_from_string(const std::string& s);
std::string mode_to_string(GenerationMode m);

// presence = (image, text, style)
std::array<bool, 3> presence_for_mode(GenerationMode m);

struct CondConfig {
  int cond_width = 512;  // matches the recognizer feature width
  int frames = 64;
  int max_text_len = 24;
  int num_writers = 5;
  int style_width = 512;
  uint64_t init_seed = 0;

  nlohmann::ordered_json to_json() const;
  static CondConfig from_json(const nlohmann::ordered_json& j);
};

// A batch of condition triples. When presence[b][k] is false the row holds
// the corresponding learnable null embedding.
struct BundleBatch {
  Tensor ci, ct, cs;  // (B, D) each
  std::vector<std::array<bool, 3>> presence;

  int64_t batch() const { return static_cast<int64_t>(presence.size()); }
  // Concatenated [c_i, c_t, c_s], width 3D, fed to the denoiser.
  Tensor concat() const;
};

// Single-sample bundle for the public assemble/generate path.
struct ConditionBundle {
  Tensor ci, ct, cs;  // (D) each
  std::array<bool, 3> presence{false, false, false};
};

// The conditional encoder: attention-pooled recognizer features (image
// condition), classifier-weight character embeddings (text condition), and
// a writer embedding table (style condition), plus the three learnable
// null embeddings used for absent/dropped conditions.
class CondEncoder {
 public:
  CondEncoder() = default;
  explicit CondEncoder(const CondConfig& cfg);

  const CondConfig& config() const { return cfg_; }

  // --- batched training paths -------------------------------------------
  // features: (B, frames, D) from the frozen recognizer encoder.
  Tensor image_condition(const Tensor& features);
  // texts: batch of strings (1..max_text_len chars, in-alphabet).
  Tensor text_condition(const std::vector<std::string>& texts,
                        const recognizer::Crnn& recognizer);
  Tensor style_condition(const std::vector<int>& writer_ids);

  BundleBatch full_bundle(const Tensor& features, const std::vector<std::string>& texts,
                          const std::vector<int>& writer_ids,
                          const recognizer::Crnn& recognizer);

  // Training-time condition dropout; consumes exactly three uniform draws
  // per sample, independently per condition.
  void apply_dropout(BundleBatch& bundle, const std::array<double, 3>& rates, Rng& rng);

  // Routes (dci, dct, dcs) into the condition paths for present slots and
  // into the null embeddings for absent ones.
  void backward(const Tensor& dci, const Tensor& dct, const Tensor& dcs,
                const std::vector<std::array<bool, 3>>& presence);

  // --- single-sample public ops ------------------------------------------
  Tensor image_condition_one(const Image& image, recognizer::Crnn& recognizer);
  Tensor text_condition_one(const std::string& text, const recognizer::Crnn& recognizer);
  Tensor style_condition_one(int writer_id);

  ConditionBundle assemble_conditions(GenerationMode mode, const Image* image,
                                      const std::string* text, const int* writer_id,
                                      recognizer::Crnn& recognizer);

  // Bundle with every slot nulled (the unconditional input).
  ConditionBundle null_bundle() const;

  const Tensor& null_embedding(int slot) const;
  const Tensor& last_image_attention() const { return attn_pool_.last_attention(); }

  nn::ParamRefs params();
  void save(Checkpoint& ck, const std::string& prefix) const;
  void load(const Checkpoint& ck, const std::string& prefix);

  // test hook: force uniform pooling weights by zeroing the query
  void zero_pool_query() { attn_pool_.q.w.zero(); }

 private:
  CondConfig cfg_;
  nn::AttnPool attn_pool_;
  nn::Param pos_emb_image_;  // (frames, D)
  nn::Param pos_emb_text_;   // (max_text_len, D)
  nn::Linear text_proj_;
  nn::Embedding style_table_;  // (num_writers, style_width)
  nn::Linear style_proj_;
  nn::Param null_i_, null_t_, null_s_;

  // saved state for backward
  std::vector<int> text_positions_;    // per flattened char: position k
  std::vector<int64_t> text_offsets_;  // segment offsets into the char axis
  bool has_image_path_ = false, has_text_path_ = false, has_style_path_ = false;
};

}  // namespace ctig::cond
