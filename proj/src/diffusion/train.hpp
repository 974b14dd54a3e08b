#pragma once

#include <array>
#include <ostream>
#include <string>

#include "cond/condenc.hpp"
#include "diffusion/diffusion.hpp"
#include "recognizer/train.hpp"

namespace ctig::diffusion {

struct DiffusionTrainConfig {
  int batch_size = 256;  // paper default; desk runs use far less
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.2;
  int64_t steps = 50000;
  int64_t warmup = 0;
  std::array<double, 3> dropout_rates = {0.20, 0.10, 0.20};
  // Condition subset available during training; disabled slots are always
  // the null embedding (used by the condition-ablation study).
  std::array<bool, 3> enabled_conditions = {true, true, true};
  int schedule_steps = 200;
  std::string schedule_kind = "cosine";
  double ema_decay = 0.999;  // 0 disables EMA
  int log_every = 50;
  int64_t save_every = 2000;
  int64_t sample_every = 0;  // emit a contact-sheet grid every k steps
  bool cache_features = true;
  uint64_t seed = 1;
  UnetConfig unet;

  nlohmann::ordered_json to_json() const;
  static DiffusionTrainConfig from_json(const nlohmann::ordered_json& j);
};

// Everything needed to generate: denoiser, conditional encoder, the frozen
// recognizer behind F_enc/W_c, the schedule, alphabet and writer table.
struct DiffusionModel {
  Unet unet;
  cond::CondEncoder encoder;
  recognizer::Crnn recognizer;
  NoiseSchedule schedule;
  corpus::Alphabet alphabet;
  std::vector<corpus::WriterStyle> writers;
  int64_t steps_trained = 0;
  std::string config_hash;

  void save(const std::string& path) const;
  static DiffusionModel load(const std::string& path);
};

struct DiffusionTrainResult {
  double first_loss = 0.0;
  double last_loss = 0.0;
  int64_t steps_run = 0;
  std::string checkpoint_path;
};

// Joint training of denoiser + conditional encoder against a frozen
// recognizer. Resumes from out_ckpt when it already holds a partial run of
// the same config. Aborts on divergence, keeping the last good checkpoint.
DiffusionTrainResult train_diffusion(const corpus::CorpusManifest& corpus,
                                     const std::string& recognizer_ckpt,
                                     const DiffusionTrainConfig& cfg,
                                     const std::string& out_ckpt,
                                     std::ostream* metrics_log = nullptr,
                                     std::ostream* progress = nullptr);

}  // namespace ctig::diffusion
