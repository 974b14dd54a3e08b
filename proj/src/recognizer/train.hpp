#pragma once

#include <functional>
#include <optional>
#include <string>

#include "corpus/corpus.hpp"
#include "recognizer/crnn.hpp"

namespace ctig::recognizer {

struct TrainConfig {
  int batch_size = 64;  // paper default for the recognizer
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.2;
  int64_t steps = 20000;
  int64_t warmup = 0;
  int64_t eval_every = 250;
  double early_stop_cer = -1.0;  // stop once validation CER <= this, if >= 0
  uint64_t seed = 1;
  int log_every = 50;

  nlohmann::ordered_json to_json() const;
  static TrainConfig from_json(const nlohmann::ordered_json& j);
};

struct EvalResult {
  double cer = 0.0;
  double wer = 0.0;
  int n = 0;
};

struct TrainResult {
  double best_val_cer = 1e9;
  int64_t steps_run = 0;
  std::string checkpoint_path;
};

// In-memory corpus pixels (8-bit) for fast batch assembly.
class ImageStore {
 public:
  explicit ImageStore(const corpus::CorpusManifest& m, int threads = 0);
  const corpus::CorpusManifest& manifest() const { return *m_; }
  // Write record `idx` into `dst` (row-major 64*256 reals in [-1,1]).
  void fetch(int idx, real* dst) const;

 private:
  const corpus::CorpusManifest* m_;
  std::vector<std::vector<uint8_t>> pixels_;
};

// Trains with CTC, tracks best-validation-CER weights, persists a
// self-describing checkpoint. Metrics stream gets one JSON line per log
// interval. Aborts on NaN loss.
TrainResult train_recognizer(const corpus::CorpusManifest& corpus, const CrnnConfig& mcfg,
                             const TrainConfig& tcfg, const std::string& out_ckpt,
                             std::ostream* metrics_log = nullptr);

EvalResult evaluate(Crnn& model, const ImageStore& store, const std::string& split,
                    int batch_size = 64);

void save_recognizer(const Crnn& model, const std::string& path, double val_cer,
                     int64_t steps, const std::string& config_hash);
Crnn load_recognizer(const std::string& path);

}  // namespace ctig::recognizer
