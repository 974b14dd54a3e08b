#pragma once

#include <string>
#include <vector>

#include "diffusion/train.hpp"
#include "modes/modes.hpp"
#include "recognizer/train.hpp"

namespace ctig::runtime {

// One config file drives every stage. Defaults follow the training recipe
// (AdamW beta1 0.9 / beta2 0.999 / weight decay 0.2, lr 1e-4 with cosine
// annealing, batch 64 recognizer / 256 diffusion, condition dropout
// 20/10/20); budgets are in optimizer steps.
struct RunConfig {
  uint64_t seed = 1;

  struct CorpusSection {
    std::string vocab_file;
    std::vector<std::string> vocab;  // used when vocab_file is empty
    int writers = 5;
    int per_pair = 20;
    std::string charset = "abcdefghijklmnopqrstuvwxyz";
  } corpus;

  recognizer::CrnnConfig crnn;
  recognizer::TrainConfig recognizer_train;
  diffusion::DiffusionTrainConfig diffusion_train;

  struct GenSection {
    int max_count = 1024;
    int sample_batch = 32;
    double guidance = 1.0;
  } gen;

  struct ExperimentSection {
    int64_t ablation_steps = 3000;  // per-variant diffusion budget
    int64_t augment_steps = 2500;   // per-arm recognizer budget
    int64_t mix_total = 5000;
    int eval_images = 100;  // generated images per evaluation set
  } experiment;

  nlohmann::ordered_json to_json() const;
  static RunConfig from_json(const nlohmann::ordered_json& j);
  static RunConfig load(const std::string& path);

  std::string hash() const;
  modes::GenerateOptions gen_options() const;
};

}  // namespace ctig::runtime
