#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "diffusion/train.hpp"

namespace ctig::modes {

using cond::GenerationMode;

struct GenerationRequest {
  GenerationMode mode = GenerationMode::synthesis;
  std::optional<std::string> text;
  std::optional<Image> source_image;
  std::optional<int> writer_id;
  int count = 1;
  uint64_t seed = 0;
};

struct GenerateOptions {
  int max_count = 1024;
  int sample_batch = 32;
  double guidance = 1.0;  // 1.0 = plain conditional sampling
};

// Instrumentation hook: called once per emitted sample with the presence
// triple actually fed to the denoiser.
using PresenceHook =
    std::function<void(GenerationMode, const std::array<bool, 3>&)>;

std::vector<corpus::Sample> generate(const GenerationRequest& request,
                                     diffusion::DiffusionModel& model,
                                     const GenerateOptions& opts = {},
                                     const PresenceHook& hook = nullptr);

// Equal-proportion synthesis + imitation mixture: total/2 synthesis samples
// over the corpus lexicon, total/2 imitation samples of uniformly drawn
// training records. Writes a corpus-format manifest to out_dir.
corpus::CorpusManifest mix_generate(const corpus::CorpusManifest& corpus,
                                    diffusion::DiffusionModel& model, int64_t total,
                                    uint64_t seed, const std::string& out_dir,
                                    const GenerateOptions& opts = {},
                                    const PresenceHook& hook = nullptr,
                                    double synthesis_fraction = 0.5);

// Synthesis-mode generation over a target lexicon (domain adaptation).
corpus::CorpusManifest domain_adapt_generate(const std::vector<std::string>& lexicon,
                                             diffusion::DiffusionModel& model,
                                             int64_t total, uint64_t seed,
                                             const std::string& out_dir,
                                             const GenerateOptions& opts = {});

}  // namespace ctig::modes
