#pragma once

#include <string>
#include <vector>

#include "common/image.hpp"
#include "recognizer/crnn.hpp"

namespace ctig::metrics {

// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
// dynamic range 1.0; inputs in [-1,1] are rescaled to [0,1] internally.
double ssim(const Image& a, const Image& b);

double rmse(const Image& a, const Image& b);

// Frechet distance between Gaussian fits of 512-d feature sets.
// rows = samples. Covariance square root via symmetric eigendecomposition
// with negative eigenvalues clipped at zero.
double fid_from_features(const std::vector<std::vector<double>>& real_features,
                         const std::vector<std::vector<double>>& gen_features);

// Mean-pooled recognizer encoder feature of one image (length 512).
std::vector<double> pooled_feature(const Image& img, recognizer::Crnn& rec);

// FID over recognizer features ("rFID"); requires at least 50 images/side.
double feature_fid(const std::vector<Image>& real_images,
                   const std::vector<Image>& gen_images, recognizer::Crnn& rec);

// Mean CER of the recognizer's transcription against the conditioning text.
double content_validity(const std::vector<Image>& images,
                        const std::vector<std::string>& texts, recognizer::Crnn& rec);

struct MetricReport {
  double fid = 0.0;
  double ssim = 0.0;
  double rmse = 0.0;
  double content_cer = 0.0;
  int n_real = 0;
  int n_gen = 0;
  std::string config_hash;

  nlohmann::ordered_json to_json() const;
};

// Full comparison of two corpus directories: rFID + content CER over the
// sets, SSIM/RMSE over index-aligned pairs.
MetricReport compare_sets(const std::vector<Image>& real_images,
                          const std::vector<Image>& gen_images,
                          const std::vector<std::string>& gen_texts,
                          recognizer::Crnn& rec, const std::string& config_hash);

}  // namespace ctig::metrics
