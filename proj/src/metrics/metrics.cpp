#include "metrics/metrics.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "common/error.hpp"
#include "recognizer/ctc.hpp"

namespace ctig::metrics {

namespace {

std::vector<double> gaussian_kernel_11() {
  std::vector<double> k(11);
  double sum = 0;
  for (int i = 0; i < 11; ++i) {
    double x = i - 5;
    k[static_cast<size_t>(i)] = std::exp(-x * x / (2.0 * 1.5 * 1.5));
    sum += k[static_cast<size_t>(i)];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Separable 11x11 Gaussian filter, valid region only.
std::vector<double> filter_valid(const std::vector<double>& img, int h, int w, int& oh,
                                 int& ow) {
  static const std::vector<double> k = gaussian_kernel_11();
  const int r = 5;
  ow = w - 2 * r;
  oh = h - 2 * r;
  std::vector<double> tmp(static_cast<size_t>(h) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int i = 0; i < 11; ++i) s += k[static_cast<size_t>(i)] * img[static_cast<size_t>(y) * w + x + i];
      tmp[static_cast<size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int i = 0; i < 11; ++i) s += k[static_cast<size_t>(i)] * tmp[static_cast<size_t>(y + i) * ow + x];
      out[static_cast<size_t>(y) * ow + x] = s;
    }
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  if (a.h != b.h || a.w != b.w) throw InvalidArg("ssim: shape mismatch");
  if (a.h < 11 || a.w < 11) throw InvalidArg("ssim: image smaller than the 11x11 window");
  const size_t n = a.px.size();
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (size_t i = 0; i < n; ++i) {
    x[i] = (static_cast<double>(a.px[i]) + 1.0) * 0.5;
    y[i] = (static_cast<double>(b.px[i]) + 1.0) * 0.5;
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  int oh = 0, ow = 0;
  auto mx = filter_valid(x, a.h, a.w, oh, ow);
  auto my = filter_valid(y, a.h, a.w, oh, ow);
  auto mxx = filter_valid(xx, a.h, a.w, oh, ow);
  auto myy = filter_valid(yy, a.h, a.w, oh, ow);
  auto mxy = filter_valid(xy, a.h, a.w, oh, ow);
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;  // (K*L)^2 with L = 1
  double acc = 0;
  for (size_t i = 0; i < mx.size(); ++i) {
    double vx = mxx[i] - mx[i] * mx[i];
    double vy = myy[i] - my[i] * my[i];
    double cxy = mxy[i] - mx[i] * my[i];
    double num = (2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2);
    double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
    acc += num / den;
  }
  return acc / static_cast<double>(mx.size());
}

double rmse(const Image& a, const Image& b) {
  if (a.h != b.h || a.w != b.w) throw InvalidArg("rmse: shape mismatch");
  double s = 0;
  for (size_t i = 0; i < a.px.size(); ++i) {
    double d = static_cast<double>(a.px[i]) - static_cast<double>(b.px[i]);
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(a.px.size()));
}

double fid_from_features(const std::vector<std::vector<double>>& real_features,
                         const std::vector<std::vector<double>>& gen_features) {
  if (real_features.size() < 2 || gen_features.size() < 2)
    throw InvalidArg("fid: need at least 2 feature rows per side");
  const int64_t d = static_cast<int64_t>(real_features[0].size());

  auto fit = [d](const std::vector<std::vector<double>>& rows, Eigen::VectorXd& mu,
                 Eigen::MatrixXd& cov) {
    const int64_t n = static_cast<int64_t>(rows.size());
    mu = Eigen::VectorXd::Zero(d);
    for (const auto& r : rows)
      mu += Eigen::Map<const Eigen::VectorXd>(r.data(), d);
    mu /= static_cast<double>(n);
    cov = Eigen::MatrixXd::Zero(d, d);
    for (const auto& r : rows) {
      Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(r.data(), d) - mu;
      cov.noalias() += c * c.transpose();
    }
    cov /= static_cast<double>(n - 1);
  };

  Eigen::VectorXd mu_r, mu_g;
  Eigen::MatrixXd cov_r, cov_g;
  fit(real_features, mu_r, cov_r);
  fit(gen_features, mu_g, cov_g);
  if (!cov_r.allFinite() || !cov_g.allFinite())
    throw RuntimeFault("fid: non-finite covariance");

  // sqrt(cov_g) via eigendecomposition, negative eigenvalues clipped at 0
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_g(cov_g);
  Eigen::VectorXd ev_g = es_g.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd s_g = es_g.eigenvectors() * ev_g.asDiagonal() *
                        es_g.eigenvectors().transpose();

  // tr sqrt(cov_r cov_g) = tr sqrt(s_g cov_r s_g), the latter symmetric PSD
  Eigen::MatrixXd m = s_g * cov_r * s_g;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_m((m + m.transpose()) * 0.5);
  double tr_sqrt = es_m.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  double mean_term = (mu_r - mu_g).squaredNorm();
  double fid = mean_term + cov_r.trace() + cov_g.trace() - 2.0 * tr_sqrt;
  return std::max(0.0, fid);
}

std::vector<double> pooled_feature(const Image& img, recognizer::Crnn& rec) {
  Tensor f = rec.forward_features(img.to_tensor());  // (1, T, D)
  const int64_t T = f.dim(1), D = f.dim(2);
  std::vector<double> out(static_cast<size_t>(D), 0.0);
  for (int64_t t = 0; t < T; ++t)
    for (int64_t k = 0; k < D; ++k) out[static_cast<size_t>(k)] += f[t * D + k];
  for (auto& v : out) v /= static_cast<double>(T);
  return out;
}

double feature_fid(const std::vector<Image>& real_images,
                   const std::vector<Image>& gen_images, recognizer::Crnn& rec) {
  if (real_images.size() < 50 || gen_images.size() < 50)
    throw InvalidArg("feature_fid: need at least 50 images per side, got " +
                     std::to_string(real_images.size()) + "/" +
                     std::to_string(gen_images.size()));
  std::vector<std::vector<double>> fr, fg;
  fr.reserve(real_images.size());
  fg.reserve(gen_images.size());
  for (const auto& im : real_images) fr.push_back(pooled_feature(im, rec));
  for (const auto& im : gen_images) fg.push_back(pooled_feature(im, rec));
  return fid_from_features(fr, fg);
}

double content_validity(const std::vector<Image>& images,
                        const std::vector<std::string>& texts, recognizer::Crnn& rec) {
  if (images.size() != texts.size())
    throw InvalidArg("content_validity: images/texts length mismatch");
  if (images.empty()) throw InvalidArg("content_validity: empty input");
  double acc = 0;
  for (size_t i = 0; i < images.size(); ++i) {
    auto fwd = rec.forward(images[i].to_tensor());
    const int64_t T = fwd.logits.dim(1), A = fwd.logits.dim(2);
    Tensor one({T, A});
    std::copy_n(fwd.logits.data(), T * A, one.data());
    acc += recognizer::cer(recognizer::decode_greedy(one, rec.alphabet()), texts[i]);
  }
  return acc / static_cast<double>(images.size());
}

nlohmann::ordered_json MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["fid"] = fid;
  j["ssim"] = ssim;
  j["rmse"] = rmse;
  j["content_cer"] = content_cer;
  j["n_real"] = n_real;
  j["n_gen"] = n_gen;
  j["config_hash"] = config_hash;
  return j;
}

MetricReport compare_sets(const std::vector<Image>& real_images,
                          const std::vector<Image>& gen_images,
                          const std::vector<std::string>& gen_texts,
                          recognizer::Crnn& rec, const std::string& config_hash) {
  MetricReport r;
  r.n_real = static_cast<int>(real_images.size());
  r.n_gen = static_cast<int>(gen_images.size());
  r.config_hash = config_hash;
  r.fid = feature_fid(real_images, gen_images, rec);
  size_t pairs = std::min(real_images.size(), gen_images.size());
  double s = 0, q = 0;
  for (size_t i = 0; i < pairs; ++i) {
    s += ssim(real_images[i], gen_images[i]);
    q += rmse(real_images[i], gen_images[i]);
  }
  r.ssim = s / static_cast<double>(pairs);
  r.rmse = q / static_cast<double>(pairs);
  r.content_cer = content_validity(gen_images, gen_texts, rec);
  return r;
}

}  // namespace ctig::metrics
