#include "recognizer/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "common/error.hpp"

namespace ctig::recognizer {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double lse2(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline double lse3(double a, double b, double c) { return lse2(lse2(a, b), c); }

}  // namespace

CtcResult ctc_loss(const Tensor& logits, const std::vector<int>& label, int blank) {
  const int64_t T = logits.dim(0), A = logits.dim(1);
  const int64_t L = static_cast<int64_t>(label.size());
  const int64_t U = 2 * L + 1;
  CtcResult out;
  out.dlogits = Tensor({T, A});
  if (L == 0) throw InvalidArg("ctc_loss: empty label");

  // log-softmax per frame, in double
  std::vector<double> lp(static_cast<size_t>(T * A));
  std::vector<double> sm(static_cast<size_t>(T * A));
  for (int64_t t = 0; t < T; ++t) {
    double mx = logits[t * A];
    for (int64_t k = 1; k < A; ++k) mx = std::max(mx, static_cast<double>(logits[t * A + k]));
    double sum = 0;
    for (int64_t k = 0; k < A; ++k) sum += std::exp(static_cast<double>(logits[t * A + k]) - mx);
    double lz = mx + std::log(sum);
    for (int64_t k = 0; k < A; ++k) {
      lp[static_cast<size_t>(t * A + k)] = static_cast<double>(logits[t * A + k]) - lz;
      sm[static_cast<size_t>(t * A + k)] = std::exp(lp[static_cast<size_t>(t * A + k)]);
    }
  }

  // extended label with interleaved blanks
  std::vector<int> ext(static_cast<size_t>(U), blank);
  for (int64_t i = 0; i < L; ++i) ext[static_cast<size_t>(2 * i + 1)] = label[static_cast<size_t>(i)];

  auto idx = [U](int64_t t, int64_t u) { return static_cast<size_t>(t * U + u); };
  std::vector<double> alpha(static_cast<size_t>(T * U), kNegInf);
  std::vector<double> beta(static_cast<size_t>(T * U), kNegInf);

  alpha[idx(0, 0)] = lp[static_cast<size_t>(ext[0])];
  if (U > 1) alpha[idx(0, 1)] = lp[static_cast<size_t>(ext[1])];
  for (int64_t t = 1; t < T; ++t) {
    for (int64_t u = 0; u < U; ++u) {
      double a = alpha[idx(t - 1, u)];
      if (u >= 1) a = lse2(a, alpha[idx(t - 1, u - 1)]);
      if (u >= 2 && ext[static_cast<size_t>(u)] != blank &&
          ext[static_cast<size_t>(u)] != ext[static_cast<size_t>(u - 2)])
        a = lse2(a, alpha[idx(t - 1, u - 2)]);
      alpha[idx(t, u)] = a + lp[static_cast<size_t>(t * A + ext[static_cast<size_t>(u)])];
    }
  }

  double log_z = lse2(alpha[idx(T - 1, U - 1)], U > 1 ? alpha[idx(T - 1, U - 2)] : kNegInf);
  if (log_z == kNegInf) {
    out.loss = std::numeric_limits<double>::infinity();
    return out;  // label cannot be aligned in T frames
  }

  // beta excludes the emission at its own time step
  beta[idx(T - 1, U - 1)] = 0.0;
  if (U > 1) beta[idx(T - 1, U - 2)] = 0.0;
  for (int64_t t = T - 2; t >= 0; --t) {
    for (int64_t u = 0; u < U; ++u) {
      double b = beta[idx(t + 1, u)] + lp[static_cast<size_t>((t + 1) * A + ext[static_cast<size_t>(u)])];
      if (u + 1 < U)
        b = lse2(b, beta[idx(t + 1, u + 1)] +
                        lp[static_cast<size_t>((t + 1) * A + ext[static_cast<size_t>(u + 1)])]);
      if (u + 2 < U && ext[static_cast<size_t>(u + 2)] != blank &&
          ext[static_cast<size_t>(u + 2)] != ext[static_cast<size_t>(u)])
        b = lse2(b, beta[idx(t + 1, u + 2)] +
                        lp[static_cast<size_t>((t + 1) * A + ext[static_cast<size_t>(u + 2)])]);
      beta[idx(t, u)] = b;
    }
  }

  out.loss = -log_z;
  // dL/dlogit = softmax - posterior
  std::vector<double> q(static_cast<size_t>(A));
  for (int64_t t = 0; t < T; ++t) {
    std::fill(q.begin(), q.end(), 0.0);
    for (int64_t u = 0; u < U; ++u) {
      double g = alpha[idx(t, u)] + beta[idx(t, u)] - log_z;
      if (g != kNegInf) q[static_cast<size_t>(ext[static_cast<size_t>(u)])] += std::exp(g);
    }
    for (int64_t k = 0; k < A; ++k)
      out.dlogits[t * A + k] =
          static_cast<real>(sm[static_cast<size_t>(t * A + k)] - q[static_cast<size_t>(k)]);
  }
  return out;
}

std::string decode_greedy(const Tensor& logits, const corpus::Alphabet& alphabet) {
  const int64_t T = logits.dim(0), A = logits.dim(1);
  const int blank = alphabet.blank_index();
  std::string out;
  int prev = blank;
  for (int64_t t = 0; t < T; ++t) {
    int best = 0;
    real bv = logits[t * A];
    for (int64_t k = 1; k < A; ++k)
      if (logits[t * A + k] > bv) {
        bv = logits[t * A + k];
        best = static_cast<int>(k);
      }
    if (best != blank && best != prev) out.push_back(alphabet.char_at(best));
    prev = best;
  }
  return out;
}

int edit_distance(const std::string& a, const std::string& b) {
  const size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= m; ++j) {
      int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double cer(const std::string& prediction, const std::string& reference) {
  if (reference.empty()) throw InvalidArg("cer: empty reference");
  return static_cast<double>(edit_distance(prediction, reference)) /
         static_cast<double>(reference.size());
}

double wer(const std::vector<std::string>& predictions,
           const std::vector<std::string>& references) {
  if (predictions.size() != references.size())
    throw InvalidArg("wer: prediction/reference length mismatch");
  if (references.empty()) throw InvalidArg("wer: empty inputs");
  size_t wrong = 0;
  for (size_t i = 0; i < references.size(); ++i)
    if (predictions[i] != references[i]) ++wrong;
  return static_cast<double>(wrong) / static_cast<double>(references.size());
}

}  // namespace ctig::recognizer
