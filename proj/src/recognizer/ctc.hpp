#pragma once

#include <string>
#include <vector>

#include "common/tensor.hpp"
#include "corpus/alphabet.hpp"

namespace ctig::recognizer {

// CTC forward-backward for one sample. `logits` is (T, A); the gradient
// returned is w.r.t. the raw logits (softmax - posterior). Internally runs
// in double for stability. Returns +inf loss and zero grad when the label
// cannot be aligned in T frames.
struct CtcResult {
  double loss = 0.0;
  Tensor dlogits;
};

CtcResult ctc_loss(const Tensor& logits, const std::vector<int>& label, int blank);

// Best-path decode: per-frame argmax (ties -> lowest index), collapse
// repeats, drop blanks.
std::string decode_greedy(const Tensor& logits, const corpus::Alphabet& alphabet);

int edit_distance(const std::string& a, const std::string& b);

// Levenshtein(pred, ref) / len(ref). Rejects empty references.
double cer(const std::string& prediction, const std::string& reference);

// Fraction of exact word mismatches. Rejects length mismatch / empty input.
double wer(const std::vector<std::string>& predictions,
           const std::vector<std::string>& references);

}  // namespace ctig::recognizer
