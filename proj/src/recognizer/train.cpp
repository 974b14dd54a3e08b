#include "recognizer/train.hpp"

#include <cmath>
#include <iostream>

#include "common/error.hpp"
#include "common/hash.hpp"
#include "common/threads.hpp"
#include "nn/optim.hpp"
#include "recognizer/ctc.hpp"

namespace ctig::recognizer {

nlohmann::ordered_json TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["batch_size"] = batch_size;
  j["lr"] = lr;
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["weight_decay"] = weight_decay;
  j["steps"] = steps;
  j["warmup"] = warmup;
  j["eval_every"] = eval_every;
  j["early_stop_cer"] = early_stop_cer;
  j["seed"] = seed;
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::ordered_json& j) {
  TrainConfig c;
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.steps = j.value("steps", c.steps);
  c.warmup = j.value("warmup", c.warmup);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.early_stop_cer = j.value("early_stop_cer", c.early_stop_cer);
  c.seed = j.value("seed", c.seed);
  return c;
}

ImageStore::ImageStore(const corpus::CorpusManifest& m, int threads) : m_(&m) {
  pixels_.resize(m.records.size());
  parallel_for(
      static_cast<int64_t>(m.records.size()),
      [&](int64_t i) {
        Image img = corpus::load_image(m, m.records[static_cast<size_t>(i)]);
        if (img.h != corpus::kImageHeight || img.w != corpus::kImageWidth)
          throw IoError("image has wrong shape: " + m.records[static_cast<size_t>(i)].image_path);
        std::vector<uint8_t>& px = pixels_[static_cast<size_t>(i)];
        px.resize(static_cast<size_t>(img.numel()));
        for (size_t p = 0; p < px.size(); ++p) px[p] = pixel_to_u8(img.px[p]);
      },
      threads);
}

void ImageStore::fetch(int idx, real* dst) const {
  const auto& px = pixels_[static_cast<size_t>(idx)];
  for (size_t p = 0; p < px.size(); ++p) dst[p] = u8_to_pixel(px[p]);
}

namespace {

Tensor make_batch(const ImageStore& store, const std::vector<int>& ids) {
  const int64_t B = static_cast<int64_t>(ids.size());
  Tensor x({B, 1, corpus::kImageHeight, corpus::kImageWidth});
  const int64_t stride = corpus::kImageHeight * corpus::kImageWidth;
  for (int64_t i = 0; i < B; ++i) store.fetch(ids[static_cast<size_t>(i)], x.data() + i * stride);
  return x;
}

}  // namespace

EvalResult evaluate(Crnn& model, const ImageStore& store, const std::string& split,
                    int batch_size) {
  const auto& m = store.manifest();
  std::vector<int> ids = m.split_indices(split);
  if (ids.empty()) throw InvalidArg("evaluate: empty split: " + split);
  EvalResult res;
  std::vector<std::string> preds, refs;
  const int64_t A = m.alphabet.size();
  for (size_t off = 0; off < ids.size(); off += static_cast<size_t>(batch_size)) {
    std::vector<int> chunk(ids.begin() + static_cast<long>(off),
                           ids.begin() + static_cast<long>(std::min(
                                             ids.size(), off + static_cast<size_t>(batch_size))));
    Tensor x = make_batch(store, chunk);
    Tensor logits = model.forward(x).logits;
    int64_t T = logits.dim(1);
    for (size_t i = 0; i < chunk.size(); ++i) {
      Tensor one({T, A});
      std::copy_n(logits.data() + static_cast<int64_t>(i) * T * A, T * A, one.data());
      preds.push_back(decode_greedy(one, m.alphabet));
      refs.push_back(m.records[static_cast<size_t>(chunk[i])].text);
    }
  }
  double cer_sum = 0;
  for (size_t i = 0; i < preds.size(); ++i) cer_sum += cer(preds[i], refs[i]);
  res.cer = cer_sum / static_cast<double>(preds.size());
  res.wer = wer(preds, refs);
  res.n = static_cast<int>(preds.size());
  return res;
}

void save_recognizer(const Crnn& model, const std::string& path, double val_cer,
                     int64_t steps, const std::string& config_hash) {
  Checkpoint ck;
  ck.meta["kind"] = "recognizer";
  ck.meta["alphabet"] = model.alphabet().to_json();
  ck.meta["config"] = model.config().to_json();
  ck.meta["val_cer"] = val_cer;
  ck.meta["steps_trained"] = steps;
  ck.meta["config_hash"] = config_hash;
  model.save(ck, "");
  ck.save(path);
}

Crnn load_recognizer(const std::string& path) {
  Checkpoint ck = Checkpoint::load(path);
  if (ck.meta.value("kind", "") != "recognizer")
    throw IoError(path + ": not a recognizer checkpoint");
  corpus::Alphabet alphabet = corpus::Alphabet::from_json(ck.meta.at("alphabet"));
  CrnnConfig cfg = CrnnConfig::from_json(ck.meta.at("config"));
  Crnn model(cfg, alphabet);
  model.load(ck, "");
  return model;
}

TrainResult train_recognizer(const corpus::CorpusManifest& corpus, const CrnnConfig& mcfg,
                             const TrainConfig& tcfg, const std::string& out_ckpt,
                             std::ostream* metrics_log) {
  std::vector<int> train_ids = corpus.split_indices("train");
  std::vector<int> val_ids = corpus.split_indices("val");
  if (train_ids.empty()) throw InvalidArg("train_recognizer: empty train split");
  if (val_ids.empty()) throw InvalidArg("train_recognizer: empty validation split");

  ImageStore store(corpus);
  Crnn model(mcfg, corpus.alphabet);
  nn::ParamRefs params = model.params();
  nn::AdamW opt(params, tcfg.beta1, tcfg.beta2, tcfg.weight_decay);
  Rng rng(hash_combine(tcfg.seed, 0x52454354u));

  const int64_t A = corpus.alphabet.size();
  const int blank = corpus.alphabet.blank_index();
  std::vector<int> order = train_ids;
  size_t cursor = order.size();  // trigger shuffle on first use

  TrainResult result;
  std::vector<Tensor> best_weights;
  double running_loss = 0;
  int64_t running_n = 0;

  for (int64_t step = 0; step < tcfg.steps; ++step) {
    std::vector<int> batch;
    batch.reserve(static_cast<size_t>(tcfg.batch_size));
    for (int i = 0; i < tcfg.batch_size; ++i) {
      if (cursor >= order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }
    Tensor x = make_batch(store, batch);
    Crnn::Forward fwd = model.forward(x);
    int64_t T = fwd.logits.dim(1);

    Tensor dlogits({static_cast<int64_t>(batch.size()), T, A});
    double loss = 0;
    int64_t used = 0;
    for (size_t i = 0; i < batch.size(); ++i) {
      Tensor one({T, A});
      std::copy_n(fwd.logits.data() + static_cast<int64_t>(i) * T * A, T * A, one.data());
      auto label = corpus.alphabet.encode(corpus.records[static_cast<size_t>(batch[i])].text);
      CtcResult r = ctc_loss(one, label, blank);
      if (!std::isfinite(r.loss)) continue;  // unalignable label, skip sample
      loss += r.loss;
      ++used;
      std::copy_n(r.dlogits.data(), T * A, dlogits.data() + static_cast<int64_t>(i) * T * A);
    }
    if (used == 0) throw RuntimeFault("train_recognizer: no alignable sample in batch");
    loss /= static_cast<double>(used);
    dlogits.scale_(real(1) / static_cast<real>(used));
    if (!std::isfinite(loss))
      throw RuntimeFault("train_recognizer: loss diverged (NaN) at step " +
                         std::to_string(step));

    opt.zero_grad();
    model.backward_from_logits(dlogits);
    double lr = nn::cosine_lr(tcfg.lr, step, tcfg.steps, tcfg.warmup);
    opt.step(lr);

    running_loss += loss;
    ++running_n;
    result.steps_run = step + 1;

    if (metrics_log && tcfg.log_every > 0 && (step + 1) % tcfg.log_every == 0) {
      nlohmann::ordered_json j;
      j["step"] = step + 1;
      j["loss"] = running_loss / static_cast<double>(running_n);
      j["lr"] = lr;
      (*metrics_log) << j.dump() << "\n" << std::flush;
      running_loss = 0;
      running_n = 0;
    }

    bool last = step + 1 == tcfg.steps;
    if ((tcfg.eval_every > 0 && (step + 1) % tcfg.eval_every == 0) || last) {
      EvalResult ev = evaluate(model, store, "val", tcfg.batch_size);
      if (metrics_log) {
        nlohmann::ordered_json j;
        j["step"] = step + 1;
        j["val_cer"] = ev.cer;
        j["val_wer"] = ev.wer;
        (*metrics_log) << j.dump() << "\n" << std::flush;
      }
      if (ev.cer < result.best_val_cer) {
        result.best_val_cer = ev.cer;
        best_weights.clear();
        for (nn::Param* p : params) best_weights.push_back(p->w);
      }
      if (tcfg.early_stop_cer >= 0 && ev.cer <= tcfg.early_stop_cer) break;
    }
  }

  if (!best_weights.empty())
    for (size_t i = 0; i < params.size(); ++i) params[i]->w = best_weights[i];

  std::string cfg_hash = hash_hex(fnv1a(mcfg.to_json().dump() + tcfg.to_json().dump()));
  save_recognizer(model, out_ckpt, result.best_val_cer, result.steps_run, cfg_hash);
  result.checkpoint_path = out_ckpt;
  return result;
}

}  // namespace ctig::recognizer
