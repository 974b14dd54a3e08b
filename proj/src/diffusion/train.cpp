#include "diffusion/train.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "common/error.hpp"
#include "common/hash.hpp"
#include "nn/optim.hpp"

namespace fs = std::filesystem;

namespace ctig::diffusion {

nlohmann::ordered_json DiffusionTrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["batch_size"] = batch_size;
  j["lr"] = lr;
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["weight_decay"] = weight_decay;
  j["steps"] = steps;
  j["warmup"] = warmup;
  j["dropout_rates"] = dropout_rates;
  j["enabled_conditions"] = enabled_conditions;
  j["schedule_steps"] = schedule_steps;
  j["schedule_kind"] = schedule_kind;
  j["ema_decay"] = ema_decay;
  j["save_every"] = save_every;
  j["sample_every"] = sample_every;
  j["cache_features"] = cache_features;
  j["seed"] = seed;
  j["unet"] = unet.to_json();
  return j;
}

DiffusionTrainConfig DiffusionTrainConfig::from_json(const nlohmann::ordered_json& j) {
  DiffusionTrainConfig c;
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.steps = j.value("steps", c.steps);
  c.warmup = j.value("warmup", c.warmup);
  if (j.contains("dropout_rates")) {
    auto v = j["dropout_rates"].get<std::vector<double>>();
    if (v.size() != 3) throw InvalidArg("dropout_rates must have 3 entries");
    c.dropout_rates = {v[0], v[1], v[2]};
  }
  c.schedule_steps = j.value("schedule_steps", c.schedule_steps);
  c.schedule_kind = j.value("schedule_kind", c.schedule_kind);
  c.ema_decay = j.value("ema_decay", c.ema_decay);
  c.save_every = j.value("save_every", c.save_every);
  c.sample_every = j.value("sample_every", c.sample_every);
  c.cache_features = j.value("cache_features", c.cache_features);
  c.seed = j.value("seed", c.seed);
  if (j.contains("unet")) c.unet = UnetConfig::from_json(j["unet"]);
  return c;
}

void DiffusionModel::save(const std::string& path) const {
  Checkpoint ck;
  ck.meta["kind"] = "diffusion";
  ck.meta["unet_config"] = unet.config().to_json();
  ck.meta["cond_config"] = encoder.config().to_json();
  ck.meta["recognizer_config"] = recognizer.config().to_json();
  ck.meta["schedule"] = schedule.to_json();
  ck.meta["alphabet"] = alphabet.to_json();
  nlohmann::ordered_json ws = nlohmann::ordered_json::array();
  for (const auto& w : writers) ws.push_back(w.to_json());
  ck.meta["writers"] = ws;
  ck.meta["steps_trained"] = steps_trained;
  ck.meta["config_hash"] = config_hash;
  unet.save(ck, "");
  encoder.save(ck, "");
  recognizer.save(ck, "");
  ck.save(path);
}

DiffusionModel DiffusionModel::load(const std::string& path) {
  Checkpoint ck = Checkpoint::load(path);
  if (ck.meta.value("kind", "") != "diffusion")
    throw IoError(path + ": not a diffusion checkpoint");
  DiffusionModel m;
  m.alphabet = corpus::Alphabet::from_json(ck.meta.at("alphabet"));
  m.unet = Unet(UnetConfig::from_json(ck.meta.at("unet_config")));
  m.encoder = cond::CondEncoder(cond::CondConfig::from_json(ck.meta.at("cond_config")));
  m.recognizer =
      recognizer::Crnn(recognizer::CrnnConfig::from_json(ck.meta.at("recognizer_config")),
                       m.alphabet);
  m.schedule = NoiseSchedule::from_json(ck.meta.at("schedule"));
  for (const auto& jw : ck.meta.at("writers")) m.writers.push_back(corpus::WriterStyle::from_json(jw));
  m.steps_trained = ck.meta.value("steps_trained", int64_t(0));
  m.config_hash = ck.meta.value("config_hash", "");
  m.unet.load(ck, "");
  m.encoder.load(ck, "");
  m.recognizer.load(ck, "");
  m.recognizer.set_frozen(true);
  return m;
}

namespace {

struct FeatureCache {
  bool enabled = false;
  int64_t frames = 0, width = 0;
  std::vector<std::vector<real>> rows;

  void init(size_t n, int64_t frames_, int64_t width_, bool enabled_) {
    enabled = enabled_;
    frames = frames_;
    width = width_;
    rows.assign(enabled ? n : 0, {});
  }
};

}  // namespace

DiffusionTrainResult train_diffusion(const corpus::CorpusManifest& corpus,
                                     const std::string& recognizer_ckpt,
                                     const DiffusionTrainConfig& cfg,
                                     const std::string& out_ckpt,
                                     std::ostream* metrics_log, std::ostream* progress) {
  std::vector<int> train_ids = corpus.split_indices("train");
  if (train_ids.empty()) throw InvalidArg("train_diffusion: empty train split");

  recognizer::ImageStore store(corpus);
  recognizer::Crnn rec = recognizer::load_recognizer(recognizer_ckpt);
  rec.set_frozen(true);
  if (!(rec.alphabet() == corpus.alphabet))
    throw InvalidArg("train_diffusion: recognizer alphabet differs from corpus");

  NoiseSchedule schedule = make_schedule(cfg.schedule_steps, cfg.schedule_kind);

  cond::CondConfig ccfg;
  ccfg.cond_width = cfg.unet.cond_width;
  ccfg.frames = rec.config().frames();
  ccfg.max_text_len = corpus::kMaxTextLen;
  ccfg.num_writers = static_cast<int>(corpus.writers.size());
  ccfg.style_width = cfg.unet.cond_width;
  ccfg.init_seed = cfg.seed;
  if (rec.config().feature_width() != cfg.unet.cond_width)
    throw InvalidArg("train_diffusion: recognizer feature width must equal cond_width");

  UnetConfig ucfg = cfg.unet;
  ucfg.init_seed = cfg.seed;

  DiffusionModel model;
  model.unet = Unet(ucfg);
  model.encoder = cond::CondEncoder(ccfg);
  model.recognizer = std::move(rec);
  model.schedule = schedule;
  model.alphabet = corpus.alphabet;
  model.writers = corpus.writers;
  model.config_hash = hash_hex(fnv1a(cfg.to_json().dump()));

  nn::ParamRefs params = model.unet.params();
  {
    nn::ParamRefs enc_params = model.encoder.params();
    params.insert(params.end(), enc_params.begin(), enc_params.end());
  }
  nn::AdamW opt(params, cfg.beta1, cfg.beta2, cfg.weight_decay);
  nn::Ema ema(params, cfg.ema_decay > 0 ? cfg.ema_decay : 0.0);
  Rng rng(hash_combine(cfg.seed, 0x44494646u));

  int64_t start_step = 0;
  // Resume from a partial run of the same config.
  if (fs::exists(out_ckpt)) {
    Checkpoint ck = Checkpoint::load(out_ckpt);
    if (ck.meta.value("kind", "") == "diffusion" &&
        ck.meta.value("config_hash", "") == model.config_hash &&
        ck.meta.value("steps_trained", int64_t(0)) < cfg.steps && ck.find("raw.unet.conv_in.W")) {
      start_step = ck.meta.value("steps_trained", int64_t(0));
      for (size_t i = 0; i < params.size(); ++i) {
        params[i]->w = ck.get("raw." + params[i]->name);
        opt.m_state()[i] = ck.get("opt.m." + std::to_string(i));
        opt.v_state()[i] = ck.get("opt.v." + std::to_string(i));
        if (cfg.ema_decay > 0) ema.shadow()[i] = ck.get("ema." + std::to_string(i));
      }
      opt.set_step_count(start_step);
      rng.load_state(ck.meta.at("rng_state").get<std::string>());
      if (progress) (*progress) << "resuming at step " << start_step << "\n";
    }
  }

  FeatureCache fcache;
  fcache.init(corpus.records.size(), ccfg.frames, ccfg.cond_width, cfg.cache_features);

  const int64_t HW = static_cast<int64_t>(cfg.unet.img_h) * cfg.unet.img_w;
  const int64_t D = ccfg.cond_width;
  std::vector<int> order = train_ids;
  size_t cursor = order.size();

  auto save_full = [&](int64_t steps_done) {
    // canonical sampling weights = EMA when enabled
    std::vector<Tensor> raw;
    raw.reserve(params.size());
    for (nn::Param* p : params) raw.push_back(p->w);
    if (cfg.ema_decay > 0) ema.copy_to_params();
    model.steps_trained = steps_done;

    Checkpoint ck;
    ck.meta["kind"] = "diffusion";
    ck.meta["unet_config"] = model.unet.config().to_json();
    ck.meta["cond_config"] = model.encoder.config().to_json();
    ck.meta["recognizer_config"] = model.recognizer.config().to_json();
    ck.meta["schedule"] = model.schedule.to_json();
    ck.meta["alphabet"] = model.alphabet.to_json();
    nlohmann::ordered_json ws = nlohmann::ordered_json::array();
    for (const auto& w : model.writers) ws.push_back(w.to_json());
    ck.meta["writers"] = ws;
    ck.meta["steps_trained"] = steps_done;
    ck.meta["config_hash"] = model.config_hash;
    ck.meta["rng_state"] = rng.save_state();
    model.unet.save(ck, "");
    model.encoder.save(ck, "");
    model.recognizer.save(ck, "");
    // restore raw weights and persist the optimizer state for resume
    for (size_t i = 0; i < params.size(); ++i) params[i]->w = raw[i];
    for (size_t i = 0; i < params.size(); ++i) {
      ck.put("raw." + params[i]->name, params[i]->w);
      ck.put("opt.m." + std::to_string(i), opt.m_state()[i]);
      ck.put("opt.v." + std::to_string(i), opt.v_state()[i]);
      if (cfg.ema_decay > 0) ck.put("ema." + std::to_string(i), ema.shadow()[i]);
    }
    ck.save(out_ckpt);
  };

  DiffusionTrainResult result;
  const int B = cfg.batch_size;
  Tensor x0({B, 1, cfg.unet.img_h, cfg.unet.img_w});
  for (int64_t step = start_step; step < cfg.steps; ++step) {
    std::vector<int> batch;
    batch.reserve(static_cast<size_t>(B));
    for (int i = 0; i < B; ++i) {
      if (cursor >= order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }

    std::vector<std::string> texts;
    std::vector<int> writer_ids;
    for (int id : batch) {
      texts.push_back(corpus.records[static_cast<size_t>(id)].text);
      writer_ids.push_back(corpus.records[static_cast<size_t>(id)].writer_id);
    }
    for (int i = 0; i < B; ++i) store.fetch(batch[static_cast<size_t>(i)], x0.data() + i * HW);

    // Frozen recognizer features (cached after first epoch).
    Tensor features({B, ccfg.frames, D});
    std::vector<int> missing;
    for (int i = 0; i < B; ++i) {
      int id = batch[static_cast<size_t>(i)];
      if (fcache.enabled && !fcache.rows[static_cast<size_t>(id)].empty())
        std::copy(fcache.rows[static_cast<size_t>(id)].begin(),
                  fcache.rows[static_cast<size_t>(id)].end(),
                  features.data() + static_cast<int64_t>(i) * ccfg.frames * D);
      else
        missing.push_back(i);
    }
    if (!missing.empty()) {
      Tensor xs({static_cast<int64_t>(missing.size()), 1, cfg.unet.img_h, cfg.unet.img_w});
      for (size_t k = 0; k < missing.size(); ++k)
        std::copy_n(x0.data() + static_cast<int64_t>(missing[k]) * HW, HW,
                    xs.data() + static_cast<int64_t>(k) * HW);
      Tensor f = model.recognizer.forward_features(xs);
      for (size_t k = 0; k < missing.size(); ++k) {
        const real* src = f.data() + static_cast<int64_t>(k) * ccfg.frames * D;
        std::copy_n(src, ccfg.frames * D,
                    features.data() + static_cast<int64_t>(missing[k]) * ccfg.frames * D);
        if (fcache.enabled) {
          int id = batch[static_cast<size_t>(missing[k])];
          fcache.rows[static_cast<size_t>(id)].assign(src, src + ccfg.frames * D);
        }
      }
    }

    cond::BundleBatch bundle = model.encoder.full_bundle(features, texts, writer_ids,
                                                         model.recognizer);
    model.encoder.apply_dropout(bundle, cfg.dropout_rates, rng);
    Tensor cond_cat = bundle.concat();

    Tensor dcond;
    opt.zero_grad();
    std::vector<int> nsteps(static_cast<size_t>(B));
    for (auto& n : nsteps)
      n = 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(model.schedule.steps)));
    Tensor eps(x0.shape);
    for (auto& e : eps.v) e = static_cast<real>(rng.normal());
    double loss = training_loss_at(model.unet, x0, cond_cat, nsteps, eps, model.schedule,
                                   /*run_backward=*/true, &dcond);
    if (!std::isfinite(loss)) {
      save_full(step);
      throw RuntimeFault("train_diffusion: loss diverged at step " + std::to_string(step) +
                         "; last good checkpoint kept at " + out_ckpt);
    }

    Tensor dci({B, D}), dct({B, D}), dcs({B, D});
    for (int64_t b = 0; b < B; ++b) {
      std::copy_n(dcond.data() + b * 3 * D, D, dci.data() + b * D);
      std::copy_n(dcond.data() + b * 3 * D + D, D, dct.data() + b * D);
      std::copy_n(dcond.data() + b * 3 * D + 2 * D, D, dcs.data() + b * D);
    }
    model.encoder.backward(dci, dct, dcs, bundle.presence);

    double lr = nn::cosine_lr(cfg.lr, step, cfg.steps, cfg.warmup);
    opt.step(lr);
    if (cfg.ema_decay > 0) ema.update();

    if (step == start_step) result.first_loss = loss;
    result.last_loss = loss;
    result.steps_run = step + 1;

    if (metrics_log && cfg.log_every > 0 && (step + 1) % cfg.log_every == 0) {
      nlohmann::ordered_json j;
      j["step"] = step + 1;
      j["loss"] = loss;
      j["lr"] = lr;
      (*metrics_log) << j.dump() << "\n" << std::flush;
    }
    if (progress && (step + 1) % 200 == 0)
      (*progress) << "step " << (step + 1) << "/" << cfg.steps << " loss " << loss << "\n"
                  << std::flush;

    if (cfg.save_every > 0 && (step + 1) % cfg.save_every == 0 && step + 1 < cfg.steps)
      save_full(step + 1);
  }

  save_full(cfg.steps);
  result.checkpoint_path = out_ckpt;
  return result;
}

}  // namespace ctig::diffusion
