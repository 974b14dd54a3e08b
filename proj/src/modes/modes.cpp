#include "modes/modes.hpp"

#include <algorithm>
#include <set>

#include "common/error.hpp"

namespace ctig::modes {

namespace {

// Ancestral sampling where every row owns its noise stream, so results are
// independent of how requests are chunked into batches.
Tensor sample_rows(diffusion::Unet& unet, const Tensor& cond,
                   const diffusion::NoiseSchedule& schedule, std::vector<Rng>& rngs,
                   double guidance, const Tensor* null_cond) {
  const int64_t B = static_cast<int64_t>(rngs.size());
  const auto& cfg = unet.config();
  const int64_t HW = static_cast<int64_t>(cfg.img_h) * cfg.img_w;
  Tensor x({B, cfg.in_ch, cfg.img_h, cfg.img_w});
  for (int64_t b = 0; b < B; ++b)
    for (int64_t i = 0; i < HW; ++i)
      x[b * HW + i] = static_cast<real>(rngs[static_cast<size_t>(b)].normal());
  std::vector<int> nsteps(static_cast<size_t>(B));
  for (int n = schedule.steps; n >= 1; --n) {
    std::fill(nsteps.begin(), nsteps.end(), n);
    Tensor eps_hat = unet.forward(x, nsteps, cond);
    if (guidance != 1.0) {
      Tensor eps_u = unet.forward(x, nsteps, *null_cond);
      for (int64_t i = 0; i < eps_hat.numel(); ++i)
        eps_hat[i] = eps_u[i] + static_cast<real>(guidance) * (eps_hat[i] - eps_u[i]);
    }
    double beta = schedule.beta(n);
    double coef = beta / std::sqrt(1.0 - schedule.alpha_bar(n));
    double inv_sqrt_alpha = 1.0 / std::sqrt(schedule.alpha(n));
    double sigma = n > 1 ? std::sqrt(beta) : 0.0;
    for (int64_t b = 0; b < B; ++b) {
      real* row = x.data() + b * HW;
      const real* er = eps_hat.data() + b * HW;
      Rng& r = rngs[static_cast<size_t>(b)];
      for (int64_t i = 0; i < HW; ++i) {
        double mu = (static_cast<double>(row[i]) - coef * static_cast<double>(er[i])) *
                    inv_sqrt_alpha;
        row[i] = static_cast<real>(mu + (sigma > 0 ? sigma * r.normal() : 0.0));
      }
    }
  }
  for (auto& v : x.v) v = std::clamp(v, real(-1), real(1));
  return x;
}

Tensor replicate_bundle(const cond::ConditionBundle& b, int64_t rows) {
  const int64_t D = b.ci.numel();
  Tensor c({rows, 3 * D});
  for (int64_t r = 0; r < rows; ++r) {
    std::copy_n(b.ci.data(), D, c.data() + r * 3 * D);
    std::copy_n(b.ct.data(), D, c.data() + r * 3 * D + D);
    std::copy_n(b.cs.data(), D, c.data() + r * 3 * D + 2 * D);
  }
  return c;
}

Tensor null_cond_row(const cond::CondEncoder& enc, int64_t rows) {
  const int64_t D = enc.config().cond_width;
  Tensor c({rows, 3 * D});
  for (int64_t r = 0; r < rows; ++r)
    for (int k = 0; k < 3; ++k)
      std::copy_n(enc.null_embedding(k).data(), D, c.data() + r * 3 * D + k * D);
  return c;
}

corpus::Sample to_sample(const Tensor& batch, int64_t row, const std::string& text,
                         int writer_id, const std::string& source, int h, int w) {
  corpus::Sample s;
  s.image = Image::from_tensor_plane(batch, row, h, w);
  s.image.quantize();
  s.text = text;
  s.writer_id = writer_id;
  s.source = source;
  return s;
}

}  // namespace

std::vector<corpus::Sample> generate(const GenerationRequest& request,
                                     diffusion::DiffusionModel& model,
                                     const GenerateOptions& opts, const PresenceHook& hook) {
  if (request.count < 1)
    throw InvalidArg("generate: count must be >= 1");
  if (request.count > opts.max_count)
    throw InvalidArg("generate: count exceeds the configured limit of " +
                     std::to_string(opts.max_count));
  const auto need = cond::presence_for_mode(request.mode);
  // Labels are condition-faithful: text modes carry the conditioning text;
  // augmentation carries the source ground truth supplied by the caller.
  if (!request.text)
    throw InvalidArg("generate: text label required (mode '" +
                     cond::mode_to_string(request.mode) + "')");
  for (char c : *request.text) model.alphabet.index_of(c);

  cond::ConditionBundle bundle = model.encoder.assemble_conditions(
      request.mode, request.source_image ? &*request.source_image : nullptr,
      request.text ? &*request.text : nullptr,
      request.writer_id ? &*request.writer_id : nullptr, model.recognizer);

  const auto& ucfg = model.unet.config();
  std::vector<corpus::Sample> out;
  out.reserve(static_cast<size_t>(request.count));
  int done = 0;
  while (done < request.count) {
    int bsz = std::min(opts.sample_batch, request.count - done);
    std::vector<Rng> rngs;
    rngs.reserve(static_cast<size_t>(bsz));
    for (int i = 0; i < bsz; ++i)
      rngs.emplace_back(hash_combine(request.seed, static_cast<uint64_t>(done + i)));
    Tensor cond = replicate_bundle(bundle, bsz);
    Tensor nullc;
    if (opts.guidance != 1.0) nullc = null_cond_row(model.encoder, bsz);
    Tensor imgs = sample_rows(model.unet, cond, model.schedule, rngs, opts.guidance,
                              opts.guidance != 1.0 ? &nullc : nullptr);
    for (int i = 0; i < bsz; ++i) {
      out.push_back(to_sample(imgs, i, *request.text,
                              request.writer_id ? *request.writer_id : -1,
                              cond::mode_to_string(request.mode), ucfg.img_h, ucfg.img_w));
      if (hook) hook(request.mode, bundle.presence);
    }
    done += bsz;
  }
  (void)need;
  return out;
}

corpus::CorpusManifest mix_generate(const corpus::CorpusManifest& corpus,
                                    diffusion::DiffusionModel& model, int64_t total,
                                    uint64_t seed, const std::string& out_dir,
                                    const GenerateOptions& opts, const PresenceHook& hook,
                                    double synthesis_fraction) {
  if (total % 2 != 0) throw InvalidArg("mix_generate: total must be even");
  if (total < 2) throw InvalidArg("mix_generate: total must be >= 2");
  const int64_t n_syn = static_cast<int64_t>(static_cast<double>(total) * synthesis_fraction);
  const int64_t n_imi = total - n_syn;

  // Lexicon: unique corpus texts, sorted for determinism.
  std::set<std::string> lex_set;
  for (const auto& r : corpus.records) lex_set.insert(r.text);
  std::vector<std::string> lexicon(lex_set.begin(), lex_set.end());

  std::vector<int> train_ids = corpus.split_indices("train");
  if (train_ids.empty()) throw InvalidArg("mix_generate: corpus has no train split");

  Rng pick_rng(hash_combine(seed, 0x4d495850u));
  const auto& ucfg = model.unet.config();
  const int64_t D = model.encoder.config().cond_width;

  struct Row {
    cond::ConditionBundle bundle;
    std::string text;
    int writer_id;
    std::string source;
  };

  std::vector<corpus::Sample> samples;
  samples.reserve(static_cast<size_t>(total));
  int64_t emitted = 0;

  auto flush_rows = [&](std::vector<Row>& rows) {
    if (rows.empty()) return;
    const int64_t B = static_cast<int64_t>(rows.size());
    Tensor cond({B, 3 * D});
    std::vector<Rng> rngs;
    rngs.reserve(static_cast<size_t>(B));
    for (int64_t b = 0; b < B; ++b) {
      std::copy_n(rows[static_cast<size_t>(b)].bundle.ci.data(), D, cond.data() + b * 3 * D);
      std::copy_n(rows[static_cast<size_t>(b)].bundle.ct.data(), D, cond.data() + b * 3 * D + D);
      std::copy_n(rows[static_cast<size_t>(b)].bundle.cs.data(), D,
                  cond.data() + b * 3 * D + 2 * D);
      rngs.emplace_back(hash_combine(seed, static_cast<uint64_t>(emitted + b)));
    }
    Tensor nullc;
    if (opts.guidance != 1.0) nullc = null_cond_row(model.encoder, B);
    Tensor imgs = sample_rows(model.unet, cond, model.schedule, rngs, opts.guidance,
                              opts.guidance != 1.0 ? &nullc : nullptr);
    for (int64_t b = 0; b < B; ++b) {
      const Row& r = rows[static_cast<size_t>(b)];
      samples.push_back(to_sample(imgs, b, r.text, r.writer_id, r.source, ucfg.img_h,
                                  ucfg.img_w));
      if (hook) hook(cond::mode_from_string(r.source), r.bundle.presence);
    }
    emitted += B;
    rows.clear();
  };

  std::vector<Row> rows;
  for (int64_t i = 0; i < n_syn; ++i) {
    Row r;
    r.text = lexicon[pick_rng.uniform_int(lexicon.size())];
    r.writer_id = -1;
    r.source = "synthesis";
    r.bundle = model.encoder.assemble_conditions(GenerationMode::synthesis, nullptr,
                                                 &r.text, nullptr, model.recognizer);
    rows.push_back(std::move(r));
    if (static_cast<int>(rows.size()) >= opts.sample_batch) flush_rows(rows);
  }
  flush_rows(rows);

  for (int64_t i = 0; i < n_imi; ++i) {
    const auto& rec = corpus.records[static_cast<size_t>(
        train_ids[pick_rng.uniform_int(train_ids.size())])];
    Image src = corpus::load_image(corpus, rec);
    Row r;
    r.text = rec.text;
    r.writer_id = rec.writer_id;
    r.source = "imitation";
    r.bundle = model.encoder.assemble_conditions(GenerationMode::imitation, &src, &r.text,
                                                 &r.writer_id, model.recognizer);
    rows.push_back(std::move(r));
    if (static_cast<int>(rows.size()) >= opts.sample_batch) flush_rows(rows);
  }
  flush_rows(rows);

  corpus::write_generated_manifest(corpus, out_dir, samples);
  return corpus::load_manifest(out_dir);
}

corpus::CorpusManifest domain_adapt_generate(const std::vector<std::string>& lexicon,
                                             diffusion::DiffusionModel& model,
                                             int64_t total, uint64_t seed,
                                             const std::string& out_dir,
                                             const GenerateOptions& opts) {
  if (lexicon.empty()) throw InvalidArg("domain_adapt_generate: empty lexicon");
  if (total < 1) throw InvalidArg("domain_adapt_generate: total must be >= 1");
  for (const auto& w : lexicon)
    for (char c : w)
      if (!model.alphabet.contains(c))
        throw InvalidArg("domain_adapt_generate: lexicon entry outside alphabet: \"" + w +
                         "\"");

  const auto& ucfg = model.unet.config();
  const int64_t D = model.encoder.config().cond_width;
  std::vector<corpus::Sample> samples;
  samples.reserve(static_cast<size_t>(total));
  int64_t emitted = 0;
  while (emitted < total) {
    int64_t bsz = std::min<int64_t>(opts.sample_batch, total - emitted);
    Tensor cond({bsz, 3 * D});
    std::vector<Rng> rngs;
    std::vector<std::string> texts;
    for (int64_t b = 0; b < bsz; ++b) {
      std::string text = lexicon[static_cast<size_t>((emitted + b) % static_cast<int64_t>(lexicon.size()))];
      auto bundle = model.encoder.assemble_conditions(GenerationMode::synthesis, nullptr,
                                                      &text, nullptr, model.recognizer);
      std::copy_n(bundle.ci.data(), D, cond.data() + b * 3 * D);
      std::copy_n(bundle.ct.data(), D, cond.data() + b * 3 * D + D);
      std::copy_n(bundle.cs.data(), D, cond.data() + b * 3 * D + 2 * D);
      rngs.emplace_back(hash_combine(seed, static_cast<uint64_t>(emitted + b)));
      texts.push_back(std::move(text));
    }
    Tensor nullc;
    if (opts.guidance != 1.0) nullc = null_cond_row(model.encoder, bsz);
    Tensor imgs = sample_rows(model.unet, cond, model.schedule, rngs, opts.guidance,
                              opts.guidance != 1.0 ? &nullc : nullptr);
    for (int64_t b = 0; b < bsz; ++b)
      samples.push_back(to_sample(imgs, b, texts[static_cast<size_t>(b)], -1, "synthesis",
                                  ucfg.img_h, ucfg.img_w));
    emitted += bsz;
  }

  corpus::CorpusManifest base;
  base.alphabet = model.alphabet;
  base.writers = model.writers;
  base.seed = seed;
  corpus::write_generated_manifest(base, out_dir, samples);
  return corpus::load_manifest(out_dir);
}

}  // namespace ctig::modes
