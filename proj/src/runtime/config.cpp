#include "runtime/config.hpp"

#include "common/hash.hpp"
#include "common/serial.hpp"

namespace ctig::runtime {

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  nlohmann::ordered_json jc;
  jc["vocab_file"] = corpus.vocab_file;
  jc["vocab"] = corpus.vocab;
  jc["writers"] = corpus.writers;
  jc["per_pair"] = corpus.per_pair;
  jc["charset"] = corpus.charset;
  j["corpus"] = jc;
  j["crnn"] = crnn.to_json();
  j["recognizer_train"] = recognizer_train.to_json();
  j["diffusion_train"] = diffusion_train.to_json();
  nlohmann::ordered_json jg;
  jg["max_count"] = gen.max_count;
  jg["sample_batch"] = gen.sample_batch;
  jg["guidance"] = gen.guidance;
  j["gen"] = jg;
  nlohmann::ordered_json je;
  je["ablation_steps"] = experiment.ablation_steps;
  je["augment_steps"] = experiment.augment_steps;
  je["mix_total"] = experiment.mix_total;
  je["eval_images"] = experiment.eval_images;
  j["experiment"] = je;
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::ordered_json& j) {
  RunConfig c;
  c.seed = j.value("seed", c.seed);
  if (j.contains("corpus")) {
    const auto& jc = j["corpus"];
    c.corpus.vocab_file = jc.value("vocab_file", c.corpus.vocab_file);
    c.corpus.vocab = jc.value("vocab", c.corpus.vocab);
    c.corpus.writers = jc.value("writers", c.corpus.writers);
    c.corpus.per_pair = jc.value("per_pair", c.corpus.per_pair);
    c.corpus.charset = jc.value("charset", c.corpus.charset);
  }
  if (j.contains("crnn")) c.crnn = recognizer::CrnnConfig::from_json(j["crnn"]);
  if (j.contains("recognizer_train"))
    c.recognizer_train = recognizer::TrainConfig::from_json(j["recognizer_train"]);
  if (j.contains("diffusion_train"))
    c.diffusion_train = diffusion::DiffusionTrainConfig::from_json(j["diffusion_train"]);
  if (j.contains("gen")) {
    const auto& jg = j["gen"];
    c.gen.max_count = jg.value("max_count", c.gen.max_count);
    c.gen.sample_batch = jg.value("sample_batch", c.gen.sample_batch);
    c.gen.guidance = jg.value("guidance", c.gen.guidance);
  }
  if (j.contains("experiment")) {
    const auto& je = j["experiment"];
    c.experiment.ablation_steps = je.value("ablation_steps", c.experiment.ablation_steps);
    c.experiment.augment_steps = je.value("augment_steps", c.experiment.augment_steps);
    c.experiment.mix_total = je.value("mix_total", c.experiment.mix_total);
    c.experiment.eval_images = je.value("eval_images", c.experiment.eval_images);
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  return from_json(load_json_file(path));
}

std::string RunConfig::hash() const { return hash_hex(fnv1a(to_json().dump())); }

modes::GenerateOptions RunConfig::gen_options() const {
  modes::GenerateOptions o;
  o.max_count = gen.max_count;
  o.sample_batch = gen.sample_batch;
  o.guidance = gen.guidance;
  return o;
}

}  // namespace ctig::runtime
