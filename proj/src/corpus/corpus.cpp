#include "corpus/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "common/error.hpp"
#include "common/hash.hpp"
#include "common/serial.hpp"
#include "common/threads.hpp"

namespace fs = std::filesystem;

namespace ctig::corpus {

void check_sample(const Sample& s, const Alphabet& alphabet) {
  if (s.image.h != kImageHeight || s.image.w != kImageWidth)
    throw InvalidArg("sample: image must be 64x256, got " + std::to_string(s.image.h) +
                     "x" + std::to_string(s.image.w));
  for (real v : s.image.px)
    if (!(v >= real(-1) && v <= real(1)))
      throw InvalidArg("sample: pixel out of [-1,1]");
  if (s.text.empty() || s.text.size() > kMaxTextLen)
    throw InvalidArg("sample: text length must be in [1, 24]");
  for (char c : s.text) alphabet.index_of(c);
  if (std::find(kSources.begin(), kSources.end(), s.source) == kSources.end())
    throw InvalidArg("sample: unknown source tag: " + s.source);
}

std::vector<int> CorpusManifest::split_indices(const std::string& split) const {
  std::vector<int> idx;
  for (size_t i = 0; i < records.size(); ++i)
    if (records[i].split == split) idx.push_back(static_cast<int>(i));
  return idx;
}

const WriterStyle& CorpusManifest::writer(int writer_id) const {
  for (const auto& w : writers)
    if (w.writer_id == writer_id) return w;
  throw InvalidArg("writer_id not in manifest: " + std::to_string(writer_id));
}

CorpusManifest build_corpus(const std::vector<std::string>& vocab,
                            const std::vector<WriterStyle>& writers, int per_pair,
                            uint64_t seed, const Alphabet& alphabet,
                            const std::string& out_dir, int threads) {
  if (vocab.empty()) throw InvalidArg("build_corpus: empty vocab");
  if (writers.empty()) throw InvalidArg("build_corpus: no writers");
  if (per_pair < 1) throw InvalidArg("build_corpus: per_pair must be >= 1");

  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "images", ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());

  CorpusManifest m;
  m.alphabet = alphabet;
  m.writers = writers;
  m.seed = seed;
  m.dir = out_dir;

  const int64_t W = static_cast<int64_t>(writers.size());
  const int64_t P = per_pair;
  const int64_t total = static_cast<int64_t>(vocab.size()) * W * P;
  m.records.resize(static_cast<size_t>(total));

  parallel_for(
      total,
      [&](int64_t i) {
        int64_t vi = i / (W * P);
        int64_t wi = (i / P) % W;
        char name[32];
        std::snprintf(name, sizeof(name), "images/img_%06lld.pgm",
                      static_cast<long long>(i));
        uint64_t rec_seed = hash_combine(seed, static_cast<uint64_t>(i));
        Image img = render_word(vocab[static_cast<size_t>(vi)],
                                writers[static_cast<size_t>(wi)], rec_seed, alphabet);
        write_pgm((fs::path(out_dir) / name).string(), img);
        CorpusRecord& r = m.records[static_cast<size_t>(i)];
        r.image_path = name;
        r.text = vocab[static_cast<size_t>(vi)];
        r.writer_id = writers[static_cast<size_t>(wi)].writer_id;
        r.source = "real";
      },
      threads);

  // 80/10/10 split, stratified by word.
  Rng split_rng = Rng(seed).child(0x53504c49u);
  for (size_t vi = 0; vi < vocab.size(); ++vi) {
    std::vector<int64_t> idx;
    for (int64_t i = static_cast<int64_t>(vi) * W * P; i < static_cast<int64_t>(vi + 1) * W * P; ++i)
      idx.push_back(i);
    Rng r = split_rng.child(vi);
    r.shuffle(idx);
    size_t n = idx.size();
    size_t n_train = std::max<size_t>(1, static_cast<size_t>(0.8 * static_cast<double>(n)));
    size_t n_val = static_cast<size_t>(0.1 * static_cast<double>(n));
    for (size_t j = 0; j < n; ++j) {
      auto& rec = m.records[static_cast<size_t>(idx[j])];
      rec.split = j < n_train ? "train" : (j < n_train + n_val ? "val" : "test");
    }
  }

  save_manifest(m, out_dir);
  return m;
}

void save_manifest(const CorpusManifest& m, const std::string& dir) {
  std::ofstream f(fs::path(dir) / "manifest.jsonl");
  if (!f) throw IoError("cannot write manifest in " + dir);
  json header;
  header["alphabet"] = m.alphabet.to_json();
  json ws = json::array();
  for (const auto& w : m.writers) ws.push_back(w.to_json());
  header["writers"] = ws;
  header["seed"] = m.seed;
  f << header.dump() << "\n";
  for (const auto& r : m.records) {
    json j;
    j["image_path"] = r.image_path;
    j["text"] = r.text;
    j["writer_id"] = r.writer_id;
    j["source"] = r.source;
    j["split"] = r.split;
    f << j.dump() << "\n";
  }
  if (!f) throw IoError("short write: manifest in " + dir);
}

CorpusManifest load_manifest(const std::string& dir) {
  std::ifstream f(fs::path(dir) / "manifest.jsonl");
  if (!f) throw IoError("cannot read manifest in " + dir);
  std::string line;
  if (!std::getline(f, line)) throw IoError("empty manifest in " + dir);
  json header = json::parse(line);
  CorpusManifest m;
  m.alphabet = Alphabet::from_json(header.at("alphabet"));
  for (const auto& jw : header.at("writers")) m.writers.push_back(WriterStyle::from_json(jw));
  m.seed = header.at("seed").get<uint64_t>();
  m.dir = dir;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    CorpusRecord r;
    r.image_path = j.at("image_path").get<std::string>();
    r.text = j.at("text").get<std::string>();
    r.writer_id = j.at("writer_id").get<int>();
    r.source = j.at("source").get<std::string>();
    r.split = j.at("split").get<std::string>();
    if (!fs::exists(fs::path(dir) / r.image_path))
      throw IoError("manifest references missing image: " + r.image_path);
    m.writer(r.writer_id);  // writer_id must appear in the header
    m.records.push_back(std::move(r));
  }
  return m;
}

Image load_image(const CorpusManifest& m, const CorpusRecord& r) {
  return read_pgm((fs::path(m.dir) / r.image_path).string());
}

Sample load_sample(const CorpusManifest& m, const CorpusRecord& r) {
  Sample s;
  s.image = load_image(m, r);
  s.text = r.text;
  s.writer_id = r.writer_id;
  s.source = r.source;
  check_sample(s, m.alphabet);
  return s;
}

void write_generated_manifest(const CorpusManifest& base, const std::string& out_dir,
                              const std::vector<Sample>& samples) {
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "images", ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
  CorpusManifest m;
  m.alphabet = base.alphabet;
  m.writers = base.writers;
  m.seed = base.seed;
  m.dir = out_dir;
  // Unconditioned outputs carry writer_id -1; give the id a placeholder
  // style entry so every record's writer_id resolves in the header.
  for (const auto& s : samples) {
    bool known = false;
    for (const auto& w : m.writers)
      if (w.writer_id == s.writer_id) {
        known = true;
        break;
      }
    if (!known) {
      WriterStyle placeholder;
      placeholder.writer_id = s.writer_id;
      m.writers.push_back(placeholder);
    }
  }
  for (size_t i = 0; i < samples.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "images/img_%06zu.pgm", i);
    write_pgm((fs::path(out_dir) / name).string(), samples[i].image);
    CorpusRecord r;
    r.image_path = name;
    r.text = samples[i].text;
    r.writer_id = samples[i].writer_id;
    r.source = samples[i].source;
    r.split = "train";
    m.records.push_back(std::move(r));
  }
  save_manifest(m, out_dir);
}

std::vector<std::string> load_vocab_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read vocab file: " + path);
  std::vector<std::string> words;
  std::string line;
  while (std::getline(f, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) words.push_back(line);
  }
  if (words.empty()) throw InvalidArg("vocab file is empty: " + path);
  return words;
}

}  // namespace ctig::corpus
