#pragma once

#include <string>
#include <vector>

#include "common/image.hpp"
#include "corpus/alphabet.hpp"
#include "corpus/render.hpp"

namespace ctig::corpus {

inline const std::vector<std::string> kSources = {"real", "synthesis", "augmentation",
                                                  "recovery", "imitation"};

struct Sample {
  Image image;
  std::string text;
  int writer_id = 0;
  std::string source = "real";
};

// Throws unless the sample satisfies the shape/range/text invariants.
void check_sample(const Sample& s, const Alphabet& alphabet);

struct CorpusRecord {
  std::string image_path;  // relative to the manifest directory
  std::string text;
  int writer_id = 0;
  std::string source = "real";
  std::string split = "train";
};

struct CorpusManifest {
  Alphabet alphabet;
  std::vector<WriterStyle> writers;
  uint64_t seed = 0;
  std::vector<CorpusRecord> records;
  std::string dir;  // where the manifest lives; image paths resolve against it

  std::vector<int> split_indices(const std::string& split) const;
  const WriterStyle& writer(int writer_id) const;
};

CorpusManifest build_corpus(const std::vector<std::string>& vocab,
                            const std::vector<WriterStyle>& writers, int per_pair,
                            uint64_t seed, const Alphabet& alphabet,
                            const std::string& out_dir, int threads = 0);

void save_manifest(const CorpusManifest& m, const std::string& dir);
CorpusManifest load_manifest(const std::string& dir);

Image load_image(const CorpusManifest& m, const CorpusRecord& r);
Sample load_sample(const CorpusManifest& m, const CorpusRecord& r);

// Append generated records to a fresh manifest directory (used by the
// generation modes, which emit corpus-format manifests).
void write_generated_manifest(const CorpusManifest& base, const std::string& out_dir,
                              const std::vector<Sample>& samples);

std::vector<std::string> load_vocab_file(const std::string& path);

}  // namespace ctig::corpus
