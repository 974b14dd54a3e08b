#include "common/serial.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ctig {

static const char kMagic[8] = {'C', 'T', 'I', 'G', 'B', 'I', 'N', '1'};

const Tensor& Checkpoint::get(const std::string& name) const {
  const Tensor* t = find(name);
  if (!t) throw std::runtime_error("checkpoint missing tensor: " + name);
  return *t;
}

void Checkpoint::save(const std::string& path) const {
  json header;
  header["meta"] = meta;
  json table = json::array();
  for (const auto& [name, t] : tensors) {
    json e;
    e["name"] = name;
    e["shape"] = t.shape;
    table.push_back(e);
  }
  header["tensors"] = table;
  std::string hs = header.dump();

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.write(kMagic, 8);
  uint64_t len = hs.size();
  f.write(reinterpret_cast<const char*>(&len), 8);
  f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  std::vector<float> buf;
  for (const auto& [name, t] : tensors) {
    buf.resize(static_cast<size_t>(t.numel()));
    for (int64_t i = 0; i < t.numel(); ++i) buf[static_cast<size_t>(i)] = static_cast<float>(t[i]);
    f.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!f) throw std::runtime_error("short write: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  char magic[8];
  f.read(magic, 8);
  if (f.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error(path + ": not a ctig checkpoint");
  uint64_t len = 0;
  f.read(reinterpret_cast<char*>(&len), 8);
  std::string hs(len, '\0');
  f.read(hs.data(), static_cast<std::streamsize>(len));
  if (!f) throw std::runtime_error(path + ": truncated header");
  json header = json::parse(hs);

  Checkpoint ck;
  ck.meta = header.value("meta", json::object());
  std::vector<float> buf;
  for (const auto& e : header["tensors"]) {
    std::vector<int64_t> shape = e["shape"].get<std::vector<int64_t>>();
    Tensor t(shape);
    buf.resize(static_cast<size_t>(t.numel()));
    f.read(reinterpret_cast<char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (f.gcount() != static_cast<std::streamsize>(buf.size() * sizeof(float)))
      throw std::runtime_error(path + ": truncated tensor data");
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<real>(buf[static_cast<size_t>(i)]);
    ck.tensors.emplace_back(e["name"].get<std::string>(), std::move(t));
  }
  return ck;
}

json load_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  json j;
  f >> j;
  return j;
}

void save_json_file(const std::string& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << j.dump(2) << "\n";
}

}  // namespace ctig
