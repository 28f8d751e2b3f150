#include "editlab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "editlab/rng.hpp"
#include "editlab/tape.hpp"

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

namespace editlab {

void NamedTensors::add(const std::string& name, Tensor t) {
  if (name.empty() || name.find_first_of(" \t\n") != std::string::npos) {
    throw std::invalid_argument("tensor name '" + name + "' must be non-empty without whitespace");
  }
  if (index_.count(name)) throw std::invalid_argument("duplicate tensor name '" + name + "'");
  if (!t.defined()) throw std::invalid_argument("tensor '" + name + "' is undefined");
  index_[name] = items_.size();
  items_.emplace_back(name, std::move(t));
}

void NamedTensors::set(const std::string& name, Tensor t) {
  const auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("unknown tensor name '" + name + "'");
  items_[it->second].second = std::move(t);
}

const Tensor& NamedTensors::get(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("unknown tensor name '" + name + "'");
  return items_[it->second].second;
}

bool NamedTensors::has(const std::string& name) const { return index_.count(name) > 0; }

NamedTensors NamedTensors::watch_all(Tape& tape) const {
  NamedTensors watched;
  for (const auto& [name, t] : items_) watched.add(name, tape.watch(t));
  return watched;
}

bool NamedTensors::all_finite() const {
  for (const auto& [name, t] : items_) {
    if (!t.all_finite()) return false;
  }
  return true;
}

void save_tensors(const std::string& path, const NamedTensors& tensors) {
  std::ostringstream header;
  header << "EDITLAB-TENSORS 1\n";
  header << "count " << tensors.size() << "\n";
  int64_t offset = 0;
  for (const auto& [name, t] : tensors.items()) {
    header << "tensor " << name << " f64";
    header << " rank " << t.rank();
    for (int d = 0; d < t.rank(); ++d) header << ' ' << t.dim(d);
    header << " offset " << offset << "\n";
    offset += t.numel() * static_cast<int64_t>(sizeof(double));
  }
  header << "data\n";

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  const std::string h = header.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& [name, t] : tensors.items()) {
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

NamedTensors load_tensors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");

  std::string line;
  if (!std::getline(in, line) || line != "EDITLAB-TENSORS 1") {
    throw std::runtime_error("'" + path + "' is not an EDITLAB-TENSORS file");
  }
  size_t count = 0;
  {
    if (!std::getline(in, line)) throw std::runtime_error("'" + path + "': truncated header");
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag >> count) || tag != "count") throw std::runtime_error("'" + path + "': bad count line");
  }
  struct Entry {
    std::string name;
    Shape shape;
    int64_t offset;
  };
  std::vector<Entry> entries;
  entries.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw std::runtime_error("'" + path + "': truncated header");
    std::istringstream ls(line);
    std::string tag, name, dtype, rank_tag, offset_tag;
    int rank = 0;
    if (!(ls >> tag >> name >> dtype >> rank_tag >> rank) || tag != "tensor" || dtype != "f64" || rank_tag != "rank") {
      throw std::runtime_error("'" + path + "': bad tensor line: " + line);
    }
    Entry e;
    e.name = name;
    e.shape.resize(static_cast<size_t>(rank));
    for (int d = 0; d < rank; ++d) {
      if (!(ls >> e.shape[static_cast<size_t>(d)])) throw std::runtime_error("'" + path + "': bad shape in: " + line);
    }
    if (!(ls >> offset_tag >> e.offset) || offset_tag != "offset") {
      throw std::runtime_error("'" + path + "': bad offset in: " + line);
    }
    entries.push_back(std::move(e));
  }
  if (!std::getline(in, line) || line != "data") throw std::runtime_error("'" + path + "': missing data marker");

  const std::streampos data_start = in.tellg();
  NamedTensors out;
  for (const Entry& e : entries) {
    const int64_t n = shape_numel(e.shape);
    std::vector<double> values(static_cast<size_t>(n));
    in.seekg(data_start + static_cast<std::streamoff>(e.offset));
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw std::runtime_error("'" + path + "': truncated data for tensor '" + e.name + "'");
    out.add(e.name, Tensor(e.shape, std::move(values)));
  }
  return out;
}

std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for hashing");
  char buf[65536];
  uint64_t h = 0xcbf29ce484222325ull;
  while (in) {
    in.read(buf, sizeof(buf));
    h = fnv1a64(buf, static_cast<size_t>(in.gcount()), h);
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return std::string(hex);
}

}  // namespace editlab
