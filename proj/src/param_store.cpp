#include "dialgraph/param_store.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace dialgraph {

using nlohmann::json;

ParameterStore::ParameterStore(std::uint64_t seed) : seed_(seed), rng_state_(seed + 0x9e3779b97f4a7c15ULL) {}

// splitmix64; portable and stable across standard libraries.
double ParameterStore::next_uniform() {
  rng_state_ += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = rng_state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z = z ^ (z >> 31);
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

Tensor ParameterStore::create(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                              Init init) {
  if (params_.count(name))
    throw ContractError("ParameterStore: duplicate parameter '" + name + "'");
  Mat m(rows, cols);
  switch (init) {
    case Init::Zeros:
      m.setZero();
      break;
    case Init::Ones:
      m.setOnes();
      break;
    case Init::XavierUniform: {
      double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
      for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
          m(i, j) = (2.0 * next_uniform() - 1.0) * bound;
      break;
    }
  }
  Tensor t = Tensor::leaf(std::move(m), true);
  params_.emplace(name, t);
  return t;
}

bool ParameterStore::contains(const std::string& name) const { return params_.count(name) > 0; }

Tensor ParameterStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("ParameterStore: unknown parameter '" + name + "'");
  return it->second;
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [k, v] : params_) out.push_back(k);
  return out;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [k, v] : params_) n += static_cast<std::size_t>(v.size());
  return n;
}

void ParameterStore::zero_grads() {
  for (auto& [k, v] : params_) v.zero_grad();
}

void ParameterStore::for_each(const std::function<void(const std::string&, Tensor&)>& fn) {
  for (auto& [k, v] : params_) fn(k, v);
}

void ParameterStore::for_each(
    const std::function<void(const std::string&, const Tensor&)>& fn) const {
  for (const auto& [k, v] : params_) fn(k, v);
}

namespace {

// Serializes doubles as little-endian bytes. On little-endian hosts this is
// a straight memcpy of the row-major buffer.
void write_le(std::ostream& os, const double* data, std::size_t n) {
  static_assert(sizeof(double) == 8);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &data[i], 8);
    unsigned char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>((bits >> (8 * k)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
  }
}

void read_le(std::istream& is, double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
    std::memcpy(&data[i], &bits, 8);
  }
}

}  // namespace

void ParameterStore::save(const std::string& path, const std::string& extra_json) const {
  json manifest;
  manifest["extra"] = json::parse(extra_json);
  json plist = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : params_) {
    json p;
    p["name"] = name;
    p["shape"] = {t.rows(), t.cols()};
    p["byte_offset"] = offset;
    plist.push_back(p);
    offset += static_cast<std::uint64_t>(t.size()) * 8;
  }
  manifest["params"] = plist;

  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot open checkpoint for writing: " + path);
  os << manifest.dump() << "\n";
  for (const auto& [name, t] : params_)
    write_le(os, t.value().data(), static_cast<std::size_t>(t.size()));
  if (!os) throw CheckpointError("write failed: " + path);
}

std::string ParameterStore::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(is, line)) throw CheckpointError("empty checkpoint: " + path);
  json manifest = json::parse(line, nullptr, false);
  if (manifest.is_discarded() || !manifest.contains("params"))
    throw CheckpointError("malformed checkpoint manifest: " + path);

  for (const auto& p : manifest["params"]) {
    std::string name = p.at("name").get<std::string>();
    auto it = params_.find(name);
    if (it == params_.end())
      throw CheckpointError("checkpoint parameter '" + name + "' is not registered");
    Eigen::Index r = p.at("shape")[0].get<Eigen::Index>();
    Eigen::Index c = p.at("shape")[1].get<Eigen::Index>();
    Tensor& t = it->second;
    if (r != t.rows() || c != t.cols())
      throw CheckpointError("checkpoint shape mismatch for '" + name + "': file " +
                            std::to_string(r) + "x" + std::to_string(c) + ", registered " +
                            shape_str(t.value()));
    read_le(is, t.value_mut().data(), static_cast<std::size_t>(t.size()));
    if (!is) throw CheckpointError("truncated checkpoint blob: " + path);
  }
  if (manifest["params"].size() != params_.size())
    throw CheckpointError("checkpoint has " + std::to_string(manifest["params"].size()) +
                          " parameters, expected " + std::to_string(params_.size()));
  return manifest.contains("extra") ? manifest["extra"].dump() : std::string("{}");
}

std::string ParameterStore::peek_extra(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(is, line)) throw CheckpointError("empty checkpoint: " + path);
  json manifest = json::parse(line, nullptr, false);
  if (manifest.is_discarded()) throw CheckpointError("malformed checkpoint manifest: " + path);
  return manifest.contains("extra") ? manifest["extra"].dump() : std::string("{}");
}

}  // namespace dialgraph
