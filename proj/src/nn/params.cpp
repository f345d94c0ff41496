// SPDX-License-Identifier: Apache-2.0
#include "svodrive/nn/params.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "svodrive/error.hpp"

namespace svo::nn {

namespace {

constexpr char kMagic[8] = {'S', 'V', 'O', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw FormatError("checkpoint truncated");
    std::uint8_t buf[sizeof(T)];
    std::memcpy(buf, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
  }
  std::string get_string(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw FormatError("checkpoint truncated");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Parameter& ParamStore::create(const std::string& name, int rows, int cols, int fan_in) {
  if (params_.count(name)) throw StructuralError("duplicate parameter name: " + name);
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Parameter p;
  p.value.resize(rows, cols);
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = dist(rng_);
  p.grad = Matrix::Zero(rows, cols);
  return params_.emplace(name, std::move(p)).first->second;
}

Parameter& ParamStore::create_zero(const std::string& name, int rows, int cols) {
  if (params_.count(name)) throw StructuralError("duplicate parameter name: " + name);
  Parameter p{Matrix::Zero(rows, cols), Matrix::Zero(rows, cols)};
  return params_.emplace(name, std::move(p)).first->second;
}

Parameter& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw StructuralError("unknown parameter: " + name);
  return it->second;
}

const Parameter& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw StructuralError("unknown parameter: " + name);
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  for (const auto& [n, _] : params_) out.push_back(n);
  return out;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [_, p] : params_) {
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols())
      p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
    else
      p.grad.setZero();
  }
}

bool ParamStore::all_finite() const {
  for (const auto& [_, p] : params_)
    if (!p.value.allFinite()) return false;
  return true;
}

void ParamStore::copy_values_from(const ParamStore& other) {
  for (auto& [name, p] : params_) {
    const Parameter& o = other.at(name);
    if (o.value.rows() != p.value.rows() || o.value.cols() != p.value.cols())
      throw StructuralError("shape mismatch copying parameter " + name);
    p.value = o.value;
  }
}

void ParamStore::soft_update_from(const ParamStore& other, double tau) {
  for (auto& [name, p] : params_) p.value = (1.0 - tau) * p.value + tau * other.at(name).value;
}

std::vector<std::uint8_t> ParamStore::serialize() const {
  std::vector<std::uint8_t> out(kMagic, kMagic + sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, seed_);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params_.size()));
  for (const auto& [name, p] : params_) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put<std::uint32_t>(out, 2);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(p.value.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(p.value.cols()));
    for (Eigen::Index i = 0; i < p.value.size(); ++i) put<double>(out, p.value.data()[i]);
  }
  return out;
}

ParamStore ParamStore::deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw FormatError("not a parameter checkpoint (bad magic)");
  std::vector<std::uint8_t> rest(bytes.begin() + sizeof(kMagic), bytes.end());
  Reader r(rest);
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  ParamStore store(r.get<std::uint64_t>());
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.get_string(r.get<std::uint32_t>());
    const auto ndim = r.get<std::uint32_t>();
    if (ndim != 2) throw FormatError("parameter " + name + " is not rank 2");
    const auto rows = static_cast<int>(r.get<std::uint64_t>());
    const auto cols = static_cast<int>(r.get<std::uint64_t>());
    Parameter& p = store.create_zero(name, rows, cols);
    for (Eigen::Index k = 0; k < p.value.size(); ++k) p.value.data()[k] = r.get<double>();
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint records");
  return store;
}

void ParamStore::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

ParamStore ParamStore::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

void ParamStore::load_values(const ParamStore& from) {
  if (from.params_.size() != params_.size())
    throw StructuralError("checkpoint has " + std::to_string(from.params_.size()) + " parameters, expected " +
                          std::to_string(params_.size()));
  copy_values_from(from);
}

void backward(Tape& tape, Var loss, ParamStore& params) {
  params.zero_grad();
  tape.backward(loss);
}

void Adam::update(ParamStore& params) {
  ++step_;
  double clip_scale = 1.0;
  if (cfg_.grad_clip > 0.0) {
    double sq = 0.0;
    for (const auto& [_, p] : params.entries()) sq += p.grad.squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > cfg_.grad_clip) clip_scale = cfg_.grad_clip / norm;
  }
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (auto& [name, p] : params.entries()) {
    auto& st = state_[name];
    if (st.m.size() == 0) {
      st.m = Matrix::Zero(p.value.rows(), p.value.cols());
      st.v = Matrix::Zero(p.value.rows(), p.value.cols());
    }
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) continue;
    const Matrix g = p.grad * clip_scale;
    st.m = cfg_.beta1 * st.m + (1.0 - cfg_.beta1) * g;
    st.v = cfg_.beta2 * st.v + (1.0 - cfg_.beta2) * g.cwiseAbs2();
    p.value.array() -= cfg_.learning_rate * (st.m.array() / bc1) / ((st.v.array() / bc2).sqrt() + cfg_.epsilon);
  }
}

}  // namespace svo::nn
