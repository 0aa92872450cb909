#include "avsd/params.hpp"

#include "avsd/binio.hpp"
#include "avsd/error.hpp"

namespace avsd {

template <typename T>
const nc::Tensor<T>& ParamStore<T>::add(std::string name, nc::Tensor<T> t) {
  if (index_.count(name)) throw ConfigError("duplicate parameter name " + name);
  index_[name] = entries_.size();
  entries_.emplace_back(std::move(name), nc::Tensor<T>(t.shape(), {t.data().begin(), t.data().end()}, true));
  return entries_.back().second;
}

template <typename T>
const nc::Tensor<T>& ParamStore<T>::alias(std::string name, const nc::Tensor<T>& t) {
  if (index_.count(name)) throw ConfigError("duplicate parameter name " + name);
  if (!t.requires_grad()) throw ConfigError("alias: " + name + " is not a trainable tensor");
  index_[name] = entries_.size();
  entries_.emplace_back(std::move(name), t);
  return entries_.back().second;
}

template <typename T>
const nc::Tensor<T>& ParamStore<T>::add_normal(const std::string& name, nc::Shape shape,
                                               double stddev, Rng& rng) {
  std::vector<T> v(nc::numel(shape));
  for (auto& x : v) x = static_cast<T>(rng.normal() * stddev);
  return add(name, nc::Tensor<T>(std::move(shape), std::move(v)));
}

template <typename T>
const nc::Tensor<T>& ParamStore<T>::add_constant(const std::string& name, nc::Shape shape, T value) {
  return add(name, nc::Tensor<T>::full(std::move(shape), value));
}

template <typename T>
const nc::Tensor<T>& ParamStore<T>::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter " + name);
  return entries_[it->second].second;
}

template <typename T>
nc::Tensor<T>& ParamStore<T>::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter " + name);
  return entries_[it->second].second;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& [name, t] : entries_) t.zero_grad();
}

template <typename T>
std::size_t ParamStore<T>::value_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.size();
  return n;
}

template <typename T>
std::vector<NamedArray> export_params(const ParamStore<T>& params) {
  std::vector<NamedArray> out;
  for (const auto& [name, t] : params.entries()) {
    NamedArray a{name, t.shape(), {}};
    a.values.reserve(t.size());
    for (auto v : t.data()) a.values.push_back(static_cast<float>(v));
    out.push_back(std::move(a));
  }
  return out;
}

template <typename T>
void import_params(ParamStore<T>& params, const std::vector<NamedArray>& arrays) {
  if (arrays.size() != params.entries().size()) {
    throw FormatError("checkpoint holds " + std::to_string(arrays.size()) + " tensors, model expects " +
                      std::to_string(params.entries().size()));
  }
  for (const auto& a : arrays) {
    auto& t = params.get(a.name);
    if (t.shape() != a.shape) {
      throw FormatError("checkpoint tensor " + a.name + " has shape " + nc::shape_str(a.shape) +
                        ", model expects " + nc::shape_str(t.shape()));
    }
    auto dst = t.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(a.values[i]);
  }
}

namespace {
constexpr std::string_view kMagic = "AVSDCKPT";
}

std::string Checkpoint::serialize() const {
  binio::Writer w;
  w.bytes(kMagic);
  w.u32(kVersion);
  w.str(config.dump());
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (auto e : t.shape) w.u32(static_cast<std::uint32_t>(e));
    for (auto v : t.values) w.f32(v);
  }
  return w.buffer();
}

Checkpoint Checkpoint::parse(std::string_view bytes, const std::string& source) {
  binio::Reader r(bytes, source);
  if (r.bytes(kMagic.size()) != kMagic) r.fail("bad magic");
  if (const auto v = r.u32(); v != kVersion) r.fail("unsupported version " + std::to_string(v));
  Checkpoint ck;
  const std::string cfg = r.str();
  ck.config = nlohmann::json::parse(cfg, nullptr, false);
  if (ck.config.is_discarded()) r.fail("malformed config JSON");
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = r.str();
    const auto rank = r.u32();
    if (rank > 8) r.fail("implausible rank " + std::to_string(rank));
    for (std::uint32_t k = 0; k < rank; ++k) a.shape.push_back(r.u32());
    const auto n = nc::numel(a.shape);
    a.values.resize(n);
    for (std::size_t k = 0; k < n; ++k) a.values[k] = r.f32();
    ck.tensors.push_back(std::move(a));
  }
  if (!r.at_end()) r.fail("trailing bytes");
  return ck;
}

void Checkpoint::save(const std::string& path) const { binio::write_file(path, serialize()); }

Checkpoint Checkpoint::load(const std::string& path) { return parse(binio::read_file(path), path); }

const NamedArray& Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  throw FormatError("checkpoint has no tensor named " + name);
}

template class ParamStore<float>;
template class ParamStore<double>;
template std::vector<NamedArray> export_params(const ParamStore<float>&);
template std::vector<NamedArray> export_params(const ParamStore<double>&);
template void import_params(ParamStore<float>&, const std::vector<NamedArray>&);
template void import_params(ParamStore<double>&, const std::vector<NamedArray>&);

}  // namespace avsd
