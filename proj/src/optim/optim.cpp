#include "avsd/optim.hpp"

#include <cmath>
#include <sstream>

#include "avsd/binio.hpp"
#include "avsd/error.hpp"

namespace avsd::opt {

namespace {
constexpr std::uint64_t kShuffleTag = 0x73687566666c65;  // "shuffle"
constexpr std::uint64_t kInitTag = 0x696e6974;           // "init"
}  // namespace

template <typename T>
AdamW<T>::AdamW(ParamStore<T>& params, AdamWConfig cfg) : params_(params), cfg_(cfg) {
  for (const auto& [name, t] : params_.entries()) {
    m_.emplace_back(t.size(), 0.0);
    v_.emplace_back(t.size(), 0.0);
  }
}

template <typename T>
void AdamW<T>::step() {
  auto& entries = params_.entries();
  if (entries.size() != m_.size()) throw DimensionError("adamw: parameter set changed since construction");
  ++steps_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t k = 0; k < entries.size(); ++k) {
    auto& t = entries[k].second;
    if (t.size() != m_[k].size()) {
      throw DimensionError("adamw: " + entries[k].first + " has " + std::to_string(t.size()) + " values, moments have " +
                           std::to_string(m_[k].size()));
    }
    auto p = t.mutable_data();
    const bool has_grad = t.has_grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = has_grad ? static_cast<double>(t.grad()[i]) : 0.0;
      double x = static_cast<double>(p[i]);
      x -= cfg_.lr * cfg_.weight_decay * x;
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      x -= cfg_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
      p[i] = static_cast<T>(x);
    }
  }
}

template <typename T>
double clip_grad_norm(ParamStore<T>& params, double max_norm) {
  double sq = 0.0;
  for (auto& [name, t] : params.entries()) {
    if (!t.has_grad()) continue;
    for (auto g : t.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& [name, t] : params.entries()) {
      if (!t.has_grad()) continue;
      for (auto& g : t.mutable_grad()) g = static_cast<T>(static_cast<double>(g) * s);
    }
  }
  return norm;
}

void TrainConfig::validate() const {
  if (batch_size == 0 || epochs == 0) throw ConfigError("train: batch_size and epochs must be positive");
  if (!(lr >= 0.0) || !(weight_decay >= 0.0) || !(clip_norm >= 0.0)) {
    throw ConfigError("train: lr, weight_decay and clip_norm must be non-negative");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"batch_size", batch_size}, {"epochs", epochs},     {"lr", lr},
          {"weight_decay", weight_decay}, {"clip_norm", clip_norm}, {"seed", seed},
          {"checkpoint_every", checkpoint_every}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.lr = j.at("lr").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.clip_norm = j.at("clip_norm").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.checkpoint_every = j.at("checkpoint_every").get<std::size_t>();
  c.validate();
  return c;
}

TrainResult train_loop(ParamStore<float>& params, std::size_t count, const BatchLoss& batch_loss,
                       const Snapshot& snapshot, const TrainConfig& cfg, const std::string& out_dir,
                       const StepHook& hook) {
  cfg.validate();
  if (count == 0) throw InputError("train: empty dataset");
  AdamW<float> optimizer(params, {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  auto shuffle_rng = Rng::derive(cfg.seed, kShuffleTag);
  TrainResult result;
  std::ostringstream log;
  log << "step,loss\n";
  log.precision(9);

  auto save = [&](const std::string& name) {
    if (out_dir.empty()) return;
    nlohmann::json meta{{"seed", cfg.seed}, {"step", result.steps}, {"train", cfg.to_json()}};
    snapshot(meta).save(out_dir + "/" + name);
  };

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = shuffle_rng.permutation(count);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(std::min(start + cfg.batch_size, order.size())));
      params.zero_grad();
      auto loss = batch_loss(batch);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw DivergenceError("train: non-finite loss at step " + std::to_string(result.steps + 1),
                              static_cast<long>(result.steps + 1));
      }
      loss.backward();
      clip_grad_norm(params, cfg.clip_norm);
      optimizer.step();
      ++result.steps;
      result.losses.push_back(value);
      log << result.steps << ',' << value << '\n';
      if (hook) hook(result.steps, value);
      if (cfg.checkpoint_every && result.steps % cfg.checkpoint_every == 0) {
        save("step" + std::to_string(result.steps) + ".ckpt");
      }
    }
  }
  if (!out_dir.empty()) {
    binio::write_file(out_dir + "/loss.csv", log.str());
    save("model.ckpt");
  }
  return result;
}

TrainResult train(dec::FusionDecoder<float>& model, const std::vector<dec::Example>& data, const TrainConfig& cfg,
                  const std::string& out_dir, const StepHook& hook) {
  auto loss = [&](const std::vector<std::size_t>& idx) {
    std::vector<dec::Example> batch;
    for (auto i : idx) batch.push_back(data[i]);
    return dec::batch_nll(model, batch);
  };
  auto snapshot = [&](const nlohmann::json& meta) { return save_decoder(model, meta); };
  return train_loop(model.params(), data.size(), loss, snapshot, cfg, out_dir, hook);
}

TrainResult train(dec::VideoDialogModel<float>& model, const std::vector<dec::JointExample>& data,
                  const TrainConfig& cfg, const std::string& out_dir, const StepHook& hook) {
  auto loss = [&](const std::vector<std::size_t>& idx) {
    std::vector<dec::JointExample> batch;
    for (auto i : idx) batch.push_back(data[i]);
    return dec::joint_batch_nll(model, batch);
  };
  auto snapshot = [&](const nlohmann::json& meta) { return save_joint(model, meta); };
  return train_loop(model.params(), data.size(), loss, snapshot, cfg, out_dir, hook);
}

dec::FusionDecoder<float> init_decoder(const dec::DecoderConfig& cfg, std::uint64_t seed) {
  auto rng = Rng::derive(seed, kInitTag);
  return dec::FusionDecoder<float>::init(cfg, rng);
}

std::vector<TrainedModel> seed_variants(const dec::DecoderConfig& model_cfg, const std::vector<dec::Example>& data,
                                        const TrainConfig& base, std::size_t count, const std::string& out_dir) {
  if (count == 0) throw ConfigError("seed_variants: count must be positive");
  std::vector<TrainedModel> out;
  for (std::size_t k = 0; k < count; ++k) {
    auto cfg = base;
    cfg.seed = base.seed + k;
    auto model = init_decoder(model_cfg, cfg.seed);
    auto dir = out_dir.empty() ? std::string() : out_dir + "/seed" + std::to_string(cfg.seed);
    auto result = train(model, data, cfg, dir);
    out.push_back({cfg.seed, std::move(model), std::move(result)});
  }
  return out;
}

template class AdamW<float>;
template class AdamW<double>;
template double clip_grad_norm(ParamStore<float>&, double);
template double clip_grad_norm(ParamStore<double>&, double);

}  // namespace avsd::opt
