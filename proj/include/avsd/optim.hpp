#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "avsd/fusiondec.hpp"
#include "avsd/joint.hpp"
#include "avsd/params.hpp"
#include "json.hpp"

namespace avsd::opt {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

template <typename T>
class AdamW {
 public:
  AdamW(ParamStore<T>& params, AdamWConfig cfg);

  // Decoupled decay p -= lr*wd*p, then the bias-corrected Adam delta.
  void step();
  std::size_t steps() const { return steps_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

 private:
  ParamStore<T>& params_;
  AdamWConfig cfg_;
  std::size_t steps_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

// Rescales all gradients so their global L2 norm is at most `max_norm`.
// Returns the norm before clipping.
template <typename T>
double clip_grad_norm(ParamStore<T>& params, double max_norm);

struct TrainConfig {
  std::size_t batch_size = 4;
  std::size_t epochs = 4;
  double lr = 1e-3;
  double weight_decay = 0.01;
  double clip_norm = 1.0;  // 0 disables clipping
  std::uint64_t seed = 1;
  std::size_t checkpoint_every = 0;  // steps; 0 writes only the final checkpoint

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainResult {
  std::vector<double> losses;  // one per optimizer step
  std::size_t steps = 0;
};

// Writes loss.csv and model.ckpt (plus step checkpoints) when out_dir is set.
using StepHook = std::function<void(std::size_t step, double loss)>;
TrainResult train(dec::FusionDecoder<float>& model, const std::vector<dec::Example>& data, const TrainConfig& cfg,
                  const std::string& out_dir = "", const StepHook& hook = {});
TrainResult train(dec::VideoDialogModel<float>& model, const std::vector<dec::JointExample>& data,
                  const TrainConfig& cfg, const std::string& out_dir = "", const StepHook& hook = {});

// Shared loop: shuffled mini-batches of example indices, clipping, AdamW.
// `snapshot` builds the checkpoint written for a given metadata object.
using BatchLoss = std::function<nc::Tensor<float>(const std::vector<std::size_t>& indices)>;
using Snapshot = std::function<Checkpoint(const nlohmann::json& meta)>;
TrainResult train_loop(ParamStore<float>& params, std::size_t count, const BatchLoss& batch_loss,
                       const Snapshot& snapshot, const TrainConfig& cfg, const std::string& out_dir = "",
                       const StepHook& hook = {});

// Fresh decoder initialised from a seed-derived stream.
dec::FusionDecoder<float> init_decoder(const dec::DecoderConfig& cfg, std::uint64_t seed);

struct TrainedModel {
  std::uint64_t seed = 0;
  dec::FusionDecoder<float> model;
  TrainResult result;
};

// `count` models differing only in seed (base, base+1, ...). Each one goes to
// out_dir/seed<k>/ when out_dir is set.
std::vector<TrainedModel> seed_variants(const dec::DecoderConfig& model_cfg, const std::vector<dec::Example>& data,
                                        const TrainConfig& base, std::size_t count, const std::string& out_dir = "");

extern template class AdamW<float>;
extern template class AdamW<double>;

}  // namespace avsd::opt
