#pragma once

#include <functional>

#include "checkpoint.hpp"
#include "synth_data.hpp"

namespace fcl {

enum class Schedule { stepwise, one_step };

struct TrainConfig {
  Schedule schedule = Schedule::one_step;
  double scale = 1.0;            // multiplies every stage length
  long stage1_iters = 2000;      // pre-train, no fabricator branch
  long stage2_iters = 1000;      // fabricator only, rest frozen
  long stage3_iters = 1000;      // joint fine-tune, cosine lr
  long one_step_iters = 3000;
  int batch_size = 32;
  uint64_t seed = 0;
  double base_lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  Lambdas lambdas;
  double cap = 3.0;
  std::optional<int> topk;
  IdentityVariant identity = IdentityVariant::learned;
  bool use_noise = true;
  bool use_verb = true;
  bool verb_fabricator = false;
  bool use_fabricator = true;    // false = the no-fabricator baseline
  bool reweight = false;
  ModelDims dims;                // n_v/n_o/c filled from the world
  long log_every = 100;
};

struct StepLog {
  long step = 0;
  int stage = 0;
  double lr = 0.0;
  LossBreakdown loss;
};

struct TrainResult {
  FclParams model;
  std::vector<StepLog> history;       // every step
  std::vector<std::string> warnings;
};

using StepCallback = std::function<void(const StepLog&)>;

// w_c = clip((median_freq / freq_c)^0.5, 0.1, 10), freq floored at 1
Vec reweight_from_counts(const std::vector<long>& counts);

TrainResult train(const TrainConfig& config, const DatasetManifest& data, const WorldSpec& world,
                  const StepCallback& on_step = nullptr);

void write_loss_csv(const std::vector<StepLog>& history, long log_every, const std::string& path);

}  // namespace fcl
