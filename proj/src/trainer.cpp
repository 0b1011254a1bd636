#include "trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace fcl {

Vec reweight_from_counts(const std::vector<long>& counts) {
  require(!counts.empty(), "reweight: empty counts");
  std::vector<double> freqs(counts.size());
  for (size_t k = 0; k < counts.size(); ++k) freqs[k] = std::max(counts[k], 1L);
  std::vector<double> sorted = freqs;
  std::sort(sorted.begin(), sorted.end());
  double median = sorted[sorted.size() / 2];
  Vec w(counts.size());
  for (size_t k = 0; k < counts.size(); ++k)
    w[k] = std::clamp(std::sqrt(median / freqs[k]), 0.1, 10.0);
  return w;
}

namespace {

struct BatchCursor {
  std::vector<size_t> order;
  size_t pos = 0;
  Rng rng;

  BatchCursor(size_t n, Rng r) : order(n), rng(std::move(r)) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
  }

  std::vector<size_t> next(size_t batch_size) {
    std::vector<size_t> out;
    out.reserve(batch_size);
    while (out.size() < batch_size) {
      if (pos == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        pos = 0;
      }
      out.push_back(order[pos++]);
    }
    return out;
  }
};

void check_finite(const LossBreakdown& lb, long step) {
  auto bad = [&](double v, const char* name) {
    if (!std::isfinite(v))
      throw std::runtime_error("non-finite loss term " + std::string(name) + " at step " +
                               std::to_string(step));
  };
  bad(lb.l_hoi, "L_hoi");
  bad(lb.l_cl, "L_CL");
  bad(lb.l_reg, "L_reg");
  bad(lb.l_hoi_sp, "L_hoi_sp");
  bad(lb.total, "total");
}

}  // namespace

TrainResult train(const TrainConfig& config, const DatasetManifest& data, const WorldSpec& world,
                  const StepCallback& on_step) {
  require(config.batch_size > 0, "train: batch size must be positive");
  require(config.scale > 0.0, "train: scale must be positive");
  require(config.lambdas.l1 >= 0 && config.lambdas.l2 >= 0 && config.lambdas.l3 >= 0,
          "train: lambdas must be nonnegative");
  const auto& maps = world.maps;

  std::vector<const PairRecord*> train_records;
  for (const auto& r : data.records)
    if (r.train) train_records.push_back(&r);
  require(!train_records.empty(), "train: no training records");

  // split contract: no real training sample may activate an unseen class
  if (data.zero_shot) {
    for (const auto* r : train_records)
      for (int cls : data.zero_shot->unseen_hoi_ids)
        require(!r->feat.y[cls], "train: training record activates unseen class");
  }

  TrainResult res;
  if (data.zero_shot && config.schedule == Schedule::stepwise)
    res.warnings.push_back("step-wise schedule under a zero-shot split; one-step is preferred");

  ModelDims dims = config.dims;
  dims.n_v = maps.n_v;
  dims.n_o = maps.n_o;
  dims.c = maps.c;
  dims.d_v = data.d_v;
  dims.d_o = data.d_o;
  dims.d_h = data.d_h;

  Rng backbone_rng = make_rng(config.seed, 11);
  Rng fab_rng = make_rng(config.seed, 12);
  Rng shuffle_rng = make_rng(config.seed, 13);
  Rng comp_rng = make_rng(config.seed, 14);

  res.model = make_model(dims, config.identity, config.use_noise, config.use_verb,
                         config.verb_fabricator, backbone_rng, fab_rng,
                         config.identity == IdentityVariant::word_vector
                             ? &world.object_word_vecs
                             : nullptr);
  res.model.lambdas = config.lambdas;
  if (config.reweight) res.model.class_weights = reweight_from_counts(data.train_class_counts);

  std::optional<SimilarityTable> sim;
  if (config.topk) sim = build_similarity(world.object_word_vecs);

  BatchCursor cursor(train_records.size(), std::move(shuffle_rng));

  const bool fab_active = config.use_fabricator && config.lambdas.l2 > 0.0;
  auto stage_iters = [&](long n) { return static_cast<long>(std::llround(n * config.scale)); };

  struct Stage {
    int id;
    long iters;
    bool composites;
    bool cosine;
    std::vector<ParamRef> params;
  };
  std::vector<Stage> stages;
  if (config.schedule == Schedule::stepwise) {
    stages.push_back({1, stage_iters(config.stage1_iters), false, false,
                      res.model.backbone_params()});
    if (fab_active) {
      stages.push_back({2, stage_iters(config.stage2_iters), true, false,
                        res.model.fabricator_params()});
      stages.push_back({3, stage_iters(config.stage3_iters), true, true,
                        res.model.all_params()});
    } else {
      stages.push_back({3, stage_iters(config.stage3_iters), false, true,
                        res.model.backbone_params()});
    }
  } else {
    stages.push_back({1, stage_iters(config.one_step_iters), fab_active, true,
                      fab_active ? res.model.all_params() : res.model.backbone_params()});
  }

  long global_step = 0;
  for (auto& stage : stages) {
    SgdState sgd;
    sgd.lr = config.base_lr;
    sgd.momentum = config.momentum;
    sgd.weight_decay = config.weight_decay;
    sgd.init(stage.params);
    for (long t = 0; t < stage.iters; ++t) {
      auto idx = cursor.next(static_cast<size_t>(config.batch_size));
      std::vector<PairFeatures> batch;
      batch.reserve(idx.size());
      bool any_labeled = false;
      for (size_t i : idx) {
        batch.push_back(train_records[i]->feat);
        any_labeled = any_labeled || batch.back().labeled();
      }

      std::vector<CompositeSample> composites;
      if (stage.composites && any_labeled) {
        double cap = config.cap;
        if (config.verb_fabricator) cap *= 0.5;  // object and verb pools share the budget
        composites = compose_minibatch(batch, res.model.fabricator, maps, cap,
                                       config.topk, sim ? &*sim : nullptr, comp_rng);
        if (config.verb_fabricator) {
          auto vc = compose_verb_minibatch(batch, *res.model.verb_fabricator, maps, cap, comp_rng);
          composites.insert(composites.end(), std::make_move_iterator(vc.begin()),
                            std::make_move_iterator(vc.end()));
        }
      }

      res.model.zero_grad();
      LossBreakdown lb = forward_train(res.model, batch, composites, maps, true);
      check_finite(lb, global_step);
      sgd.lr = stage.cosine ? cosine_lr(config.base_lr, t, stage.iters) : config.base_lr;
      sgd.step(stage.params);

      StepLog log{global_step, stage.id, sgd.lr, lb};
      res.history.push_back(log);
      if (on_step) on_step(log);
      ++global_step;
    }
  }
  return res;
}

void write_loss_csv(const std::vector<StepLog>& history, long log_every, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write loss csv: " + path);
  out << "step,stage,lr,total,l_hoi,l_cl,l_reg,l_hoi_sp,n_composites\n";
  char buf[256];
  for (const auto& h : history) {
    if (h.step % log_every != 0 && h.step + 1 != static_cast<long>(history.size())) continue;
    std::snprintf(buf, sizeof buf, "%ld,%d,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%ld\n", h.step,
                  h.stage, h.lr, h.loss.total, h.loss.l_hoi, h.loss.l_cl, h.loss.l_reg,
                  h.loss.l_hoi_sp, h.loss.n_composites);
    out << buf;
  }
  if (!out) throw io_error("short write to loss csv: " + path);
}

}  // namespace fcl
