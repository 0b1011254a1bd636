#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "trainer.hpp"

using namespace fcl;

namespace {

WorldConfig tiny_world_cfg() {
  WorldConfig c;
  c.n_v = 4;
  c.n_o = 3;
  c.c = 8;
  c.d_v = 6;
  c.d_o = 6;
  c.d_h = 3;
  return c;
}

struct Fixture {
  WorldSpec world;
  DatasetManifest data;
};

Fixture tiny_fixture(uint64_t seed = 1, int images = 120) {
  Fixture f;
  f.world = generate_world(tiny_world_cfg(), seed);
  SampleConfig sc;
  sc.n_images = images;
  f.data = sample_dataset(f.world, sc, seed);
  return f;
}

TrainConfig tiny_config() {
  TrainConfig tc;
  tc.stage1_iters = 12;
  tc.stage2_iters = 6;
  tc.stage3_iters = 6;
  tc.one_step_iters = 20;
  tc.batch_size = 8;
  tc.dims.hidden = 8;
  tc.dims.d_id = 4;
  tc.dims.d_n = 3;
  tc.dims.fab_hidden = 6;
  tc.log_every = 5;
  return tc;
}

std::vector<double> flatten(FclParams& m) {
  std::vector<double> out;
  for (auto& p : m.all_params()) out.insert(out.end(), p.data, p.data + p.size);
  return out;
}

}  // namespace

TEST_CASE("reweight formula with clipping and the zero-count floor") {
  // freqs floored: {4, 1, 1000, 1}; sorted {1,1,4,1000}, median = freqs[2] = 4
  Vec w = reweight_from_counts({4, 0, 1000, 1});
  CHECK(w[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(w[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(w[2] == doctest::Approx(std::max(0.1, std::sqrt(4.0 / 1000.0))).epsilon(1e-12));
  CHECK(w[3] == doctest::Approx(2.0).epsilon(1e-12));
  // clip at 10 for extreme tails
  Vec w2 = reweight_from_counts({1, 100000, 100000});
  CHECK(w2[0] == 10.0);
}

TEST_CASE("training is deterministic under a fixed seed") {
  auto f = tiny_fixture();
  auto tc = tiny_config();
  tc.seed = 3;
  auto a = train(tc, f.data, f.world);
  auto b = train(tc, f.data, f.world);
  REQUIRE(a.history.size() == b.history.size());
  for (size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].loss.total == b.history[i].loss.total);
    CHECK(a.history[i].lr == b.history[i].lr);
  }
  CHECK(flatten(a.model) == flatten(b.model));
}

TEST_CASE("lambda2=0 matches the no-fabricator baseline bitwise") {
  auto f = tiny_fixture(2);
  auto tc = tiny_config();
  tc.seed = 7;
  tc.one_step_iters = 60;
  tc.lambdas.l2 = 0.0;
  auto zeroed = train(tc, f.data, f.world);

  auto tc2 = tiny_config();
  tc2.seed = 7;
  tc2.one_step_iters = 60;
  tc2.use_fabricator = false;
  auto baseline = train(tc2, f.data, f.world);

  REQUIRE(zeroed.history.size() == baseline.history.size());
  for (size_t i = 0; i < zeroed.history.size(); ++i) {
    CHECK(zeroed.history[i].loss.l_hoi == baseline.history[i].loss.l_hoi);
    CHECK(zeroed.history[i].loss.l_hoi_sp == baseline.history[i].loss.l_hoi_sp);
    CHECK(zeroed.history[i].loss.n_composites == 0);
  }
  // backbone trajectories identical parameter-for-parameter
  auto pa = zeroed.model.backbone_params();
  auto pb = baseline.model.backbone_params();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i)
    for (size_t j = 0; j < pa[i].size; ++j) CHECK(pa[i].data[j] == pb[i].data[j]);
}

TEST_CASE("stage 2 freezes everything but the fabricator") {
  auto f = tiny_fixture(3);
  auto tc = tiny_config();
  tc.schedule = Schedule::stepwise;
  tc.seed = 5;
  tc.stage3_iters = 0;  // stop right after stage 2

  auto tc_pre = tc;
  tc_pre.stage2_iters = 0;  // stop right after stage 1
  auto after_stage1 = train(tc_pre, f.data, f.world);
  auto after_stage2 = train(tc, f.data, f.world);

  auto pa = after_stage1.model.backbone_params();
  auto pb = after_stage2.model.backbone_params();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i)
    for (size_t j = 0; j < pa[i].size; ++j) CHECK(pa[i].data[j] == pb[i].data[j]);

  // the fabricator itself did move
  auto fa = after_stage1.model.fabricator_params();
  auto fb = after_stage2.model.fabricator_params();
  double delta = 0;
  for (size_t i = 0; i < fa.size(); ++i)
    for (size_t j = 0; j < fa[i].size; ++j) delta += std::abs(fa[i].data[j] - fb[i].data[j]);
  CHECK(delta > 0.0);
}

TEST_CASE("stage ids, stage lengths, and the cosine tail") {
  auto f = tiny_fixture(4);
  auto tc = tiny_config();
  tc.schedule = Schedule::stepwise;
  tc.scale = 0.5;  // stages become 6 / 3 / 3
  auto res = train(tc, f.data, f.world);
  REQUIRE(res.history.size() == 12);
  for (int i = 0; i < 6; ++i) {
    CHECK(res.history[i].stage == 1);
    CHECK(res.history[i].lr == tc.base_lr);
  }
  for (int i = 6; i < 9; ++i) {
    CHECK(res.history[i].stage == 2);
    CHECK(res.history[i].loss.n_composites > 0);
  }
  for (int i = 9; i < 12; ++i) {
    CHECK(res.history[i].stage == 3);
    CHECK(res.history[i].lr == cosine_lr(tc.base_lr, i - 9, 3));
  }
  for (const auto& h : res.history) CHECK(std::isfinite(h.loss.total));
}

TEST_CASE("one-step schedule is a single cosine-annealed stage") {
  auto f = tiny_fixture(5);
  auto tc = tiny_config();
  auto res = train(tc, f.data, f.world);
  REQUIRE(res.history.size() == 20);
  for (int i = 0; i < 20; ++i) {
    CHECK(res.history[i].stage == 1);
    CHECK(res.history[i].lr == cosine_lr(tc.base_lr, i, 20));
  }
}

TEST_CASE("composite counts honor the cap in every step") {
  auto f = tiny_fixture(6, 200);
  auto tc = tiny_config();
  tc.one_step_iters = 40;
  tc.cap = 2.0;
  auto res = train(tc, f.data, f.world);
  for (const auto& h : res.history)
    CHECK(h.loss.n_composites <= static_cast<long>(2.0 * tc.batch_size));
}

TEST_CASE("zero-shot contract is enforced and stepwise warns") {
  auto f = tiny_fixture(7, 300);
  apply_zero_shot(f.data, ZsMode::rare_first, 3, f.world.maps);
  auto tc = tiny_config();
  auto res = train(tc, f.data, f.world);
  CHECK(res.warnings.empty());

  tc.schedule = Schedule::stepwise;
  auto res2 = train(tc, f.data, f.world);
  CHECK(!res2.warnings.empty());

  // smuggle an unseen-class activation into the train split
  int unseen = *f.data.zero_shot->unseen_hoi_ids.begin();
  for (auto& r : f.data.records)
    if (r.train) {
      r.feat.y[unseen] = 1;
      break;
    }
  f.data.train_class_counts = f.data.recompute_train_counts();
  CHECK_THROWS_AS(train(tc, f.data, f.world), std::invalid_argument);
}

TEST_CASE("reweight flag installs the class weights") {
  auto f = tiny_fixture(8);
  auto tc = tiny_config();
  tc.one_step_iters = 2;
  tc.reweight = true;
  auto res = train(tc, f.data, f.world);
  REQUIRE(res.model.class_weights.has_value());
  CHECK(*res.model.class_weights == reweight_from_counts(f.data.train_class_counts));
}

TEST_CASE("training rejects bad configs") {
  auto f = tiny_fixture(9);
  auto tc = tiny_config();
  tc.batch_size = 0;
  CHECK_THROWS_AS(train(tc, f.data, f.world), std::invalid_argument);
  tc = tiny_config();
  tc.lambdas.l1 = -1.0;
  CHECK_THROWS_AS(train(tc, f.data, f.world), std::invalid_argument);
}

TEST_CASE("loss csv has the logging cadence plus the final step") {
  auto f = tiny_fixture(10);
  auto tc = tiny_config();
  tc.one_step_iters = 13;
  auto res = train(tc, f.data, f.world);
  const char* path = "loss_test.csv";
  write_loss_csv(res.history, 5, path);
  std::ifstream in(path);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  in.close();
  std::remove(path);
  REQUIRE(lines.size() == 5);  // header + steps 0,5,10,12
  CHECK(lines[0] == "step,stage,lr,total,l_hoi,l_cl,l_reg,l_hoi_sp,n_composites");
  CHECK(lines[1].rfind("0,", 0) == 0);
  CHECK(lines[4].rfind("12,", 0) == 0);
}
