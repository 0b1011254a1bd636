#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "fcl_model.hpp"

using namespace fcl;

namespace {

// 4-class toy world: full verb x object cartesian product
CooccurrenceMaps toy_maps() {
  return build_cooccurrence(2, 2, {{0, 0}, {0, 1}, {1, 0}, {1, 1}});
}

ModelDims toy_dims() {
  ModelDims d;
  d.d_h = 3;
  d.d_o = 4;
  d.d_v = 4;
  d.hidden = 5;
  d.d_id = 3;
  d.d_n = 2;
  d.fab_hidden = 4;
  d.n_v = 2;
  d.n_o = 2;
  d.c = 4;
  return d;
}

FclParams toy_model(bool with_vf = false, uint64_t seed = 1) {
  Rng a = make_rng(seed, 11), b = make_rng(seed, 12);
  return make_model(toy_dims(), IdentityVariant::learned, true, true, with_vf, a, b);
}

PairFeatures toy_pair(int cls, uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0, 1);
  PairFeatures f;
  f.x_h.resize(3);
  f.x_o.resize(4);
  f.x_v.resize(4);
  for (auto* v : {&f.x_h, &f.x_o, &f.x_v})
    for (auto& e : *v) e = g(rng);
  f.human_box = {0, 0, 2, 3};
  f.object_box = {1, 1, 3, 2.5};
  f.x_sp = spatial_feature(f.human_box, f.object_box);
  f.s_h = 0.8;
  f.s_o = 0.9;
  f.y.assign(4, 0);
  if (cls >= 0) f.y[cls] = 1;
  return f;
}

}  // namespace

TEST_CASE("spatial feature of identical boxes") {
  Box b{1, 2, 4, 6};
  Vec f = spatial_feature(b, b);
  CHECK(f.size() == kSpatialDim);
  CHECK(f[0] == 0.0);
  CHECK(f[1] == 0.0);
  CHECK(f[2] == 0.0);
  CHECK(f[3] == 0.0);
  CHECK(f[4] == doctest::Approx(1.0));
  CHECK(f[5] == doctest::Approx(1.0));
}

TEST_CASE("spatial feature of disjoint boxes has zero iou") {
  Vec f = spatial_feature({0, 0, 1, 1}, {5, 5, 6, 6});
  CHECK(f[4] == 0.0);
  CHECK(f[5] == 0.0);
}

TEST_CASE("spatial feature rejects degenerate boxes") {
  CHECK_THROWS_AS(spatial_feature({0, 0, 0, 1}, {0, 0, 1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(spatial_feature({0, 0, 1, 1}, {1, 1, 0, 0}), std::invalid_argument);
}

TEST_CASE("spatial feature matches an independent recomputation") {
  Rng rng(3);
  std::uniform_real_distribution<double> u(0, 10);
  for (int trial = 0; trial < 50; ++trial) {
    auto rand_box = [&] {
      double x = u(rng), y = u(rng);
      return Box{x, y, x + 0.5 + u(rng), y + 0.5 + u(rng)};
    };
    Box h = rand_box(), o = rand_box();
    Vec f = spatial_feature(h, o);
    double ux1 = std::min(h.x1, o.x1), uy1 = std::min(h.y1, o.y1);
    double ux2 = std::max(h.x2, o.x2), uy2 = std::max(h.y2, o.y2);
    double uw = ux2 - ux1, uh = uy2 - uy1;
    double iw = std::max(0.0, std::min(h.x2, o.x2) - std::max(h.x1, o.x1));
    double ih = std::max(0.0, std::min(h.y2, o.y2) - std::max(h.y1, o.y1));
    double inter = iw * ih;
    CHECK(f[0] == doctest::Approx(((o.x1 + o.x2) / 2 - (h.x1 + h.x2) / 2) / uw).epsilon(1e-12));
    CHECK(f[1] == doctest::Approx(((o.y1 + o.y2) / 2 - (h.y1 + h.y2) / 2) / uh).epsilon(1e-12));
    CHECK(f[2] == doctest::Approx(std::log(o.width() / h.width())).epsilon(1e-12));
    CHECK(f[3] == doctest::Approx(std::log(o.height() / h.height())).epsilon(1e-12));
    CHECK(f[4] == doctest::Approx(inter / (h.area() + o.area() - inter)).epsilon(1e-12));
    CHECK(f[6] == doctest::Approx(h.area() / (uw * uh)).epsilon(1e-12));
    CHECK(f[7] == doctest::Approx(o.area() / (uw * uh)).epsilon(1e-12));
    CHECK(f[10] == doctest::Approx(o.width() / uw).epsilon(1e-12));
  }
}

TEST_CASE("loss total is the weighted sum of its terms") {
  auto maps = toy_maps();
  auto model = toy_model();
  model.lambdas = {1.7, 0.4, 0.2};
  std::vector<PairFeatures> batch{toy_pair(0, 1), toy_pair(3, 2), toy_pair(-1, 3)};
  Rng crng = make_rng(1, 14);
  auto comps = compose_minibatch(batch, model.fabricator, maps, 3.0, std::nullopt, nullptr, crng);
  auto lb = forward_train(model, batch, comps, maps, false);
  CHECK(lb.total == doctest::Approx(1.7 * lb.l_hoi + 0.4 * lb.l_cl + 0.2 * lb.l_reg +
                                    lb.l_hoi_sp).epsilon(1e-12));
  CHECK(lb.n_composites == static_cast<long>(comps.size()));
}

TEST_CASE("without composites the composite loss is zero") {
  auto maps = toy_maps();
  auto model = toy_model();
  std::vector<PairFeatures> batch{toy_pair(0, 1), toy_pair(2, 2)};
  auto lb = forward_train(model, batch, {}, maps, false);
  CHECK(lb.l_cl == 0.0);
  CHECK(lb.n_composites == 0);
}

TEST_CASE("negatives skip the verb regularizer") {
  auto maps = toy_maps();
  auto model = toy_model();
  std::vector<PairFeatures> batch{toy_pair(-1, 1), toy_pair(-1, 2)};
  auto lb = forward_train(model, batch, {}, maps, false);
  CHECK(lb.l_reg == 0.0);
  CHECK(lb.l_hoi > 0.0);
  CHECK(lb.l_hoi_sp > 0.0);
}

TEST_CASE("full loss passes the gradient check on the toy world") {
  auto maps = toy_maps();
  auto model = toy_model(true);  // include the verb-fabricator arm
  std::vector<PairFeatures> batch{toy_pair(0, 1), toy_pair(3, 2), toy_pair(-1, 3)};
  Rng crng = make_rng(2, 14);
  auto comps = compose_minibatch(batch, model.fabricator, maps, 3.0, std::nullopt, nullptr, crng);
  auto vcomps = compose_verb_minibatch(batch, *model.verb_fabricator, maps, 1.0, crng);
  comps.insert(comps.end(), vcomps.begin(), vcomps.end());
  REQUIRE(!comps.empty());
  auto params = model.all_params();
  auto f = [&](bool fill) {
    if (fill) model.zero_grad();
    return forward_train(model, batch, comps, maps, fill).total;
  };
  auto rep = grad_check(f, params, 1e-5, 1e-4);
  INFO(rep.worst_param << "[" << rep.worst_index << "] rel err " << rep.max_rel_error);
  CHECK(rep.pass);
}

TEST_CASE("class-weighted loss passes the gradient check") {
  auto maps = toy_maps();
  auto model = toy_model();
  model.class_weights = Vec{2.0, 0.5, 1.5, 1.0};
  std::vector<PairFeatures> batch{toy_pair(1, 4), toy_pair(2, 5)};
  Rng crng = make_rng(3, 14);
  auto comps = compose_minibatch(batch, model.fabricator, maps, 3.0, std::nullopt, nullptr, crng);
  auto params = model.all_params();
  auto f = [&](bool fill) {
    if (fill) model.zero_grad();
    return forward_train(model, batch, comps, maps, fill).total;
  };
  auto rep = grad_check(f, params, 1e-5, 1e-4);
  CHECK(rep.pass);
}

TEST_CASE("composite branch drives the shared classifier") {
  auto maps = toy_maps();
  auto model = toy_model();
  // make real-branch gradients vanish by zeroing their loss weights
  model.lambdas = {0.0, 0.5, 0.0, };
  std::vector<PairFeatures> batch{toy_pair(0, 1)};
  Rng crng = make_rng(4, 14);
  auto comps = compose_minibatch(batch, model.fabricator, maps, 3.0, std::nullopt, nullptr, crng);
  REQUIRE(!comps.empty());
  model.zero_grad();
  forward_train(model, batch, comps, maps, true);
  double g_shared = 0, g_fab = 0;
  for (double g : model.g_hoi.gw.d) g_shared += std::abs(g);
  for (auto& p : model.fabricator_params())
    for (size_t i = 0; i < p.size; ++i) g_fab += std::abs(p.grad[i]);
  CHECK(g_shared > 0.0);  // same storage as the real branch's classifier
  CHECK(g_fab > 0.0);
}

TEST_CASE("inference is the product of the four factors") {
  auto model = toy_model();
  auto pair = toy_pair(0, 7);
  auto s = branch_scores(model, pair);
  Vec out = forward_infer(model, pair);
  for (int c = 0; c < 4; ++c)
    CHECK(out[c] == doctest::Approx(s.s_h * s.s_o * s.s_sp[c] * s.s_hoi[c]).epsilon(1e-15));

  pair.s_o = 0.0;
  for (double v : forward_infer(model, pair)) CHECK(v == 0.0);
}

TEST_CASE("inference score is monotone in each factor") {
  auto model = toy_model();
  auto pair = toy_pair(0, 8);
  Vec base = forward_infer(model, pair);
  pair.s_h = std::min(1.0, pair.s_h + 0.1);
  Vec up = forward_infer(model, pair);
  for (int c = 0; c < 4; ++c) CHECK(up[c] >= base[c]);
}

TEST_CASE("factorized score matches the per-class lookup oracle") {
  Rng rng(9);
  auto maps = build_cooccurrence(3, 4, {{0, 0}, {0, 3}, {1, 1}, {2, 2}, {2, 0}});
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 1000; ++trial) {
    Vec sv(3), so(4);
    for (auto& v : sv) v = u(rng);
    for (auto& v : so) v = u(rng);
    Vec s = factorized_score(sv, so, maps);
    for (int k = 0; k < maps.c; ++k)
      CHECK(s[k] == doctest::Approx(so[maps.object_of(k)] + sv[maps.verb_of(k)]).epsilon(1e-15));
  }
  // one-hot agreement peaks at 2
  Vec sv{1, 0, 0}, so{1, 0, 0, 0};
  Vec s = factorized_score(sv, so, maps);
  CHECK(s[0] == 2.0);
  for (int k = 1; k < maps.c; ++k) CHECK(s[k] <= 1.0);
}

TEST_CASE("object score fusion identities and oracle") {
  auto maps = toy_maps();
  Rng rng(10);
  std::uniform_real_distribution<double> u(0, 1);
  Vec s_sp(4), s_hoi(4), s_o{0.3, 0.8};
  for (auto& v : s_sp) v = u(rng);
  for (auto& v : s_hoi) v = u(rng);

  // beta1=0, beta2=1 returns the object classifier score exactly
  CHECK(object_score_fusion(s_sp, s_hoi, s_o, maps, 0.0, 1.0) == s_o);

  // uniform product 1 -> first term is beta1 per object
  Vec ones(4, 1.0), zeros(2, 0.0);
  Vec f = object_score_fusion(ones, ones, zeros, maps, 0.3, 0.7);
  CHECK(f[0] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(f[1] == doctest::Approx(0.3).epsilon(1e-15));

  // random case against an explicit per-object average
  Vec got = object_score_fusion(s_sp, s_hoi, s_o, maps);
  for (int i = 0; i < 2; ++i) {
    double acc = 0;
    long b = 0;
    for (int k = 0; k < 4; ++k)
      if (maps.object_of(k) == i) {
        acc += s_sp[k] * s_hoi[k];
        ++b;
      }
    CHECK(got[i] == doctest::Approx(0.3 * acc / b + 0.7 * s_o[i]).epsilon(1e-15));
  }
}

TEST_CASE("object score fusion rejects an object with no classes") {
  auto maps = build_cooccurrence(1, 2, {{0, 0}});  // object 1 unused
  Vec s{0.5}, so{0.1, 0.2};
  CHECK_THROWS_AS(object_score_fusion(s, s, so, maps), std::invalid_argument);
}

TEST_CASE("semantic verb regularizer endpoints") {
  Mat wv(2, 3);
  wv(0, 0) = 2.0;           // verb 0 word vector along +x
  wv(1, 1) = 1.0;
  DenseLayer proj(3, 3);    // identity projection
  for (int i = 0; i < 3; ++i) proj.w(i, i) = 1.0;

  Vec x_along{5.0, 0.0, 0.0};
  CHECK(semantic_verb_reg(proj, x_along, wv, {1, 0}, false) ==
        doctest::Approx(0.0).epsilon(1e-12));
  Vec x_anti{-5.0, 0.0, 0.0};
  CHECK(semantic_verb_reg(proj, x_anti, wv, {1, 0}, false) ==
        doctest::Approx(2.0).epsilon(1e-12));
  CHECK_THROWS_AS(semantic_verb_reg(proj, x_along, wv, {0, 0}, false), std::invalid_argument);
}

TEST_CASE("semantic verb regularizer passes grad check") {
  Rng rng(11);
  Mat wv(3, 4);
  std::normal_distribution<double> g(0, 1);
  for (auto& v : wv.d) v = g(rng);
  DenseLayer proj(4, 5);
  proj.init_uniform(rng);
  Vec x_v(5);
  for (auto& v : x_v) v = g(rng);
  BitVec l_v{1, 0, 1};
  std::vector<ParamRef> params;
  proj.collect("proj", params);
  auto f = [&](bool fill) {
    if (fill) proj.zero_grad();
    return semantic_verb_reg(proj, x_v, wv, l_v, fill);
  };
  auto rep = grad_check(f, params, 1e-5, 1e-4);
  INFO(rep.worst_param << " " << rep.max_rel_error);
  CHECK(rep.pass);
}
