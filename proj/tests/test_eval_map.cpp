#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>

#include "eval_map.hpp"

using namespace fcl;

namespace {

Box unit_at(double x, double y, double w = 1.0, double h = 1.0) { return Box{x, y, x + w, y + h}; }

// Independent reimplementation of the documented greedy rule.
std::vector<uint8_t> oracle_match(const std::vector<Detection>& dets,
                                  const std::map<int, std::vector<GtPair>>& gts_by_image) {
  std::map<int, std::set<size_t>> taken;
  std::vector<uint8_t> out(dets.size(), 0);
  for (size_t d = 0; d < dets.size(); ++d) {
    auto it = gts_by_image.find(dets[d].image_id);
    if (it == gts_by_image.end()) continue;
    double best = -1.0;
    int pick = -1;
    for (size_t g = 0; g < it->second.size(); ++g) {
      if (taken[dets[d].image_id].count(g)) continue;
      double hi = iou(dets[d].human_box, it->second[g].human_box);
      double oi = iou(dets[d].object_box, it->second[g].object_box);
      if (hi >= 0.5 && oi >= 0.5 && std::min(hi, oi) > best) {
        best = std::min(hi, oi);
        pick = static_cast<int>(g);
      }
    }
    if (pick >= 0) {
      out[d] = 1;
      taken[dets[d].image_id].insert(pick);
    }
  }
  return out;
}

// two test images, 3 classes; class 2 has no test ground truth
DatasetManifest fixture_manifest(const CooccurrenceMaps& maps) {
  DatasetManifest ds;
  ds.c = maps.c;
  ds.d_v = ds.d_o = ds.d_h = 2;
  auto add = [&](int img, int pair, bool train, int cls, Box hb, Box ob) {
    PairRecord r;
    r.image_id = img;
    r.pair_id = pair;
    r.train = train;
    r.feat.human_box = hb;
    r.feat.object_box = ob;
    r.feat.x_h = r.feat.x_o = r.feat.x_v = Vec(2, 0.0);
    r.feat.x_sp = Vec(12, 0.0);
    r.feat.y.assign(ds.c, 0);
    if (cls >= 0) r.feat.y[cls] = 1;
    ds.records.push_back(r);
  };
  add(0, 0, true, 0, unit_at(0, 0), unit_at(1, 0));
  add(1, 0, false, 0, unit_at(0, 0), unit_at(1, 0));
  add(1, 1, false, 1, unit_at(3, 3), unit_at(4, 3));
  add(2, 0, false, 1, unit_at(0, 5), unit_at(1, 5));
  ds.train_class_counts = ds.recompute_train_counts();
  return ds;
}

Detection det_on(const PairRecord& r, int cls, double score) {
  Detection d;
  d.image_id = r.image_id;
  d.pair_id = r.pair_id;
  d.human_box = r.feat.human_box;
  d.object_box = r.feat.object_box;
  d.class_id = cls;
  d.score = score;
  return d;
}

}  // namespace

TEST_CASE("iou basics and the half-overlap fixture") {
  Box a = unit_at(0, 0);
  CHECK(iou(a, a) == doctest::Approx(1.0));
  CHECK(iou(a, unit_at(5, 5)) == 0.0);
  // unit squares overlapping half: inter 0.5, union 1.5
  CHECK(iou(a, unit_at(0.5, 0)) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK_THROWS_AS(iou(a, Box{0, 0, 0, 1}), std::invalid_argument);
}

TEST_CASE("single detection on its ground truth is a true positive") {
  std::map<int, std::vector<GtPair>> gts;
  gts[0].push_back({unit_at(0, 0), unit_at(1, 0)});
  Detection d;
  d.image_id = 0;
  d.human_box = unit_at(0, 0);
  d.object_box = unit_at(1, 0);
  CHECK(match_detections({d}, gts) == std::vector<uint8_t>{1});
  // same pair in another image: no GT there
  d.image_id = 5;
  CHECK(match_detections({d}, gts) == std::vector<uint8_t>{0});
}

TEST_CASE("second detection on a consumed ground truth is a false positive") {
  std::map<int, std::vector<GtPair>> gts;
  gts[0].push_back({unit_at(0, 0), unit_at(1, 0)});
  Detection hi, lo;
  hi.image_id = lo.image_id = 0;
  hi.human_box = lo.human_box = unit_at(0, 0);
  hi.object_box = lo.object_box = unit_at(1, 0);
  hi.score = 0.9;
  lo.score = 0.4;
  CHECK(match_detections({hi, lo}, gts) == std::vector<uint8_t>{1, 0});
}

TEST_CASE("matcher requires both boxes above the threshold") {
  std::map<int, std::vector<GtPair>> gts;
  gts[0].push_back({unit_at(0, 0), unit_at(1, 0)});
  Detection d;
  d.image_id = 0;
  d.human_box = unit_at(0, 0);     // IoU 1
  d.object_box = unit_at(1.5, 0);  // IoU 1/3 < 0.5
  CHECK(match_detections({d}, gts) == std::vector<uint8_t>{0});
}

TEST_CASE("matcher agrees with the independent oracle on random fixtures") {
  Rng rng(3);
  std::uniform_real_distribution<double> u(0, 4), s(0, 1);
  for (int trial = 0; trial < 1000; ++trial) {
    std::map<int, std::vector<GtPair>> gts;
    for (int g = 0; g < 3; ++g)
      gts[0].push_back({unit_at(u(rng), u(rng), 2, 2), unit_at(u(rng), u(rng), 2, 2)});
    std::vector<Detection> dets(5);
    for (auto& d : dets) {
      d.image_id = 0;
      d.human_box = unit_at(u(rng), u(rng), 2, 2);
      d.object_box = unit_at(u(rng), u(rng), 2, 2);
      d.score = s(rng);
    }
    std::stable_sort(dets.begin(), dets.end(),
                     [](const Detection& a, const Detection& b) { return a.score > b.score; });
    CHECK(match_detections(dets, gts) == oracle_match(dets, gts));
  }
}

TEST_CASE("average precision endpoints and the mixed fixture") {
  CHECK(average_precision({1, 1, 1}, 3) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(average_precision({0, 0}, 2) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(average_precision({1, 0, 1}, 2) ==
        doctest::Approx(1.0 * 0.5 + (2.0 / 3.0) * 0.5).epsilon(1e-9));
  CHECK(std::isnan(average_precision({1, 0}, 0)));
  CHECK(average_precision({}, 3) == 0.0);
  // missed GTs cost recall: one TP of two GTs
  CHECK(average_precision({1}, 2) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("perfect detections score full mAP and recall") {
  auto maps = build_cooccurrence(2, 2, {{0, 0}, {1, 1}, {0, 1}});
  auto ds = fixture_manifest(maps);
  std::vector<Detection> dets;
  for (const auto& r : ds.records)
    if (!r.train)
      for (int k = 0; k < ds.c; ++k)
        if (r.feat.y[k]) dets.push_back(det_on(r, k, 0.9));
  auto rep = evaluate(dets, ds, maps, EvalMode::standard);
  CHECK(rep.map_full == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.map_rare == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.mean_recall == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::isnan(rep.per_class_ap[2]));  // class without test GT is excluded

  auto empty = evaluate({}, ds, maps, EvalMode::standard);
  CHECK(empty.map_full == 0.0);
  CHECK(empty.mean_recall == 0.0);
}

TEST_CASE("train records are not evaluation ground truth") {
  auto maps = build_cooccurrence(2, 2, {{0, 0}, {1, 1}, {0, 1}});
  auto ds = fixture_manifest(maps);
  // detection on the train record's pair: no test GT for it in image 0
  auto rep = evaluate({det_on(ds.records[0], 0, 0.9)}, ds, maps, EvalMode::standard);
  CHECK(rep.per_class_ap[0] == doctest::Approx(0.0));
  CHECK(rep.per_class_gt[0] == 1);  // image 1 still has a class-0 test GT
}

TEST_CASE("evaluate rejects unknown classes and images") {
  auto maps = build_cooccurrence(2, 2, {{0, 0}, {1, 1}, {0, 1}});
  auto ds = fixture_manifest(maps);
  Detection d = det_on(ds.records[1], 0, 0.5);
  d.class_id = 99;
  CHECK_THROWS_AS(evaluate({d}, ds, maps, EvalMode::standard), std::invalid_argument);
  d = det_on(ds.records[1], 0, 0.5);
  d.image_id = 99;
  CHECK_THROWS_AS(evaluate({d}, ds, maps, EvalMode::standard), std::invalid_argument);
}

TEST_CASE("AP is invariant under strictly monotone score transforms") {
  auto maps = build_cooccurrence(2, 2, {{0, 0}, {1, 1}, {0, 1}});
  auto ds = fixture_manifest(maps);
  Rng rng(5);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::vector<Detection> dets;
  for (const auto& r : ds.records)
    if (!r.train)
      for (int k = 0; k < 2; ++k) dets.push_back(det_on(r, k, u(rng)));
  auto a = evaluate(dets, ds, maps, EvalMode::standard);
  for (auto& d : dets) d.score = std::exp(3.0 * d.score) + 7.0;
  auto b = evaluate(dets, ds, maps, EvalMode::standard);
  for (int k = 0; k < ds.c; ++k) {
    if (std::isnan(a.per_class_ap[k])) continue;
    CHECK(a.per_class_ap[k] == doctest::Approx(b.per_class_ap[k]).epsilon(1e-12));
  }
}

TEST_CASE("known-object mode never scores below default mode") {
  Rng rng(7);
  std::uniform_real_distribution<double> u(0, 1);
  auto maps = build_cooccurrence(3, 3, {{0, 0}, {1, 1}, {2, 2}, {0, 1}, {1, 2}});
  for (int trial = 0; trial < 20; ++trial) {
    DatasetManifest ds;
    ds.c = maps.c;
    ds.d_v = ds.d_o = ds.d_h = 2;
    std::uniform_int_distribution<int> cls(0, maps.c - 1);
    std::vector<Detection> dets;
    for (int img = 0; img < 6; ++img) {
      for (int p = 0; p < 2; ++p) {
        PairRecord r;
        r.image_id = img;
        r.pair_id = p;
        r.train = false;
        r.feat.human_box = unit_at(10.0 * p, 0);
        r.feat.object_box = unit_at(10.0 * p + 1, 0);
        r.feat.x_h = r.feat.x_o = r.feat.x_v = Vec(2, 0.0);
        r.feat.x_sp = Vec(12, 0.0);
        r.feat.y.assign(ds.c, 0);
        r.feat.y[cls(rng)] = 1;
        ds.records.push_back(r);
        // detections for every class on this pair with random scores
        for (int k = 0; k < maps.c; ++k) dets.push_back(det_on(ds.records.back(), k, u(rng)));
      }
    }
    ds.train_class_counts = ds.recompute_train_counts();
    auto def = evaluate(dets, ds, maps, EvalMode::standard);
    auto ko = evaluate(dets, ds, maps, EvalMode::known_object);
    CHECK(ko.map_full >= def.map_full - 1e-12);
    for (int k = 0; k < maps.c; ++k) {
      if (std::isnan(def.per_class_ap[k])) continue;
      CHECK(ko.per_class_ap[k] >= def.per_class_ap[k] - 1e-12);
    }
  }
}

TEST_CASE("seen and unseen means follow a zero-shot split") {
  auto maps = build_cooccurrence(2, 2, {{0, 0}, {1, 1}, {0, 1}});
  auto ds = fixture_manifest(maps);
  ZeroShotSplit z;
  z.mode = ZsMode::rare_first;
  z.unseen_hoi_ids = {1};
  z.seen_hoi_ids = {0, 2};
  ds.zero_shot = z;
  std::vector<Detection> dets;
  // perfect on class 0, nothing on class 1
  dets.push_back(det_on(ds.records[1], 0, 0.9));
  auto rep = evaluate(dets, ds, maps, EvalMode::standard);
  CHECK(rep.has_zero_shot);
  CHECK(rep.map_seen == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.map_unseen == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("detection files round-trip through the manifest") {
  auto maps = build_cooccurrence(2, 2, {{0, 0}, {1, 1}, {0, 1}});
  auto ds = fixture_manifest(maps);
  std::vector<Detection> dets{det_on(ds.records[1], 0, 0.75), det_on(ds.records[2], 1, 0.25)};
  const char* path = "dets_rt.jsonl";
  write_detections(dets, path);
  auto back = read_detections(path, ds);
  std::remove(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].image_id == dets[0].image_id);
  CHECK(back[0].score == dets[0].score);
  CHECK(back[0].human_box.x1 == ds.records[1].feat.human_box.x1);
  CHECK(back[1].object_box.y2 == ds.records[2].feat.object_box.y2);
}

TEST_CASE("unknown pairs in a detection file name the line") {
  auto maps = build_cooccurrence(2, 2, {{0, 0}, {1, 1}, {0, 1}});
  auto ds = fixture_manifest(maps);
  const char* path = "dets_bad.jsonl";
  {
    std::ofstream out(path);
    out << R"({"image_id":1,"pair_id":0,"class_id":0,"score":0.5})" << "\n";
    out << R"({"image_id":9,"pair_id":9,"class_id":0,"score":0.5})" << "\n";
  }
  try {
    read_detections(path, ds);
    FAIL("expected throw");
  } catch (const io_error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::remove(path);
  CHECK_THROWS_AS(read_detections("no_such_dets.jsonl", ds), io_error);
}

TEST_CASE("report csv and summary json carry the split tags") {
  auto maps = build_cooccurrence(2, 2, {{0, 0}, {1, 1}, {0, 1}});
  auto ds = fixture_manifest(maps);
  ZeroShotSplit z;
  z.unseen_hoi_ids = {1};
  z.seen_hoi_ids = {0, 2};
  ds.zero_shot = z;
  auto rep = evaluate({det_on(ds.records[1], 0, 0.9)}, ds, maps, EvalMode::standard);
  const char* path = "report_test.csv";
  write_report_csv(rep, ds, path);
  std::ifstream in(path);
  std::string header, l0, l1, l2;
  std::getline(in, header);
  std::getline(in, l0);
  std::getline(in, l1);
  std::getline(in, l2);
  in.close();
  std::remove(path);
  CHECK(header == "class_id,n_gt,ap,rare,split");
  CHECK(l0.find("seen") != std::string::npos);
  CHECK(l1.find("unseen") != std::string::npos);
  CHECK(l2.find("nan") != std::string::npos);

  std::string summary = report_summary_json(rep, EvalMode::standard);
  CHECK(summary.find("map_unseen") != std::string::npos);
  CHECK(summary.find("\"mode\":\"default\"") != std::string::npos);
}
