#include "eval_map.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

namespace fcl {

double iou(const Box& a, const Box& b) {
  require(a.valid() && b.valid(), "iou: degenerate box");
  double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

std::vector<uint8_t> match_detections(const std::vector<Detection>& dets,
                                      const std::map<int, std::vector<GtPair>>& gts_by_image) {
  std::map<int, std::vector<uint8_t>> used;
  for (const auto& [img, gts] : gts_by_image) used[img].assign(gts.size(), 0);
  std::vector<uint8_t> tp(dets.size(), 0);
  for (size_t d = 0; d < dets.size(); ++d) {
    auto it = gts_by_image.find(dets[d].image_id);
    if (it == gts_by_image.end()) continue;
    const auto& gts = it->second;
    auto& flags = used[dets[d].image_id];
    int best = -1;
    double best_min_iou = 0.0;
    for (size_t g = 0; g < gts.size(); ++g) {
      if (flags[g]) continue;
      double hi = iou(dets[d].human_box, gts[g].human_box);
      double oi = iou(dets[d].object_box, gts[g].object_box);
      if (hi < 0.5 || oi < 0.5) continue;
      double m = std::min(hi, oi);
      if (m > best_min_iou) {
        best_min_iou = m;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0) {
      flags[best] = 1;
      tp[d] = 1;
    }
  }
  return tp;
}

double average_precision(const std::vector<uint8_t>& tp_flags, long n_gt) {
  require(n_gt >= 0, "average_precision: negative gt count");
  if (n_gt == 0) return std::numeric_limits<double>::quiet_NaN();
  size_t n = tp_flags.size();
  std::vector<double> precision(n), recall(n);
  long tp = 0;
  for (size_t i = 0; i < n; ++i) {
    if (tp_flags[i]) ++tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(n_gt);
  }
  // non-increasing precision envelope
  for (size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (size_t i = 0; i < n; ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

namespace {

double mean_over(const std::vector<double>& ap, const std::vector<uint8_t>& select) {
  double s = 0.0;
  long n = 0;
  for (size_t k = 0; k < ap.size(); ++k) {
    if (!select[k] || std::isnan(ap[k])) continue;
    s += ap[k];
    ++n;
  }
  return n > 0 ? s / n : 0.0;
}

}  // namespace

EvalReport evaluate(const std::vector<Detection>& detections, const DatasetManifest& manifest,
                    const CooccurrenceMaps& maps, EvalMode mode) {
  require(manifest.c == maps.c, "evaluate: manifest/world class count mismatch");
  std::set<int> known_images;
  for (const auto& r : manifest.records) known_images.insert(r.image_id);
  for (const auto& d : detections) {
    require(d.class_id >= 0 && d.class_id < manifest.c,
            "evaluate: detection references unknown class " + std::to_string(d.class_id));
    require(known_images.count(d.image_id) > 0,
            "evaluate: detection references unknown image " + std::to_string(d.image_id));
  }

  // ground truth over the test split
  std::vector<std::map<int, std::vector<GtPair>>> gts(static_cast<size_t>(manifest.c));
  std::map<int, std::set<int>> gt_objects_by_image;
  std::set<int> test_images;
  for (const auto& r : manifest.records) {
    if (r.train) continue;
    test_images.insert(r.image_id);
    for (int k = 0; k < manifest.c; ++k) {
      if (!r.feat.y[k]) continue;
      gts[k][r.image_id].push_back({r.feat.human_box, r.feat.object_box});
      gt_objects_by_image[r.image_id].insert(maps.object_of(k));
    }
  }

  EvalReport rep;
  rep.per_class_ap.assign(static_cast<size_t>(manifest.c), 0.0);
  rep.per_class_gt.assign(static_cast<size_t>(manifest.c), 0);
  double recall_sum = 0.0;
  long recall_classes = 0;
  for (int k = 0; k < manifest.c; ++k) {
    std::vector<Detection> dets;
    for (const auto& d : detections) {
      if (d.class_id != k) continue;
      if (test_images.count(d.image_id) == 0) continue;
      if (mode == EvalMode::known_object) {
        auto it = gt_objects_by_image.find(d.image_id);
        if (it == gt_objects_by_image.end() || !it->second.count(maps.object_of(k))) continue;
      }
      dets.push_back(d);
    }
    std::stable_sort(dets.begin(), dets.end(),
                     [](const Detection& a, const Detection& b) { return a.score > b.score; });
    long n_gt = 0;
    for (const auto& [img, v] : gts[k]) n_gt += static_cast<long>(v.size());
    std::vector<uint8_t> tp = match_detections(dets, gts[k]);
    rep.per_class_gt[k] = n_gt;
    rep.per_class_ap[k] = average_precision(tp, n_gt);
    if (n_gt > 0) {
      long ntp = std::count(tp.begin(), tp.end(), uint8_t{1});
      recall_sum += static_cast<double>(ntp) / n_gt;
      ++recall_classes;
    }
  }
  rep.mean_recall = recall_classes > 0 ? recall_sum / recall_classes : 0.0;

  std::vector<uint8_t> all(static_cast<size_t>(manifest.c), 1);
  rep.map_full = mean_over(rep.per_class_ap, all);
  std::vector<uint8_t> rare = manifest.rare_mask();
  std::vector<uint8_t> nonrare(rare.size());
  for (size_t k = 0; k < rare.size(); ++k) nonrare[k] = rare[k] ? 0 : 1;
  rep.map_rare = mean_over(rep.per_class_ap, rare);
  rep.map_nonrare = mean_over(rep.per_class_ap, nonrare);
  if (manifest.zero_shot) {
    rep.has_zero_shot = true;
    std::vector<uint8_t> seen(rare.size(), 0), unseen(rare.size(), 0);
    for (int k : manifest.zero_shot->seen_hoi_ids) seen[k] = 1;
    for (int k : manifest.zero_shot->unseen_hoi_ids) unseen[k] = 1;
    rep.map_seen = mean_over(rep.per_class_ap, seen);
    rep.map_unseen = mean_over(rep.per_class_ap, unseen);
  }
  return rep;
}

void write_detections(const std::vector<Detection>& dets, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write detections: " + path);
  for (const auto& d : dets) {
    nlohmann::json j;
    j["image_id"] = d.image_id;
    j["pair_id"] = d.pair_id;
    j["class_id"] = d.class_id;
    j["score"] = d.score;
    out << j.dump() << "\n";
  }
  if (!out) throw io_error("short write to detections: " + path);
}

std::vector<Detection> read_detections(const std::string& path, const DatasetManifest& manifest) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open detections: " + path);
  std::map<std::pair<int, int>, const PairRecord*> pairs;
  for (const auto& r : manifest.records) pairs[{r.image_id, r.pair_id}] = &r;
  std::vector<Detection> dets;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw io_error(path + ": corrupt detection at line " + std::to_string(lineno) + ": " + e.what());
    }
    Detection d;
    try {
      d.image_id = j.at("image_id").get<int>();
      d.pair_id = j.at("pair_id").get<int>();
      d.class_id = j.at("class_id").get<int>();
      d.score = j.at("score").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw io_error(path + ": corrupt detection at line " + std::to_string(lineno) + ": " + e.what());
    }
    auto it = pairs.find({d.image_id, d.pair_id});
    if (it == pairs.end())
      throw io_error(path + ": detection at line " + std::to_string(lineno) +
                     " references unknown pair (" + std::to_string(d.image_id) + ", " +
                     std::to_string(d.pair_id) + ")");
    d.human_box = it->second->feat.human_box;
    d.object_box = it->second->feat.object_box;
    dets.push_back(d);
  }
  return dets;
}

void write_report_csv(const EvalReport& rep, const DatasetManifest& manifest,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write report: " + path);
  auto rare = manifest.rare_mask();
  out << "class_id,n_gt,ap,rare,split\n";
  char buf[64];
  for (size_t k = 0; k < rep.per_class_ap.size(); ++k) {
    std::string split = "none";
    if (manifest.zero_shot)
      split = manifest.zero_shot->unseen_hoi_ids.count(static_cast<int>(k)) ? "unseen" : "seen";
    if (std::isnan(rep.per_class_ap[k]))
      std::snprintf(buf, sizeof buf, "nan");
    else
      std::snprintf(buf, sizeof buf, "%.12g", rep.per_class_ap[k]);
    out << k << "," << rep.per_class_gt[k] << "," << buf << "," << int(rare[k]) << "," << split
        << "\n";
  }
  if (!out) throw io_error("short write to report: " + path);
}

std::string report_summary_json(const EvalReport& rep, EvalMode mode) {
  nlohmann::json j;
  j["mode"] = mode == EvalMode::known_object ? "known_object" : "default";
  j["map_full"] = rep.map_full;
  j["map_rare"] = rep.map_rare;
  j["map_nonrare"] = rep.map_nonrare;
  j["mean_recall"] = rep.mean_recall;
  if (rep.has_zero_shot) {
    j["map_seen"] = rep.map_seen;
    j["map_unseen"] = rep.map_unseen;
  }
  return j.dump();
}

}  // namespace fcl
