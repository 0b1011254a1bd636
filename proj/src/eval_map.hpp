#pragma once

#include <map>

#include "synth_data.hpp"

namespace fcl {

struct Detection {
  int image_id = 0;
  int pair_id = -1;  // pair index within the image when known, -1 otherwise
  Box human_box;
  Box object_box;
  int class_id = 0;
  double score = 0.0;
};

double iou(const Box& a, const Box& b);

struct GtPair {
  Box human_box;
  Box object_box;
};

// Greedy matching by descending score (ties by insertion order). A detection
// is a TP iff an unmatched GT in the same image has human and object IoU
// >= 0.5; among eligible GTs the one maximizing min(hIoU, oIoU) wins.
std::vector<uint8_t> match_detections(const std::vector<Detection>& dets,
                                      const std::map<int, std::vector<GtPair>>& gts_by_image);

// Area under the PR curve with the all-point (precision envelope)
// interpolation. n_gt == 0 yields NaN: the class is excluded from means.
double average_precision(const std::vector<uint8_t>& tp_flags, long n_gt);

enum class EvalMode { standard, known_object };

struct EvalReport {
  std::vector<double> per_class_ap;   // NaN where n_gt == 0
  std::vector<long> per_class_gt;
  double map_full = 0.0;
  double map_rare = 0.0;
  double map_nonrare = 0.0;
  double map_seen = 0.0;    // only meaningful under a zero-shot split
  double map_unseen = 0.0;
  double mean_recall = 0.0;
  bool has_zero_shot = false;
};

// Evaluates detections against the manifest's test split. known_object mode
// restricts each class to images whose ground truth contains that class's
// object category.
EvalReport evaluate(const std::vector<Detection>& detections, const DatasetManifest& manifest,
                    const CooccurrenceMaps& maps, EvalMode mode);

// Detection JSON-lines: {"image_id":..,"pair_id":..,"class_id":..,"score":..};
// boxes are resolved through the manifest.
void write_detections(const std::vector<Detection>& dets, const std::string& path);
std::vector<Detection> read_detections(const std::string& path, const DatasetManifest& manifest);

void write_report_csv(const EvalReport& rep, const DatasetManifest& manifest,
                      const std::string& path);
std::string report_summary_json(const EvalReport& rep, EvalMode mode);

}  // namespace fcl
