#pragma once

#include <map>
#include <optional>

#include "label_algebra.hpp"
#include "types.hpp"

namespace fcl {

struct WorldConfig {
  int n_v = 10;
  int n_o = 8;
  int c = 30;
  int d_v = 64;
  int d_o = 64;
  int d_h = 16;
  double sigma_o = 0.25;
  double sigma_v = 0.25;
  double alpha = 0.5;   // object-into-verb coupling
  double beta = 0.0;    // verb-into-object coupling
  double zipf_s = 1.5;
};

// Ground truth of a synthetic HOI world: the label space plus the feature
// prototypes all sampled streams are drawn around.
struct WorldSpec {
  WorldConfig cfg;
  uint64_t seed = 0;
  CooccurrenceMaps maps;
  Mat object_prototypes;  // n_o x d_o
  Mat verb_prototypes;    // n_v x d_v
  Vec human_prototype;    // d_h
  Mat object_word_vecs;   // n_o x d_id, frozen synthetic "word vectors"
  Mat verb_word_vecs;     // n_v x d_id
};

struct PairRecord {
  int image_id = 0;
  int pair_id = 0;
  bool train = true;
  PairFeatures feat;
};

struct DatasetManifest {
  uint64_t world_hash = 0;
  int c = 0;
  int d_v = 0, d_o = 0, d_h = 0;
  std::vector<PairRecord> records;  // ordered by (image_id, pair_id)
  std::vector<long> train_class_counts;
  std::optional<ZeroShotSplit> zero_shot;

  std::vector<long> recompute_train_counts() const;
  // rare = train count < 10
  std::vector<uint8_t> rare_mask() const;
};

struct SampleConfig {
  int n_images = 2000;
  int pairs_per_image = 2;
  double neg_ratio = 0.25;
  double train_frac = 0.7;
  double cooccur_prob = 0.1;  // chance of a second HOI on the same pair
};

WorldSpec generate_world(const WorldConfig& cfg, uint64_t seed);

DatasetManifest sample_dataset(const WorldSpec& world, const SampleConfig& cfg, uint64_t seed);

// Selects the unseen set from train counts and drops every train record
// whose label activates an unseen class. Test records are kept.
void apply_zero_shot(DatasetManifest& ds, ZsMode mode, int k, const CooccurrenceMaps& maps);

std::string world_to_json(const WorldSpec& world);
WorldSpec world_from_json(const std::string& text);

void write_world(const WorldSpec& world, const std::string& path);
WorldSpec read_world(const std::string& path);

void write_manifest(const DatasetManifest& ds, const std::string& path);
DatasetManifest read_manifest(const std::string& path);

}  // namespace fcl
