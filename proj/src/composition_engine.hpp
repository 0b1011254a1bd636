#pragma once

#include <optional>

#include "fabricator.hpp"
#include "label_algebra.hpp"
#include "types.hpp"

namespace fcl {

// One composite HOI training sample: a real verb feature paired with a
// fabricated object. The object feature itself is produced inside the
// training forward pass (from the stored noise draw), so gradients reach
// the fabricator.
struct CompositeSample {
  int source_index = -1;  // real sample donating x_v
  int object_id = -1;     // fabricated object class
  int verb_id = -1;       // set instead of object_id by the verb-fabricator arm
  BitVec y_hat;           // feasible by construction
  Vec noise;              // frozen noise draw for this composite
};

struct SimilarityTable {
  Mat sim;                                   // n_o x n_o cosine similarities
  std::vector<std::vector<int>> neighbors;   // per row, all ids sorted by sim desc, ties by id
};

SimilarityTable build_similarity(const Mat& word_vec_table);

struct CompositionStats {
  long candidates = 0;
  long feasible = 0;
  long after_topk = 0;
  long after_cap = 0;
};

// For every labeled real sample, expand its verb label over all N_o objects,
// keep the feasible (and, with topk set, neighbor-compatible) ones, then
// uniformly subsample so that the total is at most cap x (labeled samples).
std::vector<CompositeSample> compose_minibatch(
    const std::vector<PairFeatures>& batch, const FabricatorParams& fabricator,
    const CooccurrenceMaps& maps, double cap, std::optional<int> topk,
    const SimilarityTable* sim, Rng& rng, CompositionStats* stats = nullptr);

// Mirror image for the verb-fabricator ablation: real objects paired with
// fabricated verbs, labels compose_label(e_v, l_o).
std::vector<CompositeSample> compose_verb_minibatch(
    const std::vector<PairFeatures>& batch, const FabricatorParams& verb_fabricator,
    const CooccurrenceMaps& maps, double cap, Rng& rng);

}  // namespace fcl
