#pragma once

#include <set>
#include <utility>
#include <vector>

#include "common.hpp"

namespace fcl {

// Binary verb/object-to-class maps. Each HOI class is exactly one
// (verb, object) pair, so every column of a_v and a_o is one-hot.
struct CooccurrenceMaps {
  int n_v = 0;
  int n_o = 0;
  int c = 0;
  Mat a_v;  // n_v x c
  Mat a_o;  // n_o x c
  std::vector<std::pair<int, int>> hoi_defs;  // class id -> (verb, object)

  int verb_of(int cls) const { return hoi_defs[cls].first; }
  int object_of(int cls) const { return hoi_defs[cls].second; }
  // class id for (verb, object), or -1 if the pair is not an HOI class
  int class_of(int verb, int object) const;
};

enum class ZsMode { rare_first, nonrare_first, unseen_object };

struct ZeroShotSplit {
  ZsMode mode = ZsMode::rare_first;
  std::set<int> unseen_hoi_ids;
  std::set<int> seen_hoi_ids;
  std::set<int> unseen_object_ids;  // populated in unseen_object mode
};

CooccurrenceMaps build_cooccurrence(int n_v, int n_o,
                                    const std::vector<std::pair<int, int>>& hoi_defs);

// l_v[i] = 1 iff some active class in y has verb i (products clamped to {0,1})
BitVec decompose_verbs(const BitVec& y, const CooccurrenceMaps& maps);
BitVec decompose_objects(const BitVec& y, const CooccurrenceMaps& maps);

// y_hat = (l_o . a_o) AND (l_v . a_v); infeasible pairs come out all-zero
BitVec compose_label(const BitVec& l_v, const BitVec& l_o, const CooccurrenceMaps& maps);

bool is_feasible(const BitVec& y_hat);

struct ObjectExpansion {
  Mat labels;                 // c x n_o, column j = compose_label(l_v, e_j)
  std::vector<uint8_t> feasible_mask;  // length n_o
};

ObjectExpansion expand_all_objects(const BitVec& l_v, const CooccurrenceMaps& maps);

// rare_first: k smallest train counts (ties by id); nonrare_first: k largest;
// unseen_object: every class whose object is among the k held-out objects
// (held-out objects = the k objects with smallest summed train counts, ties by id).
ZeroShotSplit select_unseen(ZsMode mode, const std::vector<long>& train_class_counts,
                            int k, const CooccurrenceMaps& maps);

std::string maps_to_json(const CooccurrenceMaps& maps);
CooccurrenceMaps maps_from_json(const std::string& text);

}  // namespace fcl
