#pragma once

#include <optional>

#include "composition_engine.hpp"

namespace fcl {

// Deterministic 12-d geometric encoding of a human/object box pair:
// center offsets, log size ratios, IoU, intersection/area ratios, and
// both boxes normalized by the union box.
Vec spatial_feature(const Box& human, const Box& object);
inline constexpr int kSpatialDim = 12;

struct ModelDims {
  int d_h = 16;
  int d_o = 64;
  int d_v = 64;
  int hidden = 32;
  int d_id = 16;
  int d_n = 16;
  int fab_hidden = 32;
  int n_v = 0;
  int n_o = 0;
  int c = 0;
};

struct Lambdas {
  double l1 = 2.0;   // L_hoi
  double l2 = 0.5;   // L_CL
  double l3 = 0.3;   // L_reg (spatial term has coefficient 1)
};

// Multi-branch model. The HOI branch and the fabricated compositional
// branch share hoi_head and g_hoi (same storage).
struct FclParams {
  ModelDims dims;
  Mlp2 spatial_head;         // concat(x_sp, x_h) -> rep
  DenseLayer spatial_cls;    // rep -> C, the spatial branch's own classifier
  Mlp2 hoi_head;             // concat(x_v, x_o) -> rep
  DenseLayer g_hoi;          // rep -> C, shared by real and composite HOIs
  DenseLayer verb_head;      // x_v -> N_v
  FabricatorParams fabricator;
  std::optional<FabricatorParams> verb_fabricator;  // ablation arm
  Lambdas lambdas;
  std::optional<Vec> class_weights;

  void zero_grad();
  // everything except the fabricators
  std::vector<ParamRef> backbone_params();
  std::vector<ParamRef> fabricator_params();
  std::vector<ParamRef> all_params();
};

FclParams make_model(const ModelDims& dims, IdentityVariant variant, bool use_noise,
                     bool use_verb, bool with_verb_fabricator, Rng& backbone_rng,
                     Rng& fabricator_rng, const Mat* object_word_vecs = nullptr);

struct LossBreakdown {
  double total = 0.0;
  double l_hoi = 0.0;
  double l_cl = 0.0;
  double l_reg = 0.0;
  double l_hoi_sp = 0.0;
  long n_composites = 0;
  long n_labeled = 0;  // real labeled pairs in the batch
};

// L = l1*L_hoi + l2*L_CL + l3*L_reg + L_hoi_sp, each term averaged over its
// own sample count. Accumulates gradients into the param buffers when
// fill_grads is set. Negatives contribute to L_hoi and L_hoi_sp only.
LossBreakdown forward_train(FclParams& params, const std::vector<PairFeatures>& batch,
                            const std::vector<CompositeSample>& composites,
                            const CooccurrenceMaps& maps, bool fill_grads);

struct BranchScores {
  Vec s_sp;   // length C, sigmoid outputs
  Vec s_hoi;  // length C
  double s_h = 1.0;
  double s_o = 1.0;
};

BranchScores branch_scores(const FclParams& params, const PairFeatures& pair);

// S^c = s_h * s_o * S^c_sp * S^c_hoi; the fabricated branch is unused here
Vec forward_infer(const FclParams& params, const PairFeatures& pair);

// Factorized baseline: S_hoi[c] = s_o_cls[obj(c)] + s_v[verb(c)]
Vec factorized_score(const Vec& s_v, const Vec& s_o_cls, const CooccurrenceMaps& maps);

// s_hat_o = beta1 * ((s_sp .* s_hoi) A_o^T) / B + beta2 * s_o_cls,
// B_i = number of HOI classes with object i
Vec object_score_fusion(const Vec& s_sp, const Vec& s_hoi, const Vec& s_o_cls,
                        const CooccurrenceMaps& maps, double beta1 = 0.3, double beta2 = 0.7);

// Mean over active verbs of (1 - cos(proj(x_v), word_vec(verb))).
// Accumulates gradients into proj when fill_grads is set.
double semantic_verb_reg(DenseLayer& proj, const Vec& x_v, const Mat& verb_word_vecs,
                         const BitVec& l_v, bool fill_grads);

}  // namespace fcl
