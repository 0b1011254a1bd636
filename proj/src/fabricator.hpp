#pragma once

#include "nn_core.hpp"

namespace fcl {

enum class IdentityVariant { learned, word_vector, one_hot };

// Per-object identity embeddings. one_hot rows are the identity basis and
// frozen; word_vector rows are loaded from file and frozen; learned rows
// are trainable.
struct IdentityTable {
  IdentityVariant variant = IdentityVariant::learned;
  Mat table;   // n_o x d_id
  Mat grad;    // same shape, used only when trainable
  bool trainable() const { return variant == IdentityVariant::learned; }
  int n_o() const { return table.rows; }
  int d_id() const { return table.cols; }
};

IdentityTable make_learned_identity(int n_o, int d_id, Rng& rng);
IdentityTable make_onehot_identity(int n_o);
IdentityTable make_wordvec_identity(const Mat& rows);
// Plain text, one object per line: "object_id f0 f1 ... f{d-1}"
IdentityTable load_wordvec_identity(const std::string& path, int n_o);

struct FabricatorParams {
  IdentityTable identity;
  Mlp2 net;          // (d_id [+ d_cond] [+ d_n]) -> d_out
  int d_cond = 0;    // conditioning feature dim (verb for object fabrication)
  int d_n = 16;
  bool use_noise = true;
  bool use_verb = true;

  int in_dim() const {
    return identity.d_id() + (use_verb ? d_cond : 0) + (use_noise ? d_n : 0);
  }
  int out_dim() const { return net.out_dim(); }
  void zero_grad();
  void collect(const std::string& prefix, std::vector<ParamRef>& out);
  // includes frozen identity tables, for serialization
  void collect_tensors(const std::string& prefix, std::vector<ParamRef>& out);
};

FabricatorParams make_fabricator(IdentityTable identity, int d_cond, int d_n, int hidden,
                                 int d_out, bool use_noise, bool use_verb, Rng& rng);

Vec draw_noise(const FabricatorParams& p, Rng& rng);

struct FabricateCache {
  int object_id = -1;
  Mlp2Cache net;
};

// x_hat_o = net(concat(v_id[j] [, x_v] [, eps])). Pass the noise explicitly so
// a fixed draw gives a deterministic, differentiable function of the params.
Vec fabricate(const FabricatorParams& p, int object_id, const Vec& x_v, const Vec& noise,
              FabricateCache* cache = nullptr);

// dL/dx_hat_o back to net and (when learned) the identity row; returns dL/dx_v.
Vec fabricate_backward(FabricatorParams& p, const FabricateCache& cache, const Vec& dy);

// Row j = fabricate(p, j, x_v, fresh noise)
Mat fabricate_all(const FabricatorParams& p, const Vec& x_v, Rng& rng);

}  // namespace fcl
