#include "fcl_model.hpp"

#include <algorithm>
#include <cmath>

namespace fcl {

Vec spatial_feature(const Box& h, const Box& o) {
  require(h.valid() && o.valid(), "spatial_feature: degenerate box");
  Box u{std::min(h.x1, o.x1), std::min(h.y1, o.y1), std::max(h.x2, o.x2), std::max(h.y2, o.y2)};
  double iw = std::max(0.0, std::min(h.x2, o.x2) - std::max(h.x1, o.x1));
  double ih = std::max(0.0, std::min(h.y2, o.y2) - std::max(h.y1, o.y1));
  double inter = iw * ih;
  double iou = inter / (h.area() + o.area() - inter);
  double ua = u.area();
  Vec f(kSpatialDim);
  f[0] = ((o.x1 + o.x2) - (h.x1 + h.x2)) / (2.0 * u.width());
  f[1] = ((o.y1 + o.y2) - (h.y1 + h.y2)) / (2.0 * u.height());
  f[2] = std::log(o.width() / h.width());
  f[3] = std::log(o.height() / h.height());
  f[4] = iou;
  f[5] = inter / ua;
  f[6] = h.area() / ua;
  f[7] = o.area() / ua;
  f[8] = h.width() / u.width();
  f[9] = h.height() / u.height();
  f[10] = o.width() / u.width();
  f[11] = o.height() / u.height();
  return f;
}

void FclParams::zero_grad() {
  spatial_head.zero_grad();
  spatial_cls.zero_grad();
  hoi_head.zero_grad();
  g_hoi.zero_grad();
  verb_head.zero_grad();
  fabricator.zero_grad();
  if (verb_fabricator) verb_fabricator->zero_grad();
}

std::vector<ParamRef> FclParams::backbone_params() {
  std::vector<ParamRef> out;
  spatial_head.collect("spatial_head", out);
  spatial_cls.collect("spatial_cls", out);
  hoi_head.collect("hoi_head", out);
  g_hoi.collect("g_hoi", out);
  verb_head.collect("verb_head", out);
  return out;
}

std::vector<ParamRef> FclParams::fabricator_params() {
  std::vector<ParamRef> out;
  fabricator.collect("fabricator", out);
  if (verb_fabricator) verb_fabricator->collect("verb_fabricator", out);
  return out;
}

std::vector<ParamRef> FclParams::all_params() {
  auto out = backbone_params();
  auto fab = fabricator_params();
  out.insert(out.end(), fab.begin(), fab.end());
  return out;
}

FclParams make_model(const ModelDims& dims, IdentityVariant variant, bool use_noise,
                     bool use_verb, bool with_verb_fabricator, Rng& backbone_rng,
                     Rng& fabricator_rng, const Mat* object_word_vecs) {
  require(dims.n_v > 0 && dims.n_o > 0 && dims.c > 0, "make_model: world dims unset");
  FclParams m;
  m.dims = dims;
  m.spatial_head = Mlp2(kSpatialDim + dims.d_h, dims.hidden, dims.hidden);
  m.spatial_cls = DenseLayer(dims.c, dims.hidden);
  m.hoi_head = Mlp2(dims.d_v + dims.d_o, dims.hidden, dims.hidden);
  m.g_hoi = DenseLayer(dims.c, dims.hidden);
  m.verb_head = DenseLayer(dims.n_v, dims.d_v);
  m.spatial_head.init_uniform(backbone_rng);
  m.spatial_cls.init_uniform(backbone_rng);
  m.hoi_head.init_uniform(backbone_rng);
  m.g_hoi.init_uniform(backbone_rng);
  m.verb_head.init_uniform(backbone_rng);

  IdentityTable id;
  switch (variant) {
    case IdentityVariant::learned:
      id = make_learned_identity(dims.n_o, dims.d_id, fabricator_rng);
      break;
    case IdentityVariant::one_hot:
      id = make_onehot_identity(dims.n_o);
      break;
    case IdentityVariant::word_vector:
      require(object_word_vecs != nullptr, "make_model: word_vector identity needs a table");
      require(object_word_vecs->rows == dims.n_o, "make_model: word-vector row count mismatch");
      id = make_wordvec_identity(*object_word_vecs);
      break;
  }
  m.fabricator = make_fabricator(std::move(id), dims.d_v, dims.d_n, dims.fab_hidden, dims.d_o,
                                 use_noise, use_verb, fabricator_rng);
  if (with_verb_fabricator) {
    IdentityTable vid = make_learned_identity(dims.n_v, dims.d_id, fabricator_rng);
    m.verb_fabricator = make_fabricator(std::move(vid), dims.d_o, dims.d_n, dims.fab_hidden,
                                        dims.d_v, use_noise, use_verb, fabricator_rng);
  }
  return m;
}

static Vec concat(const Vec& a, const Vec& b) {
  Vec out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

LossBreakdown forward_train(FclParams& params, const std::vector<PairFeatures>& batch,
                            const std::vector<CompositeSample>& composites,
                            const CooccurrenceMaps& maps, bool fill_grads) {
  require(!batch.empty(), "forward_train: empty batch");
  const Vec* cw = params.class_weights ? &*params.class_weights : nullptr;
  LossBreakdown lb;
  long n_real = static_cast<long>(batch.size());
  long n_labeled = 0;
  for (const auto& p : batch)
    if (p.labeled()) ++n_labeled;
  long n_comp = static_cast<long>(composites.size());
  lb.n_composites = n_comp;
  lb.n_labeled = n_labeled;

  const double scale_hoi = params.lambdas.l1 / n_real;
  const double scale_sp = 1.0 / n_real;
  const double scale_reg = n_labeled > 0 ? params.lambdas.l3 / n_labeled : 0.0;
  const double scale_cl = n_comp > 0 ? params.lambdas.l2 / n_comp : 0.0;

  Vec dlogits;
  for (const auto& pair : batch) {
    // HOI branch
    Mlp2Cache hc;
    Vec rep = params.hoi_head.forward(concat(pair.x_v, pair.x_o), fill_grads ? &hc : nullptr);
    Vec z = params.g_hoi.forward(rep);
    lb.l_hoi += bce_loss(z, pair.y, fill_grads ? &dlogits : nullptr, cw) / n_real;
    if (fill_grads) {
      for (auto& g : dlogits) g *= scale_hoi;
      Vec drep = params.g_hoi.backward(rep, dlogits);
      params.hoi_head.backward(hc, drep);
    }

    // spatial HOI branch
    Mlp2Cache sc;
    Vec srep = params.spatial_head.forward(concat(pair.x_sp, pair.x_h), fill_grads ? &sc : nullptr);
    Vec zs = params.spatial_cls.forward(srep);
    lb.l_hoi_sp += bce_loss(zs, pair.y, fill_grads ? &dlogits : nullptr, cw) / n_real;
    if (fill_grads) {
      for (auto& g : dlogits) g *= scale_sp;
      Vec dsrep = params.spatial_cls.backward(srep, dlogits);
      params.spatial_head.backward(sc, dsrep);
    }

    // verb regularization, real labeled samples only
    if (pair.labeled() && n_labeled > 0) {
      BitVec l_v = decompose_verbs(pair.y, maps);
      Vec zv = params.verb_head.forward(pair.x_v);
      lb.l_reg += bce_loss(zv, l_v, fill_grads ? &dlogits : nullptr) / n_labeled;
      if (fill_grads) {
        for (auto& g : dlogits) g *= scale_reg;
        params.verb_head.backward(pair.x_v, dlogits);
      }
    }
  }

  // fabricated compositional branch, shared hoi_head / g_hoi
  for (const auto& comp : composites) {
    const auto& src = batch.at(static_cast<size_t>(comp.source_index));
    FabricateCache fc;
    Vec x_v, x_o;
    FabricatorParams* fab = nullptr;
    if (comp.verb_id >= 0) {
      fab = params.verb_fabricator ? &*params.verb_fabricator : nullptr;
      require(fab != nullptr, "forward_train: verb composite without verb fabricator");
      x_v = fabricate(*fab, comp.verb_id, src.x_o, comp.noise, fill_grads ? &fc : nullptr);
      x_o = src.x_o;
    } else {
      fab = &params.fabricator;
      x_v = src.x_v;
      x_o = fabricate(*fab, comp.object_id, src.x_v, comp.noise, fill_grads ? &fc : nullptr);
    }
    Mlp2Cache hc;
    Vec in = concat(x_v, x_o);
    Vec rep = params.hoi_head.forward(in, fill_grads ? &hc : nullptr);
    Vec z = params.g_hoi.forward(rep);
    lb.l_cl += bce_loss(z, comp.y_hat, fill_grads ? &dlogits : nullptr, cw) / std::max(1L, n_comp);
    if (fill_grads) {
      for (auto& g : dlogits) g *= scale_cl;
      Vec drep = params.g_hoi.backward(rep, dlogits);
      Vec din = params.hoi_head.backward(hc, drep);
      int d_v = params.dims.d_v;
      if (comp.verb_id >= 0) {
        Vec dxv(din.begin(), din.begin() + d_v);
        fabricate_backward(*fab, fc, dxv);
      } else {
        Vec dxo(din.begin() + d_v, din.end());
        fabricate_backward(*fab, fc, dxo);
      }
    }
  }

  lb.total = params.lambdas.l1 * lb.l_hoi + params.lambdas.l2 * lb.l_cl +
             params.lambdas.l3 * lb.l_reg + lb.l_hoi_sp;
  return lb;
}

BranchScores branch_scores(const FclParams& p, const PairFeatures& pair) {
  BranchScores s;
  Vec zs = p.spatial_cls.forward(p.spatial_head.forward(concat(pair.x_sp, pair.x_h)));
  Vec z = p.g_hoi.forward(p.hoi_head.forward(concat(pair.x_v, pair.x_o)));
  s.s_sp.resize(zs.size());
  s.s_hoi.resize(z.size());
  for (size_t c = 0; c < zs.size(); ++c) s.s_sp[c] = sigmoid(zs[c]);
  for (size_t c = 0; c < z.size(); ++c) s.s_hoi[c] = sigmoid(z[c]);
  s.s_h = pair.s_h;
  s.s_o = pair.s_o;
  return s;
}

Vec forward_infer(const FclParams& p, const PairFeatures& pair) {
  BranchScores s = branch_scores(p, pair);
  Vec out(s.s_hoi.size());
  for (size_t c = 0; c < out.size(); ++c) out[c] = s.s_h * s.s_o * s.s_sp[c] * s.s_hoi[c];
  return out;
}

Vec factorized_score(const Vec& s_v, const Vec& s_o_cls, const CooccurrenceMaps& maps) {
  require(static_cast<int>(s_v.size()) == maps.n_v, "factorized_score: verb score length");
  require(static_cast<int>(s_o_cls.size()) == maps.n_o, "factorized_score: object score length");
  Vec out(static_cast<size_t>(maps.c));
  for (int k = 0; k < maps.c; ++k) out[k] = s_o_cls[maps.object_of(k)] + s_v[maps.verb_of(k)];
  return out;
}

Vec object_score_fusion(const Vec& s_sp, const Vec& s_hoi, const Vec& s_o_cls,
                        const CooccurrenceMaps& maps, double beta1, double beta2) {
  require(static_cast<int>(s_sp.size()) == maps.c && static_cast<int>(s_hoi.size()) == maps.c,
          "object_score_fusion: class score length");
  require(static_cast<int>(s_o_cls.size()) == maps.n_o, "object_score_fusion: object score length");
  Vec out(static_cast<size_t>(maps.n_o), 0.0);
  for (int i = 0; i < maps.n_o; ++i) {
    double acc = 0.0;
    long b = 0;
    for (int k = 0; k < maps.c; ++k) {
      if (maps.a_o(i, k) > 0.0) {
        acc += s_sp[k] * s_hoi[k];
        ++b;
      }
    }
    require(b > 0, "object_score_fusion: object with zero HOI classes");
    out[i] = beta1 * acc / b + beta2 * s_o_cls[i];
  }
  return out;
}

double semantic_verb_reg(DenseLayer& proj, const Vec& x_v, const Mat& verb_word_vecs,
                         const BitVec& l_v, bool fill_grads) {
  require(static_cast<int>(l_v.size()) == verb_word_vecs.rows, "semantic_verb_reg: label length");
  long n_active = 0;
  for (auto b : l_v)
    if (b) ++n_active;
  require(n_active > 0, "semantic_verb_reg: no active verb");
  Vec p = proj.forward(x_v);
  double pn = 0.0;
  for (double v : p) pn += v * v;
  pn = std::sqrt(pn);
  require(pn > 0.0, "semantic_verb_reg: zero-norm projection");
  double loss = 0.0;
  Vec dp(p.size(), 0.0);
  for (int i = 0; i < verb_word_vecs.rows; ++i) {
    if (!l_v[i]) continue;
    double wn = 0.0, dot = 0.0;
    for (int c = 0; c < verb_word_vecs.cols; ++c) {
      double w = verb_word_vecs(i, c);
      wn += w * w;
      dot += w * p[c];
    }
    wn = std::sqrt(wn);
    require(wn > 0.0, "semantic_verb_reg: zero-norm word vector");
    double cosv = dot / (pn * wn);
    loss += (1.0 - cosv) / n_active;
    if (fill_grads) {
      for (int c = 0; c < verb_word_vecs.cols; ++c) {
        double dcos_dpc = verb_word_vecs(i, c) / (pn * wn) - dot * p[c] / (pn * pn * pn * wn);
        dp[c] += -dcos_dpc / n_active;
      }
    }
  }
  if (fill_grads) proj.backward(x_v, dp);
  return loss;
}

}  // namespace fcl
