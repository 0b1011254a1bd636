#include "composition_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fcl {

SimilarityTable build_similarity(const Mat& table) {
  require(table.rows > 0 && table.cols > 0, "build_similarity: empty table");
  int n = table.rows;
  std::vector<double> norms(n);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int c = 0; c < table.cols; ++c) s += table(i, c) * table(i, c);
    require(s > 0.0, "build_similarity: zero row " + std::to_string(i));
    norms[i] = std::sqrt(s);
  }
  SimilarityTable out;
  out.sim = Mat(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double dot = 0.0;
      for (int c = 0; c < table.cols; ++c) dot += table(i, c) * table(j, c);
      out.sim(i, j) = dot / (norms[i] * norms[j]);
    }
  out.neighbors.resize(n);
  for (int i = 0; i < n; ++i) {
    auto& nb = out.neighbors[i];
    nb.resize(n);
    std::iota(nb.begin(), nb.end(), 0);
    std::stable_sort(nb.begin(), nb.end(),
                     [&](int a, int b) { return out.sim(i, a) > out.sim(i, b); });
  }
  return out;
}

std::vector<CompositeSample> compose_minibatch(
    const std::vector<PairFeatures>& batch, const FabricatorParams& fabricator,
    const CooccurrenceMaps& maps, double cap, std::optional<int> topk,
    const SimilarityTable* sim, Rng& rng, CompositionStats* stats) {
  require(!batch.empty(), "compose_minibatch: empty batch");
  require(cap >= 0.0, "compose_minibatch: negative cap");
  if (topk) require(sim != nullptr, "compose_minibatch: topk needs a similarity table");

  CompositionStats st;
  std::vector<CompositeSample> survivors;
  long n_labeled = 0;
  for (size_t i = 0; i < batch.size(); ++i) {
    const auto& pair = batch[i];
    if (!pair.labeled()) continue;  // negatives donate no verbs
    ++n_labeled;
    BitVec l_v = decompose_verbs(pair.y, maps);
    BitVec l_o = decompose_objects(pair.y, maps);

    // union of top-K neighbor lists over the sample's original objects
    std::vector<uint8_t> allowed(static_cast<size_t>(maps.n_o), topk ? 0 : 1);
    if (topk) {
      int k = std::min(*topk, maps.n_o);
      for (int j = 0; j < maps.n_o; ++j)
        if (l_o[j])
          for (int t = 0; t < k; ++t) allowed[sim->neighbors[j][t]] = 1;
    }

    ObjectExpansion exp = expand_all_objects(l_v, maps);
    st.candidates += maps.n_o;
    for (int j = 0; j < maps.n_o; ++j) {
      if (!exp.feasible_mask[j]) continue;
      ++st.feasible;
      if (!allowed[j]) continue;
      ++st.after_topk;
      CompositeSample c;
      c.source_index = static_cast<int>(i);
      c.object_id = j;
      c.y_hat.resize(static_cast<size_t>(maps.c));
      for (int cls = 0; cls < maps.c; ++cls)
        c.y_hat[cls] = exp.labels(cls, j) > 0.0 ? 1 : 0;
      survivors.push_back(std::move(c));
    }
  }
  require(n_labeled > 0, "compose_minibatch: batch has no labeled real pair");

  // subsample uniformly, pooled across the batch, down to the cap
  auto limit = static_cast<size_t>(std::floor(cap * static_cast<double>(n_labeled)));
  if (survivors.size() > limit) {
    std::shuffle(survivors.begin(), survivors.end(), rng);
    survivors.resize(limit);
    std::sort(survivors.begin(), survivors.end(), [](const auto& a, const auto& b) {
      return std::tie(a.source_index, a.object_id) < std::tie(b.source_index, b.object_id);
    });
  }
  st.after_cap = static_cast<long>(survivors.size());
  for (auto& c : survivors) c.noise = draw_noise(fabricator, rng);
  if (stats) *stats = st;
  return survivors;
}

std::vector<CompositeSample> compose_verb_minibatch(
    const std::vector<PairFeatures>& batch, const FabricatorParams& verb_fabricator,
    const CooccurrenceMaps& maps, double cap, Rng& rng) {
  require(!batch.empty(), "compose_verb_minibatch: empty batch");
  std::vector<CompositeSample> survivors;
  long n_labeled = 0;
  for (size_t i = 0; i < batch.size(); ++i) {
    const auto& pair = batch[i];
    if (!pair.labeled()) continue;
    ++n_labeled;
    BitVec l_o = decompose_objects(pair.y, maps);
    BitVec e_v(static_cast<size_t>(maps.n_v), 0);
    for (int v = 0; v < maps.n_v; ++v) {
      e_v[v] = 1;
      BitVec y_hat = compose_label(e_v, l_o, maps);
      e_v[v] = 0;
      if (!is_feasible(y_hat)) continue;
      CompositeSample c;
      c.source_index = static_cast<int>(i);
      c.verb_id = v;
      c.y_hat = std::move(y_hat);
      survivors.push_back(std::move(c));
    }
  }
  require(n_labeled > 0, "compose_verb_minibatch: batch has no labeled real pair");
  auto limit = static_cast<size_t>(std::floor(cap * static_cast<double>(n_labeled)));
  if (survivors.size() > limit) {
    std::shuffle(survivors.begin(), survivors.end(), rng);
    survivors.resize(limit);
    std::sort(survivors.begin(), survivors.end(), [](const auto& a, const auto& b) {
      return std::tie(a.source_index, a.verb_id) < std::tie(b.source_index, b.verb_id);
    });
  }
  for (auto& c : survivors) c.noise = draw_noise(verb_fabricator, rng);
  return survivors;
}

}  // namespace fcl
