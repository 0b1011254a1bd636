#include "label_algebra.hpp"

#include <algorithm>
#include <numeric>

#include "json.hpp"

namespace fcl {

int CooccurrenceMaps::class_of(int verb, int object) const {
  for (int k = 0; k < c; ++k)
    if (hoi_defs[k].first == verb && hoi_defs[k].second == object) return k;
  return -1;
}

CooccurrenceMaps build_cooccurrence(int n_v, int n_o,
                                    const std::vector<std::pair<int, int>>& hoi_defs) {
  require(n_v > 0 && n_o > 0, "build_cooccurrence: counts must be positive");
  require(!hoi_defs.empty(), "build_cooccurrence: empty class list");
  std::set<std::pair<int, int>> seen;
  for (const auto& [v, o] : hoi_defs) {
    require(v >= 0 && v < n_v, "build_cooccurrence: verb id out of range");
    require(o >= 0 && o < n_o, "build_cooccurrence: object id out of range");
    require(seen.insert({v, o}).second, "build_cooccurrence: duplicate (verb, object) pair");
  }
  CooccurrenceMaps m;
  m.n_v = n_v;
  m.n_o = n_o;
  m.c = static_cast<int>(hoi_defs.size());
  m.hoi_defs = hoi_defs;
  m.a_v = Mat(n_v, m.c);
  m.a_o = Mat(n_o, m.c);
  for (int k = 0; k < m.c; ++k) {
    m.a_v(hoi_defs[k].first, k) = 1.0;
    m.a_o(hoi_defs[k].second, k) = 1.0;
  }
  return m;
}

static BitVec decompose(const BitVec& y, const Mat& a, int n, int c) {
  require(static_cast<int>(y.size()) == c, "decompose: label length mismatch");
  BitVec l(static_cast<size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int k = 0; k < c; ++k) s += y[k] * a(i, k);
    l[i] = s > 0.0 ? 1 : 0;  // clamp multi-hot products to {0,1}
  }
  return l;
}

BitVec decompose_verbs(const BitVec& y, const CooccurrenceMaps& maps) {
  return decompose(y, maps.a_v, maps.n_v, maps.c);
}

BitVec decompose_objects(const BitVec& y, const CooccurrenceMaps& maps) {
  return decompose(y, maps.a_o, maps.n_o, maps.c);
}

BitVec compose_label(const BitVec& l_v, const BitVec& l_o, const CooccurrenceMaps& maps) {
  require(static_cast<int>(l_v.size()) == maps.n_v, "compose_label: verb label length mismatch");
  require(static_cast<int>(l_o.size()) == maps.n_o, "compose_label: object label length mismatch");
  BitVec y(static_cast<size_t>(maps.c), 0);
  for (int k = 0; k < maps.c; ++k) {
    double sv = 0.0, so = 0.0;
    for (int i = 0; i < maps.n_v; ++i) sv += l_v[i] * maps.a_v(i, k);
    for (int j = 0; j < maps.n_o; ++j) so += l_o[j] * maps.a_o(j, k);
    y[k] = (sv > 0.0 && so > 0.0) ? 1 : 0;
  }
  return y;
}

bool is_feasible(const BitVec& y_hat) {
  return std::any_of(y_hat.begin(), y_hat.end(), [](uint8_t b) { return b != 0; });
}

ObjectExpansion expand_all_objects(const BitVec& l_v, const CooccurrenceMaps& maps) {
  ObjectExpansion out;
  out.labels = Mat(maps.c, maps.n_o);
  out.feasible_mask.assign(static_cast<size_t>(maps.n_o), 0);
  BitVec e(static_cast<size_t>(maps.n_o), 0);
  for (int j = 0; j < maps.n_o; ++j) {
    e[j] = 1;
    BitVec col = compose_label(l_v, e, maps);
    e[j] = 0;
    for (int k = 0; k < maps.c; ++k) out.labels(k, j) = col[k];
    out.feasible_mask[j] = is_feasible(col) ? 1 : 0;
  }
  return out;
}

ZeroShotSplit select_unseen(ZsMode mode, const std::vector<long>& counts, int k,
                            const CooccurrenceMaps& maps) {
  require(static_cast<int>(counts.size()) == maps.c, "select_unseen: counts length mismatch");
  ZeroShotSplit split;
  split.mode = mode;
  if (mode == ZsMode::unseen_object) {
    require(k > 0 && k < maps.n_o, "select_unseen: held-out object count out of range");
    std::vector<long> obj_counts(maps.n_o, 0);
    for (int c = 0; c < maps.c; ++c) obj_counts[maps.object_of(c)] += counts[c];
    std::vector<int> order(maps.n_o);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return obj_counts[a] < obj_counts[b]; });
    for (int i = 0; i < k; ++i) split.unseen_object_ids.insert(order[i]);
    for (int c = 0; c < maps.c; ++c)
      if (split.unseen_object_ids.count(maps.object_of(c)))
        split.unseen_hoi_ids.insert(c);
  } else {
    require(k > 0 && k < maps.c, "select_unseen: k out of range");
    std::vector<int> order(maps.c);
    std::iota(order.begin(), order.end(), 0);
    // ties broken by ascending class id (stable sort over id order)
    if (mode == ZsMode::rare_first)
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return counts[a] < counts[b]; });
    else
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return counts[a] > counts[b]; });
    for (int i = 0; i < k; ++i) split.unseen_hoi_ids.insert(order[i]);
  }
  for (int c = 0; c < maps.c; ++c)
    if (!split.unseen_hoi_ids.count(c)) split.seen_hoi_ids.insert(c);
  return split;
}

std::string maps_to_json(const CooccurrenceMaps& maps) {
  nlohmann::json j;
  j["n_v"] = maps.n_v;
  j["n_o"] = maps.n_o;
  j["hoi_defs"] = nlohmann::json::array();
  for (const auto& [v, o] : maps.hoi_defs) j["hoi_defs"].push_back({v, o});
  return j.dump();
}

CooccurrenceMaps maps_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw io_error(std::string("co-occurrence json parse failed: ") + e.what());
  }
  std::vector<std::pair<int, int>> defs;
  for (const auto& p : j.at("hoi_defs")) defs.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
  return build_cooccurrence(j.at("n_v").get<int>(), j.at("n_o").get<int>(), defs);
}

}  // namespace fcl
