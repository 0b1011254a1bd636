#include "synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fcl_model.hpp"
#include "json.hpp"

namespace fcl {

namespace {

constexpr int kWordDim = 16;
constexpr int kManifestVersion = 1;

Mat random_mat(int rows, int cols, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat m(rows, cols);
  for (auto& v : m.d) v = u(rng);
  return m;
}

Vec embed_to(const Mat& protos, int row, int d) {
  Vec out(static_cast<size_t>(d), 0.0);
  int n = std::min(d, protos.cols);
  for (int c = 0; c < n; ++c) out[c] = protos(row, c);
  return out;
}

Box sample_box(Rng& rng, double cx_lo, double cx_hi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double cx = cx_lo + (cx_hi - cx_lo) * u(rng);
  double cy = 0.2 + 0.6 * u(rng);
  double w = 0.15 + 0.2 * u(rng);
  double h = 0.15 + 0.2 * u(rng);
  Box b{cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
  b.x1 = std::clamp(b.x1, 0.0, 0.98);
  b.y1 = std::clamp(b.y1, 0.0, 0.98);
  b.x2 = std::clamp(b.x2, b.x1 + 0.01, 1.0);
  b.y2 = std::clamp(b.y2, b.y1 + 0.01, 1.0);
  return b;
}

}  // namespace

WorldSpec generate_world(const WorldConfig& cfg, uint64_t seed) {
  require(cfg.n_v > 0 && cfg.n_o > 0 && cfg.c > 0, "generate_world: bad counts");
  require(cfg.c <= cfg.n_v * cfg.n_o, "generate_world: more classes than verb-object pairs");
  require(cfg.c >= std::max(cfg.n_v, cfg.n_o),
          "generate_world: too few classes to cover every verb and object");
  Rng rng = make_rng(seed, 101);

  // cover every verb and every object first, then fill with distinct pairs
  std::vector<int> verbs(cfg.n_v), objects(cfg.n_o);
  std::iota(verbs.begin(), verbs.end(), 0);
  std::iota(objects.begin(), objects.end(), 0);
  std::shuffle(verbs.begin(), verbs.end(), rng);
  std::shuffle(objects.begin(), objects.end(), rng);
  std::set<std::pair<int, int>> used;
  std::vector<std::pair<int, int>> defs;
  int m = std::max(cfg.n_v, cfg.n_o);
  for (int i = 0; i < m; ++i) {
    std::pair<int, int> p{verbs[i % cfg.n_v], objects[i % cfg.n_o]};
    if (used.insert(p).second) defs.push_back(p);
  }
  std::uniform_int_distribution<int> dv(0, cfg.n_v - 1), dob(0, cfg.n_o - 1);
  while (static_cast<int>(defs.size()) < cfg.c) {
    std::pair<int, int> p{dv(rng), dob(rng)};
    if (used.insert(p).second) defs.push_back(p);
  }
  std::sort(defs.begin(), defs.end());

  WorldSpec w;
  w.cfg = cfg;
  w.seed = seed;
  w.maps = build_cooccurrence(cfg.n_v, cfg.n_o, defs);
  w.object_prototypes = random_mat(cfg.n_o, cfg.d_o, rng);
  w.verb_prototypes = random_mat(cfg.n_v, cfg.d_v, rng);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  w.human_prototype.resize(static_cast<size_t>(cfg.d_h));
  for (auto& v : w.human_prototype) v = u(rng);
  // word vectors track the feature prototypes (plus jitter), the way text
  // embeddings track visual similarity
  std::normal_distribution<double> jitter(0.0, 0.1);
  auto word_vecs = [&](const Mat& protos) {
    Mat wv(protos.rows, kWordDim);
    for (int r = 0; r < protos.rows; ++r)
      for (int i = 0; i < kWordDim; ++i)
        wv(r, i) = (i < protos.cols ? protos(r, i) : 0.0) + jitter(rng);
    return wv;
  };
  w.object_word_vecs = word_vecs(w.object_prototypes);
  w.verb_word_vecs = word_vecs(w.verb_prototypes);
  return w;
}

DatasetManifest sample_dataset(const WorldSpec& world, const SampleConfig& cfg, uint64_t seed) {
  require(cfg.n_images > 0 && cfg.pairs_per_image > 0, "sample_dataset: bad counts");
  require(cfg.neg_ratio >= 0.0 && cfg.neg_ratio < 1.0, "sample_dataset: bad neg_ratio");
  const auto& maps = world.maps;
  const auto& wc = world.cfg;

  // Zipf over a random permutation of classes
  Rng perm_rng = make_rng(seed, 201);
  std::vector<int> rank_of(wc.c);
  std::iota(rank_of.begin(), rank_of.end(), 0);
  std::shuffle(rank_of.begin(), rank_of.end(), perm_rng);
  std::vector<double> weights(wc.c);
  for (int k = 0; k < wc.c; ++k)
    weights[k] = std::pow(static_cast<double>(rank_of[k] + 1), -wc.zipf_s);
  std::discrete_distribution<int> zipf(weights.begin(), weights.end());

  DatasetManifest ds;
  ds.world_hash = fnv1a(world_to_json(world));
  ds.c = wc.c;
  ds.d_v = wc.d_v;
  ds.d_o = wc.d_o;
  ds.d_h = wc.d_h;

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> uoff(-1.0, 1.0);
  for (int img = 0; img < cfg.n_images; ++img) {
    Rng rng = make_rng(seed, 1000 + static_cast<uint64_t>(img));
    bool train = u01(rng) < cfg.train_frac;
    for (int p = 0; p < cfg.pairs_per_image; ++p) {
      PairRecord rec;
      rec.image_id = img;
      rec.pair_id = p;
      rec.train = train;
      auto& f = rec.feat;
      f.y.assign(static_cast<size_t>(wc.c), 0);
      f.human_box = sample_box(rng, 0.25, 0.5);
      f.object_box = sample_box(rng, 0.4, 0.75);
      f.s_h = 0.5 + 0.5 * u01(rng);
      f.s_o = 0.5 + 0.5 * u01(rng);
      bool negative = u01(rng) < cfg.neg_ratio;
      f.x_h.resize(static_cast<size_t>(wc.d_h));
      for (size_t i = 0; i < f.x_h.size(); ++i)
        f.x_h[i] = world.human_prototype[i] + wc.sigma_v * gauss(rng);
      if (negative) {
        f.x_o.resize(static_cast<size_t>(wc.d_o));
        f.x_v.resize(static_cast<size_t>(wc.d_v));
        for (auto& v : f.x_o) v = uoff(rng);
        for (auto& v : f.x_v) v = uoff(rng);
      } else {
        int cls = zipf(rng);
        f.y[cls] = 1;
        int verb = maps.verb_of(cls);
        int obj = maps.object_of(cls);
        if (u01(rng) < cfg.cooccur_prob) {
          // second HOI sharing the same object box
          std::vector<int> others;
          for (int k = 0; k < wc.c; ++k)
            if (k != cls && maps.object_of(k) == obj) others.push_back(k);
          if (!others.empty()) {
            std::uniform_int_distribution<size_t> pick(0, others.size() - 1);
            f.y[others[pick(rng)]] = 1;
          }
        }
        Vec emb = embed_to(world.object_prototypes, obj, wc.d_v);
        Vec vemb = embed_to(world.verb_prototypes, verb, wc.d_o);
        f.x_o.resize(static_cast<size_t>(wc.d_o));
        f.x_v.resize(static_cast<size_t>(wc.d_v));
        for (int i = 0; i < wc.d_o; ++i)
          f.x_o[i] = world.object_prototypes(obj, i) + wc.beta * vemb[i] + wc.sigma_o * gauss(rng);
        for (int i = 0; i < wc.d_v; ++i)
          f.x_v[i] = world.verb_prototypes(verb, i) + wc.alpha * emb[i] + wc.sigma_v * gauss(rng);
      }
      f.x_sp = spatial_feature(f.human_box, f.object_box);
      ds.records.push_back(std::move(rec));
    }
  }
  ds.train_class_counts = ds.recompute_train_counts();
  return ds;
}

std::vector<long> DatasetManifest::recompute_train_counts() const {
  std::vector<long> counts(static_cast<size_t>(c), 0);
  for (const auto& r : records) {
    if (!r.train) continue;
    for (int k = 0; k < c; ++k)
      if (r.feat.y[k]) ++counts[k];
  }
  return counts;
}

std::vector<uint8_t> DatasetManifest::rare_mask() const {
  std::vector<uint8_t> mask(static_cast<size_t>(c), 0);
  for (int k = 0; k < c; ++k) mask[k] = train_class_counts[k] < 10 ? 1 : 0;
  return mask;
}

void apply_zero_shot(DatasetManifest& ds, ZsMode mode, int k, const CooccurrenceMaps& maps) {
  ZeroShotSplit split = select_unseen(mode, ds.train_class_counts, k, maps);
  std::erase_if(ds.records, [&](const PairRecord& r) {
    if (!r.train) return false;
    for (int cls : split.unseen_hoi_ids)
      if (r.feat.y[cls]) return true;
    return false;
  });
  ds.train_class_counts = ds.recompute_train_counts();
  ds.zero_shot = std::move(split);
}

// ---- serialization ----

namespace {

nlohmann::json vec_json(const Vec& v) { return nlohmann::json(v); }
nlohmann::json box_json(const Box& b) { return nlohmann::json{b.x1, b.y1, b.x2, b.y2}; }

Box box_from(const nlohmann::json& j) {
  Box b{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()};
  return b;
}

nlohmann::json mat_json(const Mat& m) {
  return nlohmann::json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.d}};
}

Mat mat_from(const nlohmann::json& j) {
  Mat m(j.at("rows").get<int>(), j.at("cols").get<int>());
  m.d = j.at("data").get<std::vector<double>>();
  require(m.d.size() == static_cast<size_t>(m.rows) * m.cols, "matrix size mismatch");
  return m;
}

const char* zs_mode_name(ZsMode m) {
  switch (m) {
    case ZsMode::rare_first: return "rare_first";
    case ZsMode::nonrare_first: return "nonrare_first";
    case ZsMode::unseen_object: return "unseen_object";
  }
  return "rare_first";
}

ZsMode zs_mode_from(const std::string& s) {
  if (s == "rare_first") return ZsMode::rare_first;
  if (s == "nonrare_first") return ZsMode::nonrare_first;
  if (s == "unseen_object") return ZsMode::unseen_object;
  throw std::invalid_argument("unknown zero-shot mode: " + s);
}

}  // namespace

std::string world_to_json(const WorldSpec& w) {
  nlohmann::json j;
  j["n_v"] = w.cfg.n_v;
  j["n_o"] = w.cfg.n_o;
  j["c"] = w.cfg.c;
  j["d_v"] = w.cfg.d_v;
  j["d_o"] = w.cfg.d_o;
  j["d_h"] = w.cfg.d_h;
  j["sigma_o"] = w.cfg.sigma_o;
  j["sigma_v"] = w.cfg.sigma_v;
  j["alpha"] = w.cfg.alpha;
  j["beta"] = w.cfg.beta;
  j["zipf_s"] = w.cfg.zipf_s;
  j["seed"] = w.seed;
  j["hoi_defs"] = nlohmann::json::array();
  for (const auto& [v, o] : w.maps.hoi_defs) j["hoi_defs"].push_back({v, o});
  j["object_prototypes"] = mat_json(w.object_prototypes);
  j["verb_prototypes"] = mat_json(w.verb_prototypes);
  j["human_prototype"] = vec_json(w.human_prototype);
  j["object_word_vecs"] = mat_json(w.object_word_vecs);
  j["verb_word_vecs"] = mat_json(w.verb_word_vecs);
  return j.dump();
}

WorldSpec world_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw io_error(std::string("world json parse failed: ") + e.what());
  }
  WorldSpec w;
  w.cfg.n_v = j.at("n_v").get<int>();
  w.cfg.n_o = j.at("n_o").get<int>();
  w.cfg.c = j.at("c").get<int>();
  w.cfg.d_v = j.at("d_v").get<int>();
  w.cfg.d_o = j.at("d_o").get<int>();
  w.cfg.d_h = j.at("d_h").get<int>();
  w.cfg.sigma_o = j.at("sigma_o").get<double>();
  w.cfg.sigma_v = j.at("sigma_v").get<double>();
  w.cfg.alpha = j.at("alpha").get<double>();
  w.cfg.beta = j.value("beta", 0.0);
  w.cfg.zipf_s = j.at("zipf_s").get<double>();
  w.seed = j.at("seed").get<uint64_t>();
  std::vector<std::pair<int, int>> defs;
  for (const auto& p : j.at("hoi_defs")) defs.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
  w.maps = build_cooccurrence(w.cfg.n_v, w.cfg.n_o, defs);
  w.object_prototypes = mat_from(j.at("object_prototypes"));
  w.verb_prototypes = mat_from(j.at("verb_prototypes"));
  w.human_prototype = j.at("human_prototype").get<Vec>();
  w.object_word_vecs = mat_from(j.at("object_word_vecs"));
  w.verb_word_vecs = mat_from(j.at("verb_word_vecs"));
  return w;
}

void write_world(const WorldSpec& w, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write world file: " + path);
  out << world_to_json(w) << "\n";
  if (!out) throw io_error("short write to world file: " + path);
}

WorldSpec read_world(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open world file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return world_from_json(ss.str());
}

void write_manifest(const DatasetManifest& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write manifest: " + path);
  nlohmann::json h;
  h["version"] = kManifestVersion;
  h["world_hash"] = ds.world_hash;
  h["c"] = ds.c;
  h["d_v"] = ds.d_v;
  h["d_o"] = ds.d_o;
  h["d_h"] = ds.d_h;
  h["train_class_counts"] = ds.train_class_counts;
  if (ds.zero_shot) {
    nlohmann::json z;
    z["mode"] = zs_mode_name(ds.zero_shot->mode);
    z["unseen"] = std::vector<int>(ds.zero_shot->unseen_hoi_ids.begin(),
                                   ds.zero_shot->unseen_hoi_ids.end());
    z["unseen_objects"] = std::vector<int>(ds.zero_shot->unseen_object_ids.begin(),
                                           ds.zero_shot->unseen_object_ids.end());
    h["zero_shot"] = z;
  } else {
    h["zero_shot"] = nullptr;
  }
  out << h.dump() << "\n";
  for (const auto& r : ds.records) {
    nlohmann::json j;
    j["image_id"] = r.image_id;
    j["pair_id"] = r.pair_id;
    j["train"] = r.train;
    j["hbox"] = box_json(r.feat.human_box);
    j["obox"] = box_json(r.feat.object_box);
    j["s_h"] = r.feat.s_h;
    j["s_o"] = r.feat.s_o;
    std::vector<int> active;
    for (int k = 0; k < ds.c; ++k)
      if (r.feat.y[k]) active.push_back(k);
    j["y"] = active;
    j["x_h"] = vec_json(r.feat.x_h);
    j["x_o"] = vec_json(r.feat.x_o);
    j["x_v"] = vec_json(r.feat.x_v);
    j["x_sp"] = vec_json(r.feat.x_sp);
    out << j.dump() << "\n";
  }
  if (!out) throw io_error("short write to manifest: " + path);
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open manifest: " + path);
  std::string line;
  int lineno = 0;
  auto parse_line = [&](const std::string& text) {
    try {
      return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw io_error(path + ": corrupt record at line " + std::to_string(lineno) + ": " + e.what());
    }
  };
  if (!std::getline(in, line)) throw io_error(path + ": missing header line");
  ++lineno;
  nlohmann::json h = parse_line(line);
  DatasetManifest ds;
  try {
    int version = h.at("version").get<int>();
    if (version != kManifestVersion)
      throw io_error(path + ": unsupported manifest version " + std::to_string(version));
    ds.world_hash = h.at("world_hash").get<uint64_t>();
    ds.c = h.at("c").get<int>();
    ds.d_v = h.at("d_v").get<int>();
    ds.d_o = h.at("d_o").get<int>();
    ds.d_h = h.at("d_h").get<int>();
    ds.train_class_counts = h.at("train_class_counts").get<std::vector<long>>();
    if (!h.at("zero_shot").is_null()) {
      ZeroShotSplit z;
      z.mode = zs_mode_from(h["zero_shot"].at("mode").get<std::string>());
      for (int id : h["zero_shot"].at("unseen").get<std::vector<int>>()) z.unseen_hoi_ids.insert(id);
      for (int id : h["zero_shot"].at("unseen_objects").get<std::vector<int>>())
        z.unseen_object_ids.insert(id);
      for (int k = 0; k < ds.c; ++k)
        if (!z.unseen_hoi_ids.count(k)) z.seen_hoi_ids.insert(k);
      ds.zero_shot = std::move(z);
    }
  } catch (const nlohmann::json::exception& e) {
    throw io_error(path + ": corrupt header at line 1: " + e.what());
  }
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = parse_line(line);
    PairRecord r;
    try {
      r.image_id = j.at("image_id").get<int>();
      r.pair_id = j.at("pair_id").get<int>();
      r.train = j.at("train").get<bool>();
      r.feat.human_box = box_from(j.at("hbox"));
      r.feat.object_box = box_from(j.at("obox"));
      r.feat.s_h = j.at("s_h").get<double>();
      r.feat.s_o = j.at("s_o").get<double>();
      r.feat.y.assign(static_cast<size_t>(ds.c), 0);
      for (int k : j.at("y").get<std::vector<int>>()) {
        if (k < 0 || k >= ds.c)
          throw io_error(path + ": class id out of range at line " + std::to_string(lineno));
        r.feat.y[k] = 1;
      }
      r.feat.x_h = j.at("x_h").get<Vec>();
      r.feat.x_o = j.at("x_o").get<Vec>();
      r.feat.x_v = j.at("x_v").get<Vec>();
      r.feat.x_sp = j.at("x_sp").get<Vec>();
    } catch (const nlohmann::json::exception& e) {
      throw io_error(path + ": corrupt record at line " + std::to_string(lineno) + ": " + e.what());
    }
    ds.records.push_back(std::move(r));
  }
  if (ds.recompute_train_counts() != ds.train_class_counts)
    throw io_error(path + ": stored train class counts do not match records");
  return ds;
}

}  // namespace fcl
