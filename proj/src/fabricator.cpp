#include "fabricator.hpp"

#include <fstream>
#include <sstream>

namespace fcl {

IdentityTable make_learned_identity(int n_o, int d_id, Rng& rng) {
  require(n_o > 0 && d_id > 0, "identity: bad dims");
  IdentityTable t;
  t.variant = IdentityVariant::learned;
  t.table = Mat(n_o, d_id);
  t.grad = Mat(n_o, d_id);
  double bound = 1.0 / std::sqrt(static_cast<double>(d_id));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto& v : t.table.d) v = u(rng);
  return t;
}

IdentityTable make_onehot_identity(int n_o) {
  IdentityTable t;
  t.variant = IdentityVariant::one_hot;
  t.table = Mat(n_o, n_o);
  t.grad = Mat(n_o, n_o);
  for (int j = 0; j < n_o; ++j) t.table(j, j) = 1.0;
  return t;
}

IdentityTable make_wordvec_identity(const Mat& rows) {
  require(rows.rows > 0 && rows.cols > 0, "identity: empty word-vector table");
  IdentityTable t;
  t.variant = IdentityVariant::word_vector;
  t.table = rows;
  t.grad = Mat(rows.rows, rows.cols);
  return t;
}

IdentityTable load_wordvec_identity(const std::string& path, int n_o) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open word-vector file: " + path);
  std::vector<std::pair<int, Vec>> rows;
  std::string line;
  int lineno = 0;
  int dim = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    int id;
    if (!(ss >> id))
      throw io_error("word-vector file " + path + ": bad object id at line " + std::to_string(lineno));
    Vec v;
    double x;
    while (ss >> x) v.push_back(x);
    if (dim < 0) dim = static_cast<int>(v.size());
    if (v.empty() || static_cast<int>(v.size()) != dim)
      throw io_error("word-vector file " + path + ": inconsistent dimension at line " +
                     std::to_string(lineno));
    rows.emplace_back(id, std::move(v));
  }
  if (static_cast<int>(rows.size()) != n_o)
    throw io_error("word-vector file " + path + ": expected " + std::to_string(n_o) + " rows, got " +
                   std::to_string(rows.size()));
  Mat table(n_o, dim);
  std::vector<bool> filled(n_o, false);
  for (auto& [id, v] : rows) {
    if (id < 0 || id >= n_o || filled[id])
      throw io_error("word-vector file " + path + ": bad or duplicate object id " + std::to_string(id));
    filled[id] = true;
    for (int c = 0; c < dim; ++c) table(id, c) = v[c];
  }
  return make_wordvec_identity(table);
}

void FabricatorParams::zero_grad() {
  net.zero_grad();
  std::fill(identity.grad.d.begin(), identity.grad.d.end(), 0.0);
}

void FabricatorParams::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  if (identity.trainable())
    out.push_back({prefix + ".identity", identity.table.d.data(), identity.grad.d.data(),
                   identity.table.d.size()});
  net.collect(prefix + ".net", out);
}

void FabricatorParams::collect_tensors(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".identity", identity.table.d.data(), identity.grad.d.data(),
                 identity.table.d.size()});
  net.collect(prefix + ".net", out);
}

FabricatorParams make_fabricator(IdentityTable identity, int d_cond, int d_n, int hidden,
                                 int d_out, bool use_noise, bool use_verb, Rng& rng) {
  FabricatorParams p;
  p.identity = std::move(identity);
  p.d_cond = d_cond;
  p.d_n = d_n;
  p.use_noise = use_noise;
  p.use_verb = use_verb;
  p.net = Mlp2(p.in_dim(), hidden, d_out);
  p.net.init_uniform(rng);
  return p;
}

Vec draw_noise(const FabricatorParams& p, Rng& rng) {
  Vec eps;
  if (p.use_noise) {
    std::normal_distribution<double> n(0.0, 1.0);
    eps.resize(static_cast<size_t>(p.d_n));
    for (auto& v : eps) v = n(rng);
  }
  return eps;
}

Vec fabricate(const FabricatorParams& p, int object_id, const Vec& x_v, const Vec& noise,
              FabricateCache* cache) {
  require(object_id >= 0 && object_id < p.identity.n_o(), "fabricate: object id out of range");
  if (p.use_verb) require(static_cast<int>(x_v.size()) == p.d_cond, "fabricate: conditioning size mismatch");
  if (p.use_noise)
    require(static_cast<int>(noise.size()) == p.d_n, "fabricate: noise size mismatch");
  Vec in;
  in.reserve(static_cast<size_t>(p.in_dim()));
  const double* row = &p.identity.table.d[static_cast<size_t>(object_id) * p.identity.d_id()];
  in.insert(in.end(), row, row + p.identity.d_id());
  if (p.use_verb) in.insert(in.end(), x_v.begin(), x_v.end());
  if (p.use_noise) in.insert(in.end(), noise.begin(), noise.end());
  if (cache) cache->object_id = object_id;
  return p.net.forward(in, cache ? &cache->net : nullptr);
}

Vec fabricate_backward(FabricatorParams& p, const FabricateCache& cache, const Vec& dy) {
  Vec din = p.net.backward(cache.net, dy);
  int d_id = p.identity.d_id();
  if (p.identity.trainable()) {
    double* grow = &p.identity.grad.d[static_cast<size_t>(cache.object_id) * d_id];
    for (int c = 0; c < d_id; ++c) grow[c] += din[c];
  }
  Vec dx_v;
  if (p.use_verb) dx_v.assign(din.begin() + d_id, din.begin() + d_id + p.d_cond);
  return dx_v;
}

Mat fabricate_all(const FabricatorParams& p, const Vec& x_v, Rng& rng) {
  Mat out(p.identity.n_o(), p.out_dim());
  for (int j = 0; j < p.identity.n_o(); ++j) {
    Vec eps = draw_noise(p, rng);  // fresh noise per row
    Vec row = fabricate(p, j, x_v, eps);
    for (int c = 0; c < p.out_dim(); ++c) out(j, c) = row[c];
  }
  return out;
}

}  // namespace fcl
