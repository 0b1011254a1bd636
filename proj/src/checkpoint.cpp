#include "checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"

namespace fcl {

namespace {

constexpr char kMagic[8] = {'F', 'C', 'L', 'C', 'K', 'P', 'T', '1'};
constexpr uint32_t kVersion = 1;

std::vector<ParamRef> tensor_list(FclParams& m) {
  std::vector<ParamRef> out;
  m.spatial_head.collect("spatial_head", out);
  m.spatial_cls.collect("spatial_cls", out);
  m.hoi_head.collect("hoi_head", out);
  m.g_hoi.collect("g_hoi", out);
  m.verb_head.collect("verb_head", out);
  m.fabricator.collect_tensors("fabricator", out);
  if (m.verb_fabricator) m.verb_fabricator->collect_tensors("verb_fabricator", out);
  return out;
}

const char* variant_name(IdentityVariant v) {
  switch (v) {
    case IdentityVariant::learned: return "learned";
    case IdentityVariant::word_vector: return "word_vector";
    case IdentityVariant::one_hot: return "one_hot";
  }
  return "learned";
}

IdentityVariant variant_from(const std::string& s) {
  if (s == "learned") return IdentityVariant::learned;
  if (s == "word_vector") return IdentityVariant::word_vector;
  if (s == "one_hot") return IdentityVariant::one_hot;
  throw io_error("checkpoint: unknown identity variant " + s);
}

}  // namespace

void save_model(const FclParams& model, const std::string& path) {
  auto& m = const_cast<FclParams&>(model);
  auto tensors = tensor_list(m);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write checkpoint: " + path);
  out.write(kMagic, 8);
  uint32_t version = kVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  uint64_t n = tensors.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  for (const auto& t : tensors) {
    uint64_t sz = t.size;
    out.write(reinterpret_cast<const char*>(&sz), sizeof sz);
  }
  for (const auto& t : tensors)
    out.write(reinterpret_cast<const char*>(t.data), static_cast<std::streamsize>(t.size * 8));
  if (!out) throw io_error("short write to checkpoint: " + path);

  nlohmann::json side;
  side["format"] = "fcl-checkpoint";
  side["version"] = kVersion;
  auto names = nlohmann::json::array();
  for (const auto& t : tensors) names.push_back({{"name", t.name}, {"size", t.size}});
  side["tensors"] = names;
  nlohmann::json md;
  md["d_h"] = m.dims.d_h;
  md["d_o"] = m.dims.d_o;
  md["d_v"] = m.dims.d_v;
  md["hidden"] = m.dims.hidden;
  md["d_id"] = m.dims.d_id;
  md["d_n"] = m.dims.d_n;
  md["fab_hidden"] = m.dims.fab_hidden;
  md["n_v"] = m.dims.n_v;
  md["n_o"] = m.dims.n_o;
  md["c"] = m.dims.c;
  side["dims"] = md;
  side["identity"] = variant_name(m.fabricator.identity.variant);
  side["use_noise"] = m.fabricator.use_noise;
  side["use_verb"] = m.fabricator.use_verb;
  side["verb_fabricator"] = m.verb_fabricator.has_value();
  side["lambdas"] = {m.lambdas.l1, m.lambdas.l2, m.lambdas.l3};
  if (m.class_weights)
    side["class_weights"] = *m.class_weights;
  else
    side["class_weights"] = nullptr;
  std::ofstream sout(path + ".json");
  if (!sout) throw io_error("cannot write checkpoint sidecar: " + path + ".json");
  sout << side.dump() << "\n";
  if (!sout) throw io_error("short write to checkpoint sidecar: " + path + ".json");
}

FclParams load_model(const std::string& path) {
  std::ifstream sin(path + ".json");
  if (!sin) throw io_error("cannot open checkpoint sidecar: " + path + ".json");
  nlohmann::json side;
  try {
    sin >> side;
  } catch (const nlohmann::json::exception& e) {
    throw io_error("checkpoint sidecar parse failed: " + std::string(e.what()));
  }
  ModelDims dims;
  const auto& md = side.at("dims");
  dims.d_h = md.at("d_h").get<int>();
  dims.d_o = md.at("d_o").get<int>();
  dims.d_v = md.at("d_v").get<int>();
  dims.hidden = md.at("hidden").get<int>();
  dims.d_id = md.at("d_id").get<int>();
  dims.d_n = md.at("d_n").get<int>();
  dims.fab_hidden = md.at("fab_hidden").get<int>();
  dims.n_v = md.at("n_v").get<int>();
  dims.n_o = md.at("n_o").get<int>();
  dims.c = md.at("c").get<int>();
  IdentityVariant variant = variant_from(side.at("identity").get<std::string>());
  bool use_noise = side.at("use_noise").get<bool>();
  bool use_verb = side.at("use_verb").get<bool>();
  bool with_vf = side.at("verb_fabricator").get<bool>();

  Rng dummy_a(0), dummy_b(1);
  Mat placeholder(dims.n_o, dims.d_id);
  for (auto& v : placeholder.d) v = 1.0;  // overwritten below
  FclParams m = make_model(dims, variant, use_noise, use_verb, with_vf, dummy_a, dummy_b,
                           variant == IdentityVariant::word_vector ? &placeholder : nullptr);
  auto l = side.at("lambdas");
  m.lambdas = {l.at(0).get<double>(), l.at(1).get<double>(), l.at(2).get<double>()};
  if (!side.at("class_weights").is_null())
    m.class_weights = side["class_weights"].get<Vec>();

  auto tensors = tensor_list(m);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw io_error("checkpoint magic mismatch: " + path);
  uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  if (version != kVersion)
    throw io_error("unsupported checkpoint version " + std::to_string(version));
  uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (n != tensors.size()) throw io_error("checkpoint tensor count mismatch: " + path);
  for (const auto& t : tensors) {
    uint64_t sz = 0;
    in.read(reinterpret_cast<char*>(&sz), sizeof sz);
    if (sz != t.size) throw io_error("checkpoint shape mismatch for " + t.name);
  }
  const auto& names = side.at("tensors");
  if (names.size() != tensors.size()) throw io_error("checkpoint sidecar tensor count mismatch");
  for (size_t i = 0; i < tensors.size(); ++i)
    if (names.at(i).at("name").get<std::string>() != tensors[i].name)
      throw io_error("checkpoint tensor name mismatch: " + tensors[i].name);
  for (auto& t : tensors) {
    in.read(reinterpret_cast<char*>(t.data), static_cast<std::streamsize>(t.size * 8));
    if (!in) throw io_error("truncated checkpoint: " + path);
  }
  return m;
}

}  // namespace fcl
