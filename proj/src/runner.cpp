#include "runner.hpp"

#include <filesystem>
#include <fstream>

#include "eval_map.hpp"
#include "json.hpp"
#include "trainer.hpp"

namespace fcl {

namespace {

namespace fs = std::filesystem;

nlohmann::json parse_config(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("bad config json: ") + e.what());
  }
}

fs::path out_dir(const nlohmann::json& cfg) {
  std::string out = cfg.value("out", "");
  require(!out.empty(), "config: missing \"out\" directory");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw io_error("cannot create output directory " + out + ": " + ec.message());
  return fs::path(out);
}

void write_outputs_json(const fs::path& dir, const std::string& command,
                        const std::vector<std::string>& files) {
  nlohmann::json j;
  j["command"] = command;
  j["files"] = files;
  std::ofstream out(dir / "outputs.json");
  if (!out) throw io_error("cannot write outputs.json");
  out << j.dump() << "\n";
}

ZsMode zs_mode_from(const std::string& s) {
  if (s == "rare_first") return ZsMode::rare_first;
  if (s == "nonrare_first") return ZsMode::nonrare_first;
  if (s == "unseen_object") return ZsMode::unseen_object;
  throw std::invalid_argument("unknown zero-shot mode: " + s);
}

IdentityVariant identity_from(const std::string& s) {
  if (s == "learned") return IdentityVariant::learned;
  if (s == "word_vector") return IdentityVariant::word_vector;
  if (s == "one_hot") return IdentityVariant::one_hot;
  throw std::invalid_argument("unknown identity variant: " + s);
}

struct LoadedData {
  WorldSpec world;
  DatasetManifest data;
};

LoadedData load_world_and_data(const nlohmann::json& cfg) {
  std::string world_path = cfg.value("world", "");
  std::string data_path = cfg.value("data", "");
  require(!world_path.empty(), "config: missing \"world\" path");
  require(!data_path.empty(), "config: missing \"data\" path");
  LoadedData out{read_world(world_path), read_manifest(data_path)};
  require(out.data.world_hash == fnv1a(world_to_json(out.world)),
          "config: manifest was generated from a different world");
  return out;
}

TrainConfig train_config_from(const nlohmann::json& cfg) {
  TrainConfig tc;
  std::string sched = cfg.value("schedule", "one_step");
  if (sched == "stepwise")
    tc.schedule = Schedule::stepwise;
  else if (sched == "one_step")
    tc.schedule = Schedule::one_step;
  else
    throw std::invalid_argument("unknown schedule: " + sched);
  tc.scale = cfg.value("scale", 1.0);
  tc.stage1_iters = cfg.value("stage1_iters", tc.stage1_iters);
  tc.stage2_iters = cfg.value("stage2_iters", tc.stage2_iters);
  tc.stage3_iters = cfg.value("stage3_iters", tc.stage3_iters);
  tc.one_step_iters = cfg.value("one_step_iters", tc.one_step_iters);
  tc.batch_size = cfg.value("batch_size", tc.batch_size);
  tc.seed = cfg.value("seed", uint64_t{0});
  tc.base_lr = cfg.value("base_lr", tc.base_lr);
  tc.momentum = cfg.value("momentum", tc.momentum);
  tc.weight_decay = cfg.value("weight_decay", tc.weight_decay);
  tc.lambdas.l1 = cfg.value("lambda1", tc.lambdas.l1);
  tc.lambdas.l2 = cfg.value("lambda2", tc.lambdas.l2);
  tc.lambdas.l3 = cfg.value("lambda3", tc.lambdas.l3);
  tc.cap = cfg.value("cap", tc.cap);
  if (cfg.contains("topk") && !cfg["topk"].is_null()) tc.topk = cfg["topk"].get<int>();
  tc.identity = identity_from(cfg.value("identity", "learned"));
  tc.use_noise = cfg.value("use_noise", true);
  tc.use_verb = cfg.value("use_verb", true);
  tc.verb_fabricator = cfg.value("verb_fabricator", false);
  tc.use_fabricator = cfg.value("use_fabricator", true);
  tc.reweight = cfg.value("reweight", false);
  tc.log_every = cfg.value("log_every", tc.log_every);
  tc.dims.hidden = cfg.value("hidden", tc.dims.hidden);
  tc.dims.d_id = cfg.value("d_id", tc.dims.d_id);
  tc.dims.d_n = cfg.value("d_n", tc.dims.d_n);
  tc.dims.fab_hidden = cfg.value("fab_hidden", tc.dims.fab_hidden);
  return tc;
}

std::vector<Detection> infer_detections(const FclParams& model, const DatasetManifest& data) {
  std::vector<Detection> dets;
  for (const auto& r : data.records) {
    if (r.train) continue;
    Vec scores = forward_infer(model, r.feat);
    for (int k = 0; k < data.c; ++k) {
      Detection d;
      d.image_id = r.image_id;
      d.pair_id = r.pair_id;
      d.human_box = r.feat.human_box;
      d.object_box = r.feat.object_box;
      d.class_id = k;
      d.score = scores[k];
      dets.push_back(d);
    }
  }
  return dets;
}

}  // namespace

void run_gen(const std::string& config_json) {
  nlohmann::json cfg = parse_config(config_json);
  fs::path dir = out_dir(cfg);

  WorldConfig wc;
  wc.n_v = cfg.value("n_v", wc.n_v);
  wc.n_o = cfg.value("n_o", wc.n_o);
  wc.c = cfg.value("c", wc.c);
  wc.d_v = cfg.value("d_v", wc.d_v);
  wc.d_o = cfg.value("d_o", wc.d_o);
  wc.d_h = cfg.value("d_h", wc.d_h);
  wc.sigma_o = cfg.value("sigma_o", wc.sigma_o);
  wc.sigma_v = cfg.value("sigma_v", wc.sigma_v);
  wc.alpha = cfg.value("alpha", wc.alpha);
  wc.beta = cfg.value("beta", wc.beta);
  wc.zipf_s = cfg.value("zipf_s", wc.zipf_s);
  uint64_t seed = cfg.value("seed", uint64_t{0});

  SampleConfig sc;
  sc.n_images = cfg.value("images", sc.n_images);
  sc.pairs_per_image = cfg.value("pairs_per_image", sc.pairs_per_image);
  sc.neg_ratio = cfg.value("neg_ratio", sc.neg_ratio);
  sc.train_frac = cfg.value("train_frac", sc.train_frac);
  sc.cooccur_prob = cfg.value("cooccur_prob", sc.cooccur_prob);

  WorldSpec world = generate_world(wc, seed);
  DatasetManifest ds = sample_dataset(world, sc, seed);
  std::string zs = cfg.value("zs_mode", "none");
  if (zs != "none") apply_zero_shot(ds, zs_mode_from(zs), cfg.value("zs_k", 6), world.maps);

  write_world(world, (dir / "world.json").string());
  write_manifest(ds, (dir / "dataset.jsonl").string());
  write_outputs_json(dir, "gen", {"world.json", "dataset.jsonl"});
}

void run_train(const std::string& config_json) {
  nlohmann::json cfg = parse_config(config_json);
  fs::path dir = out_dir(cfg);
  LoadedData ld = load_world_and_data(cfg);
  TrainConfig tc = train_config_from(cfg);

  TrainResult res = train(tc, ld.data, ld.world);
  save_model(res.model, (dir / "model.ckpt").string());
  write_loss_csv(res.history, tc.log_every, (dir / "loss.csv").string());
  write_outputs_json(dir, "train", {"model.ckpt", "model.ckpt.json", "loss.csv"});
}

void run_eval(const std::string& config_json) {
  nlohmann::json cfg = parse_config(config_json);
  fs::path dir = out_dir(cfg);
  LoadedData ld = load_world_and_data(cfg);
  std::string mode_s = cfg.value("mode", "default");
  EvalMode mode;
  if (mode_s == "default")
    mode = EvalMode::standard;
  else if (mode_s == "known_object")
    mode = EvalMode::known_object;
  else
    throw std::invalid_argument("unknown eval mode: " + mode_s);

  std::vector<Detection> dets;
  std::vector<std::string> files;
  if (cfg.contains("model") && !cfg["model"].is_null()) {
    FclParams model = load_model(cfg["model"].get<std::string>());
    dets = infer_detections(model, ld.data);
    write_detections(dets, (dir / "detections.jsonl").string());
    files.push_back("detections.jsonl");
  } else if (cfg.contains("dets") && !cfg["dets"].is_null()) {
    dets = read_detections(cfg["dets"].get<std::string>(), ld.data);
  } else {
    throw std::invalid_argument("eval config needs \"model\" or \"dets\"");
  }

  EvalReport rep = evaluate(dets, ld.data, ld.world.maps, mode);
  write_report_csv(rep, ld.data, (dir / "report.csv").string());
  std::ofstream sj(dir / "summary.json");
  if (!sj) throw io_error("cannot write summary.json");
  sj << report_summary_json(rep, mode) << "\n";
  files.push_back("report.csv");
  files.push_back("summary.json");
  write_outputs_json(dir, "eval", files);
}

void run_audit(const std::string& config_json) {
  nlohmann::json cfg = parse_config(config_json);
  fs::path dir = out_dir(cfg);
  LoadedData ld = load_world_and_data(cfg);
  TrainConfig tc = train_config_from(cfg);
  long batches = cfg.value("batches", 20L);

  ModelDims dims = tc.dims;
  dims.n_v = ld.world.maps.n_v;
  dims.n_o = ld.world.maps.n_o;
  dims.c = ld.world.maps.c;
  dims.d_v = ld.data.d_v;
  dims.d_o = ld.data.d_o;
  dims.d_h = ld.data.d_h;
  Rng backbone_rng = make_rng(tc.seed, 11);
  Rng fab_rng = make_rng(tc.seed, 12);
  FclParams model = make_model(dims, tc.identity, tc.use_noise, tc.use_verb, false, backbone_rng,
                               fab_rng,
                               tc.identity == IdentityVariant::word_vector
                                   ? &ld.world.object_word_vecs
                                   : nullptr);
  std::optional<SimilarityTable> sim;
  if (tc.topk) sim = build_similarity(ld.world.object_word_vecs);

  std::vector<const PairRecord*> train_records;
  for (const auto& r : ld.data.records)
    if (r.train) train_records.push_back(&r);
  require(!train_records.empty(), "audit: no training records");

  Rng shuffle_rng = make_rng(tc.seed, 13);
  Rng comp_rng = make_rng(tc.seed, 14);
  std::vector<size_t> order(train_records.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), shuffle_rng);

  std::ofstream out(dir / "audit.csv");
  if (!out) throw io_error("cannot write audit.csv");
  out << "batch,n_real,n_labeled,candidates,feasible,after_topk,after_cap\n";
  size_t pos = 0;
  for (long b = 0; b < batches; ++b) {
    std::vector<PairFeatures> batch;
    long n_labeled = 0;
    for (int i = 0; i < tc.batch_size; ++i) {
      if (pos == order.size()) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        pos = 0;
      }
      batch.push_back(train_records[order[pos++]]->feat);
      if (batch.back().labeled()) ++n_labeled;
    }
    CompositionStats st;
    if (n_labeled > 0)
      compose_minibatch(batch, model.fabricator, ld.world.maps, tc.cap, tc.topk,
                        sim ? &*sim : nullptr, comp_rng, &st);
    out << b << "," << batch.size() << "," << n_labeled << "," << st.candidates << ","
        << st.feasible << "," << st.after_topk << "," << st.after_cap << "\n";
  }
  if (!out) throw io_error("short write to audit.csv");
  write_outputs_json(dir, "audit", {"audit.csv"});
}

void run_dump_embeddings(const std::string& config_json) {
  nlohmann::json cfg = parse_config(config_json);
  fs::path dir = out_dir(cfg);
  LoadedData ld = load_world_and_data(cfg);
  require(cfg.contains("model") && !cfg["model"].is_null(), "dump config needs \"model\"");
  FclParams model = load_model(cfg["model"].get<std::string>());
  long samples = cfg.value("samples", 200L);
  uint64_t seed = cfg.value("seed", uint64_t{0});
  Rng rng = make_rng(seed, 21);

  std::vector<const PairRecord*> labeled;
  for (const auto& r : ld.data.records)
    if (r.train && r.feat.labeled()) labeled.push_back(&r);
  require(!labeled.empty(), "dump: no labeled training records");

  std::ofstream out(dir / "embeddings.csv");
  if (!out) throw io_error("cannot write embeddings.csv");
  out << "kind,object_id,verb_id";
  for (int c = 0; c < ld.data.d_o; ++c) out << ",f" << c;
  out << "\n";
  char buf[32];
  auto write_row = [&](const char* kind, int obj, int verb, const Vec& f) {
    out << kind << "," << obj << "," << verb;
    for (double v : f) {
      std::snprintf(buf, sizeof buf, ",%.12g", v);
      out << buf;
    }
    out << "\n";
  };
  std::uniform_int_distribution<size_t> pick(0, labeled.size() - 1);
  for (long i = 0; i < samples; ++i) {
    const auto& f = labeled[pick(rng)]->feat;
    int cls = -1;
    for (int k = 0; k < ld.data.c; ++k)
      if (f.y[k]) {
        cls = k;
        break;
      }
    int obj = ld.world.maps.object_of(cls);
    int verb = ld.world.maps.verb_of(cls);
    write_row("real", obj, verb, f.x_o);
    Vec noise = draw_noise(model.fabricator, rng);
    write_row("fabricated", obj, verb, fabricate(model.fabricator, obj, f.x_v, noise));
  }
  if (!out) throw io_error("short write to embeddings.csv");
  write_outputs_json(dir, "dump-embeddings", {"embeddings.csv"});
}

}  // namespace fcl
