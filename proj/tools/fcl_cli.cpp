// Command-line front end. Everything goes through the C API in fcl/fcl.h;
// this file only translates flags into JSON configs.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "fcl/fcl.h"
#include "json.hpp"

namespace {

using nlohmann::json;

int run(int (*fn)(fcl_ctx*, const char*), const json& cfg) {
  fcl_ctx* ctx = fcl_ctx_new();
  if (!ctx) {
    std::cerr << "error: out of memory\n";
    return 1;
  }
  int rc = fn(ctx, cfg.dump().c_str());
  if (rc != 0) std::cerr << "error: " << fcl_ctx_error(ctx) << "\n";
  fcl_ctx_free(ctx);
  return rc;
}

// Values from --config override the flags.
int merge_config_file(json& cfg, const std::string& path) {
  if (path.empty()) return 0;
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot open config file: " << path << "\n";
    return 2;
  }
  json overrides;
  try {
    in >> overrides;
  } catch (const json::exception& e) {
    std::cerr << "error: bad config file " << path << ": " << e.what() << "\n";
    return 1;
  }
  for (auto it = overrides.begin(); it != overrides.end(); ++it) cfg[it.key()] = it.value();
  return 0;
}

struct TrainFlags {
  std::string world, data, out, config;
  std::string schedule = "one_step";
  double scale = 1.0;
  uint64_t seed = 0;
  double lambda1 = 2.0, lambda2 = 0.5, lambda3 = 0.3;
  double cap = 3.0;
  int topk = -1;
  std::string identity = "learned";
  bool no_noise = false, no_verb = false, verb_fabricator = false, reweight = false;
  bool no_fabricator = false;
  int batch_size = 32;
  long log_every = 100;

  json to_json() const {
    json cfg;
    cfg["world"] = world;
    cfg["data"] = data;
    cfg["out"] = out;
    cfg["schedule"] = schedule;
    cfg["scale"] = scale;
    cfg["seed"] = seed;
    cfg["lambda1"] = lambda1;
    cfg["lambda2"] = lambda2;
    cfg["lambda3"] = lambda3;
    cfg["cap"] = cap;
    if (topk >= 0) cfg["topk"] = topk;
    cfg["identity"] = identity;
    cfg["use_noise"] = !no_noise;
    cfg["use_verb"] = !no_verb;
    cfg["verb_fabricator"] = verb_fabricator;
    cfg["use_fabricator"] = !no_fabricator;
    cfg["reweight"] = reweight;
    cfg["batch_size"] = batch_size;
    cfg["log_every"] = log_every;
    return cfg;
  }
};

void add_train_flags(CLI::App* cmd, TrainFlags& f, bool require_paths) {
  auto* w = cmd->add_option("--world", f.world, "world JSON from gen");
  auto* d = cmd->add_option("--data", f.data, "dataset manifest from gen");
  if (require_paths) {
    w->required();
    d->required();
  }
  cmd->add_option("--schedule", f.schedule, "training schedule")
      ->check(CLI::IsMember({"stepwise", "one_step"}));
  cmd->add_option("--scale", f.scale, "stage length multiplier");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--lambda1", f.lambda1, "interaction loss weight");
  cmd->add_option("--lambda2", f.lambda2, "composite loss weight");
  cmd->add_option("--lambda3", f.lambda3, "verb regularization weight");
  cmd->add_option("--cap", f.cap, "composite budget, x labeled samples");
  cmd->add_option("--topk", f.topk, "restrict fabricated objects to the K nearest");
  cmd->add_option("--identity", f.identity, "object identity embedding variant")
      ->check(CLI::IsMember({"learned", "word_vector", "one_hot"}));
  cmd->add_flag("--no-noise", f.no_noise, "fabricate without the noise input");
  cmd->add_flag("--no-verb", f.no_verb, "fabricate without the verb input");
  cmd->add_flag("--verb-fabricator", f.verb_fabricator, "also fabricate verb features");
  cmd->add_flag("--no-fabricator", f.no_fabricator, "plain baseline without fabrication");
  cmd->add_flag("--reweight", f.reweight, "frequency-based class re-weighting");
  cmd->add_option("--batch-size", f.batch_size, "minibatch size");
  cmd->add_option("--log-every", f.log_every, "loss CSV row interval");
}

json preset_gen_config(const std::string& name, const std::string& out, uint64_t seed) {
  json cfg;
  cfg["out"] = out;
  cfg["seed"] = seed;
  cfg["n_v"] = 10;
  cfg["n_o"] = 8;
  cfg["c"] = 30;
  cfg["images"] = 2000;
  cfg["pairs_per_image"] = 4;
  cfg["train_frac"] = 0.5;
  cfg["sigma_v"] = 0.1;
  cfg["alpha"] = 0.1;
  cfg["beta"] = 1.0;
  cfg["zipf_s"] = 1.0;
  if (name == "paper-zs-rare-first") {
    cfg["zs_mode"] = "rare_first";
    cfg["zs_k"] = 6;
  } else if (name == "paper-zs-nonrare-first") {
    cfg["zs_mode"] = "nonrare_first";
    cfg["zs_k"] = 6;
  } else if (name == "paper-zs-unseen-object") {
    cfg["zs_mode"] = "unseen_object";
    cfg["zs_k"] = 2;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compositional human-object interaction toolkit"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic world and dataset");
  struct {
    std::string out, config, zs = "none";
    int n_v = 10, n_o = 8, c = 30, images = 2000, pairs = 2, k = 6;
    uint64_t seed = 0;
    double neg_ratio = 0.25, train_frac = 0.7, cooccur_prob = 0.1;
    double sigma_o = 0.25, sigma_v = 0.25, alpha = 0.5, beta = 0.0, zipf_s = 1.5;
  } g;
  gen->add_option("--out", g.out, "output directory")->required();
  gen->add_option("--nv", g.n_v, "verb categories");
  gen->add_option("--no", g.n_o, "object categories");
  gen->add_option("--c", g.c, "interaction classes");
  gen->add_option("--images", g.images, "number of images");
  gen->add_option("--pairs", g.pairs, "pairs per image");
  gen->add_option("--seed", g.seed, "master seed");
  gen->add_option("--zs", g.zs, "zero-shot split mode")
      ->check(CLI::IsMember({"none", "rare_first", "nonrare_first", "unseen_object"}));
  gen->add_option("--k", g.k, "unseen classes (or held-out objects)");
  gen->add_option("--neg-ratio", g.neg_ratio, "fraction of unlabeled pairs");
  gen->add_option("--train-frac", g.train_frac, "training image fraction");
  gen->add_option("--cooccur-prob", g.cooccur_prob, "chance of a second label per pair");
  gen->add_option("--sigma-o", g.sigma_o, "object feature noise");
  gen->add_option("--sigma-v", g.sigma_v, "verb feature noise");
  gen->add_option("--alpha", g.alpha, "object-into-verb coupling");
  gen->add_option("--beta", g.beta, "verb-into-object coupling");
  gen->add_option("--zipf-s", g.zipf_s, "long-tail exponent");
  gen->add_option("--config", g.config, "JSON file overriding the flags");

  // train
  auto* train = app.add_subcommand("train", "train a model");
  TrainFlags t;
  train->add_option("--out", t.out, "output directory")->required();
  add_train_flags(train, t, true);
  train->add_option("--config", t.config, "JSON file overriding the flags");

  // eval
  auto* eval = app.add_subcommand("eval", "score a model or detection file");
  struct {
    std::string world, data, out, model, dets, config;
    std::string mode = "default";
  } e;
  eval->add_option("--out", e.out, "output directory")->required();
  eval->add_option("--world", e.world, "world JSON from gen")->required();
  eval->add_option("--data", e.data, "dataset manifest from gen")->required();
  eval->add_option("--model", e.model, "model checkpoint (runs inference)");
  eval->add_option("--dets", e.dets, "pre-computed detection file");
  eval->add_option("--mode", e.mode, "evaluation protocol")
      ->check(CLI::IsMember({"default", "known_object"}));
  eval->add_option("--config", e.config, "JSON file overriding the flags");

  // audit
  auto* audit = app.add_subcommand("audit", "per-batch composition statistics");
  TrainFlags a;
  struct {
    long batches = 20;
  } aa;
  audit->add_option("--out", a.out, "output directory")->required();
  add_train_flags(audit, a, true);
  audit->add_option("--batches", aa.batches, "batches to audit");
  audit->add_option("--config", a.config, "JSON file overriding the flags");

  // dump-embeddings
  auto* dump = app.add_subcommand("dump-embeddings", "real vs fabricated object features");
  struct {
    std::string world, data, out, model, config;
    long samples = 200;
    uint64_t seed = 0;
  } de;
  dump->add_option("--out", de.out, "output directory")->required();
  dump->add_option("--world", de.world, "world JSON from gen")->required();
  dump->add_option("--data", de.data, "dataset manifest from gen")->required();
  dump->add_option("--model", de.model, "model checkpoint")->required();
  dump->add_option("--samples", de.samples, "labeled samples to dump");
  dump->add_option("--seed", de.seed, "sampling seed");
  dump->add_option("--config", de.config, "JSON file overriding the flags");

  // preset
  auto* preset = app.add_subcommand("preset", "end-to-end gen+train+eval bundle");
  struct {
    std::string name, out;
    uint64_t seed = 0;
    double scale = 1.0;
  } p;
  preset->add_option("name", p.name, "preset name")
      ->required()
      ->check(CLI::IsMember({"paper-zs-rare-first", "paper-zs-nonrare-first",
                             "paper-zs-unseen-object", "paper-longtail"}));
  preset->add_option("--out", p.out, "output directory")->required();
  preset->add_option("--seed", p.seed, "master seed");
  preset->add_option("--scale", p.scale, "stage length multiplier");

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    json cfg;
    cfg["out"] = g.out;
    cfg["seed"] = g.seed;
    cfg["n_v"] = g.n_v;
    cfg["n_o"] = g.n_o;
    cfg["c"] = g.c;
    cfg["images"] = g.images;
    cfg["pairs_per_image"] = g.pairs;
    cfg["neg_ratio"] = g.neg_ratio;
    cfg["train_frac"] = g.train_frac;
    cfg["cooccur_prob"] = g.cooccur_prob;
    cfg["sigma_o"] = g.sigma_o;
    cfg["sigma_v"] = g.sigma_v;
    cfg["alpha"] = g.alpha;
    cfg["beta"] = g.beta;
    cfg["zipf_s"] = g.zipf_s;
    cfg["zs_mode"] = g.zs;
    cfg["zs_k"] = g.k;
    if (int rc = merge_config_file(cfg, g.config)) return rc;
    return run(fcl_gen, cfg);
  }
  if (train->parsed()) {
    json cfg = t.to_json();
    if (int rc = merge_config_file(cfg, t.config)) return rc;
    return run(fcl_train, cfg);
  }
  if (eval->parsed()) {
    json cfg;
    cfg["out"] = e.out;
    cfg["world"] = e.world;
    cfg["data"] = e.data;
    cfg["mode"] = e.mode == "default" ? "default" : "known_object";
    if (!e.model.empty()) cfg["model"] = e.model;
    if (!e.dets.empty()) cfg["dets"] = e.dets;
    if (int rc = merge_config_file(cfg, e.config)) return rc;
    return run(fcl_eval, cfg);
  }
  if (audit->parsed()) {
    json cfg = a.to_json();
    cfg["batches"] = aa.batches;
    if (int rc = merge_config_file(cfg, a.config)) return rc;
    return run(fcl_audit, cfg);
  }
  if (dump->parsed()) {
    json cfg;
    cfg["out"] = de.out;
    cfg["world"] = de.world;
    cfg["data"] = de.data;
    cfg["model"] = de.model;
    cfg["samples"] = de.samples;
    cfg["seed"] = de.seed;
    if (int rc = merge_config_file(cfg, de.config)) return rc;
    return run(fcl_dump_embeddings, cfg);
  }
  if (preset->parsed()) {
    std::string data_dir = p.out + "/data";
    std::string train_dir = p.out + "/train";
    std::string eval_dir = p.out + "/eval";

    json gen_cfg = preset_gen_config(p.name, data_dir, p.seed);
    if (int rc = run(fcl_gen, gen_cfg)) return rc;

    json train_cfg;
    train_cfg["out"] = train_dir;
    train_cfg["world"] = data_dir + "/world.json";
    train_cfg["data"] = data_dir + "/dataset.jsonl";
    train_cfg["seed"] = p.seed;
    train_cfg["scale"] = p.scale;
    train_cfg["schedule"] = p.name == "paper-longtail" ? "stepwise" : "one_step";
    if (p.name == "paper-longtail") train_cfg["reweight"] = true;
    if (int rc = run(fcl_train, train_cfg)) return rc;

    json eval_cfg;
    eval_cfg["out"] = eval_dir;
    eval_cfg["world"] = data_dir + "/world.json";
    eval_cfg["data"] = data_dir + "/dataset.jsonl";
    eval_cfg["model"] = train_dir + "/model.ckpt";
    eval_cfg["mode"] = "default";
    return run(fcl_eval, eval_cfg);
  }
  return 1;
}
