#include "histocell/errors.hpp"
#include "histocell/experiments.hpp"
#include "json_fields.hpp"

namespace histocell {
namespace {

using nlohmann::json;

json paths_to_json(const DatasetPaths& p) {
  json emb = json::array();
  for (const auto& e : p.embeddings) emb.push_back(e.string());
  return {{"spots", p.spots.string()},
          {"abundances", p.abundances.string()},
          {"embeddings", emb},
          {"fractions", p.fractions.string()},
          {"max_background", p.max_background}};
}

DatasetPaths paths_from_json(const json& j, const std::string& where) {
  DatasetPaths p;
  detail::ObjectReader r(j, where);
  r.get("spots", p.spots);
  r.get("abundances", p.abundances);
  r.get("embeddings", p.embeddings);
  r.get("fractions", p.fractions);
  r.get("max_background", p.max_background);
  r.finish();
  return p;
}

}  // namespace

json to_json(const ExperimentConfig& cfg) {
  const auto& t = cfg.train;
  json folds = json::array();
  for (const auto& f : cfg.folds) folds.push_back(f);
  return {
      {"name", cfg.name},
      {"mode", cfg.mode == ExperimentMode::loo ? "loo" : "cross"},
      {"data", paths_to_json(cfg.data)},
      {"test_data", paths_to_json(cfg.test_data)},
      {"train",
       {{"lambda1", t.loss.lambda1},
        {"lambda2", t.loss.lambda2},
        {"epsilon", t.loss.epsilon},
        {"learning_rate", t.learning_rate},
        {"beta1", t.beta1},
        {"beta2", t.beta2},
        {"adam_epsilon", t.adam_epsilon},
        {"batch_size", t.batch_size},
        {"epochs", t.epochs},
        {"seed", t.seed},
        {"hidden_width", t.hidden_width}}},
      {"spatial", {{"length_scale", cfg.spatial.length_scale}, {"length_scale_factor", cfg.spatial.length_scale_factor}}},
      {"output", cfg.output_dir.string()},
      {"normalize", cfg.normalize},
      {"clamp", cfg.clamp},
      {"workers", cfg.workers},
      {"folds", folds},
      {"model", cfg.model.string()},
  };
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig cfg;
  detail::ObjectReader r(j, "");
  r.get("name", cfg.name);
  std::string mode = "loo";
  r.get("mode", mode);
  if (mode == "loo") {
    cfg.mode = ExperimentMode::loo;
  } else if (mode == "cross") {
    cfg.mode = ExperimentMode::cross;
  } else {
    throw ConfigError("config key 'mode' must be \"loo\" or \"cross\", got \"" + mode + "\"");
  }
  if (const auto* d = r.child("data")) cfg.data = paths_from_json(*d, "data");
  if (const auto* d = r.child("test_data")) cfg.test_data = paths_from_json(*d, "test_data");
  if (const auto* t = r.child("train")) {
    detail::ObjectReader tr(*t, "train");
    auto& c = cfg.train;
    tr.get("lambda1", c.loss.lambda1);
    tr.get("lambda2", c.loss.lambda2);
    tr.get("epsilon", c.loss.epsilon);
    tr.get("learning_rate", c.learning_rate);
    tr.get("beta1", c.beta1);
    tr.get("beta2", c.beta2);
    tr.get("adam_epsilon", c.adam_epsilon);
    tr.get("batch_size", c.batch_size);
    tr.get("epochs", c.epochs);
    tr.get("seed", c.seed);
    tr.get("hidden_width", c.hidden_width);
    tr.finish();
  }
  if (const auto* s = r.child("spatial")) {
    detail::ObjectReader sr(*s, "spatial");
    sr.get("length_scale", cfg.spatial.length_scale);
    sr.get("length_scale_factor", cfg.spatial.length_scale_factor);
    sr.finish();
  }
  r.get("output", cfg.output_dir);
  r.get("normalize", cfg.normalize);
  r.get("clamp", cfg.clamp);
  r.get("workers", cfg.workers);
  r.get("folds", cfg.folds);
  r.get("model", cfg.model);
  r.finish();

  if (cfg.name.empty() || cfg.name.find('/') != std::string::npos)
    throw ConfigError("config key 'name' must be a non-empty name without '/'");
  if (cfg.workers == 0) throw ConfigError("config key 'workers' must be >= 1");
  if (!(cfg.spatial.length_scale_factor > 0.0)) throw ConfigError("config key 'spatial.length_scale_factor' must be > 0");
  validate(cfg.train);
  return cfg;
}

}  // namespace histocell
