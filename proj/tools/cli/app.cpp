#include "app.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <openssl/evp.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "histocell/csv.hpp"
#include "histocell/errors.hpp"
#include "histocell/experiments.hpp"
#include "histocell/synthetic.hpp"

namespace histocell::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string command;
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
  int verbose = 0;
  bool quiet = false;

  // per-command
  std::string spots, abundances, pred, truth, model, dir, image, fractions_out;
  std::vector<std::string> folds;
  int patch_size = kDefaultPatchSize;
  int threshold = kDefaultWhiteThreshold;
};

struct Resolved {
  json config;  // full resolved config, including "synth"
  ExperimentConfig exp;
  SyntheticSpec synth;
};

void setup_logging(const Options& opt) {
  static std::once_flag once;
  std::call_once(once, [] {
    auto logger = std::make_shared<spdlog::logger>("histocell", std::make_shared<spdlog::sinks::stderr_sink_mt>());
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
  });
  auto level = spdlog::level::info;
  if (opt.quiet) level = spdlog::level::err;
  else if (opt.verbose >= 2) level = spdlog::level::trace;
  else if (opt.verbose == 1) level = spdlog::level::debug;
  spdlog::set_level(level);
}

// Recursively overlays `user` onto `base`; keys absent from `base` are rejected.
void merge_into(json& base, const json& user, const std::string& where) {
  if (!user.is_object()) throw ConfigError((where.empty() ? std::string("config") : where) + ": expected an object");
  for (const auto& [key, value] : user.items()) {
    const std::string name = where.empty() ? key : where + "." + key;
    auto it = base.find(key);
    if (it == base.end()) throw ConfigError("unknown config key '" + name + "'");
    if (it->is_object() && value.is_object()) merge_into(*it, value, name);
    else *it = value;
  }
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

Resolved resolve(const Options& opt) {
  json config = default_config();
  if (!opt.config_path.empty()) {
    json user = read_json_file(opt.config_path);
    // A run record carries the resolved config under "config".
    if (user.is_object() && user.contains("command") && user.contains("config")) user = user["config"];
    merge_into(config, user, "");
  }
  for (const auto& o : opt.overrides) apply_override(config, o);
  if (!opt.out_dir.empty()) config["output"] = opt.out_dir;
  if (opt.workers) config["workers"] = *opt.workers;
  if (opt.seed) {
    config["train"]["seed"] = *opt.seed;
    config["synth"]["seed"] = *opt.seed;
  }
  for (const auto& f : opt.folds) config["folds"].push_back(f);

  Resolved r;
  json exp = config;
  exp.erase("synth");
  r.exp = experiment_config_from_json(exp);
  r.synth = synthetic_spec_from_json(config["synth"]);
  r.config = std::move(config);
  return r;
}

void write_run_record(const fs::path& dir, const std::string& command, const Resolved& r) {
  json record;
  record["command"] = command;
  record["config"] = r.config;
  record["seed"] = command == "synth" ? r.synth.seed : r.exp.train.seed;
  json artifacts = json::object();
  for (const auto& [rel, hash] : hash_tree(dir)) artifacts[rel] = hash;
  record["artifacts"] = std::move(artifacts);
  auto out = csv::open_output(dir / "run.json");
  out << record.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + (dir / "run.json").string());
}

std::string fixed3(std::optional<double> v) {
  if (!v || !std::isfinite(*v)) return "NA";
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << *v;
  return s.str();
}

std::string summary_line(std::optional<double> cc, std::optional<double> l1, std::optional<double> cosine,
                         std::optional<double> correlation) {
  return "mean_cc " + fixed3(cc) + " l1 " + fixed3(l1) + " cosine " + fixed3(cosine) + " correlation " +
         fixed3(correlation);
}

std::string summary_line(const Evaluation& e) {
  const auto& c = e.coloc;
  return summary_line(e.pooled.mean_cc, e.pooled.l1, c ? std::optional(c->mean_cosine) : std::nullopt,
                      c ? std::optional(c->mean_correlation) : std::nullopt);
}

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Averages of fold metrics over successful folds.
std::string folds_summary(const ExperimentResult& res) {
  std::vector<double> cc, l1, cos, cor;
  for (const auto& f : res.folds) {
    if (!f.ok) continue;
    const auto& p = f.evaluation.pooled;
    if (std::isfinite(p.mean_cc)) cc.push_back(p.mean_cc);
    l1.push_back(p.l1);
    if (f.evaluation.coloc) {
      cos.push_back(f.evaluation.coloc->mean_cosine);
      cor.push_back(f.evaluation.coloc->mean_correlation);
    }
  }
  return summary_line(mean_of(cc), mean_of(l1), mean_of(cos), mean_of(cor));
}

int report_folds(const ExperimentResult& res, std::ostream& out, std::ostream& err) {
  bool all_ok = true;
  for (const auto& f : res.folds) {
    if (f.ok) {
      out << "fold " << f.name << ": " << summary_line(f.evaluation) << '\n';
    } else {
      all_ok = false;
      err << "fold " << f.name << " failed: " << f.error << '\n';
    }
  }
  out << folds_summary(res) << '\n';
  return all_ok ? kExitOk : kExitFailure;
}

int cmd_validate(const Options& opt, const Resolved& r, std::ostream& out) {
  const fs::path spots = opt.spots.empty() ? r.exp.data.spots : fs::path(opt.spots);
  const fs::path abundances = opt.abundances.empty() ? r.exp.data.abundances : fs::path(opt.abundances);
  if (spots.empty()) throw ConfigError("validate needs --spots (or data.spots in the config)");
  if (!fs::exists(spots)) throw IoError("no such file '" + spots.string() + "'");
  if (!abundances.empty() && !fs::exists(abundances)) throw IoError("no such file '" + abundances.string() + "'");

  const bool has_blocks = !r.exp.data.embeddings.empty();
  auto findings = check_spot_file(spots, /*require_embeddings=*/!has_blocks);
  std::optional<SpotTable> table;
  if (findings.empty()) {
    try {
      std::vector<EmbeddingBlock> blocks;
      for (std::size_t i = 0; i < r.exp.data.embeddings.size(); ++i)
        blocks.push_back(load_embedding_block(r.exp.data.embeddings[i], r.exp.data.embeddings[i].stem().string()));
      table = has_blocks ? load_spot_table(spots, blocks) : load_spot_table(spots);
    } catch (const SchemaError& e) {
      findings.push_back({spots.string(), 0, e.what()});
    } catch (const IoError&) {
      throw;
    } catch (const Error& e) {
      findings.push_back({spots.string(), 0, e.what()});
    }
  }
  if (!abundances.empty()) {
    std::vector<std::string> ids;
    if (table) ids = table->spot_ids;
    auto more = check_abundance_file(abundances, table ? &ids : nullptr);
    findings.insert(findings.end(), more.begin(), more.end());
  }
  for (const auto& f : findings) out << f.str() << '\n';
  if (!findings.empty()) return kExitFailure;
  out << "ok: " << table->size() << " spots, " << table->dim() << " embedding dims\n";
  return kExitOk;
}

int cmd_train(const Resolved& r, std::ostream& out) {
  const auto data = load_dataset(r.exp.data);
  auto trained = train(data.spots, data.abundances, r.exp.train);
  const fs::path dir = r.exp.experiment_dir() / "train";
  fs::remove_all(dir);
  fs::create_directories(dir);
  save_model(trained.model, dir / "model.ckpt");
  {
    auto h = csv::open_output(dir / "history.csv");
    h << "epoch,loss\n";
    for (std::size_t e = 0; e < trained.history.size(); ++e)
      h << e + 1 << ',' << csv::format_real(trained.history[e]) << '\n';
  }
  const auto pred = predict(trained.model, data.spots, r.exp.clamp);
  save_abundance_table(pred, dir / "predictions.csv");
  const auto eval = evaluate_and_write(data.spots, data.abundances, pred, r.exp, dir, "train");
  write_run_record(dir, "train", r);
  out << summary_line(eval) << '\n';
  return kExitOk;
}

int cmd_eval(const Options& opt, const Resolved& r, std::ostream& out) {
  const fs::path model_path = opt.model.empty() ? r.exp.model : fs::path(opt.model);
  if (model_path.empty()) throw ConfigError("eval needs --model (or model in the config)");
  const auto model = load_model(model_path);
  const auto data = load_dataset(r.exp.data);
  if (!model.cell_types.empty() && model.cell_types != data.abundances.cell_types)
    throw Error("model cell types do not match the abundance table");
  const auto pred = predict(model, data.spots, r.exp.clamp);
  const fs::path dir = r.exp.experiment_dir() / "eval";
  fs::remove_all(dir);
  fs::create_directories(dir);
  save_abundance_table(pred, dir / "predictions.csv");
  const auto eval = evaluate_and_write(data.spots, data.abundances, pred, r.exp, dir, "eval");
  write_run_record(dir, "eval", r);
  out << summary_line(eval) << '\n';
  return kExitOk;
}

int cmd_loo(const Resolved& r, std::ostream& out, std::ostream& err, const std::atomic<bool>* cancel) {
  auto cfg = r.exp;
  cfg.mode = ExperimentMode::loo;
  const auto res = run_loo(cfg, cancel);
  write_run_record(res.directory, "loo", r);
  return report_folds(res, out, err);
}

int cmd_cross(const Resolved& r, std::ostream& out, std::ostream& err) {
  auto cfg = r.exp;
  cfg.mode = ExperimentMode::cross;
  if (cfg.test_data.spots.empty()) throw ConfigError("cross needs test_data.spots and test_data.abundances");
  const auto res = run_cross_dataset(cfg);
  write_run_record(res.directory, "cross", r);
  return report_folds(res, out, err);
}

int cmd_coloc(const Options& opt, const Resolved& r, std::ostream& out) {
  const fs::path spots_path = opt.spots.empty() ? r.exp.data.spots : fs::path(opt.spots);
  const fs::path truth_path = opt.truth.empty() ? r.exp.data.abundances : fs::path(opt.truth);
  if (spots_path.empty() || truth_path.empty() || opt.pred.empty())
    throw ConfigError("coloc needs --spots, --pred and --truth");
  const auto spots = load_spot_locations(spots_path);
  const auto truth = load_abundance_table(truth_path, spots);
  const auto pred = load_abundance_table(opt.pred, spots, /*ground_truth=*/false);
  const fs::path dir = r.exp.experiment_dir() / "coloc";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto eval = evaluate_and_write(spots, truth, pred, r.exp, dir, "coloc");
  write_run_record(dir, "coloc", r);
  out << summary_line(eval) << '\n';
  return kExitOk;
}

int cmd_synth(const Resolved& r, std::ostream& out) {
  const fs::path dir = r.exp.output_dir;
  const auto paths = write_synthetic(r.synth, dir);
  write_run_record(dir, "synth", r);
  out << "wrote " << r.synth.n_patients * r.synth.spots_per_patient << " spots (" << r.synth.dim << " dims, "
      << r.synth.cell_types << " cell types) to " << paths.spots.parent_path().string() << '\n';
  return kExitOk;
}

int cmd_patches(const Options& opt, const Resolved& r, std::ostream& out) {
  if (opt.threshold < 0 || opt.threshold > 255) throw ConfigError("--threshold must be in [0, 255]");
  const auto threshold = static_cast<std::uint8_t>(opt.threshold);
  std::map<std::string, double> fractions;
  if (!opt.dir.empty()) {
    if (!fs::is_directory(opt.dir)) throw IoError("no such directory '" + opt.dir + "'");
    for (const auto& entry : fs::directory_iterator(opt.dir)) {
      if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
      fractions[entry.path().stem().string()] = background_fraction(read_png(entry.path()), threshold);
    }
  } else if (!opt.image.empty()) {
    const fs::path spots_path = opt.spots.empty() ? r.exp.data.spots : fs::path(opt.spots);
    if (spots_path.empty()) throw ConfigError("patches --image needs --spots");
    const auto image = read_png(opt.image);
    const auto spots = load_spot_locations(spots_path);
    for (std::size_t i = 0; i < spots.size(); ++i) {
      const auto box = patch_bbox(spots.x[i], spots.y[i], opt.patch_size, image.width, image.height);
      fractions[spots.spot_ids[i]] = background_fraction(crop(image, box), threshold);
    }
  } else {
    throw ConfigError("patches needs --dir or --image");
  }
  const fs::path dest = opt.fractions_out.empty() ? r.exp.output_dir / "fractions.csv" : fs::path(opt.fractions_out);
  save_fractions(fractions, dest);
  const auto dropped = std::count_if(fractions.begin(), fractions.end(),
                                     [&](const auto& kv) { return kv.second > r.exp.data.max_background; });
  out << fractions.size() << " patches, " << dropped << " above max_background, written to " << dest.string()
      << '\n';
  return kExitOk;
}

std::optional<std::int64_t> parse_int(const std::string& s) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

}  // namespace

json default_config() {
  json j = to_json(ExperimentConfig{});
  j["synth"] = to_json(SyntheticSpec{});
  return j;
}

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) throw ConfigError("unknown config key '" + key + "'");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }

  const auto bad = [&](const char* expected) {
    return ConfigError("override '" + key + "': '" + value + "' is not " + expected);
  };
  switch (node->type()) {
    case json::value_t::boolean:
      if (value == "true") *node = true;
      else if (value == "false") *node = false;
      else throw bad("true or false");
      break;
    case json::value_t::number_unsigned: {
      const auto v = parse_int(value);
      if (!v || *v < 0) throw bad("a non-negative integer");
      *node = static_cast<std::uint64_t>(*v);
      break;
    }
    case json::value_t::number_integer: {
      const auto v = parse_int(value);
      if (!v) throw bad("an integer");
      *node = *v;
      break;
    }
    case json::value_t::number_float: {
      const auto v = csv::parse_real(value);
      if (!v) throw bad("a finite number");
      *node = *v;
      break;
    }
    case json::value_t::string:
      *node = value;
      break;
    case json::value_t::array:
      if (!value.empty() && value.front() == '[') {
        try {
          *node = json::parse(value);
        } catch (const json::parse_error&) {
          throw bad("a JSON array");
        }
        if (!node->is_array()) throw bad("a JSON array");
      } else {
        *node = json::array();
        for (auto field : csv::split(value))
          if (!field.empty()) node->push_back(std::string(field));
      }
      break;
    default:
      throw ConfigError("override '" + key + "': cannot replace a whole section");
  }
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("sha256 init failed");
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    char b[3];
    std::snprintf(b, sizeof b, "%02x", md[i]);
    hex += b;
  }
  return hex;
}

std::map<std::string, std::string> hash_tree(const fs::path& dir) {
  std::map<std::string, std::string> hashes;
  if (!fs::is_directory(dir)) return hashes;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dir).generic_string();
    if (rel == "run.json" || rel.ends_with("/run.json")) continue;
    hashes[rel] = sha256_file(entry.path());
  }
  return hashes;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const std::atomic<bool>* cancel) {
  Options opt;
  CLI::App app{"histocell: cell-type abundance regression from patch embeddings", "histocell"};
  app.require_subcommand(1);
  app.add_option("--config", opt.config_path, "JSON config file (or a run.json record)");
  app.add_option("--set", opt.overrides, "Override a config key, e.g. train.epochs=10")->allow_extra_args(false)->take_all();
  app.add_option("--out", opt.out_dir, "Output directory");
  app.add_option("--workers", opt.workers, "Concurrent folds");
  app.add_option("--seed", opt.seed, "Seed for training and synthetic data");
  app.add_flag("-v,--verbose", opt.verbose, "More logging (repeatable)");
  app.add_flag("-q,--quiet", opt.quiet, "Errors only");

  auto* validate = app.add_subcommand("validate", "Check spots and abundance files");
  validate->add_option("--spots", opt.spots);
  validate->add_option("--abundances", opt.abundances);
  app.add_subcommand("train", "Train on all spots and score in-sample");
  auto* eval = app.add_subcommand("eval", "Score a saved model on a dataset");
  eval->add_option("--model", opt.model);
  auto* loo = app.add_subcommand("loo", "Leave-one-patient-out experiment");
  loo->add_option("--fold", opt.folds, "Run only this fold (repeatable)")->allow_extra_args(false);
  app.add_subcommand("cross", "Train on data, test on test_data");
  auto* coloc = app.add_subcommand("coloc", "Compare predicted and true colocalization");
  coloc->add_option("--spots", opt.spots);
  coloc->add_option("--pred", opt.pred);
  coloc->add_option("--truth", opt.truth);
  app.add_subcommand("synth", "Write a synthetic dataset");
  auto* patches = app.add_subcommand("patches", "Background fractions of PNG patches");
  patches->add_option("--dir", opt.dir, "Directory of <spot_id>.png patches");
  patches->add_option("--image", opt.image, "Whole image to crop patches from");
  patches->add_option("--spots", opt.spots);
  patches->add_option("--size", opt.patch_size, "Patch side in pixels");
  patches->add_option("--threshold", opt.threshold, "White threshold (0-255)");
  patches->add_option("--fractions", opt.fractions_out, "Output CSV");
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitIoOrConfig;
  }
  opt.command = app.get_subcommands().front()->get_name();
  setup_logging(opt);

  try {
    const auto r = resolve(opt);
    if (opt.command == "validate") return cmd_validate(opt, r, out);
    if (opt.command == "train") return cmd_train(r, out);
    if (opt.command == "eval") return cmd_eval(opt, r, out);
    if (opt.command == "loo") return cmd_loo(r, out, err, cancel);
    if (opt.command == "cross") return cmd_cross(r, out, err);
    if (opt.command == "coloc") return cmd_coloc(opt, r, out);
    if (opt.command == "synth") return cmd_synth(r, out);
    if (opt.command == "patches") return cmd_patches(opt, r, out);
    err << "error: unknown command '" << opt.command << "'\n";
    return kExitIoOrConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitIoOrConfig;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIoOrConfig;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIoOrConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace histocell::cli
