#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "crowdsr/checkpoint.hpp"
#include "crowdsr/dataset.hpp"
#include "crowdsr/errors.hpp"
#include "crowdsr/eval.hpp"
#include "crowdsr/image_io.hpp"
#include "crowdsr/render.hpp"
#include "crowdsr/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace crowdsr;

namespace {

enum Exit { kOk = 0, kUsage = 1, kInput = 2, kState = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// CROWDSR_VERBOSITY: quiet (errors only), info (default) or debug.
enum class Verbosity { quiet, info, debug };

Verbosity verbosity() {
  const char* v = std::getenv("CROWDSR_VERBOSITY");
  const std::string s = v ? v : "info";
  if (s == "quiet") return Verbosity::quiet;
  if (s == "debug") return Verbosity::debug;
  return Verbosity::info;
}

bool logs(Verbosity level) { return verbosity() >= level; }

// ---------------------------------------------------------------------------
// Layered configuration: defaults < --config file < --set key=value < flags.

struct Command {
  std::string name;
  json config;                                // defaults, then the effective values
  std::map<std::string, std::string> flags;   // key -> raw flag text
  std::map<std::string, CLI::Option*> options;
  std::string config_file;
  std::vector<std::string> sets;
};

json parse_value(const json& like, const std::string& key, const std::string& raw) {
  try {
    if (like.is_boolean()) {
      if (raw == "true" || raw == "1") return true;
      if (raw == "false" || raw == "0") return false;
      throw UsageError("");
    }
    if (like.is_number_integer()) {
      std::size_t used = 0;
      const long long v = std::stoll(raw, &used);
      if (used != raw.size()) throw UsageError("");
      return v;
    }
    if (like.is_number()) {
      std::size_t used = 0;
      const double v = std::stod(raw, &used);
      if (used != raw.size()) throw UsageError("");
      return v;
    }
    if (like.is_array()) {
      json arr = json::array();
      std::stringstream ss(raw);
      std::string item;
      while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        arr.push_back(std::stoll(item, &used));
        if (used != item.size()) throw UsageError("");
      }
      return arr;
    }
    return raw;
  } catch (const std::logic_error&) {
  } catch (const UsageError&) {
  }
  throw UsageError("invalid value '" + raw + "' for " + key);
}

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return !a.is_number_integer() || b.is_number_integer();
  return a.type() == b.type();
}

void resolve(Command& cmd) {
  if (!cmd.config_file.empty()) {
    std::ifstream in(cmd.config_file);
    if (!in) throw InputError("cannot open config file " + cmd.config_file);
    json file;
    try {
      file = json::parse(in);
    } catch (const json::exception& e) {
      throw InputError("cannot parse config file " + cmd.config_file + ": " + e.what());
    }
    if (!file.is_object()) throw UsageError("config file must hold an object");
    for (auto& [key, value] : file.items()) {
      if (!cmd.config.contains(key)) throw UsageError("unknown config key '" + key + "'");
      if (!same_kind(cmd.config[key], value)) {
        throw UsageError("config key '" + key + "' has the wrong type");
      }
      cmd.config[key] = value;
    }
  }
  for (const std::string& kv : cmd.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    if (!cmd.config.contains(key)) throw UsageError("unknown config key '" + key + "'");
    cmd.config[key] = parse_value(cmd.config[key], key, kv.substr(eq + 1));
  }
  for (const auto& [key, opt] : cmd.options) {
    if (opt->count() > 0) cmd.config[key] = parse_value(cmd.config[key], key, cmd.flags[key]);
  }
  if (logs(Verbosity::info)) std::cerr << cmd.name << " config: " << cmd.config.dump() << "\n";
}

CLI::App* add_command(CLI::App& app, Command& cmd, const std::string& help) {
  CLI::App* sub = app.add_subcommand(cmd.name, help);
  sub->add_option("--config", cmd.config_file, "JSON file of config values");
  sub->add_option("--set", cmd.sets, "Override one config value (key=value)")->take_all();
  return sub;
}

// Binds a flag or positional to config key `key`.
void bind(CLI::App* sub, Command& cmd, const std::string& name, const std::string& key,
          const std::string& help) {
  cmd.options[key] = sub->add_option(name, cmd.flags[key], help);
}

std::string str(const json& cfg, const char* key) { return cfg.at(key).get<std::string>(); }

std::string require(const json& cfg, const char* key) {
  std::string v = str(cfg, key);
  if (v.empty()) throw UsageError(std::string("missing required value: ") + key);
  return v;
}

// ---------------------------------------------------------------------------
// Subcommands

int run_build(const json& c) {
  BuildConfig cfg;
  cfg.method = parse_interpolation(str(c, "method"));
  cfg.scales = c.at("scales").get<std::vector<int>>();
  cfg.long_side = c.at("long_side").get<Index>();
  cfg.min_side_threshold = c.at("min_side").get<Index>();
  cfg.test_fraction = c.at("test_fraction").get<double>();
  cfg.seed = c.at("seed").get<std::uint64_t>();
  cfg.short_side_multiple = c.at("short_side_multiple").get<Index>();
  cfg.validate();
  const fs::path ann_file = require(c, "annotations");
  if (!fs::exists(ann_file)) throw InputError("annotation file not found: " + ann_file.string());
  const fs::path src = require(c, "src_dir");
  if (!fs::is_directory(src)) throw InputError("source directory not found: " + src.string());
  const fs::path out = require(c, "out_dir");

  const auto anns = read_annotation_list(ann_file);
  DatasetManifest m = build_dataset(src, anns, out, cfg, logs(Verbosity::info) ? &std::cerr : nullptr);
  const ValidationReport report = validate_manifest(m, out);
  for (const EntryCheck& e : report.entries)
    for (const std::string& p : e.problems) std::cerr << e.id << ": " << p << "\n";
  if (!report.ok()) {
    std::cerr << "error: validation failed for " << report.failures() << " entries\n";
    return kInput;
  }
  if (logs(Verbosity::info)) {
    std::cerr << "built " << m.entries.size() << " entries (" << m.skipped.size()
              << " skipped) in " << out.string() << "\n";
  }
  return kOk;
}

ModelSpec spec_from_config(const json& c) {
  const std::string preset = str(c, "model");
  ModelSpec spec;
  if (preset == "toy") spec = ModelSpec::toy();
  else if (preset == "vgg16") spec = ModelSpec::vgg16();
  else throw UsageError("unknown model preset '" + preset + "' (expected toy or vgg16)");
  spec.sr_scale = c.at("sr_scale").get<Index>();
  spec.fusion_stages = c.at("fusion_stages").get<std::vector<int>>();
  if (c.at("head_width").get<Index>() > 0) spec.head_width = c.at("head_width").get<Index>();
  spec.validate();
  return spec;
}

int run_train(const json& c) {
  const fs::path manifest_file = require(c, "manifest");
  const fs::path out = require(c, "out");
  const DatasetManifest manifest = load_manifest(manifest_file);
  const fs::path root = manifest_file.parent_path();

  TrainConfig cfg;
  cfg.lr = c.at("lr").get<double>();
  cfg.epochs = c.at("epochs").get<int>();
  cfg.alpha = c.at("alpha").get<double>();
  cfg.flip_prob = c.at("flip_prob").get<double>();
  cfg.seed = c.at("seed").get<std::uint64_t>();
  cfg.batch_size = c.at("batch_size").get<int>();
  cfg.kernel = {c.at("sigma").get<double>(), c.at("radius").get<int>()};
  cfg.eval_every = c.at("eval_every").get<int>();
  cfg.validate();

  const ModelSpec spec = spec_from_config(c);
  Model model;
  if (const std::string resume = str(c, "resume"); !resume.empty()) {
    model = load_checkpoint(resume);
    check_compatible(model, spec);
    model.spec = spec;
  } else {
    model = init_model(spec, cfg.seed, parse_init_scheme(str(c, "init")), c.at("init_std").get<double>());
  }
  if (c.at("detach").get<bool>()) model = detach_mssrm(model);

  const int input_scale = c.at("input_scale").get<int>();
  const int sr = model.has_mssrm() ? static_cast<int>(spec.sr_scale) : 0;
  if (sr > 0 && input_scale % sr != 0) {
    throw UsageError("input_scale " + std::to_string(input_scale) + " is not a multiple of sr_scale " +
                     std::to_string(sr));
  }
  std::vector<Sample> train_set;
  for (const ManifestEntry* e : select_split(manifest, "train"))
    train_set.push_back(load_sample(*e, root, input_scale, sr));
  std::vector<Sample> val_set;
  for (const ManifestEntry* e : select_split(manifest, str(c, "val_split")))
    val_set.push_back(load_sample(*e, root, input_scale, 0));
  if (train_set.empty()) throw InputError("manifest has no training entries");

  fs::path log_path = str(c, "log");
  if (log_path.empty()) log_path = out.string() + ".log.jsonl";
  std::ofstream log(log_path);
  if (!log) throw InputError("cannot write training log " + log_path.string());
  const int every = c.at("checkpoint_every").get<int>();
  train(model, train_set, val_set, cfg, [&](const EpochRecord& r, const Model& m) {
    const std::string line = to_json_line(r);
    log << line << "\n" << std::flush;
    if (logs(Verbosity::info)) std::cerr << line << "\n";
    if (every > 0 && r.epoch % every == 0) save_checkpoint(out, m);
  });
  save_checkpoint(out, model);
  if (const std::string d = str(c, "detached_out"); !d.empty()) save_checkpoint(d, detach_mssrm(model));
  if (logs(Verbosity::info)) std::cerr << "wrote " << out.string() << "\n";
  return kOk;
}

int run_eval(const json& c) {
  const Model model = load_checkpoint(require(c, "checkpoint"));
  const fs::path manifest_file = require(c, "manifest");
  const DatasetManifest manifest = load_manifest(manifest_file);
  const EvalReport report = evaluate(model, manifest, manifest_file.parent_path(), str(c, "split"),
                                     c.at("input_scale").get<int>());
  const std::string text = report_to_json(report);
  if (const std::string out = str(c, "out"); out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(out);
    if (!f) throw InputError("cannot write " + out);
    f << text;
  }
  for (const EvalRow& r : report.rows)
    if (r.failed) std::cerr << "warning: " << r.id << ": " << r.error << "\n";
  if (logs(Verbosity::info)) {
    std::cerr << "MAE " << report.mae << " RMSE " << report.rmse << " over " << report.m
              << " images\n";
  }
  return kOk;
}

DensityMap predict_map(const Model& model, const fs::path& image) {
  const Image<double> img = with_channels(read_png(image), model.spec.in_channels);
  return forward_counting(model, to_tensor(img)).plane(0, 0);
}

int run_infer(const json& c) {
  const Model model = load_checkpoint(require(c, "checkpoint"));
  const DensityMap map = predict_map(model, require(c, "image"));
  std::printf("%.3f\n", integrate(map));
  if (const std::string d = str(c, "density_out"); !d.empty()) write_density(d, map);
  return kOk;
}

int run_render(const json& c) {
  DensityMap map;
  const std::string density = str(c, "density");
  const std::string checkpoint = str(c, "checkpoint");
  if (!density.empty() == !checkpoint.empty()) {
    throw UsageError("render needs either --density or --checkpoint with --image");
  }
  if (!density.empty()) {
    map = read_density(density);
  } else {
    map = predict_map(load_checkpoint(checkpoint), require(c, "image"));
  }
  const std::string out = require(c, "out");
  write_png(out, render_heatmap(map, c.at("cell_size").get<Index>()));
  if (logs(Verbosity::info)) std::cerr << "wrote " << out << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crowd counting with a detachable super-resolution head"};
  app.require_subcommand(1);

  Command build{"build-dataset",
                {{"src_dir", ""},
                 {"annotations", ""},
                 {"out_dir", ""},
                 {"method", "linear"},
                 {"scales", {2, 4}},
                 {"long_side", 2048},
                 {"min_side", 2048},
                 {"test_fraction", 0.2},
                 {"seed", 0},
                 {"short_side_multiple", 0}},
                {}, {}, {}, {}};
  CLI::App* b = add_command(app, build, "Build the multi-resolution dataset and its manifest");
  bind(b, build, "src_dir", "src_dir", "Directory of source PNG images");
  bind(b, build, "annotations", "annotations", "JSON array of annotation records");
  bind(b, build, "out_dir", "out_dir", "Output directory");
  bind(b, build, "--method", "method", "linear, cubic or lanczos4");
  bind(b, build, "--scales", "scales", "Comma-separated downsampling scales");
  bind(b, build, "--long-side", "long_side", "Long side of the HR level");
  bind(b, build, "--min-side", "min_side", "Skip sources whose sides are all below this");
  bind(b, build, "--test-fraction", "test_fraction", "Share of entries in the test split");
  bind(b, build, "--seed", "seed", "Split seed");
  bind(b, build, "--short-side-multiple", "short_side_multiple",
       "Round the HR short side to this multiple (0: largest scale)");

  Command tr{"train",
             {{"manifest", ""},
              {"out", ""},
              {"alpha", 1.0},
              {"epochs", 500},
              {"lr", 1e-5},
              {"sr_scale", 2},
              {"seed", 0},
              {"flip_prob", 0.5},
              {"batch_size", 1},
              {"sigma", 4.0},
              {"radius", 16},
              {"input_scale", 4},
              {"model", "toy"},
              {"fusion_stages", {3, 4, 5}},
              {"head_width", 0},
              {"init", "gaussian"},
              {"init_std", 0.01},
              {"resume", ""},
              {"detach", false},
              {"detached_out", ""},
              {"checkpoint_every", 0},
              {"eval_every", 1},
              {"val_split", "test"},
              {"log", ""}},
             {}, {}, {}, {}};
  CLI::App* t = add_command(app, tr, "Train the counting network with the SR auxiliary loss");
  bind(t, tr, "manifest", "manifest", "Dataset manifest");
  bind(t, tr, "--out", "out", "Checkpoint to write");
  bind(t, tr, "--alpha", "alpha", "Weight of the SR loss");
  bind(t, tr, "--epochs", "epochs", "Training epochs");
  bind(t, tr, "--lr", "lr", "Adam learning rate");
  bind(t, tr, "--sr-scale", "sr_scale", "Super-resolution factor (2 or 4)");
  bind(t, tr, "--seed", "seed", "Seed for init, shuffling and flips");
  bind(t, tr, "--flip-prob", "flip_prob", "Horizontal flip probability");
  bind(t, tr, "--batch-size", "batch_size", "Images per step");
  bind(t, tr, "--input-scale", "input_scale", "Manifest level used as network input");
  bind(t, tr, "--model", "model", "Backbone preset: toy or vgg16");
  bind(t, tr, "--init", "init", "gaussian or kaiming_backbone");
  bind(t, tr, "--resume", "resume", "Start from this checkpoint");
  bind(t, tr, "--detached-out", "detached_out", "Also write a checkpoint without the SR head");
  bind(t, tr, "--checkpoint-every", "checkpoint_every", "Epochs between checkpoint writes");
  bind(t, tr, "--log", "log", "JSON-lines training log (default: <out>.log.jsonl)");

  Command ev{"eval",
             {{"checkpoint", ""}, {"manifest", ""}, {"split", "test"}, {"input_scale", 4}, {"out", ""}},
             {}, {}, {}, {}};
  CLI::App* e = add_command(app, ev, "Report MAE and RMSE over a manifest split");
  bind(e, ev, "checkpoint", "checkpoint", "Model checkpoint");
  bind(e, ev, "manifest", "manifest", "Dataset manifest");
  bind(e, ev, "--split", "split", "train, test or all");
  bind(e, ev, "--input-scale", "input_scale", "Manifest level used as network input");
  bind(e, ev, "--out", "out", "Write the report here instead of stdout");

  Command inf{"infer", {{"checkpoint", ""}, {"image", ""}, {"density_out", ""}}, {}, {}, {}, {}};
  CLI::App* i = add_command(app, inf, "Print the predicted count of one image");
  bind(i, inf, "checkpoint", "checkpoint", "Model checkpoint");
  bind(i, inf, "image", "image", "PNG image");
  bind(i, inf, "--density-out", "density_out", "Write the density map as JSON");

  Command ren{"render",
              {{"out", ""}, {"density", ""}, {"checkpoint", ""}, {"image", ""}, {"cell_size", 8}},
              {}, {}, {}, {}};
  CLI::App* r = add_command(app, ren, "Render a density map as a heatmap PNG");
  bind(r, ren, "out", "out", "Output PNG");
  bind(r, ren, "--density", "density", "Density dump written by infer");
  bind(r, ren, "--checkpoint", "checkpoint", "Checkpoint to predict with");
  bind(r, ren, "--image", "image", "Image to predict on");
  bind(r, ren, "--cell-size", "cell_size", "Pixels per density cell");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    for (Command* cmd : {&build, &tr, &ev, &inf, &ren}) {
      if (!app.got_subcommand(cmd->name)) continue;
      resolve(*cmd);
      if (cmd == &build) return run_build(cmd->config);
      if (cmd == &tr) return run_train(cmd->config);
      if (cmd == &ev) return run_eval(cmd->config);
      if (cmd == &inf) return run_infer(cmd->config);
      return run_render(cmd->config);
    }
  } catch (const UsageError& err) {
    std::cerr << "usage error: " << err.what() << "\n";
    return kUsage;
  } catch (const ShapeError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kState;
  } catch (const StateError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kState;
  } catch (const TrainingError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kState;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kInput;
  }
  return kUsage;
}
