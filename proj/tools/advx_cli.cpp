// advx: command-line driver for corpus synthesis, training, attacks, and transfer reports.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>
#include <spdlog/version.h>

#include <Eigen/Core>

#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "advx/architectures.hpp"
#include "advx/attacks.hpp"
#include "advx/checkpoint.hpp"
#include "advx/dataset.hpp"
#include "advx/errors.hpp"
#include "advx/gradcheck.hpp"
#include "advx/image_io.hpp"
#include "advx/kv_config.hpp"
#include "advx/synth.hpp"
#include "advx/trainer.hpp"
#include "advx/transfer.hpp"

namespace fs = std::filesystem;
using namespace advx;

namespace {

constexpr int kUsageExit = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Key {
  std::string name;
  std::string help;
};

struct Command {
  std::string name;
  std::string help;
  std::vector<Key> keys;
  std::function<int(const KvConfig&, const fs::path& config_path)> run;
};

std::string version_banner() {
  std::ostringstream s;
  s << "advx " << ADVX_VERSION << " (Eigen " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.'
    << EIGEN_MINOR_VERSION << ", CLI11 " << CLI11_VERSION << ", spdlog " << SPDLOG_VER_MAJOR << '.'
    << SPDLOG_VER_MINOR << '.' << SPDLOG_VER_PATCH << ')';
  return s.str();
}

std::vector<Index> parse_widths(const KvConfig& kv) {
  std::vector<Index> out;
  for (const auto& item : kv.get_list("widths")) {
    try {
      out.push_back(static_cast<Index>(std::stoll(item)));
    } catch (const std::exception&) {
      throw ConfigError("widths: '" + item + "' is not an integer");
    }
  }
  return out;
}

NetworkSpec architecture_from(const KvConfig& kv) {
  const std::string arch = kv.get("arch", "BS");
  const auto widths = parse_widths(kv);
  if (widths.empty()) {
    if (arch == "BS") return build_bsnet();
    if (arch == "GC") return build_gcnet();
  }
  return build_architecture(arch, widths);
}

IfgsmConfig::StepRule step_rule_from(const std::string& s) {
  if (s == "full") return IfgsmConfig::StepRule::Full;
  if (s == "split") return IfgsmConfig::StepRule::Split;
  throw ConfigError("ifgsm_step_rule must be split or full, got '" + s + "'");
}

std::vector<AttackSpec> attacks_from(const KvConfig& kv) {
  std::vector<std::string> tokens = kv.get_list("attacks");
  if (tokens.empty()) tokens = {"ifgsm:0.01", "ifgsm:0.001", "jsma:0.1", "jsma:0.01"};
  std::vector<AttackSpec> specs;
  for (const auto& t : tokens) {
    AttackSpec spec = parse_attack(t);
    spec.ifgsm.max_steps = static_cast<int>(kv.get_int("ifgsm_steps", spec.ifgsm.max_steps));
    spec.ifgsm.max_strength = kv.get_double("ifgsm_max_strength", spec.ifgsm.max_strength);
    spec.ifgsm.early_stop = kv.get_bool("ifgsm_early_stop", spec.ifgsm.early_stop);
    spec.ifgsm.step_rule = step_rule_from(kv.get("ifgsm_step_rule", "full"));
    spec.jsma.max_per_pixel = static_cast<int>(kv.get_int("jsma_budget", spec.jsma.max_per_pixel));
    spec.jsma.max_iterations = static_cast<int>(kv.get_int("jsma_max_iterations", spec.jsma.max_iterations));
    spec.ifgsm.validate();
    spec.jsma.validate();
    specs.push_back(spec);
  }
  return specs;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

fs::path start_run(const KvConfig& kv, const fs::path& config_path, const std::string& default_tag) {
  const fs::path dir = create_run_directory(output_root(kv.get("output_dir", "runs")), kv.get("tag", default_tag));
  if (!config_path.empty()) fs::copy_file(config_path, dir / "config.cfg", fs::copy_options::overwrite_existing);
  write_file(dir / "effective_config.cfg", kv.canonical());
  return dir;
}

int cmd_synth(const KvConfig& kv, const fs::path&) {
  const fs::path out = kv.get("out");
  const auto count = kv.get_int("count", 100);
  const auto size = kv.get_int("size", 256);
  if (count < 1 || size < 1) throw ConfigError("count and size must be positive");
  const auto files = synth_corpus(out, static_cast<int>(count), static_cast<Index>(size),
                                  synth_profile_from_string(kv.get("profile", "R")),
                                  static_cast<std::uint64_t>(kv.get_int("seed", 1)));
  std::cout << "wrote " << files.size() << " images to " << out.string() << '\n';
  return 0;
}

int cmd_manifest(const KvConfig& kv, const fs::path&) {
  const fs::path pristine = kv.get("pristine");
  ManifestOptions o;
  o.task = task_from_string(kv.get("task", "med"));
  o.seed = static_cast<std::uint64_t>(kv.get_int("seed", 1));
  o.patches_per_image = static_cast<int>(kv.get_int("patches_per_image", 30));
  o.patch_size = static_cast<Index>(kv.get_int("patch_size", 128));
  o.corpus_id = kv.get("corpus_id", fs::absolute(pristine).lexically_normal().filename().string());
  o.median_window = static_cast<int>(kv.get_int("median_window", 5));
  o.resize.factor = kv.get_double("resize_factor", 0.8);
  const std::string kernel = kv.get("resize_kernel", "bilinear");
  if (kernel == "bilinear") o.resize.kernel = ResizeKernel::Bilinear;
  else if (kernel == "bicubic") o.resize.kernel = ResizeKernel::Bicubic;
  else throw ConfigError("resize_kernel must be bilinear or bicubic, got '" + kernel + "'");
  if (kv.has("fractions")) {
    const auto parts = kv.get_list("fractions");
    if (parts.size() != 3) throw ConfigError("fractions needs three comma-separated values");
    for (int i = 0; i < 3; ++i) o.fractions[static_cast<std::size_t>(i)] = std::stod(parts[static_cast<std::size_t>(i)]);
  }
  const DatasetManifest m = build_manifest(pristine, o);
  save_manifest(kv.get("out"), m);
  std::size_t patches = 0;
  for (const auto& r : m.records) patches += r.patches.size();
  std::cout << "manifest " << kv.get("out") << ": " << m.records.size() << " records, " << patches << " patches\n";
  return 0;
}

int cmd_train(const KvConfig& kv, const fs::path&) {
  const DatasetManifest manifest = load_manifest(kv.get("manifest"));
  const NetworkSpec spec = architecture_from(kv);
  TrainConfig cfg;
  cfg.epochs = static_cast<int>(kv.get_int("epochs", default_epochs(spec.name)));
  cfg.seed = static_cast<std::uint64_t>(kv.get_int("seed", 1));
  cfg.learning_rate = kv.get_double("learning_rate", cfg.learning_rate);
  cfg.batch_size = static_cast<std::size_t>(kv.get_int("batch_size", static_cast<std::int64_t>(cfg.batch_size)));
  const TrainResult result = train(spec, manifest, cfg);
  const fs::path out = kv.get("out");
  save_checkpoint(out, result.detector);
  std::ostringstream history;
  write_history_csv(history, result.history);
  write_file(kv.get("history", out.string() + ".history.csv"), history.str());
  std::cout << result.detector.meta.display_name() << ": final val accuracy " << result.history.val_accuracy.back();
  if (result.history.test_accuracy) std::cout << ", test accuracy " << *result.history.test_accuracy;
  std::cout << "\ncheckpoint " << out.string() << '\n';
  return 0;
}

int cmd_attack(const KvConfig& kv, const fs::path& config_path) {
  const TrainedNetwork det = load_checkpoint(kv.get("checkpoint"));
  const DatasetManifest manifest = load_manifest(kv.get("manifest"));
  const std::string cls = kv.get("attacked_class", "manipulated");
  if (cls != "manipulated" && cls != "pristine") throw ConfigError("attacked_class must be manipulated or pristine");
  const int label = cls == "manipulated" ? kManipulatedLabel : kPristineLabel;
  const auto specs = attacks_from(kv);
  const EvaluationSet set = select_eligible(det, load_patches(manifest, Split::Test), label,
                                            static_cast<std::size_t>(kv.get_int("eval_count", 500)),
                                            static_cast<std::uint64_t>(kv.get_int("seed", 1)));
  if (set.patches.empty()) throw InputError("no eligible test patches");
  const fs::path dir = start_run(kv, config_path, "attack");
  std::ostringstream summary;
  summary << "attack,attempted,sn_successes,rate_sn,rate_sn_rounded,psnr_db,l1_mean,max_abs\n";
  std::vector<std::vector<AttackOutcome>> all;
  for (const auto& spec : specs) {
    auto outcomes = attack_set(det, set, spec, static_cast<unsigned>(kv.get_int("threads", 0)));
    const SuccessRates r = success_rates(outcomes, det);
    const DistortionStats d = summarize_distortion(outcomes);
    char line[256];
    std::snprintf(line, sizeof line, "%s,%zu,%zu,%.4f,%.4f,%.2f,%.2f,%.2f\n", spec.token().c_str(), r.attempted,
                  r.sn_successes, r.rate_sn, r.rate_sn_rounded, d.psnr_db, d.l1_mean, d.max_abs);
    summary << line;
    std::string token = spec.token();
    std::replace(token.begin(), token.end(), ':', '_');
    std::ostringstream csv;
    write_outcomes_csv(csv, outcomes);
    write_file(dir / ("outcomes_" + token + ".csv"), csv.str());
    if (kv.get_bool("dump_images", false)) {
      const fs::path img_dir = dir / ("adversarial_" + token);
      fs::create_directories(img_dir);
      for (std::size_t i = 0; i < outcomes.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "%05zu.pgm", i);
        write_pgm(img_dir / name, outcomes[i].rounded);
      }
    }
  }
  write_file(dir / "summary.csv", summary.str());
  std::cout << summary.str() << "run directory " << dir.string() << '\n';
  return 0;
}

int cmd_transfer(const KvConfig& kv, const fs::path& config_path) {
  const ExperimentConfig cfg = ExperimentConfig::from_kv(kv);
  std::vector<std::vector<AttackOutcome>> outcomes;
  const TransferReport report = run_experiment(cfg, &outcomes);
  const fs::path dir = start_run(kv, config_path, to_string(cfg.scenario));
  write_report(dir, report, outcomes, cfg.dump_images);
  std::cout << emit_table(report, TableFormat::Markdown) << "run directory " << dir.string() << '\n';
  return 0;
}

int cmd_report(const KvConfig& kv, const fs::path&) {
  const fs::path run = kv.get("run");
  const std::string format = kv.get("format", "markdown");
  if (format != "markdown" && format != "csv") throw ConfigError("format must be markdown or csv");
  const fs::path file = run / (format == "csv" ? "report.csv" : "report.md");
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("no report at " + file.string());
  std::cout << in.rdbuf();
  return 0;
}

int cmd_gradcheck(const KvConfig& kv, const fs::path&) {
  NetworkSpec spec = architecture_from(kv);
  const auto size = kv.get_int("input_size", 128);
  spec.input_shape = Shape{1, static_cast<Index>(size), static_cast<Index>(size)};
  infer_shapes(spec);
  const auto seed = static_cast<std::uint64_t>(kv.get_int("seed", 1));
  const auto batch = kv.get_int("batch", 2);
  if (batch < 1) throw ConfigError("batch must be at least 1");
  Network<double> net(spec);
  initialize(net, seed);
  Tensor<double> input(Shape{static_cast<Index>(batch), 1, spec.input_shape[1], spec.input_shape[2]});
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Index i = 0; i < input.size(); ++i) input[i] = unit(rng);
  std::vector<int> labels;
  for (Index i = 0; i < batch; ++i) labels.push_back(static_cast<int>(i % 2));
  GradCheckOptions opts;
  opts.probe_count = static_cast<std::size_t>(kv.get_int("probes", 50));
  opts.seed = seed;
  const GradCheckResult r = grad_check(net, input, std::span<const int>(labels), opts);
  std::printf("%s: max relative error %.3e over %zu probes (%zu on the input, %zu step reductions); worst %s\n", spec.name.c_str(),
              r.max_relative_error, r.probes, r.input_probes, r.shrunk_steps, r.worst_location.c_str());
  return r.max_relative_error < 1e-3 ? 0 : 1;
}

const std::vector<Key> kAttackKeys = {
    {"attacks", "comma-separated ifgsm:<eps_s> / jsma:<theta> list"},
    {"ifgsm_steps", "I-FGSM steps S (10)"},
    {"ifgsm_max_strength", "largest I-FGSM strength (0.1)"},
    {"ifgsm_step_rule", "full (eps per step) or split (eps/S per step)"},
    {"ifgsm_early_stop", "stop I-FGSM at the first label flip (true)"},
    {"jsma_budget", "JSMA modifications per pixel T (7)"},
    {"jsma_max_iterations", "JSMA iteration cap (2000)"},
};

std::vector<Command> commands() {
  std::vector<Command> c;
  c.push_back({"synth", "generate a synthetic pristine corpus",
               {{"out", "output directory"},
                {"count", "number of images (100)"},
                {"size", "image side in pixels (256)"},
                {"profile", "R (smooth) or V (busy)"},
                {"seed", "random seed (1)"}},
               cmd_synth});
  c.push_back({"manifest", "split a corpus and record patch windows",
               {{"pristine", "directory of pristine images"},
                {"out", "manifest path"},
                {"task", "med or res"},
                {"corpus_id", "corpus tag (directory name)"},
                {"seed", "random seed (1)"},
                {"patches_per_image", "patches per image (30)"},
                {"patch_size", "patch side (128)"},
                {"fractions", "train,val,test fractions (0.7,0.1,0.2)"},
                {"median_window", "median window (5)"},
                {"resize_factor", "resize factor (0.8)"},
                {"resize_kernel", "bilinear or bicubic"}},
               cmd_manifest});
  c.push_back({"train", "train a detector",
               {{"manifest", "dataset manifest"},
                {"arch", "BS or GC"},
                {"widths", "comma-separated builder widths"},
                {"out", "checkpoint path"},
                {"history", "history CSV path (<out>.history.csv)"},
                {"epochs", "epochs (architecture default)"},
                {"seed", "random seed (1)"},
                {"learning_rate", "Adam step size (1e-4)"},
                {"batch_size", "mini-batch size (32)"}},
               cmd_train});
  std::vector<Key> attack_keys = {{"checkpoint", "source network checkpoint"},
                                  {"manifest", "dataset manifest (test split is attacked)"},
                                  {"eval_count", "patches to attack (500)"},
                                  {"attacked_class", "manipulated or pristine"},
                                  {"seed", "selection seed (1)"},
                                  {"threads", "worker threads (all cores)"},
                                  {"dump_images", "write adversarial PGMs"},
                                  {"output_dir", "run root (runs; $ADVX_OUTPUT_DIR wins)"},
                                  {"tag", "run directory suffix"}};
  attack_keys.insert(attack_keys.end(), kAttackKeys.begin(), kAttackKeys.end());
  c.push_back({"attack", "attack test patches on one network", attack_keys, cmd_attack});
  std::vector<Key> transfer_keys;
  for (const auto& k : ExperimentConfig::known_keys()) transfer_keys.push_back({k, ""});
  c.push_back({"transfer", "run a transfer experiment and write its report", transfer_keys, cmd_transfer});
  c.push_back({"report", "print the report of a finished run",
               {{"run", "run directory"}, {"format", "markdown or csv"}}, cmd_report});
  c.push_back({"gradcheck", "compare reverse-mode gradients with finite differences",
               {{"arch", "BS or GC"},
                {"widths", "comma-separated builder widths"},
                {"probes", "number of probed coordinates (50)"},
                {"seed", "random seed (1)"},
                {"batch", "batch size (2)"},
                {"input_size", "input side (128)"}},
               cmd_gradcheck});
  return c;
}

std::string flag_name(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial transferability benchmark for image-forensics detectors", "advx"};
  app.set_version_flag("--version", version_banner());
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");

  auto cmds = commands();
  struct Parsed {
    std::string config;
    std::map<std::string, std::string> flags;
  };
  std::vector<Parsed> parsed(cmds.size());
  for (std::size_t i = 0; i < cmds.size(); ++i) {
    CLI::App* sub = app.add_subcommand(cmds[i].name, cmds[i].help);
    sub->add_option("--config", parsed[i].config, "key = value configuration file");
    for (const auto& key : cmds[i].keys)
      sub->add_option(flag_name(key.name), parsed[i].flags[key.name], key.help.empty() ? "config key " + key.name : key.help);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageExit;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  for (std::size_t i = 0; i < cmds.size(); ++i) {
    CLI::App* sub = app.get_subcommand(cmds[i].name);
    if (!sub->parsed()) continue;
    KvConfig kv;
    fs::path config_path;
    try {
      if (!parsed[i].config.empty()) {
        config_path = parsed[i].config;
        if (!fs::exists(config_path)) throw UsageError("config file not found: " + config_path.string());
        kv = KvConfig::load(config_path);
      }
      for (const auto& key : cmds[i].keys)
        if (sub->count(flag_name(key.name)) > 0) kv.set(key.name, parsed[i].flags[key.name]);
      std::vector<std::string> known;
      for (const auto& key : cmds[i].keys) known.push_back(key.name);
      if (const auto unknown = kv.unknown_keys(known); !unknown.empty())
        throw UsageError("unknown config key '" + unknown.front() + "' for " + cmds[i].name +
                         (config_path.empty() ? "" : " in " + config_path.string()));
    } catch (const UsageError& e) {
      std::cerr << "advx " << cmds[i].name << ": " << e.what() << '\n';
      return kUsageExit;
    } catch (const ConfigError& e) {
      std::cerr << "advx " << cmds[i].name << ": " << e.what() << '\n';
      return kUsageExit;
    } catch (const IoError& e) {
      std::cerr << "advx " << cmds[i].name << ": " << e.what() << '\n';
      return kUsageExit;
    }

    spdlog::info("{}", version_banner());
    spdlog::info("{}: seed={} config_hash={}", cmds[i].name, kv.get("seed", "1"), kv.hash());
    try {
      return cmds[i].run(kv, config_path);
    } catch (const ConfigError& e) {
      std::cerr << "advx " << cmds[i].name << ": configuration error: " << e.what() << '\n';
      return kUsageExit;
    } catch (const std::exception& e) {
      std::cerr << "advx " << cmds[i].name << ": " << e.what() << '\n';
      return 1;
    }
  }
  return kUsageExit;
}
