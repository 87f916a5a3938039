#include "advx/transfer.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <tuple>

#include "advx/checkpoint.hpp"
#include "advx/errors.hpp"
#include "advx/image_io.hpp"
#include "advx/rng.hpp"

namespace advx {

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::Matched: return "matched";
    case Scenario::CrossTraining: return "cross-training";
    case Scenario::CrossModel: return "cross-model";
    case Scenario::CrossModelAndTraining: return "cross-model-and-training";
  }
  return "?";
}

Scenario scenario_from_string(const std::string& s) {
  for (Scenario v : {Scenario::Matched, Scenario::CrossTraining, Scenario::CrossModel, Scenario::CrossModelAndTraining})
    if (to_string(v) == s) return v;
  throw ConfigError("unknown scenario '" + s +
                    "' (expected matched, cross-training, cross-model, or cross-model-and-training)");
}

void check_scenario(Scenario scenario, const NetworkMetadata& sn, const NetworkMetadata& tn) {
  if (sn.task != tn.task)
    throw ConfigError("SN " + sn.display_name() + " and TN " + tn.display_name() + " are trained for different tasks");
  const bool same_arch = sn.architecture == tn.architecture;
  const bool same_corpus = sn.corpus_id == tn.corpus_id;
  bool ok = false;
  switch (scenario) {
    case Scenario::Matched: ok = same_arch && same_corpus; break;
    case Scenario::CrossTraining: ok = same_arch && !same_corpus; break;
    case Scenario::CrossModel: ok = !same_arch && same_corpus; break;
    case Scenario::CrossModelAndTraining: ok = !same_arch && !same_corpus; break;
  }
  if (!ok)
    throw ConfigError("scenario " + to_string(scenario) + " does not fit SN " + sn.display_name() + " and TN " +
                      tn.display_name());
}

const std::vector<std::string>& ExperimentConfig::known_keys() {
  static const std::vector<std::string> keys = {
      "scenario",        "sn_checkpoint",     "tn_checkpoint",   "manifest",        "attacks",
      "eval_count",      "attacked_class",    "rounding",        "tn_denominator",  "seed",
      "threads",         "dump_images",       "ifgsm_steps",     "ifgsm_max_strength", "ifgsm_step_rule",
      "ifgsm_early_stop", "jsma_budget",      "jsma_max_iterations", "output_dir", "tag"};
  return keys;
}

ExperimentConfig ExperimentConfig::from_kv(const KvConfig& kv, const std::filesystem::path& base_dir) {
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };
  ExperimentConfig c;
  c.scenario = scenario_from_string(kv.get("scenario"));
  c.sn_checkpoint = resolve(kv.get("sn_checkpoint"));
  c.tn_checkpoint = resolve(kv.get("tn_checkpoint"));
  c.manifest = resolve(kv.get("manifest"));
  std::vector<std::string> tokens = kv.get_list("attacks");
  if (tokens.empty()) tokens = {"ifgsm:0.01", "ifgsm:0.001", "jsma:0.1", "jsma:0.01"};
  for (const auto& t : tokens) {
    AttackSpec spec = parse_attack(t);
    spec.ifgsm.max_steps = static_cast<int>(kv.get_int("ifgsm_steps", spec.ifgsm.max_steps));
    spec.ifgsm.max_strength = kv.get_double("ifgsm_max_strength", spec.ifgsm.max_strength);
    spec.ifgsm.early_stop = kv.get_bool("ifgsm_early_stop", spec.ifgsm.early_stop);
    const std::string rule = kv.get("ifgsm_step_rule", "full");
    if (rule == "split") spec.ifgsm.step_rule = IfgsmConfig::StepRule::Split;
    else if (rule == "full") spec.ifgsm.step_rule = IfgsmConfig::StepRule::Full;
    else throw ConfigError("ifgsm_step_rule must be split or full, got '" + rule + "'");
    spec.jsma.max_per_pixel = static_cast<int>(kv.get_int("jsma_budget", spec.jsma.max_per_pixel));
    spec.jsma.max_iterations = static_cast<int>(kv.get_int("jsma_max_iterations", spec.jsma.max_iterations));
    spec.ifgsm.validate();
    spec.jsma.validate();
    c.attacks.push_back(spec);
  }
  const auto eval = kv.get_int("eval_count", 500);
  if (eval < 1) throw ConfigError("eval_count must be at least 1");
  c.eval_count = static_cast<std::size_t>(eval);
  const std::string cls = kv.get("attacked_class", "manipulated");
  if (cls == "manipulated") c.attacked_label = kManipulatedLabel;
  else if (cls == "pristine") c.attacked_label = kPristineLabel;
  else throw ConfigError("attacked_class must be manipulated or pristine, got '" + cls + "'");
  c.rounded = kv.get_bool("rounding", false);
  const std::string denom = kv.get("tn_denominator", "sn-successes");
  if (denom == "sn-successes") c.denominator = TnDenominator::SourceSuccesses;
  else if (denom == "all") c.denominator = TnDenominator::AllAttempts;
  else throw ConfigError("tn_denominator must be sn-successes or all, got '" + denom + "'");
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", 1));
  const auto threads = kv.get_int("threads", 0);
  if (threads < 0) throw ConfigError("threads must not be negative");
  c.threads = static_cast<unsigned>(threads);
  c.dump_images = kv.get_bool("dump_images", false);
  return c;
}

namespace {

std::vector<std::size_t> seeded_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

std::string class_name(int label) { return label == kManipulatedLabel ? "manipulated" : "pristine"; }

}  // namespace

EvaluationSet select_eligible(const TrainedNetwork& sn, const PatchSet& test, int attacked_label, std::size_t count,
                              std::uint64_t seed) {
  EvaluationSet set;
  set.requested = count;
  Workspace<Real> ws;
  for (const std::size_t i : seeded_order(test.size(), derive_seed(seed, 71))) {
    if (set.patches.size() == count) break;
    if (test.labels[i] != attacked_label) continue;
    if (classify(sn, to_unit(test.patches[i]), ws).label != attacked_label) continue;
    set.patches.push_back(test.patches[i]);
    set.labels.push_back(attacked_label);
    set.ids.push_back(test.ids[i]);
  }
  if (set.patches.size() < count)
    spdlog::warn("only {} of {} requested {} test patches are classified correctly by {}", set.patches.size(), count,
                 class_name(attacked_label), sn.meta.display_name());
  return set;
}

double subset_accuracy(const TrainedNetwork& det, const PatchSet& test, std::size_t count, std::uint64_t seed) {
  const std::size_t per_class[2] = {count / 2, count - count / 2};
  std::size_t taken[2] = {0, 0};
  std::vector<GrayImage> patches;
  std::vector<int> labels;
  for (const std::size_t i : seeded_order(test.size(), derive_seed(seed, 72))) {
    const int l = test.labels[i];
    if (taken[l] == per_class[l]) continue;
    ++taken[l];
    patches.push_back(test.patches[i]);
    labels.push_back(l);
  }
  if (patches.empty()) throw InputError("subset_accuracy: empty test split");
  const auto preds = classify_all(det, patches);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i].label == labels[i];
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

std::vector<AttackOutcome> attack_set(const TrainedNetwork& sn, const EvaluationSet& set, const AttackSpec& spec,
                                      unsigned threads) {
  const auto started = std::chrono::steady_clock::now();
  auto outcomes = run_attacks(sn, set.patches, set.labels, set.ids, spec, threads);
  for (std::size_t i = 0; i < outcomes.size(); ++i) round_attack(outcomes[i], sn, set.patches[i]);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  spdlog::info("{} on {}: {} patches in {:.1f}s", spec.label(), sn.meta.display_name(), outcomes.size(), secs);
  return outcomes;
}

SuccessRates success_rates(std::span<const AttackOutcome> outcomes, const TrainedNetwork& tn, bool rounded,
                           TnDenominator denominator) {
  if (outcomes.empty()) throw InputError("success_rates: no attack outcomes");
  SuccessRates r;
  Workspace<Real> ws;
  std::size_t rounded_successes = 0;
  std::size_t denom = 0;
  for (const auto& o : outcomes) {
    ++r.attempted;
    if (o.rounded_evaluated && o.success_after_rounding) ++rounded_successes;
    if (o.success_on_source) ++r.sn_successes;
    if (denominator == TnDenominator::SourceSuccesses && !o.success_on_source) continue;
    ++denom;
    if (!o.success_on_source) continue;  // nothing was produced for the TN to see
    const int label = rounded ? classify(tn, o.rounded.size() ? o.rounded : quantize(o.adversarial, PixelDomain::Unit)).label
                              : classify(tn, o.adversarial, ws).label;
    if (label != o.true_label) ++r.tn_successes;
  }
  r.rate_sn = static_cast<double>(r.sn_successes) / static_cast<double>(r.attempted);
  r.rate_sn_rounded = static_cast<double>(rounded_successes) / static_cast<double>(r.attempted);
  r.tn_defined = denom > 0;
  r.rate_tn = r.tn_defined ? static_cast<double>(r.tn_successes) / static_cast<double>(denom) : 0.0;
  return r;
}

std::optional<double> reference_tn_rate(const std::string& sn, const std::string& tn, const std::string& attack_token) {
  using Key = std::tuple<std::string, std::string, std::string>;
  static const std::map<Key, double> table = {
      {{"BS[R](res)", "BS[V](res)", "ifgsm:0.01"}, 0.6923},  {{"BS[R](res)", "BS[V](res)", "ifgsm:0.001"}, 0.0491},
      {{"BS[R](res)", "BS[V](res)", "jsma:0.1"}, 0.7821},    {{"BS[R](res)", "BS[V](res)", "jsma:0.01"}, 0.11},
      {{"BS[V](res)", "BS[R](res)", "ifgsm:0.01"}, 0.0021},  {{"BS[V](res)", "BS[R](res)", "ifgsm:0.001"}, 0.0},
      {{"BS[V](res)", "BS[R](res)", "jsma:0.1"}, 0.0},       {{"BS[V](res)", "BS[R](res)", "jsma:0.01"}, 0.0},
      {{"BS[R](med)", "BS[V](med)", "ifgsm:0.01"}, 0.8452},  {{"BS[R](med)", "BS[V](med)", "ifgsm:0.001"}, 0.04},
      {{"BS[R](med)", "BS[V](med)", "jsma:0.1"}, 0.0122},    {{"BS[R](med)", "BS[V](med)", "jsma:0.01"}, 0.0020},
      {{"BS[V](med)", "BS[R](med)", "ifgsm:0.01"}, 0.9415},  {{"BS[V](med)", "BS[R](med)", "ifgsm:0.001"}, 0.07},
      {{"BS[V](med)", "BS[R](med)", "jsma:0.1"}, 0.0101},    {{"BS[V](med)", "BS[R](med)", "jsma:0.01"}, 0.0081},
      {{"BS[R](res)", "GC[R](res)", "ifgsm:0.01"}, 0.0020},  {{"BS[R](res)", "GC[R](res)", "ifgsm:0.001"}, 0.0020},
      {{"BS[R](res)", "GC[R](res)", "jsma:0.1"}, 0.0164},    {{"BS[R](res)", "GC[R](res)", "jsma:0.01"}, 0.0061},
      {{"BS[R](med)", "GC[R](med)", "ifgsm:0.01"}, 0.8248},  {{"BS[R](med)", "GC[R](med)", "ifgsm:0.001"}, 0.1813},
      {{"BS[R](med)", "GC[R](med)", "jsma:0.1"}, 0.0102},    {{"BS[R](med)", "GC[R](med)", "jsma:0.01"}, 0.0163},
      {{"BS[V](res)", "GC[R](res)", "ifgsm:0.01"}, 0.0040},  {{"BS[V](res)", "GC[R](res)", "ifgsm:0.001"}, 0.0020},
      {{"BS[V](res)", "GC[R](res)", "jsma:0.1"}, 0.0},       {{"BS[V](res)", "GC[R](res)", "jsma:0.01"}, 0.0},
      {{"BS[V](med)", "GC[R](med)", "ifgsm:0.01"}, 0.7960},  {{"BS[V](med)", "GC[R](med)", "ifgsm:0.001"}, 0.0080},
      {{"BS[V](med)", "GC[R](med)", "jsma:0.1"}, 0.0080},    {{"BS[V](med)", "GC[R](med)", "jsma:0.01"}, 0.0120},
  };
  const auto it = table.find({sn, tn, attack_token});
  if (it == table.end()) return std::nullopt;
  return it->second;
}

TransferRow make_row(const TrainedNetwork& sn, const TrainedNetwork& tn, double sn_accuracy, double tn_accuracy,
                     const AttackSpec& spec, std::span<const AttackOutcome> outcomes, bool rounded,
                     TnDenominator denominator) {
  TransferRow row;
  row.sn = sn.meta.display_name();
  row.tn = tn.meta.display_name();
  row.sn_accuracy = sn_accuracy;
  row.tn_accuracy = tn_accuracy;
  row.attack = spec.label();
  row.attack_token = spec.token();
  row.distortion = summarize_distortion(outcomes);
  row.rates = success_rates(outcomes, tn, rounded, denominator);
  row.reference_tn_rate = reference_tn_rate(row.sn, row.tn, row.attack_token);
  return row;
}

TransferReport run_experiment(const ExperimentConfig& config, const TrainedNetwork& sn, const TrainedNetwork& tn,
                              const PatchSet& test, std::vector<std::vector<AttackOutcome>>* outcomes) {
  check_scenario(config.scenario, sn.meta, tn.meta);
  if (config.attacks.empty()) throw ConfigError("no attacks configured");
  TransferReport report;
  report.scenario = config.scenario;
  report.attacked_class = class_name(config.attacked_label);
  report.rounded = config.rounded;
  report.denominator = config.denominator;
  report.requested = config.eval_count;

  const EvaluationSet set = select_eligible(sn, test, config.attacked_label, config.eval_count, config.seed);
  if (set.patches.empty()) throw InputError("no eligible test patches for " + sn.meta.display_name());
  report.evaluated = set.patches.size();
  const double sn_acc = subset_accuracy(sn, test, config.eval_count, config.seed);
  const double tn_acc = subset_accuracy(tn, test, config.eval_count, config.seed);
  spdlog::info("{} -> {} ({}): {} eligible patches, clean accuracy SN {:.4f}, TN {:.4f}", sn.meta.display_name(),
               tn.meta.display_name(), to_string(config.scenario), set.patches.size(), sn_acc, tn_acc);
  for (const auto& spec : config.attacks) {
    auto result = attack_set(sn, set, spec, config.threads);
    report.rows.push_back(make_row(sn, tn, sn_acc, tn_acc, spec, result, config.rounded, config.denominator));
    if (outcomes) outcomes->push_back(std::move(result));
  }
  return report;
}

TransferReport run_experiment(const ExperimentConfig& config, std::vector<std::vector<AttackOutcome>>* outcomes) {
  const TrainedNetwork sn = load_checkpoint(config.sn_checkpoint);
  const TrainedNetwork tn = load_checkpoint(config.tn_checkpoint);
  check_scenario(config.scenario, sn.meta, tn.meta);
  const DatasetManifest manifest = load_manifest(config.manifest);
  if (manifest.task != sn.meta.task)
    throw ConfigError("manifest " + config.manifest.string() + " is for task " + to_string(manifest.task) +
                      " but the networks detect " + to_string(sn.meta.task));
  return run_experiment(config, sn, tn, load_patches(manifest, Split::Test), outcomes);
}

namespace {

std::string fixed(double v, int decimals) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::vector<std::string> table_header() {
  return {"SN",          "TN",          "accuracy",       "attack type",    "avg. PSNR",
          "avg. L1 dist", "avg. max. dist", "success rate on SN", "success rate on TN", "TN rate defined",
          "attacked",    "SN successes", "SN success after rounding", "reference TN rate"};
}

std::vector<std::vector<std::string>> table_cells(const TransferReport& report) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : report.rows) {
    rows.push_back({r.sn, r.tn, "SN=" + fixed(100.0 * r.sn_accuracy, 2) + "%; TN=" + fixed(100.0 * r.tn_accuracy, 2) + "%",
                    r.attack, fixed(r.distortion.psnr_db, 2), fixed(r.distortion.l1_mean, 2),
                    fixed(r.distortion.max_abs, 2), fixed(r.rates.rate_sn, 4), fixed(r.rates.rate_tn, 4),
                    r.rates.tn_defined ? "yes" : "no", std::to_string(r.rates.attempted),
                    std::to_string(r.rates.sn_successes), fixed(r.rates.rate_sn_rounded, 4),
                    r.reference_tn_rate ? fixed(*r.reference_tn_rate, 4) : "-"});
  }
  return rows;
}

std::string emit_table(const TransferReport& report, TableFormat format) {
  if (report.rows.empty()) throw InputError("emit_table: empty report");
  const auto header = table_header();
  const auto cells = table_cells(report);
  std::ostringstream out;
  if (format == TableFormat::Csv) {
    auto line = [&](const std::vector<std::string>& fields) {
      for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << csv_field(fields[i]);
      out << '\n';
    };
    line(header);
    for (const auto& row : cells) line(row);
  } else {
    auto line = [&](const std::vector<std::string>& fields) {
      out << '|';
      for (const auto& f : fields) out << ' ' << f << " |";
      out << '\n';
    };
    line(header);
    out << '|';
    for (std::size_t i = 0; i < header.size(); ++i) out << " --- |";
    out << '\n';
    for (const auto& row : cells) line(row);
  }
  return out.str();
}

void write_report(const std::filesystem::path& dir, const TransferReport& report,
                  const std::vector<std::vector<AttackOutcome>>& outcomes, bool dump_images) {
  std::filesystem::create_directories(dir);
  auto write_text = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / name).string());
    out << text;
  };
  write_text("report.csv", emit_table(report, TableFormat::Csv));
  std::string md = "# Transfer report (" + to_string(report.scenario) + ")\n\n";
  md += "Attacked class: " + report.attacked_class + ", " + std::to_string(report.evaluated) + " of " +
        std::to_string(report.requested) + " requested patches. TN fed " +
        (report.rounded ? "rounded 8-bit" : "real-valued") + " adversarial images; TN rate over " +
        (report.denominator == TnDenominator::SourceSuccesses ? "SN successes" : "all attempts") +
        ". Corpora are synthetic, so reference rates are for comparison only.\n\n";
  write_text("report.md", md + emit_table(report, TableFormat::Markdown));
  for (std::size_t a = 0; a < outcomes.size() && a < report.rows.size(); ++a) {
    std::string token = report.rows[a].attack_token;
    std::replace(token.begin(), token.end(), ':', '_');
    std::ostringstream csv;
    write_outcomes_csv(csv, outcomes[a]);
    write_text("outcomes_" + token + ".csv", csv.str());
    if (!dump_images) continue;
    const auto img_dir = dir / ("adversarial_" + token);
    std::filesystem::create_directories(img_dir);
    for (std::size_t i = 0; i < outcomes[a].size(); ++i) {
      const auto& o = outcomes[a][i];
      if (!o.success_on_source) continue;
      char name[32];
      std::snprintf(name, sizeof name, "%05zu.pgm", i);
      write_pgm(img_dir / name, o.rounded.size() ? o.rounded : quantize(o.adversarial, PixelDomain::Unit));
    }
  }
}

std::filesystem::path output_root(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv("ADVX_OUTPUT_DIR"); env && *env) return env;
  return fallback;
}

std::filesystem::path create_run_directory(const std::filesystem::path& root, const std::string& tag) {
  const std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &utc);
  const std::string base = std::string(stamp) + (tag.empty() ? "" : "-" + tag);
  std::filesystem::path dir = root / base;
  for (int k = 2; std::filesystem::exists(dir); ++k) dir = root / (base + "-" + std::to_string(k));
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace advx
