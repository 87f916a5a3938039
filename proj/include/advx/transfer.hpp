#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "advx/attacks.hpp"
#include "advx/dataset.hpp"
#include "advx/detector.hpp"
#include "advx/kv_config.hpp"

namespace advx {

enum class Scenario { Matched, CrossTraining, CrossModel, CrossModelAndTraining };

std::string to_string(Scenario s);  // "matched", "cross-training", "cross-model", "cross-model-and-training"
Scenario scenario_from_string(const std::string& s);

/// Throws ConfigError unless SN/TN differ exactly as the scenario requires
/// and share the task.
void check_scenario(Scenario scenario, const NetworkMetadata& sn, const NetworkMetadata& tn);

/// Which SN outcomes form the denominator of the TN success rate.
enum class TnDenominator { SourceSuccesses, AllAttempts };

struct ExperimentConfig {
  Scenario scenario = Scenario::CrossTraining;
  std::filesystem::path sn_checkpoint;
  std::filesystem::path tn_checkpoint;
  std::filesystem::path manifest;
  std::vector<AttackSpec> attacks;
  std::size_t eval_count = 500;
  int attacked_label = kManipulatedLabel;
  bool rounded = false;  // feed the TN the 8-bit rounded images
  TnDenominator denominator = TnDenominator::SourceSuccesses;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  bool dump_images = false;

  /// Relative paths are resolved against `base_dir`.
  static ExperimentConfig from_kv(const KvConfig& kv, const std::filesystem::path& base_dir = {});
  static const std::vector<std::string>& known_keys();
};

/// Patches the attack is run on: the first `count` patches of the attacked
/// class (in seeded order) that the SN classifies correctly.
struct EvaluationSet {
  std::vector<GrayImage> patches;
  std::vector<int> labels;
  std::vector<std::string> ids;
  std::size_t requested = 0;
};

EvaluationSet select_eligible(const TrainedNetwork& sn, const PatchSet& test, int attacked_label, std::size_t count,
                              std::uint64_t seed);

/// Accuracy on a class-balanced, seeded subset of `count` test patches.
double subset_accuracy(const TrainedNetwork& det, const PatchSet& test, std::size_t count, std::uint64_t seed);

/// Runs the attack on every patch of the set and rounds each outcome on the SN.
std::vector<AttackOutcome> attack_set(const TrainedNetwork& sn, const EvaluationSet& set, const AttackSpec& spec,
                                      unsigned threads = 0);

struct SuccessRates {
  double rate_sn = 0.0;
  double rate_tn = 0.0;
  bool tn_defined = false;  // false when the denominator is empty (rate_tn reported as 0)
  double rate_sn_rounded = 0.0;
  std::size_t attempted = 0;
  std::size_t sn_successes = 0;
  std::size_t tn_successes = 0;
};

/// Counts SN successes over all attempts and TN flips over the chosen
/// denominator. The TN only sees images the SN attack produced.
SuccessRates success_rates(std::span<const AttackOutcome> outcomes, const TrainedNetwork& tn, bool rounded = false,
                           TnDenominator denominator = TnDenominator::SourceSuccesses);

struct TransferRow {
  std::string sn;
  std::string tn;
  double sn_accuracy = 0.0;
  double tn_accuracy = 0.0;
  std::string attack;
  std::string attack_token;
  DistortionStats distortion;
  SuccessRates rates;
  std::optional<double> reference_tn_rate;
};

struct TransferReport {
  Scenario scenario = Scenario::Matched;
  std::string attacked_class;
  bool rounded = false;
  TnDenominator denominator = TnDenominator::SourceSuccesses;
  std::size_t requested = 0;
  std::size_t evaluated = 0;
  std::vector<TransferRow> rows;
};

TransferRow make_row(const TrainedNetwork& sn, const TrainedNetwork& tn, double sn_accuracy, double tn_accuracy,
                     const AttackSpec& spec, std::span<const AttackOutcome> outcomes, bool rounded,
                     TnDenominator denominator);

/// Published TN success rate for this SN/TN/attack combination, when one exists.
std::optional<double> reference_tn_rate(const std::string& sn, const std::string& tn, const std::string& attack_token);

/// Full experiment on in-memory networks; `outcomes`, when given, receives
/// one outcome list per attack.
TransferReport run_experiment(const ExperimentConfig& config, const TrainedNetwork& sn, const TrainedNetwork& tn,
                              const PatchSet& test, std::vector<std::vector<AttackOutcome>>* outcomes = nullptr);
/// Loads the checkpoints and the manifest's test split named in `config`.
TransferReport run_experiment(const ExperimentConfig& config,
                              std::vector<std::vector<AttackOutcome>>* outcomes = nullptr);

enum class TableFormat { Csv, Markdown };

std::vector<std::string> table_header();
std::vector<std::vector<std::string>> table_cells(const TransferReport& report);
/// Deterministic table text; throws InputError for an empty report.
std::string emit_table(const TransferReport& report, TableFormat format);

/// Writes `<dir>/report.csv`, `<dir>/report.md`, and per-attack outcome CSVs.
void write_report(const std::filesystem::path& dir, const TransferReport& report,
                  const std::vector<std::vector<AttackOutcome>>& outcomes, bool dump_images);

/// Output root: $ADVX_OUTPUT_DIR when set, otherwise `fallback`.
std::filesystem::path output_root(const std::filesystem::path& fallback);
/// Creates `<root>/<UTC timestamp>-<tag>` (suffixed when it already exists).
std::filesystem::path create_run_directory(const std::filesystem::path& root, const std::string& tag);

}  // namespace advx
