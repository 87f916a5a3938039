#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "advx/detector.hpp"
#include "advx/image.hpp"

namespace advx {

/// Iterative FGSM with a strength search over E = {eps_s, 2 eps_s, ..., <= max_strength}.
struct IfgsmConfig {
  enum class StepRule {
    Split,  // each of the S steps moves eps / S
    Full,   // each step moves eps (iterates projected back onto the eps ball)
  };

  double strength_step = 0.01;  // eps_s: grid spacing and smallest strength
  double max_strength = 0.1;
  int max_steps = 10;           // S
  bool early_stop = true;       // stop as soon as the label flips
  StepRule step_rule = StepRule::Full;

  /// Ascending strengths; every value is positive and at most max_strength.
  std::vector<double> grid() const;
  void validate() const;
};

/// Saliency-map attack: T modifications per pixel, each of theta * (max(I) - min(I)).
struct JsmaConfig {
  double theta = 0.1;
  int max_per_pixel = 7;  // T
  int max_iterations = 2000;

  void validate() const;
};

/// Distortion in 8-bit units. psnr_db is +inf for identical images.
struct Distortion {
  double psnr_db = 0.0;
  double l1_mean = 0.0;
  double max_abs = 0.0;
  double mse = 0.0;

  bool identical() const { return max_abs == 0.0; }
};

/// `adversarial` is read in the given domain and compared with the 8-bit original.
Distortion distortion(const GrayImage& original, const ImageF& adversarial, PixelDomain domain);
Distortion distortion(const GrayImage& original, const GrayImage& adversarial);

enum class AttackKind { Ifgsm, Jsma };

/// One configured attack: kind, strength parameter (eps_s or theta), and full settings.
struct AttackSpec {
  AttackKind kind = AttackKind::Ifgsm;
  IfgsmConfig ifgsm;
  JsmaConfig jsma;

  double parameter() const { return kind == AttackKind::Ifgsm ? ifgsm.strength_step : jsma.theta; }
  /// Table label, e.g. "I-FGSM, eps_s=0.01" or "JSMA, theta=0.1".
  std::string label() const;
  /// Compact token, e.g. "ifgsm:0.01" or "jsma:0.1".
  std::string token() const;
};

/// Parses "ifgsm:<eps_s>" or "jsma:<theta>".
AttackSpec parse_attack(const std::string& token);

struct AttackOutcome {
  std::string id;
  AttackKind kind = AttackKind::Ifgsm;
  double parameter = 0.0;
  int true_label = 0;
  ImageF adversarial;               // unit domain
  GrayImage rounded;                // filled by round_attack
  bool success_on_source = false;
  bool rounded_evaluated = false;
  bool success_after_rounding = false;
  double chosen_strength = 0.0;     // I-FGSM: selected eps
  int steps = 0;                    // I-FGSM steps at the chosen eps, or JSMA iterations
  int max_touches = 0;              // JSMA: most modifications of any single pixel
  Distortion real_distortion;
  Distortion rounded_distortion;
  std::string note;                 // failure reason, empty on success
};

struct FixedStrengthResult {
  ImageF adversarial;  // unit domain
  bool success = false;
  int steps = 0;
  bool zero_gradient = false;
};

/// I-FGSM at one strength: x <- clip_[0,1](x + step * sign(grad_x L(x, true_label)))
/// for up to S steps, kept inside the eps ball around the original.
/// The patch must be classified correctly (InputError otherwise).
FixedStrengthResult ifgsm_fixed(const TrainedNetwork& det, const ImageF& unit_patch, int true_label,
                                double epsilon, const IfgsmConfig& config, Workspace<Real>& ws);
FixedStrengthResult ifgsm_fixed(const TrainedNetwork& det, const ImageF& unit_patch, int true_label,
                                double epsilon, const IfgsmConfig& config = {});

/// Runs ifgsm_fixed over the whole grid and keeps the successful strength with
/// the smallest L2 distortion (ties go to the smaller strength).
AttackOutcome ifgsm_best_strength(const TrainedNetwork& det, const GrayImage& patch, int true_label,
                                  const IfgsmConfig& config, Workspace<Real>& ws);
AttackOutcome ifgsm_best_strength(const TrainedNetwork& det, const GrayImage& patch, int true_label,
                                  const IfgsmConfig& config = {});

enum class SaliencyDirection { Increase, Decrease };

/// Single-pixel saliency toward the target class. For Increase a pixel
/// qualifies when d Z_target/dx > 0 and d Z_other/dx < 0 and scores
/// dZ_target * |dZ_other|; Decrease mirrors both signs. Pixels outside
/// `admissible` or with unqualified signs score 0.
ImageF jsma_saliency(const ImageF& d_target, const ImageF& d_other,
                     const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& admissible,
                     SaliencyDirection direction);

/// Greedy saliency-map attack toward 1 - true_label.
AttackOutcome jsma_attack(const TrainedNetwork& det, const GrayImage& patch, int true_label,
                          const JsmaConfig& config, Workspace<Real>& ws);
AttackOutcome jsma_attack(const TrainedNetwork& det, const GrayImage& patch, int true_label,
                          const JsmaConfig& config = {});

AttackOutcome run_attack(const TrainedNetwork& det, const GrayImage& patch, int true_label,
                         const AttackSpec& spec, Workspace<Real>& ws);

/// Quantises the adversarial image to 8 bits (half-up) and re-classifies it on `det`.
void round_attack(AttackOutcome& outcome, const TrainedNetwork& det, const GrayImage& original);

/// Attacks every patch, `threads` at a time; outcome i belongs to patch i.
std::vector<AttackOutcome> run_attacks(const TrainedNetwork& det, std::span<const GrayImage> patches,
                                       std::span<const int> labels, std::span<const std::string> ids,
                                       const AttackSpec& spec, unsigned threads = 0);

/// Averages over the outcomes that succeeded on the source network.
struct DistortionStats {
  double psnr_db = 0.0;
  double l1_mean = 0.0;
  double max_abs = 0.0;
  std::size_t count = 0;
};
DistortionStats summarize_distortion(std::span<const AttackOutcome> outcomes);

/// One row per outcome: id, attack, parameter, chosen strength, steps,
/// success flags, and the real-valued distortions.
void write_outcomes_csv(std::ostream& out, std::span<const AttackOutcome> outcomes);

}  // namespace advx
