#include "advx/attacks.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include "advx/errors.hpp"

namespace advx {

using BoolImage = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::vector<double> IfgsmConfig::grid() const {
  validate();
  std::vector<double> out;
  // k * eps_s rather than repeated addition so the grid points stay exact multiples.
  for (int k = 1;; ++k) {
    const double eps = k * strength_step;
    if (eps > max_strength * (1.0 + 1e-9)) break;
    out.push_back(std::min(eps, max_strength));
  }
  return out;
}

void IfgsmConfig::validate() const {
  if (!(strength_step > 0.0)) throw ConfigError("I-FGSM strength step must be positive");
  if (!(max_strength >= strength_step)) throw ConfigError("I-FGSM maximum strength is below the strength step");
  if (max_steps < 1) throw ConfigError("I-FGSM needs at least one step");
}

void JsmaConfig::validate() const {
  if (!(theta > 0.0 && theta <= 1.0)) throw ConfigError("JSMA theta must lie in (0, 1]");
  if (max_per_pixel < 1) throw ConfigError("JSMA per-pixel budget must be at least 1");
  if (max_iterations < 1) throw ConfigError("JSMA iteration cap must be at least 1");
}

namespace {

Distortion from_difference(const Eigen::ArrayXXd& diff) {
  Distortion d;
  const double n = static_cast<double>(diff.size());
  d.l1_mean = diff.abs().sum() / n;
  d.max_abs = diff.abs().maxCoeff();
  d.mse = diff.square().sum() / n;
  d.psnr_db = d.mse == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(255.0 * 255.0 / d.mse);
  return d;
}

void require_same_size(const GrayImage& a, Index rows, Index cols) {
  if (a.rows() != rows || a.cols() != cols)
    throw InputError("distortion: image sizes differ (" + std::to_string(a.cols()) + "x" + std::to_string(a.rows()) +
                     " vs " + std::to_string(cols) + "x" + std::to_string(rows) + ")");
}

void require_label(int label) {
  if (label != 0 && label != 1) throw InputError("label must be 0 or 1, got " + std::to_string(label));
}

double l2(const ImageF& a, const ImageF& b) { return std::sqrt((a - b).cast<double>().square().sum()); }

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

Distortion distortion(const GrayImage& original, const ImageF& adversarial, PixelDomain domain) {
  require_same_size(original, adversarial.rows(), adversarial.cols());
  const double scale = domain == PixelDomain::Unit ? 255.0 : 1.0;
  const Eigen::ArrayXXd diff = adversarial.cast<double>() * scale - original.cast<double>();
  return from_difference(diff);
}

Distortion distortion(const GrayImage& original, const GrayImage& adversarial) {
  require_same_size(original, adversarial.rows(), adversarial.cols());
  return from_difference(adversarial.cast<double>() - original.cast<double>());
}

std::string AttackSpec::label() const {
  return kind == AttackKind::Ifgsm ? "I-FGSM, eps_s=" + format_double(ifgsm.strength_step)
                                   : "JSMA, theta=" + format_double(jsma.theta);
}

std::string AttackSpec::token() const {
  return (kind == AttackKind::Ifgsm ? "ifgsm:" : "jsma:") + format_double(parameter());
}

AttackSpec parse_attack(const std::string& token) {
  const auto colon = token.find(':');
  if (colon == std::string::npos) throw ConfigError("attack '" + token + "' must look like ifgsm:<eps_s> or jsma:<theta>");
  std::string name = token.substr(0, colon);
  std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
  double value = 0.0;
  try {
    std::size_t used = 0;
    value = std::stod(token.substr(colon + 1), &used);
    if (used != token.size() - colon - 1) throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw ConfigError("attack '" + token + "': bad numeric parameter");
  }
  AttackSpec spec;
  if (name == "ifgsm" || name == "i-fgsm") {
    spec.kind = AttackKind::Ifgsm;
    spec.ifgsm.strength_step = value;
    spec.ifgsm.validate();
  } else if (name == "jsma") {
    spec.kind = AttackKind::Jsma;
    spec.jsma.theta = value;
    spec.jsma.validate();
  } else {
    throw ConfigError("unknown attack '" + name + "' (expected ifgsm or jsma)");
  }
  return spec;
}

FixedStrengthResult ifgsm_fixed(const TrainedNetwork& det, const ImageF& unit_patch, int true_label, double epsilon,
                                const IfgsmConfig& config, Workspace<Real>& ws) {
  require_label(true_label);
  config.validate();
  if (!(epsilon > 0.0)) throw ConfigError("I-FGSM strength must be positive");
  const Real eps = static_cast<Real>(epsilon);
  const Real step = config.step_rule == IfgsmConfig::StepRule::Split ? static_cast<Real>(epsilon / config.max_steps) : eps;
  const ImageF lower = (unit_patch - eps).max(Real(0));
  const ImageF upper = (unit_patch + eps).min(Real(1));

  FixedStrengthResult result;
  result.adversarial = unit_patch;
  Prediction pred;
  for (int s = 0; s < config.max_steps; ++s) {
    const ImageF grad = input_gradient(det, result.adversarial, true_label, ws, &pred);
    if (s == 0 && pred.label != true_label)
      throw InputError("I-FGSM: the patch is already misclassified by " + det.meta.display_name());
    if (config.early_stop && pred.label != true_label) {
      result.success = true;
      return result;
    }
    if ((grad == Real(0)).all()) {
      result.zero_gradient = true;
      break;
    }
    result.adversarial = (result.adversarial + step * grad.sign()).max(lower).min(upper);
    result.steps = s + 1;
  }
  result.success = classify(det, result.adversarial, ws).label != true_label;
  return result;
}

FixedStrengthResult ifgsm_fixed(const TrainedNetwork& det, const ImageF& unit_patch, int true_label, double epsilon,
                                const IfgsmConfig& config) {
  Workspace<Real> ws;
  return ifgsm_fixed(det, unit_patch, true_label, epsilon, config, ws);
}

AttackOutcome ifgsm_best_strength(const TrainedNetwork& det, const GrayImage& patch, int true_label,
                                  const IfgsmConfig& config, Workspace<Real>& ws) {
  const ImageF x0 = to_unit(patch);
  AttackOutcome out;
  out.kind = AttackKind::Ifgsm;
  out.parameter = config.strength_step;
  out.true_label = true_label;
  out.adversarial = x0;
  double best = std::numeric_limits<double>::infinity();
  bool zero_gradient = false;
  for (const double eps : config.grid()) {
    FixedStrengthResult r = ifgsm_fixed(det, x0, true_label, eps, config, ws);
    zero_gradient = zero_gradient || r.zero_gradient;
    if (!r.success) continue;
    const double dist = l2(r.adversarial, x0);
    if (dist < best) {
      best = dist;
      out.success_on_source = true;
      out.chosen_strength = eps;
      out.steps = r.steps;
      out.adversarial = std::move(r.adversarial);
    }
  }
  if (!out.success_on_source) out.note = zero_gradient ? "zero-gradient" : "no-strength";
  out.real_distortion = distortion(patch, out.adversarial, PixelDomain::Unit);
  return out;
}

AttackOutcome ifgsm_best_strength(const TrainedNetwork& det, const GrayImage& patch, int true_label,
                                  const IfgsmConfig& config) {
  Workspace<Real> ws;
  return ifgsm_best_strength(det, patch, true_label, config, ws);
}

ImageF jsma_saliency(const ImageF& d_target, const ImageF& d_other, const BoolImage& admissible,
                     SaliencyDirection direction) {
  if (d_target.rows() != d_other.rows() || d_target.cols() != d_other.cols() ||
      admissible.rows() != d_target.rows() || admissible.cols() != d_target.cols())
    throw InputError("jsma_saliency: gradient and mask sizes differ");
  const Real sign = direction == SaliencyDirection::Increase ? Real(1) : Real(-1);
  const ImageF t = sign * d_target;
  const ImageF o = sign * d_other;
  return (admissible && t > Real(0) && o < Real(0)).select(t * (-o), ImageF::Zero(t.rows(), t.cols()));
}

AttackOutcome jsma_attack(const TrainedNetwork& det, const GrayImage& patch, int true_label, const JsmaConfig& config,
                          Workspace<Real>& ws) {
  require_label(true_label);
  config.validate();
  const int target = 1 - true_label;
  const ImageF x0 = to_unit(patch);
  const Real step = static_cast<Real>(config.theta) * (x0.maxCoeff() - x0.minCoeff());

  AttackOutcome out;
  out.kind = AttackKind::Jsma;
  out.parameter = config.theta;
  out.true_label = true_label;
  out.adversarial = x0;
  ImageF& x = out.adversarial;
  Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> used =
      Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Zero(x.rows(), x.cols());

  for (int it = 0;; ++it) {
    LogitGradients g = logit_gradients(det, x, ws);
    if (it == 0 && g.prediction.label != true_label)
      throw InputError("JSMA: the patch is already misclassified by " + det.meta.display_name());
    if (g.prediction.label == target) {
      out.success_on_source = true;
      break;
    }
    if (it == config.max_iterations) {
      out.note = "iterations";
      break;
    }
    if (step <= Real(0)) {
      out.note = "flat-patch";
      break;
    }
    const BoolImage budget = used < config.max_per_pixel;
    if (!budget.any()) {
      out.note = "budget";
      break;
    }
    const ImageF& dt = g.d_logit[static_cast<std::size_t>(target)];
    const ImageF& dother = g.d_logit[static_cast<std::size_t>(true_label)];
    const ImageF up = jsma_saliency(dt, dother, budget && x < Real(1), SaliencyDirection::Increase);
    const ImageF down = jsma_saliency(dt, dother, budget && x > Real(0), SaliencyDirection::Decrease);
    Index ur = 0, uc = 0, dr = 0, dc = 0;
    const Real up_best = up.maxCoeff(&ur, &uc);
    const Real down_best = down.maxCoeff(&dr, &dc);
    if (!(std::max(up_best, down_best) > Real(0))) {
      out.note = "stuck";
      break;
    }
    const bool increase = up_best >= down_best;
    const Index r = increase ? ur : dr, c = increase ? uc : dc;
    x(r, c) = std::clamp(x(r, c) + (increase ? step : -step), Real(0), Real(1));
    ++used(r, c);
    out.steps = it + 1;
  }
  out.max_touches = used.maxCoeff();
  out.real_distortion = distortion(patch, out.adversarial, PixelDomain::Unit);
  return out;
}

AttackOutcome jsma_attack(const TrainedNetwork& det, const GrayImage& patch, int true_label,
                          const JsmaConfig& config) {
  Workspace<Real> ws;
  return jsma_attack(det, patch, true_label, config, ws);
}

AttackOutcome run_attack(const TrainedNetwork& det, const GrayImage& patch, int true_label, const AttackSpec& spec,
                         Workspace<Real>& ws) {
  return spec.kind == AttackKind::Ifgsm ? ifgsm_best_strength(det, patch, true_label, spec.ifgsm, ws)
                                        : jsma_attack(det, patch, true_label, spec.jsma, ws);
}

void round_attack(AttackOutcome& outcome, const TrainedNetwork& det, const GrayImage& original) {
  outcome.rounded = quantize(outcome.adversarial, PixelDomain::Unit);
  outcome.rounded_evaluated = true;
  outcome.success_after_rounding = classify(det, outcome.rounded).label != outcome.true_label;
  outcome.rounded_distortion = distortion(original, outcome.rounded);
}

std::vector<AttackOutcome> run_attacks(const TrainedNetwork& det, std::span<const GrayImage> patches,
                                       std::span<const int> labels, std::span<const std::string> ids,
                                       const AttackSpec& spec, unsigned threads) {
  if (labels.size() != patches.size() || (!ids.empty() && ids.size() != patches.size()))
    throw InputError("run_attacks: patches, labels, and ids differ in length");
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, patches.size())));

  std::vector<AttackOutcome> outcomes(patches.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    Workspace<Real> ws;
    for (std::size_t i; (i = next.fetch_add(1)) < patches.size();) {
      try {
        outcomes[i] = run_attack(det, patches[i], labels[i], spec, ws);
        if (!ids.empty()) outcomes[i].id = ids[i];
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = patches.size();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return outcomes;
}

DistortionStats summarize_distortion(std::span<const AttackOutcome> outcomes) {
  DistortionStats s;
  for (const auto& o : outcomes) {
    if (!o.success_on_source) continue;
    s.psnr_db += o.real_distortion.psnr_db;
    s.l1_mean += o.real_distortion.l1_mean;
    s.max_abs += o.real_distortion.max_abs;
    ++s.count;
  }
  if (s.count > 0) {
    const double n = static_cast<double>(s.count);
    s.psnr_db /= n;
    s.l1_mean /= n;
    s.max_abs /= n;
  }
  return s;
}

void write_outcomes_csv(std::ostream& out, std::span<const AttackOutcome> outcomes) {
  out << "id,attack,parameter,chosen_strength,steps,success_on_source,success_after_rounding,psnr_db,l1_mean,max_abs,"
         "note\n";
  for (const auto& o : outcomes) {
    char buf[256];
    std::snprintf(buf, sizeof buf, ",%s,%g,%g,%d,%d,%s,%.6f,%.6f,%.6f,", o.kind == AttackKind::Ifgsm ? "ifgsm" : "jsma",
                  o.parameter, o.chosen_strength, o.steps, o.success_on_source ? 1 : 0,
                  o.rounded_evaluated ? (o.success_after_rounding ? "1" : "0") : "", o.real_distortion.psnr_db,
                  o.real_distortion.l1_mean, o.real_distortion.max_abs);
    out << o.id << buf << o.note << '\n';
  }
}

}  // namespace advx
