// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

#include "atdc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>

#include "atdc/losses.hpp"
#include "atdc/model.hpp"
#include "atdc/ops.hpp"
#include "atdc/rng.hpp"

namespace atdc {
namespace {

template <typename T>
struct Case {
  std::string op;
  std::vector<Tensor<T>> inputs;
  std::function<Tensor<T>(Tape<T>&)> forward;
};

// Differences are always taken in double; single-precision gradients are
// compared against a double replica of the same case.
constexpr double kStep = 1e-5;
constexpr double kFloor = 1e-3;
constexpr double kKinkTolerance = 1e-5;

// Draws are rounded to float so both precisions see identical inputs.
double draw(Rng& rng, double lo, double hi) { return static_cast<float>(rng.uniform(lo, hi)); }

template <typename T>
Tensor<T> random(Rng& rng, Shape shape, double lo, double hi, bool grad = true) {
  Tensor<T> t(std::move(shape), grad);
  for (auto& v : t.data()) v = static_cast<T>(draw(rng, lo, hi));
  return t;
}

// Values bounded away from zero, for kinked ops.
template <typename T>
Tensor<T> away_from_zero(Rng& rng, Shape shape) {
  Tensor<T> t(std::move(shape), true);
  for (auto& v : t.data()) {
    const double m = draw(rng, 0.1, 2.0);
    v = static_cast<T>(rng.below(2) ? m : -m);
  }
  return t;
}

template <typename T>
double project(const Tensor<T>& y, const std::vector<double>& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) s += r[i] * static_cast<double>(y.data()[i]);
  return s;
}

double rel_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// `c` supplies the analytic gradient, `ref` the same function in double for
// the central differences.
template <typename T>
void check_case(Case<T>& c, Case<double>& ref, Rng& rng, int samples, GradcheckResult& out) {
  Tape<double> probe(TapeMode::kInference);
  const Tensor<double> y0 = ref.forward(probe);
  std::vector<double> r(static_cast<std::size_t>(y0.numel()));
  for (double& v : r) v = draw(rng, -1.0, 1.0);
  const Tensor<T> weights(y0.shape(), std::vector<T>(r.begin(), r.end()));

  Tape<T> tape;
  for (auto& in : c.inputs) in.zero_grad();
  const Tensor<T> y = c.forward(tape);
  tape.backward(sum(tape, mul(tape, y, weights)));

  const auto eval = [&]() {
    Tape<double> t(TapeMode::kInference);
    return project(ref.forward(t), r);
  };
  const auto central = [&](double& slot, double h) {
    const double orig = slot;
    slot = orig + h;
    const double plus = eval();
    slot = orig - h;
    const double minus = eval();
    slot = orig;
    return (plus - minus) / (2.0 * h);
  };

  for (std::size_t k = 0; k < c.inputs.size(); ++k) {
    const std::span<const T> analytic = c.inputs[k].grad();
    Tensor<double>& in = ref.inputs[k];
    const std::int64_t n = in.numel();
    const int count = static_cast<int>(std::min<std::int64_t>(samples, n));
    for (int s = 0; s < count; ++s) {
      const std::size_t i = count == n ? static_cast<std::size_t>(s) : static_cast<std::size_t>(rng.below(n));
      double& slot = in.data()[i];
      const double full = central(slot, kStep);
      const double half = central(slot, kStep / 2);
      if (rel_error(full, half, kFloor) > kKinkTolerance) {
        ++out.skipped;
        continue;
      }
      out.max_rel_error = std::max(out.max_rel_error, rel_error(analytic[i], full, kFloor));
      ++out.checked;
    }
  }
}

template <typename T>
ModelParams<T> float_init(std::uint64_t seed, const ModelConfig& cfg) {
  if constexpr (std::is_same_v<T, float>) return init_params<float>(seed, cfg);
  else return cast_params<T>(init_params<float>(seed, cfg));
}

template <typename T>
std::vector<Case<T>> build_cases(Rng& rng) {
  std::vector<Case<T>> cases;
  const T slope = T(0.2);

  {
    auto x = random<T>(rng, {2, 3, 6, 6}, -1, 1), w = random<T>(rng, {4, 3, 3, 3}, -0.5, 0.5),
         b = random<T>(rng, {4}, -0.5, 0.5);
    cases.push_back({"conv2d", {x, w, b}, [=](Tape<T>& t) { return conv2d(t, x, w, b); }});
    auto w1 = random<T>(rng, {2, 3, 1, 1}, -1, 1), b1 = random<T>(rng, {2}, -1, 1);
    cases.push_back({"conv2d", {x, w1, b1}, [=](Tape<T>& t) { return conv2d(t, x, w1, b1); }});
    cases.push_back({"conv2d", {x, w, b}, [=](Tape<T>& t) { return conv2d(t, x, w, b, 2); }});
  }
  {
    auto x = random<T>(rng, {3, 4, 3, 3}, -2, 2), g = random<T>(rng, {4}, 0.5, 1.5), b = random<T>(rng, {4}, -1, 1);
    auto state = std::make_shared<BatchNormState<T>>(4);
    cases.push_back({"batch_norm", {x, g, b}, [=](Tape<T>& t) { return batch_norm(t, x, g, b, *state, NormMode::kTrain); }});
    auto frozen = std::make_shared<BatchNormState<T>>(4);
    for (auto& v : frozen->running_mean.data()) v = static_cast<T>(draw(rng, -0.5, 0.5));
    for (auto& v : frozen->running_var.data()) v = static_cast<T>(draw(rng, 0.5, 2.0));
    cases.push_back({"batch_norm", {x, g, b}, [=](Tape<T>& t) { return batch_norm(t, x, g, b, *frozen, NormMode::kEval); }});
  }
  {
    auto x = away_from_zero<T>(rng, {2, 3, 4, 4});
    cases.push_back({"leaky_relu", {x}, [=](Tape<T>& t) { return leaky_relu(t, x, slope); }});
  }
  {
    auto x = random<T>(rng, {2, 3, 4, 4}, -3, 3);
    cases.push_back({"sigmoid", {x}, [=](Tape<T>& t) { return sigmoid(t, x); }});
  }
  {
    auto x = random<T>(rng, {3, 5}, -1, 1), w = random<T>(rng, {4, 5}, -1, 1), b = random<T>(rng, {4}, -1, 1);
    cases.push_back({"fully_connected", {x, w, b}, [=](Tape<T>& t) { return fully_connected(t, x, w, b); }});
  }
  {
    auto x = random<T>(rng, {2, 3, 4, 4}, -1, 1);
    cases.push_back({"global_avg_pool", {x}, [=](Tape<T>& t) { return global_avg_pool(t, x); }});
  }
  {
    auto a = random<T>(rng, {2, 1, 3, 3}, -1, 1), b = random<T>(rng, {2, 2, 3, 3}, -1, 1);
    cases.push_back({"concat_channels", {a, b}, [=](Tape<T>& t) { return concat_channels(t, {a, b}); }});
    auto p = random<T>(rng, {2, 3}, -1, 1), q = random<T>(rng, {2, 4}, -1, 1);
    cases.push_back({"concat_channels", {p, q}, [=](Tape<T>& t) { return concat_channels(t, {q, p}); }});
  }
  {
    auto x = random<T>(rng, {2, 3, 4, 4}, -1, 1), y = random<T>(rng, {2, 3, 4, 4}, -1, 1);
    auto pc = random<T>(rng, {2, 3}, -1, 1), pp = random<T>(rng, {2, 1, 4, 4}, -1, 1);
    const std::string op = "elementwise_broadcast";
    cases.push_back({op, {x, y}, [=](Tape<T>& t) { return mul(t, add(t, x, y), sub(t, x, y)); }});
    cases.push_back({op, {x, pc}, [=](Tape<T>& t) { return mul(t, add(t, x, pc), pc); }});
    cases.push_back({op, {x, pp}, [=](Tape<T>& t) { return sub(t, mul(t, x, pp), pp); }});
    cases.push_back({op, {x}, [=](Tape<T>& t) { return clamp(t, add_scalar(t, scale(t, x, T(0.5)), T(0.1)), T(-2), T(2)); }});
  }
  {
    auto f = random<T>(rng, {2, 8, 4, 4}, -1, 1);
    ChannelAttentionParams<T> p{{random<T>(rng, {2, 8}, -1, 1), random<T>(rng, {2}, -0.5, 0.5)},
                                {random<T>(rng, {8, 2}, -1, 1), random<T>(rng, {8}, -0.5, 0.5)}};
    cases.push_back({"channel_attention", {f, p.fc1.weight, p.fc1.bias, p.fc2.weight, p.fc2.bias},
                     [=](Tape<T>& t) { return channel_attention(t, f, p, slope); }});
  }
  {
    auto means = random<T>(rng, {3, 3}, 0.1, 0.9);
    DcmParams<T> p;
    p.fc.push_back({random<T>(rng, {4, 3}, -1, 1), random<T>(rng, {4}, -0.5, 0.5)});
    p.fc.push_back({random<T>(rng, {4, 7}, -1, 1), random<T>(rng, {4}, -0.5, 0.5)});
    p.fc.push_back({random<T>(rng, {3, 11}, -1, 1), random<T>(rng, {3}, -0.5, 0.5)});
    cases.push_back({"dcm_forward", {means, p.fc[0].weight, p.fc[1].weight, p.fc[2].weight, p.fc[2].bias},
                     [=](Tape<T>& t) { return dcm_forward(t, means, p, slope); }});
  }
  {
    ModelConfig cfg;
    cfg.atm_channels = 4;
    auto model = std::make_shared<ModelParams<T>>(float_init<T>(rng.next_u64(), cfg));
    auto rmt = random<T>(rng, {2, 1, 6, 6}, 0, 1);
    auto& rb = model->atm->rb;
    cases.push_back({"atm_forward", {rmt, rb[0].conv1.weight, rb[0].bn1.gamma, rb[1].conv2.weight, rb[2].proj->weight},
                     [=](Tape<T>& t) { return atm_forward(t, rmt, *model->atm, NormMode::kTrain, slope); }});
  }
  {
    auto j = random<T>(rng, {2, 3, 12, 12}, 0, 1), k = random<T>(rng, {2, 3, 12, 12}, 0, 1);
    cases.push_back({"l2_loss", {j, k}, [=](Tape<T>& t) { return l2_loss(t, j, k); }});
  }
  {
    auto phi = std::make_shared<FeatureExtractor<T>>();
    auto j = random<T>(rng, {2, 3, 16, 16}, 0, 1), k = random<T>(rng, {2, 3, 16, 16}, 0, 1);
    cases.push_back({"perceptual_loss", {j, k},
                     [=](Tape<T>& t) { return perceptual_loss(t, j, k, *phi, phi->last_layer()); }});
  }
  {
    auto j = random<T>(rng, {2, 3, 13, 14}, 0, 1), k = random<T>(rng, {2, 3, 13, 14}, 0, 1);
    cases.push_back({"ssim_loss", {j, k}, [=](Tape<T>& t) { return ssim_loss(t, j, k); }});
  }
  {
    ModelConfig cfg;
    cfg.base_channels = 8;
    cfg.ca_reduction = 4;
    cfg.atm_channels = 4;
    cfg.dcm_hidden = 4;
    auto model = std::make_shared<ModelParams<T>>(float_init<T>(rng.next_u64(), cfg));
    // Non-zero output layer so gradients reach the whole colour branch.
    for (auto& v : model->dcm->fc[2].weight.data()) v = static_cast<T>(draw(rng, -0.3, 0.3));
    auto phi = std::make_shared<FeatureExtractor<T>>();
    auto x = random<T>(rng, {2, 3, 16, 16}, 0.05, 0.95, false), ref = random<T>(rng, {2, 3, 16, 16}, 0, 1, false);
    auto rmt = random<T>(rng, {2, 1, 16, 16}, 0, 1, false), means = random<T>(rng, {2, 3}, 0.2, 0.8, false);
    std::vector<Tensor<T>> probe;
    const auto params = model->parameters();
    for (std::size_t i = 0; i < params.size(); i += 5) probe.push_back(params[i].tensor);
    probe.push_back(params.back().tensor);
    cases.push_back({"total_loss_end_to_end", probe, [=](Tape<T>& t) {
                       const auto tr = network_forward(t, *model, x, rmt, means, NormMode::kTrain);
                       return total_loss(t, tr.output, ref, *phi).total;
                     }});
  }
  return cases;
}

template <typename T>
GradcheckReport run(const GradcheckOptions& options) {
  GradcheckReport report;
  report.precision = std::is_same_v<T, double> ? Precision::kDouble : Precision::kSingle;
  report.threshold = gradcheck_threshold(report.precision);
  Rng rng(options.seed);
  auto cases = build_cases<T>(rng);
  std::vector<Case<double>> replicas;
  if constexpr (!std::is_same_v<T, double>) {
    Rng again(options.seed);
    replicas = build_cases<double>(again);
  }
  std::map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    auto& c = cases[i];
    Case<double>& ref = [&]() -> Case<double>& {
      if constexpr (std::is_same_v<T, double>) return c;
      else return replicas[i];
    }();
    if (!slot.count(c.op)) {
      slot[c.op] = report.results.size();
      report.results.push_back({c.op});
    }
    check_case(c, ref, rng, options.samples, report.results[slot[c.op]]);
  }
  for (auto& r : report.results) {
    r.passed = r.checked > 0 && r.skipped <= r.checked && r.max_rel_error < report.threshold;
  }
  return report;
}

}  // namespace

double gradcheck_threshold(Precision precision) { return precision == Precision::kDouble ? 1e-5 : 1e-3; }

bool GradcheckReport::passed() const {
  return !results.empty() && std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed; });
}

std::string GradcheckReport::str() const {
  std::string s;
  char line[160];
  for (const auto& r : results) {
    std::snprintf(line, sizeof line, "%-24s max_rel_error %.3e  checked %3d  skipped %2d  %s\n", r.op.c_str(),
                  r.max_rel_error, r.checked, r.skipped, r.passed ? "PASS" : "FAIL");
    s += line;
  }
  return s;
}

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
  return options.precision == Precision::kDouble ? run<double>(options) : run<float>(options);
}

}  // namespace atdc
