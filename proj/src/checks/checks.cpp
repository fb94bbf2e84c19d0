#include "dcfm/checks/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>

#include "dcfm/dfe.hpp"
#include "dcfm/dpg.hpp"
#include "dcfm/metrics.hpp"
#include "dcfm/pipeline/training.hpp"
#include "dcfm/reference/oracles.hpp"
#include "dcfm/scl.hpp"
#include "dcfm/tensorlab/grad_check.hpp"
#include "dcfm/tensorlab/ops.hpp"

namespace dcfm::checks {

namespace {

using tl::Tensor;

std::string format(const char* fmt, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, args);
  va_end(args);
  return buf;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

reference::Array4 as_array(const Tensor& t) { return {t.dim(0), t.dim(1), t.dim(2), t.dim(3), values(t)}; }

Tensor random_tensor(tl::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(tl::numel_of(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v));
}

Tensor random_mask(std::size_t n, std::size_t side, Rng& rng) {
  std::vector<double> v(n * side * side);
  for (auto& x : v) x = rng.uniform() < 0.4 ? 1.0 : 0.0;
  return Tensor::from({n, 1, side, side}, std::move(v));
}

// Group of N <= 4 images, C <= 8 channels and H*W <= 16 pixels with its
// prototype parameters; instance i is the same for every suite.
struct Instance {
  Tensor f_res;
  dpg::DpgParams params;
};

Instance make_instance(std::uint64_t seed, std::size_t i) {
  Rng rng(mix_seed(seed, i));
  const auto n = static_cast<std::size_t>(rng.integer(1, 4));
  const auto c = static_cast<std::size_t>(rng.integer(1, 8));
  const auto h = static_cast<std::size_t>(rng.integer(1, 4));
  const auto w = static_cast<std::size_t>(rng.integer(1, 4));
  Instance inst;
  inst.f_res = random_tensor({n, c, h, w}, rng);
  inst.params = dpg::DpgParams::init(c, rng);
  return inst;
}

}  // namespace

CheckResult seed_selection_oracle(std::size_t instances, std::uint64_t seed) {
  const Stopwatch clock;
  std::size_t index_mismatch = 0, vector_mismatch = 0;
  for (std::size_t i = 0; i < instances; ++i) {
    const auto inst = make_instance(seed, i);
    const auto& f = inst.f_res;
    const auto& p = inst.params;
    const std::size_t h = f.dim(2), w = f.dim(3);
    const auto s = dpg::seed_select(f, p);
    const auto o = reference::seed_select(as_array(f), values(p.key_w), values(p.key_b), values(p.query_w),
                                          values(p.query_b));
    bool indices_equal = s.indices.size() == o.flat_indices.size();
    for (std::size_t k = 0; indices_equal && k < s.indices.size(); ++k) {
      const auto& idx = s.indices[k];
      indices_equal = (idx.image * h + idx.h) * w + idx.w == o.flat_indices[k];
    }
    if (!indices_equal) ++index_mismatch;
    if (values(s.vectors) != o.vectors) ++vector_mismatch;
  }
  CheckResult r;
  r.passed = index_mismatch == 0 && vector_mismatch == 0;
  r.seconds = clock.seconds();
  r.detail = format("%zu instances, %zu index and %zu vector mismatches", instances, index_mismatch, vector_mismatch);
  return r;
}

CheckResult response_prototype_oracle(std::size_t instances, std::uint64_t seed, double tol) {
  const Stopwatch clock;
  double worst_map = 0.0, worst_proto = 0.0;
  bool in_range = true;
  for (std::size_t i = 0; i < instances; ++i) {
    const auto inst = make_instance(seed, i);
    const auto seeds = dpg::seed_select(inst.f_res, inst.params);
    const auto maps = dpg::democratic_response(inst.f_res, seeds);
    const auto proto = dpg::build_prototype(inst.f_res, maps);
    const auto o = reference::response_and_prototype(as_array(inst.f_res), values(seeds.vectors));
    for (std::size_t k = 0; k < o.per_seed.size(); ++k) worst_map = std::max(worst_map, std::abs(maps.per_seed[k] - o.per_seed[k]));
    for (std::size_t k = 0; k < o.final.size(); ++k) worst_map = std::max(worst_map, std::abs(maps.final[k] - o.final[k]));
    for (std::size_t k = 0; k < o.proto.size(); ++k) worst_proto = std::max(worst_proto, std::abs(proto.vector[k] - o.proto[k]));
    for (const Tensor* t : {&maps.per_seed, &maps.final})
      for (double v : t->data()) in_range = in_range && v >= -1.0 && v <= 1.0;
  }
  CheckResult r;
  r.passed = worst_map <= tol && worst_proto <= tol && in_range;
  r.seconds = clock.seconds();
  r.detail = format("%zu instances, max map error %.3g, max prototype error %.3g (tol %.0e), maps in [-1,1]: %s",
                    instances, worst_map, worst_proto, tol, in_range ? "yes" : "no");
  return r;
}

CheckResult total_loss_gradient(std::uint64_t seed, double tol) {
  const Stopwatch clock;
  constexpr std::size_t kImages = 2, kChannels = 4, kSide = 8;
  constexpr double kStep = 1e-4;
  pipeline::ModelConfig cfg;
  cfg.encoder.stages = {{kChannels, 2}};
  cfg.decoder.widths = {3};
  const pipeline::Model model(cfg, seed);
  Rng rng(mix_seed(seed, 99));
  Tensor images = random_tensor({kImages, 3, kSide, kSide}, rng, 0.0, 1.0).clone(true);
  const Tensor masks = random_mask(kImages, kSide, rng);

  tl::DecisionTape tape;
  pipeline::training_objective(model, images, masks, losses::kDefaultLambda, &tape);
  std::vector<Tensor> leaves;
  std::vector<std::string> names;
  for (const auto& p : model.parameters()) {
    leaves.push_back(p.value);
    names.push_back(p.name);
  }
  leaves.push_back(images);
  names.push_back("images");
  std::size_t coords = 0;
  for (const auto& t : leaves) coords += t.numel();

  const auto report = tl::grad_check_leaves(
      [&] {
        tape.replay();
        return pipeline::training_objective(model, images, masks, losses::kDefaultLambda, &tape).total;
      },
      leaves, kStep);
  CheckResult r;
  r.passed = report.max_rel_error < tol;
  r.seconds = clock.seconds();
  r.detail = format("%zu coordinates in %zu tensors, h=%.0e, max rel error %.3g at %s[%zu] (tol %.0e)", coords,
                    leaves.size(), kStep, report.max_rel_error, names[report.worst_tensor].c_str(),
                    report.worst_index, tol);
  return r;
}

CheckResult scl_identities(std::uint64_t seed) {
  const Stopwatch clock;
  constexpr std::size_t kTrials = 20;
  std::size_t failures = 0;
  for (std::size_t i = 0; i < kTrials; ++i) {
    Rng rng(mix_seed(seed, i));
    const auto n = static_cast<std::size_t>(rng.integer(2, 4));
    const auto c = static_cast<std::size_t>(rng.integer(1, 8));
    const Tensor f = random_tensor({n, c, 4, 4}, rng);
    const auto p = dpg::DpgParams::init(c, rng);
    const Tensor proto = dpg::run_dpg(f, p).proto.vector;

    const auto ones = scl::erase_and_prototype(f, Tensor::full({n, 1, 16, 16}, 1.0), p);
    const auto loss = scl::self_contrastive_loss(proto, ones);
    const bool ones_ok = values(ones.proto_c) == values(proto) &&
                         values(ones.proto_b) == std::vector<double>(c, 0.0) &&
                         loss.positive_term == -std::log(1.0 + scl::kLogEpsilon);

    const Tensor y = random_mask(n, 16, rng);
    auto inverse = values(y);
    for (auto& v : inverse) v = 1.0 - v;
    const auto a = scl::erase_and_prototype(f, y, p);
    const auto b = scl::erase_and_prototype(f, Tensor::from(y.shape(), std::move(inverse)), p);
    const bool swap_ok = values(a.proto_c) == values(b.proto_b) && values(a.proto_b) == values(b.proto_c);
    if (!ones_ok || !swap_ok) ++failures;
  }
  CheckResult r;
  r.passed = failures == 0;
  r.seconds = clock.seconds();
  r.detail = format("%zu groups, %zu violations (Y=1: proto_c == proto bitwise, positive term == -log(1+1e-5); "
                    "Y<->1-Y swaps the pair exactly)",
                    kTrials, failures);
  return r;
}

CheckResult readjustment_properties(std::size_t rows, std::uint64_t seed) {
  const Stopwatch clock;
  constexpr double kAlpha = 3.0;
  std::size_t non_positive = 0, ordering = 0, oracle = 0;
  Rng rng(seed);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto cols = static_cast<std::size_t>(rng.integer(2, 16));
    std::vector<double> raw(cols);
    for (auto& v : raw) v = rng.uniform(-2.0, 2.0);
    // Exact zeros and ties are part of the input space.
    if (i % 10 == 0) raw[0] = 0.0;
    if (i % 10 == 1) raw[1] = raw[0];
    const auto b = dfe::readjust_attention(Tensor::from({1, cols}, raw), {kAlpha, true});
    const auto w = values(b.readjust);
    if (w != reference::readjust_weights(raw, kAlpha)) ++oracle;
    for (std::size_t j = 0; j < cols; ++j) {
      if (raw[j] <= 0.0 && w[j] != 1.0) ++non_positive;
      for (std::size_t k = 0; k < cols; ++k)
        if (raw[j] > 0.0 && raw[k] > 0.0 && raw[j] > raw[k] && w[j] > w[k]) ++ordering;
    }
  }

  // Row [1, 0.5]: closed form of softmax times (rank + 1)^3.
  const auto ex = dfe::readjust_attention(Tensor::from({1, 2}, {1.0, 0.5}), {kAlpha, true});
  const double e = std::exp(-0.5);
  const double expected0 = 1.0 / (1.0 + e), expected1 = 8.0 * e / (1.0 + e);
  const double err = std::max(std::abs(ex.final[0] - expected0), std::abs(ex.final[1] - expected1));
  constexpr double kExampleTol = 1e-4;

  CheckResult r;
  r.passed = non_positive == 0 && ordering == 0 && oracle == 0 && err <= kExampleTol;
  r.seconds = clock.seconds();
  r.detail = format("%zu rows: %zu non-positive weights != 1, %zu order violations, %zu oracle mismatches; "
                    "[1,0.5] -> [%.7f, %.7f], closed form [%.7f, %.7f], err %.2g (tol %.0e)",
                    rows, non_positive, ordering, oracle, ex.final[0], ex.final[1], expected0, expected1, err,
                    kExampleTol);
  return r;
}

CheckResult metrics_oracle(std::size_t pairs, std::uint64_t seed, double tol) {
  const Stopwatch clock;
  double worst_mae = 0.0, worst_f = 0.0;
  Rng rng(seed);
  for (std::size_t i = 0; i < pairs; ++i) {
    const auto n = static_cast<std::size_t>(rng.integer(1, 400));
    std::vector<double> pred(n), gt(n);
    const double density = rng.uniform(0.05, 0.95);
    for (std::size_t k = 0; k < n; ++k) {
      pred[k] = rng.uniform();
      gt[k] = rng.uniform() < density ? 1.0 : 0.0;
    }
    gt[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(n) - 1))] = 1.0;
    worst_mae = std::max(worst_mae, std::abs(metrics::mae(pred, gt) - reference::mae(pred, gt)));
    worst_f = std::max(worst_f, std::abs(metrics::f_beta_max(pred, gt).f_beta_max - reference::f_beta_max(pred, gt)));
  }

  Rng grng(mix_seed(seed, 1));
  std::vector<double> gt(64 * 64);
  for (auto& v : gt) v = grng.uniform() < 0.3 ? 1.0 : 0.0;
  const auto same = metrics::evaluate(gt, gt);
  const bool identity = same.mae == 0.0 && same.fmeasure.f_beta_max == 1.0;

  CheckResult r;
  r.passed = worst_mae <= tol && worst_f <= tol && identity;
  r.seconds = clock.seconds();
  r.detail = format("%zu pairs, max mae error %.3g, max fmax error %.3g (tol %.0e); pred == gt -> (%g, %g)", pairs,
                    worst_mae, worst_f, tol, same.mae, same.fmeasure.f_beta_max);
  return r;
}

}  // namespace dcfm::checks
