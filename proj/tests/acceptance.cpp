// Acceptance suite: one PASS/FAIL line per criterion.
//
//   dcfm_acceptance [--criterion K]... [--cli PATH] [--cli-infer-only PATH] [--work DIR]
//
// Without --criterion every criterion runs. Criterion 8 drives the two CLI
// builds and needs both paths. Exit status is 1 when any criterion fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dcfm/checks/checks.hpp"
#include "dcfm/pipeline/evaluation.hpp"
#include "dcfm/pipeline/training.hpp"

namespace fs = std::filesystem;
using namespace dcfm;
using checks::CheckResult;

namespace {

// Criterion limits.
constexpr std::size_t kOracleInstances = 200;
constexpr double kSeedRuntimeLimit = 10.0;      // s
constexpr double kResponseTol = 1e-12;
constexpr double kGradTol = 1e-4;
constexpr double kGradRuntimeLimit = 60.0;      // s
constexpr std::size_t kReadjustRows = 1000;
constexpr double kMinSoftIou = 0.70;
constexpr double kMaxMae = 0.05;
constexpr double kTrainRuntimeLimit = 30 * 60;  // s
constexpr std::size_t kMetricPairs = 100;
constexpr double kMetricTol = 1e-12;

// Desk-scale training recipe shared by criteria 6 and 7. The optimiser
// settings deviate from the library defaults (1e-5 / 1e-4, no clipping),
// which do not converge within 200 epochs on this toy problem.
struct Recipe {
  std::size_t epochs = 200;
  std::size_t group_size = 8;
  std::size_t image_size = 64;
  std::size_t train_groups = 4;
  std::size_t val_groups = 8;
  std::size_t max_distractors = 1;
  std::uint64_t data_seed = 7;
  double lr = 1e-3;
  double max_grad_norm = 1.0;
};

struct RunResult {
  pipeline::EvalSummary eval;
  double seconds = 0.0;
};

struct Seeds {
  std::uint64_t model;
  std::uint64_t shuffle;
};

RunResult train_and_evaluate(const Recipe& r, bool use_dpg, bool readjust, Seeds seed) {
  const auto start = std::chrono::steady_clock::now();
  pipeline::ModelConfig mc;
  mc.use_dpg = use_dpg;
  mc.dfe.readjust = readjust;
  pipeline::Model model(mc, seed.model);

  datagen::GenConfig gc;
  gc.group_size = r.group_size;
  gc.image_size = r.image_size;
  gc.max_distractors = r.max_distractors;
  const datagen::SyntheticDataset dataset(gc, r.train_groups, r.data_seed);

  pipeline::TrainOptions opt;
  opt.epochs = r.epochs;
  opt.adam.lr_extractor = r.lr;
  opt.adam.lr_head = r.lr;
  opt.adam.max_grad_norm = r.max_grad_norm;
  opt.seed = seed.shuffle;
  pipeline::train(model, pipeline::SyntheticSource(dataset), opt);

  std::vector<datagen::GroupSample> val;
  for (std::size_t g = 0; g < r.val_groups; ++g) val.push_back(dataset.validation_group(g));
  RunResult out;
  out.eval = pipeline::evaluate_groups(model, val);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

CheckResult criterion1() {
  auto r = checks::seed_selection_oracle(kOracleInstances, 1);
  const bool fast = r.seconds < kSeedRuntimeLimit;
  r.detail += format("; runtime %.2fs (limit %.0fs)", r.seconds, kSeedRuntimeLimit);
  r.passed = r.passed && fast;
  return r;
}

CheckResult criterion2() { return checks::response_prototype_oracle(kOracleInstances, 1, kResponseTol); }

CheckResult criterion3() {
  auto r = checks::total_loss_gradient(1, kGradTol);
  const bool fast = r.seconds < kGradRuntimeLimit;
  r.detail += format("; runtime %.2fs (limit %.0fs)", r.seconds, kGradRuntimeLimit);
  r.passed = r.passed && fast;
  return r;
}

CheckResult criterion4() { return checks::scl_identities(4); }

CheckResult criterion5() {
  auto r = checks::readjustment_properties(kReadjustRows, 5);
  r.detail += "; stated reference [0.6225, 3.0199], closed form 8/(1+e^0.5) = 3.0203254";
  return r;
}

CheckResult criterion6() {
  const Recipe recipe;
  const auto run = train_and_evaluate(recipe, true, true, {42, 3});
  CheckResult r;
  r.seconds = run.seconds;
  r.passed = run.eval.soft_iou >= kMinSoftIou && run.eval.mae <= kMaxMae && run.seconds < kTrainRuntimeLimit;
  r.detail = format("%zu epochs, N=%zu, %zux%zu, %zu held-out groups (%zu images): soft IoU %.4f (>= %.2f), "
                    "MAE %.4f (<= %.2f), fmax %.4f; runtime %.0fs (limit %.0fs)",
                    recipe.epochs, recipe.group_size, recipe.image_size, recipe.image_size, recipe.val_groups,
                    run.eval.images, run.eval.soft_iou, kMinSoftIou, run.eval.mae, kMaxMae, run.eval.fmax,
                    run.seconds, kTrainRuntimeLimit);
  return r;
}

CheckResult criterion7() {
  const auto start = std::chrono::steady_clock::now();
  const Recipe recipe;
  const Seeds seeds[] = {{42, 3}, {43, 4}, {44, 5}};
  double full = 0.0, identity = 0.0, plain = 0.0;
  std::string per_seed;
  for (const auto seed : seeds) {
    const double f = train_and_evaluate(recipe, true, true, seed).eval.fmax;
    const double i = train_and_evaluate(recipe, false, true, seed).eval.fmax;
    const double p = train_and_evaluate(recipe, true, false, seed).eval.fmax;
    full += f / 3.0;
    identity += i / 3.0;
    plain += p / 3.0;
    per_seed += format(" [seed %llu: %.4f %.4f %.4f]", static_cast<unsigned long long>(seed.model), f, i, p);
    std::fprintf(stderr, "criterion 7: seed %llu full %.4f dpg-identity %.4f no-readjust %.4f\n",
                 static_cast<unsigned long long>(seed.model), f, i, p);
  }
  CheckResult r;
  r.passed = full >= identity && full >= plain;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  r.detail = format("mean fmax over 3 seeds: full %.4f, DPG identity %.4f (a: %s), no readjustment %.4f (b: %s);",
                    full, identity, full >= identity ? "holds" : "fails", plain, full >= plain ? "holds" : "fails") +
             per_seed + " (full, identity, no-readjust)";
  return r;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

int run(const std::string& command) {
  const int status = std::system((command + " > /dev/null 2>&1").c_str());
  return status;
}

// Predictions under `root` keyed by relative path.
std::map<std::string, std::string> predictions(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && name.ends_with("_pred.pgm")) {
      out[fs::relative(e.path(), root).string()] = read_bytes(e.path());
    }
  }
  return out;
}

CheckResult criterion8(const std::string& cli, const std::string& cli_infer_only, const fs::path& work) {
  const auto start = std::chrono::steady_clock::now();
  CheckResult r;
  std::vector<std::string> notes;
  bool ok = true;

  // In process: the training objective's forward pass against plain
  // inference, and two inference runs, on a briefly trained model.
  {
    Recipe recipe;
    pipeline::Model model(pipeline::ModelConfig{}, 5);
    datagen::GenConfig gc;
    gc.group_size = recipe.group_size;
    const datagen::SyntheticDataset dataset(gc, 2, 9);
    pipeline::TrainOptions opt;
    opt.epochs = 2;
    opt.adam.lr_head = opt.adam.lr_extractor = recipe.lr;
    pipeline::train(model, pipeline::SyntheticSource(dataset), opt);
    const auto group = dataset.validation_group(0);
    const auto images = pipeline::images_to_tensor(group.images);
    const auto a = model.forward(images).pred;
    const auto b = model.forward(images).pred;
    const auto t = pipeline::training_objective(model, images, pipeline::masks_to_tensor(group.masks), 0.1);
    const auto va = std::vector<double>(a.data().begin(), a.data().end());
    const bool repeat = va == std::vector<double>(b.data().begin(), b.data().end());
    const bool with_scl = va == std::vector<double>(t.forward.pred.data().begin(), t.forward.pred.data().end());
    ok = ok && repeat && with_scl;
    notes.push_back(format("in-process: repeat %s, with SCL evaluated %s", repeat ? "identical" : "DIFFERENT",
                           with_scl ? "identical" : "DIFFERENT"));
  }

  if (cli.empty() || cli_infer_only.empty()) {
    ok = false;
    notes.push_back("CLI paths not given");
  } else {
    fs::remove_all(work);
    fs::create_directories(work);
    const std::string w = work.string();
    const std::string ckpt = w + "/model.ckpt";
    const std::string common = " --mode infer --checkpoint " + ckpt + " --val-groups 3";
    const int train_status = run(cli + " --mode train --epochs 2 --synthetic --seed 11 --lr-head 1e-3 "
                                       "--lr-extractor 1e-3 --val-groups 0 --out-dir " + w + "/train --checkpoint " +
                                 ckpt);
    const int s1 = run(cli + common + " --out-dir " + w + "/full_a");
    const int s2 = run(cli + common + " --out-dir " + w + "/full_b");
    const int s3 = run(cli_infer_only + common + " --out-dir " + w + "/infer_only");
    if (train_status || s1 || s2 || s3) {
      ok = false;
      notes.push_back(format("CLI exit codes train %d, infer %d %d %d", train_status, s1, s2, s3));
    } else {
      const auto a = predictions(work / "full_a");
      const auto b = predictions(work / "full_b");
      const auto c = predictions(work / "infer_only");
      const bool runs = !a.empty() && a == b;
      const bool builds = !a.empty() && a == c;
      ok = ok && runs && builds;
      notes.push_back(format("CLI: %zu prediction files, two runs %s, build without SCL %s", a.size(),
                             runs ? "byte-identical" : "DIFFERENT", builds ? "byte-identical" : "DIFFERENT"));
    }
  }
  r.passed = ok;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (std::size_t i = 0; i < notes.size(); ++i) r.detail += (i ? "; " : "") + notes[i];
  return r;
}

CheckResult criterion9() { return checks::metrics_oracle(kMetricPairs, 9, kMetricTol); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::vector<int> selected;
  std::string cli, cli_infer_only;
  std::string work = (fs::temp_directory_path() / "dcfm_acceptance").string();
  app.add_option("--criterion", selected, "Criterion number(s), default all")->check(CLI::Range(1, 9));
  app.add_option("--cli", cli, "Full dcfm executable");
  app.add_option("--cli-infer-only", cli_infer_only, "dcfm executable built without SCL");
  app.add_option("--work", work, "Scratch directory for criterion 8");
  CLI11_PARSE(app, argc, argv);
  if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7, 8, 9};

  const std::map<int, std::pair<const char*, std::function<CheckResult()>>> criteria{
      {1, {"seed selection oracle", criterion1}},
      {2, {"response maps and prototype oracle", criterion2}},
      {3, {"total loss gradient", criterion3}},
      {4, {"self-contrastive identities", criterion4}},
      {5, {"attention readjustment properties", criterion5}},
      {6, {"toy training convergence", criterion6}},
      {7, {"ablation direction", criterion7}},
      {8, {"inference purity", [&] { return criterion8(cli, cli_infer_only, fs::path(work)); }}},
      {9, {"metrics oracle", criterion9}},
  };
  int failed = 0;
  for (const int k : selected) {
    const auto& [name, fn] = criteria.at(k);
    CheckResult r;
    try {
      r = fn();
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("exception: ") + e.what();
    }
    if (!r.passed) ++failed;
    std::printf("criterion %d %s: %s - %s (%.1fs)\n", k, name, r.passed ? "PASS" : "FAIL", r.detail.c_str(),
                r.seconds);
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
