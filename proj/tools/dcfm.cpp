// dcfm: train, infer, eval and selftest front end.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
// Built with DCFM_NO_SCL the tool links the inference library only; train
// and selftest are then unavailable.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dcfm/backbone/checkpoint.hpp"
#include "dcfm/common/errors.hpp"
#include "dcfm/datagen/generator.hpp"
#include "dcfm/metrics.hpp"
#include "dcfm/pipeline/evaluation.hpp"
#include "dcfm/pipeline/model.hpp"
#include "run_config.hpp"

#ifndef DCFM_NO_SCL
#include "dcfm/checks/checks.hpp"
#include "dcfm/pipeline/training.hpp"
#endif

namespace fs = std::filesystem;
using namespace dcfm;
using cli::RunConfig;

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

// Seed streams derived from --seed.
enum Stream : std::uint64_t { kModelInit = 0, kData = 1, kShuffle = 2 };

pipeline::ModelConfig model_config(const RunConfig& c) {
  pipeline::ModelConfig m;
  m.use_dpg = c.use_dpg;
  m.dfe.alpha = c.alpha;
  m.dfe.readjust = c.readjust;
  return m;
}

datagen::SyntheticDataset synthetic_dataset(const RunConfig& c) {
  datagen::GenConfig g;
  g.group_size = c.group_size;
  g.image_size = c.image_size;
  g.min_distractors = c.min_distractors;
  g.max_distractors = c.max_distractors;
  return datagen::SyntheticDataset(g, c.synthetic_groups, mix_seed(c.seed, kData));
}

#ifndef DCFM_NO_SCL

void make_parent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

int run_train(const RunConfig& c) {
  fs::create_directories(c.out_dir);
  {
    std::ofstream cfg(fs::path(c.out_dir) / "config.txt");
    cli::echo(cfg, c);
  }
  pipeline::Model model(model_config(c), mix_seed(c.seed, kModelInit));

  std::optional<datagen::SyntheticDataset> dataset;
  std::unique_ptr<pipeline::GroupSource> source;
  if (c.uses_synthetic()) {
    dataset = synthetic_dataset(c);
    source = std::make_unique<pipeline::SyntheticSource>(*dataset);
  } else {
    source = std::make_unique<pipeline::DirectorySource>(c.data_root, c.group_size);
  }

  pipeline::TrainOptions opt;
  opt.epochs = c.epochs;
  opt.lambda = c.lambda;
  opt.adam.lr_extractor = c.lr_extractor;
  opt.adam.lr_head = c.lr_head;
  opt.adam.weight_decay = c.weight_decay;
  opt.adam.max_grad_norm = c.max_grad_norm;
  opt.seed = mix_seed(c.seed, kShuffle);
  opt.checkpoint_every = c.checkpoint_every;
  opt.checkpoint = c.checkpoint_path();
  make_parent(*opt.checkpoint);

  const fs::path log_path = fs::path(c.out_dir) / "loss_log.csv";
  std::ofstream log(log_path);
  if (!log) throw IoError("cannot write " + log_path.string());

  const std::size_t groups = source->size();
  double iou = 0.0, sc = 0.0, total = 0.0;
  const auto summary = pipeline::train(model, *source, opt, &log, [&](const pipeline::EpisodeLog& r) {
    iou += r.l_iou;
    sc += r.l_sc;
    total += r.l_tot;
    if ((r.episode + 1) % groups == 0) {
      const auto n = static_cast<double>(groups);
      std::printf("epoch %zu/%zu l_iou %.5f l_sc %.5f l_tot %.5f\n", r.epoch + 1, c.epochs, iou / n, sc / n,
                  total / n);
      std::fflush(stdout);
      iou = sc = total = 0.0;
    }
  });
  std::printf("trained %zu episodes; checkpoint %s; loss log %s\n", summary.episodes, opt.checkpoint->c_str(),
              log_path.c_str());

  if (dataset && c.val_groups > 0) {
    std::vector<datagen::GroupSample> val;
    for (std::size_t g = 0; g < c.val_groups; ++g) val.push_back(dataset->validation_group(g));
    const auto e = pipeline::evaluate_groups(model, val);
    std::printf("validation groups %zu images %zu soft_iou %.5f mae %.5f fmax %.5f\n", val.size(), e.images,
                e.soft_iou, e.mae, e.fmax);
  }
  return 0;
}

int run_selftest() {
  struct Suite {
    const char* name;
    std::function<checks::CheckResult()> run;
  };
  const std::vector<Suite> suites{
      {"seed selection oracle", [] { return checks::seed_selection_oracle(200, 1); }},
      {"response map and prototype oracle", [] { return checks::response_prototype_oracle(200, 1); }},
      {"total loss gradient", [] { return checks::total_loss_gradient(1); }},
      {"self-contrastive identities", [] { return checks::scl_identities(4); }},
      {"attention readjustment", [] { return checks::readjustment_properties(1000, 5); }},
      {"metrics oracle", [] { return checks::metrics_oracle(100, 9); }},
  };
  std::size_t failed = 0;
  for (const auto& s : suites) {
    const auto r = s.run();
    if (!r.passed) ++failed;
    std::printf("%s %s: %s (%.2fs)\n", r.passed ? "PASS" : "FAIL", s.name, r.detail.c_str(), r.seconds);
    std::fflush(stdout);
  }
  std::printf("selftest: %zu/%zu suites passed\n", suites.size() - failed, suites.size());
  return failed ? kRuntimeError : 0;
}

#endif  // DCFM_NO_SCL

datagen::GrayImage response_image(const tl::Tensor& final_maps, std::size_t n) {
  const std::size_t h = final_maps.dim(1), w = final_maps.dim(2);
  datagen::GrayImage img(w, h);
  for (std::size_t i = 0; i < h * w; ++i) img.pixels[i] = (final_maps[n * h * w + i] + 1.0) / 2.0;
  return img;
}

int run_infer(const RunConfig& c) {
  const fs::path ckpt = c.checkpoint_path();
  if (!fs::is_regular_file(ckpt)) throw IoError("checkpoint not found: " + ckpt.string());
  pipeline::Model model(model_config(c), mix_seed(c.seed, kModelInit));
  auto params = model.parameters();
  backbone::load_checkpoint(ckpt, params);

  fs::path root = c.data_root;
  if (c.uses_synthetic()) {
    // Held-out groups are written out first so eval can score them.
    root = fs::path(c.out_dir) / "synthetic";
    const auto dataset = synthetic_dataset(c);
    for (std::size_t g = 0; g < c.val_groups; ++g) datagen::write_group(root, dataset.validation_group(g));
  }

  std::size_t written = 0;
  for (const auto& g : datagen::list_dataset(root)) {
    std::vector<datagen::RgbImage> images;
    for (const auto& stem : g.stems) images.push_back(datagen::read_ppm(root / g.group_id / (stem + ".ppm")));
    const auto result = model.forward(pipeline::images_to_tensor(images));
    const fs::path dir = fs::path(c.out_dir) / g.group_id;
    fs::create_directories(dir);
    for (std::size_t n = 0; n < g.stems.size(); ++n) {
      datagen::write_pgm(dir / (g.stems[n] + "_pred.pgm"), pipeline::prediction_image(result.pred, n));
      ++written;
    }
    if (c.dump && result.dpg) {
      std::ofstream seeds(dir / "seeds.csv");
      seeds << "image,h,w\n";
      for (std::size_t n = 0; n < g.stems.size(); ++n) {
        datagen::write_pgm(dir / (g.stems[n] + "_response.pgm"), response_image(result.dpg->maps.final, n));
        const auto& s = result.dpg->seeds.indices[n];
        seeds << g.stems[n] << ',' << s.h << ',' << s.w << '\n';
      }
    }
  }
  std::printf("wrote %zu predictions under %s\n", written, c.out_dir.c_str());
  return 0;
}

int run_eval(const RunConfig& c) {
  struct Pair {
    std::string name;
    fs::path gt, pred;
    double mae = 0.0;
    double fmax = 0.0;
    bool fmax_defined = true;
    std::string error;
  };
  std::vector<Pair> pairs;
  std::vector<fs::path> missing;
  for (const auto& g : datagen::list_dataset(c.data_root)) {
    for (const auto& stem : g.stems) {
      const fs::path gt = fs::path(c.data_root) / g.group_id / (stem + "_gt.pgm");
      if (!fs::exists(gt)) continue;
      const fs::path pred = fs::path(c.pred_root) / g.group_id / (stem + "_pred.pgm");
      if (!fs::exists(pred)) {
        missing.push_back(pred);
        continue;
      }
      Pair p;
      p.name = g.group_id + "/" + stem;
      p.gt = gt;
      p.pred = pred;
      pairs.push_back(std::move(p));
    }
  }
  if (!missing.empty()) {
    for (const auto& m : missing) std::fprintf(stderr, "missing prediction: %s\n", m.c_str());
    throw IoError(std::to_string(missing.size()) + " prediction(s) missing under " + c.pred_root);
  }
  if (pairs.empty()) throw IoError("no ground-truth masks under " + c.data_root);

#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto& p = pairs[i];
    try {
      const auto gt = datagen::read_pgm(p.gt);
      const auto pred = datagen::read_pgm(p.pred);
      if (gt.width != pred.width || gt.height != pred.height) {
        throw IoError(p.pred.string() + ": extent differs from " + p.gt.string());
      }
      p.mae = metrics::mae(pred.pixels, gt.pixels);
      try {
        p.fmax = metrics::f_beta_max(pred.pixels, gt.pixels).f_beta_max;
      } catch (const metrics::UndefinedMetricError&) {
        p.fmax_defined = false;
      }
    } catch (const std::exception& e) {
      p.error = e.what();
    }
  }

  fs::create_directories(c.out_dir);
  const fs::path csv_path = fs::path(c.out_dir) / "metrics.csv";
  std::ofstream csv(csv_path);
  if (!csv) throw IoError("cannot write " + csv_path.string());
  csv << "image,mae,fmax\n";
  double mae = 0.0, fmax = 0.0;
  std::size_t fmax_count = 0;
  char buf[64];
  for (const auto& p : pairs) {
    if (!p.error.empty()) throw IoError(p.error);
    mae += p.mae;
    std::snprintf(buf, sizeof buf, "%.9g", p.mae);
    csv << p.name << ',' << buf << ',';
    if (p.fmax_defined) {
      fmax += p.fmax;
      ++fmax_count;
      std::snprintf(buf, sizeof buf, "%.9g", p.fmax);
      csv << buf;
    }
    csv << '\n';
  }
  mae /= static_cast<double>(pairs.size());
  if (fmax_count) fmax /= static_cast<double>(fmax_count);
  std::printf("eval images %zu mae %.6f fmax %.6f (fmax over %zu images with objects); %s\n", pairs.size(), mae,
              fmax, fmax_count, csv_path.c_str());
  return 0;
}

int dispatch(const RunConfig& c) {
  if (c.mode == "infer") return run_infer(c);
  if (c.mode == "eval") return run_eval(c);
#ifdef DCFM_NO_SCL
  std::fprintf(stderr, "dcfm: mode '%s' is not available in this inference-only build\n", c.mode.c_str());
  return kUsageError;
#else
  if (c.mode == "train") return run_train(c);
  return run_selftest();
#endif
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Co-salient object detection: train, infer, eval, selftest", "dcfm"};
  RunConfig cfg;
  cli::bind(app, cfg);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kUsageError;
  }
  try {
    cfg.validate();
    cli::echo(std::cout, cfg);
    std::cout.flush();
    return dispatch(cfg);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "dcfm: config error: %s\n", e.what());
    return kUsageError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "dcfm: %s\n", e.what());
    return kRuntimeError;
  }
}
