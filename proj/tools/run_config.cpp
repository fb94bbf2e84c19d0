#include "run_config.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <ostream>

#include "dcfm/common/errors.hpp"
#include "dcfm/dfe.hpp"

namespace dcfm::cli {

std::string RunConfig::checkpoint_path() const {
  return checkpoint.empty() ? (std::filesystem::path(out_dir) / "dcfm.ckpt").string() : checkpoint;
}

void RunConfig::validate() const {
  dfe::validate_alpha(alpha);
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be finite and >= 0");
  if ((mode == "train" || mode == "infer") && group_size < 2) throw ConfigError("group-size must be at least 2");
  if (image_size == 0 || image_size % 16 != 0) throw ConfigError("image-size must be a positive multiple of 16");
  if (!(lr_extractor >= 0.0) || !(lr_head >= 0.0)) throw ConfigError("learning rates must be >= 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight-decay must be >= 0");
  if (!(max_grad_norm >= 0.0)) throw ConfigError("max-grad-norm must be >= 0");
  if (mode == "train" && epochs == 0) throw ConfigError("epochs must be at least 1");
  if (uses_synthetic() && synthetic_groups == 0) throw ConfigError("synthetic-groups must be at least 1");
  if (min_distractors > max_distractors) throw ConfigError("min-distractors exceeds max-distractors");
  if (mode == "eval" && (data_root.empty() || pred_root.empty())) {
    throw ConfigError("eval needs --data-root (ground truth) and --pred-root");
  }
}

void bind(CLI::App& app, RunConfig& c) {
  app.add_option("--mode", c.mode, "train | infer | eval | selftest")
      ->check(CLI::IsMember({"train", "infer", "eval", "selftest"}))
      ->capture_default_str();
  app.add_option("--data-root", c.data_root, "Dataset root: <root>/<group>/<idx>.ppm and <idx>_gt.pgm");
  app.add_flag("--synthetic", c.synthetic, "Use generated shape groups (default when --data-root is absent)");
  app.add_option("--checkpoint", c.checkpoint, "Checkpoint path (default <out-dir>/dcfm.ckpt)");
  app.add_option("--out-dir", c.out_dir, "Output directory")->capture_default_str();
  app.add_option("--pred-root", c.pred_root, "eval: predictions <root>/<group>/<idx>_pred.pgm");
  app.add_option("--epochs", c.epochs)->capture_default_str();
  app.add_option("--group-size", c.group_size, "Images per group (N)")->capture_default_str();
  app.add_option("--image-size", c.image_size, "Synthetic image side")->capture_default_str();
  app.add_option("--alpha", c.alpha, "Attention readjustment exponent")->capture_default_str();
  app.add_option("--lambda", c.lambda, "Weight of the self-contrastive loss")->capture_default_str();
  app.add_option("--lr-extractor", c.lr_extractor)->capture_default_str();
  app.add_option("--lr-head", c.lr_head, "Learning rate of everything but the encoder")->capture_default_str();
  app.add_option("--weight-decay", c.weight_decay)->capture_default_str();
  app.add_option("--max-grad-norm", c.max_grad_norm, "Global gradient clip, 0 = off")->capture_default_str();
  app.add_option("--seed", c.seed)->capture_default_str();
  app.add_option("--synthetic-groups", c.synthetic_groups, "Synthetic training groups")->capture_default_str();
  app.add_option("--val-groups", c.val_groups, "Held-out synthetic groups")->capture_default_str();
  app.add_option("--min-distractors", c.min_distractors)->capture_default_str();
  app.add_option("--max-distractors", c.max_distractors)->capture_default_str();
  app.add_option("--checkpoint-every", c.checkpoint_every, "Episodes between checkpoints, 0 = end only")
      ->capture_default_str();
  app.add_option("--use-dpg", c.use_dpg, "false: prototype stage replaced by identity")->capture_default_str();
  app.add_option("--readjust", c.readjust, "false: plain softmax attention")->capture_default_str();
  app.add_flag("--dump", c.dump, "infer: also write response maps and seed positions");
  app.set_config("--config", "", "key = value file; flags on the command line win");
  app.allow_config_extras(CLI::config_extras_mode::error);
}

namespace {

// Shortest text that reads back to the same double.
std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

std::string str(const std::string& s) { return s.empty() ? "\"\"" : s; }

}  // namespace

void echo(std::ostream& os, const RunConfig& c) {
  const auto b = [](bool v) { return v ? "true" : "false"; };
  os << "mode = " << c.mode << '\n'
     << "data-root = " << str(c.data_root) << '\n'
     << "synthetic = " << b(c.uses_synthetic()) << '\n'
     << "checkpoint = " << str(c.checkpoint_path()) << '\n'
     << "out-dir = " << str(c.out_dir) << '\n'
     << "pred-root = " << str(c.pred_root) << '\n'
     << "epochs = " << c.epochs << '\n'
     << "group-size = " << c.group_size << '\n'
     << "image-size = " << c.image_size << '\n'
     << "alpha = " << num(c.alpha) << '\n'
     << "lambda = " << num(c.lambda) << '\n'
     << "lr-extractor = " << num(c.lr_extractor) << '\n'
     << "lr-head = " << num(c.lr_head) << '\n'
     << "weight-decay = " << num(c.weight_decay) << '\n'
     << "max-grad-norm = " << num(c.max_grad_norm) << '\n'
     << "seed = " << c.seed << '\n'
     << "synthetic-groups = " << c.synthetic_groups << '\n'
     << "val-groups = " << c.val_groups << '\n'
     << "min-distractors = " << c.min_distractors << '\n'
     << "max-distractors = " << c.max_distractors << '\n'
     << "checkpoint-every = " << c.checkpoint_every << '\n'
     << "use-dpg = " << b(c.use_dpg) << '\n'
     << "readjust = " << b(c.readjust) << '\n'
     << "dump = " << b(c.dump) << '\n';
}

}  // namespace dcfm::cli
