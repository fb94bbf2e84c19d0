// Run configuration of the `dcfm` tool: defaults, CLI/config-file binding,
// validation and the key = value echo.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "CLI11.hpp"

namespace dcfm::cli {

struct RunConfig {
  std::string mode = "train";
  std::string data_root;
  bool synthetic = false;
  std::string checkpoint;  // empty: <out-dir>/dcfm.ckpt
  std::string out_dir = "dcfm_out";
  std::string pred_root;   // eval only
  std::size_t epochs = 200;
  std::size_t group_size = 8;
  std::size_t image_size = 64;
  double alpha = 3.0;
  double lambda = 0.1;
  double lr_extractor = 1e-5;
  double lr_head = 1e-4;
  double weight_decay = 1e-4;
  double max_grad_norm = 0.0;
  std::uint64_t seed = 1;
  std::size_t synthetic_groups = 4;
  std::size_t val_groups = 8;
  std::size_t min_distractors = 0;
  std::size_t max_distractors = 2;
  std::size_t checkpoint_every = 0;
  bool use_dpg = true;
  bool readjust = true;
  bool dump = false;

  // Synthetic data is used when no dataset root is given.
  bool uses_synthetic() const { return synthetic || data_root.empty(); }
  std::string checkpoint_path() const;

  // Throws ConfigError.
  void validate() const;
};

// Registers every field as a flag and as a config-file key (--config).
void bind(CLI::App& app, RunConfig& cfg);

// One `key = value` line per field; the output is itself a valid config file.
void echo(std::ostream& os, const RunConfig& cfg);

}  // namespace dcfm::cli
