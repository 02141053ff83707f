// Copyright 2026 The advinfer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "advinfer/attackers.hpp"
#include "advinfer/error.hpp"
#include "advinfer/inference.hpp"

namespace advinfer {

struct LabeledDataset {
  std::vector<Vector> features;
  std::vector<int> labels;
  Index d = 0;
  Index q = 0;

  std::size_t size() const { return labels.size(); }
  void validate() const;
};

enum class DatasetErrorKind {
  kMissingFile,
  kNoRecords,
  kFieldCount,
  kNonInteger,
  kLabelRange,
  kFeatureRange,
};

class DatasetError : public Error {
 public:
  DatasetError(DatasetErrorKind kind, std::size_t line, const std::string& what)
      : Error(kind == DatasetErrorKind::kMissingFile ? ErrorCode::kIo : ErrorCode::kParse, what),
        kind_(kind),
        line_(line) {}

  DatasetErrorKind kind() const noexcept { return kind_; }
  /// 1-based line number, 0 when not tied to a line.
  std::size_t line() const noexcept { return line_; }

 private:
  DatasetErrorKind kind_;
  std::size_t line_;
};

/// Pen-digits records: 16 integer features in [0, 100] then a label in 0..9,
/// comma separated. Features are divided by 100 when `normalize` is set.
LabeledDataset load_pendigits(const std::string& path, bool normalize = true);
LabeledDataset parse_pendigits(std::string_view text, bool normalize = true);

enum class Parameterization { kLinear, kLogistic, kMlp };
enum class OutputFormat { kJson, kCsv };

std::string_view to_string(Parameterization p);
Parameterization parameterization_from_string(std::string_view s);
std::string_view to_string(OutputFormat f);
OutputFormat output_format_from_string(std::string_view s);

struct ExperimentConfig {
  Parameterization parameterization = Parameterization::kLinear;
  int d = 10;
  int q = 5;
  double sample_scale = 0.25;
  double lambda = 0.1;
  double learning_rate = 0.01;
  int epochs = 5000;
  GradMode grad_mode = GradMode::kUnrolled;
  OuterOptimizer optimizer = OuterOptimizer::kAdam;
  TargetMode target_mode = TargetMode::kArgmax;
  double fd_step = 1e-4;
  int inner_steps = 300;
  double inner_step_size = 0.05;
  PgdInit inner_init = PgdInit::kZero;
  int trials = 100;
  std::uint64_t master_seed = 0;
  std::string dataset_path;
  bool normalize_features = true;
  std::vector<int> hidden_sizes{32};
  Activation activation = Activation::kRelu;
  int train_epochs = 500;
  double train_lr = 0.5;
  /// Half-width of the base box the true box attackers are sampled around.
  double box_halfwidth = 0.3;
  std::string output_path;
  OutputFormat output_format = OutputFormat::kJson;

  void validate() const;
  InferenceConfig inference() const;
  PGDConfig inner() const;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Every key accepted by parse_config / apply_setting, in canonical order.
const std::vector<std::string>& config_keys();

/// Applies one `key = value` setting; throws kParse on unknown keys or
/// malformed values and kInvalidArgument on out-of-domain values.
void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value);

/// Flat `key = value` text, `#` starts a comment. Errors carry the line
/// number. Missing keys keep their defaults.
ExperimentConfig parse_config_text(std::string_view text);
ExperimentConfig parse_config(const std::string& path);

/// Inverse of parse_config_text for every key.
std::string serialize_config(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Trial records

struct TrialRecord {
  int trial_id = 0;
  std::uint64_t seed = 0;
  double err_prior = 0.0;
  double err_estimate = 0.0;
  /// Percent error reduction; empty when err_prior == 0.
  std::optional<double> per;

  bool degenerate() const { return !per.has_value(); }
  bool operator==(const TrialRecord&) const = default;
};

struct TrialSummary {
  std::vector<TrialRecord> records;
  std::optional<double> median_per;
  std::optional<double> max_per;
  std::optional<double> fraction_positive;
  std::size_t excluded = 0;

  /// Recomputes the aggregates from `records` (degenerate trials excluded).
  static TrialSummary from_records(std::vector<TrialRecord> records);
  bool operator==(const TrialSummary&) const = default;
};

std::string summary_to_json(const TrialSummary& summary, const ExperimentConfig& cfg);
std::string summary_to_csv(const TrialSummary& summary);
void write_summary(const TrialSummary& summary, const ExperimentConfig& cfg,
                   const std::string& path, OutputFormat format);
TrialSummary summary_from_json(std::string_view text);
TrialSummary summary_from_csv(std::string_view text);

/// Writes `text` to `path`, throwing kIo on failure.
void write_text_file(const std::string& path, std::string_view text);
std::string read_text_file(const std::string& path);

}  // namespace advinfer
