// Copyright 2026 The advinfer Authors
// SPDX-License-Identifier: Apache-2.0

#include "advinfer/data_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "json.hpp"

namespace advinfer {

using nlohmann::json;

namespace {

constexpr int kPendigitsFeatures = 16;
constexpr int kPendigitsClasses = 10;

std::string_view trim(std::string_view s) {
  const auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  if constexpr (std::is_floating_point_v<T>) {
    if (s.front() == '+') s.remove_prefix(1);
  }
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) fail(ErrorCode::kNumeric, "format_double: conversion failed");
  return std::string(buf.data(), ptr);
}

std::string format_g17(double v) {
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", v);
  return buf.data();
}

}  // namespace

// ---------------------------------------------------------------------------
// Dataset

void LabeledDataset::validate() const {
  if (features.size() != labels.size()) {
    fail(ErrorCode::kDimensionMismatch, "dataset: feature and label counts differ");
  }
  if (labels.empty()) fail(ErrorCode::kInvalidArgument, "dataset: no records");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (features[i].size() != d) fail(ErrorCode::kDimensionMismatch, "dataset: ragged features");
    if (labels[i] < 0 || labels[i] >= q) fail(ErrorCode::kInvalidArgument, "dataset: bad label");
  }
}

LabeledDataset parse_pendigits(std::string_view text, bool normalize) {
  LabeledDataset ds;
  ds.d = kPendigitsFeatures;
  ds.q = kPendigitsClasses;
  const auto lines = lines_of(text);
  // Trailing blank lines are tolerated; any other blank line is a bad record.
  std::size_t end = lines.size();
  while (end > 0 && trim(lines[end - 1]).empty()) --end;
  for (std::size_t i = 0; i < end; ++i) {
    const std::size_t lineno = i + 1;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    const auto fields = split(lines[i], ',');
    if (fields.size() != kPendigitsFeatures + 1) {
      throw DatasetError(DatasetErrorKind::kFieldCount, lineno,
                         where + "expected 17 fields, found " + std::to_string(fields.size()));
    }
    std::array<long, kPendigitsFeatures + 1> values{};
    for (std::size_t f = 0; f < fields.size(); ++f) {
      if (!parse_number(fields[f], values[f])) {
        throw DatasetError(DatasetErrorKind::kNonInteger, lineno,
                           where + "field " + std::to_string(f + 1) + " is not an integer: '" +
                               std::string(trim(fields[f])) + "'");
      }
    }
    Vector x(kPendigitsFeatures);
    for (int f = 0; f < kPendigitsFeatures; ++f) {
      if (values[f] < 0 || values[f] > 100) {
        throw DatasetError(DatasetErrorKind::kFeatureRange, lineno,
                           where + "feature " + std::to_string(f + 1) + " outside [0, 100]: " +
                               std::to_string(values[f]));
      }
      x(f) = normalize ? static_cast<double>(values[f]) / 100.0 : static_cast<double>(values[f]);
    }
    const long label = values[kPendigitsFeatures];
    if (label < 0 || label >= kPendigitsClasses) {
      throw DatasetError(DatasetErrorKind::kLabelRange, lineno,
                         where + "label outside 0..9: " + std::to_string(label));
    }
    ds.features.push_back(std::move(x));
    ds.labels.push_back(static_cast<int>(label));
  }
  if (ds.labels.empty()) throw DatasetError(DatasetErrorKind::kNoRecords, 0, "dataset: no records");
  return ds;
}

LabeledDataset load_pendigits(const std::string& path, bool normalize) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError(DatasetErrorKind::kMissingFile, 0, "cannot open dataset '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_pendigits(buf.str(), normalize);
}

// ---------------------------------------------------------------------------
// Enums

std::string_view to_string(Parameterization p) {
  switch (p) {
    case Parameterization::kLinear: return "linear";
    case Parameterization::kLogistic: return "logistic";
    case Parameterization::kMlp: return "mlp";
  }
  return "?";
}

Parameterization parameterization_from_string(std::string_view s) {
  if (s == "linear") return Parameterization::kLinear;
  if (s == "logistic") return Parameterization::kLogistic;
  if (s == "mlp") return Parameterization::kMlp;
  fail(ErrorCode::kInvalidArgument, "unknown parameterization '" + std::string(s) + "'");
}

std::string_view to_string(OutputFormat f) {
  return f == OutputFormat::kJson ? "json" : "csv";
}

OutputFormat output_format_from_string(std::string_view s) {
  if (s == "json") return OutputFormat::kJson;
  if (s == "csv") return OutputFormat::kCsv;
  fail(ErrorCode::kInvalidArgument, "unknown output format '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::validate() const {
  if (d < 1 || q < 1) fail(ErrorCode::kInvalidArgument, "config: d and q must be positive");
  if (!(sample_scale > 0.0) || !std::isfinite(sample_scale)) {
    fail(ErrorCode::kInvalidArgument, "config: sample_scale must be positive");
  }
  if (trials < 1) fail(ErrorCode::kInvalidArgument, "config: trials must be >= 1");
  if (train_epochs < 1) fail(ErrorCode::kInvalidArgument, "config: train_epochs must be >= 1");
  if (!(train_lr > 0.0)) fail(ErrorCode::kInvalidArgument, "config: train_lr must be positive");
  if (!(box_halfwidth > 0.0) || !std::isfinite(box_halfwidth)) {
    fail(ErrorCode::kInvalidArgument, "config: box_halfwidth must be positive");
  }
  for (int h : hidden_sizes) {
    if (h < 1) fail(ErrorCode::kInvalidArgument, "config: hidden sizes must be positive");
  }
  if (parameterization == Parameterization::kMlp && hidden_sizes.empty()) {
    fail(ErrorCode::kInvalidArgument, "config: mlp needs at least one hidden layer");
  }
  inference().validate();
}

PGDConfig ExperimentConfig::inner() const {
  PGDConfig p;
  p.steps = inner_steps;
  p.step_size = inner_step_size;
  p.init = inner_init;
  return p;
}

InferenceConfig ExperimentConfig::inference() const {
  InferenceConfig c;
  c.lambda = lambda;
  c.learning_rate = learning_rate;
  c.epochs = epochs;
  c.grad_mode = grad_mode;
  c.fd_step = fd_step;
  c.inner = inner();
  c.optimizer = optimizer;
  c.target_mode = target_mode;
  return c;
}

namespace {

struct KeySpec {
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
T number_or_throw(std::string_view key, std::string_view value) {
  T out{};
  if (!parse_number(value, out)) {
    fail(ErrorCode::kParse, "invalid value for '" + std::string(key) + "': '" +
                                std::string(value) + "'");
  }
  return out;
}

bool bool_or_throw(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  fail(ErrorCode::kParse, "invalid boolean for '" + std::string(key) + "': '" + std::string(value) + "'");
}

std::vector<int> int_list_or_throw(std::string_view key, std::string_view value) {
  std::vector<int> out;
  if (trim(value).empty()) return out;
  for (std::string_view part : split(value, ',')) out.push_back(number_or_throw<int>(key, part));
  return out;
}

template <typename E>
E enum_or_throw(std::string_view key, std::string_view value, E (*conv)(std::string_view)) {
  try {
    return conv(value);
  } catch (const Error& e) {
    fail(ErrorCode::kParse, "invalid value for '" + std::string(key) + "': " + e.what());
  }
}

#define ADVINFER_NUM_KEY(name)                                                                  \
  {                                                                                             \
    #name, {                                                                                    \
      [](ExperimentConfig& c, std::string_view v) {                                             \
        c.name = number_or_throw<decltype(c.name)>(#name, v);                                   \
      },                                                                                        \
          [](const ExperimentConfig& c) {                                                       \
            if constexpr (std::is_floating_point_v<decltype(c.name)>) {                         \
              return format_double(c.name);                                                     \
            } else {                                                                            \
              return std::to_string(c.name);                                                    \
            }                                                                                   \
          }                                                                                     \
    }                                                                                           \
  }

#define ADVINFER_ENUM_KEY(name, conv)                                                           \
  {                                                                                             \
    #name, {                                                                                    \
      [](ExperimentConfig& c, std::string_view v) { c.name = enum_or_throw(#name, v, &conv); }, \
          [](const ExperimentConfig& c) { return std::string(to_string(c.name)); }              \
    }                                                                                           \
  }

const std::vector<std::pair<std::string, KeySpec>>& key_table() {
  static const std::vector<std::pair<std::string, KeySpec>> table = {
      ADVINFER_ENUM_KEY(parameterization, parameterization_from_string),
      ADVINFER_NUM_KEY(d),
      ADVINFER_NUM_KEY(q),
      ADVINFER_NUM_KEY(sample_scale),
      ADVINFER_NUM_KEY(lambda),
      ADVINFER_NUM_KEY(learning_rate),
      ADVINFER_NUM_KEY(epochs),
      ADVINFER_ENUM_KEY(grad_mode, grad_mode_from_string),
      ADVINFER_ENUM_KEY(optimizer, optimizer_from_string),
      ADVINFER_ENUM_KEY(target_mode, target_mode_from_string),
      ADVINFER_NUM_KEY(fd_step),
      ADVINFER_NUM_KEY(inner_steps),
      ADVINFER_NUM_KEY(inner_step_size),
      ADVINFER_ENUM_KEY(inner_init, pgd_init_from_string),
      ADVINFER_NUM_KEY(trials),
      ADVINFER_NUM_KEY(master_seed),
      {"dataset_path",
       {[](ExperimentConfig& c, std::string_view v) { c.dataset_path = std::string(v); },
        [](const ExperimentConfig& c) { return c.dataset_path; }}},
      {"normalize_features",
       {[](ExperimentConfig& c, std::string_view v) {
          c.normalize_features = bool_or_throw("normalize_features", v);
        },
        [](const ExperimentConfig& c) {
          return std::string(c.normalize_features ? "true" : "false");
        }}},
      {"hidden_sizes",
       {[](ExperimentConfig& c, std::string_view v) {
          c.hidden_sizes = int_list_or_throw("hidden_sizes", v);
        },
        [](const ExperimentConfig& c) {
          std::string s;
          for (std::size_t i = 0; i < c.hidden_sizes.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(c.hidden_sizes[i]);
          }
          return s;
        }}},
      ADVINFER_ENUM_KEY(activation, activation_from_string),
      ADVINFER_NUM_KEY(train_epochs),
      ADVINFER_NUM_KEY(train_lr),
      ADVINFER_NUM_KEY(box_halfwidth),
      {"output_path",
       {[](ExperimentConfig& c, std::string_view v) { c.output_path = std::string(v); },
        [](const ExperimentConfig& c) { return c.output_path; }}},
      ADVINFER_ENUM_KEY(output_format, output_format_from_string),
  };
  return table;
}

#undef ADVINFER_NUM_KEY
#undef ADVINFER_ENUM_KEY

const KeySpec* find_key(std::string_view key) {
  for (const auto& [name, spec] : key_table()) {
    if (name == key) return &spec;
  }
  return nullptr;
}

void check_domain(const ExperimentConfig& c, std::string_view key) {
  if (key == "lambda" && !(c.lambda >= 0.0 && std::isfinite(c.lambda))) {
    fail(ErrorCode::kInvalidArgument, "lambda must be non-negative and finite");
  }
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& entry : key_table()) k.push_back(entry.first);
    return k;
  }();
  return keys;
}

void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  const KeySpec* spec = find_key(key);
  if (spec == nullptr) fail(ErrorCode::kParse, "unknown config key '" + std::string(key) + "'");
  spec->set(cfg, value);
  check_domain(cfg, key);
}

ExperimentConfig parse_config_text(std::string_view text) {
  ExperimentConfig cfg;
  const auto lines = lines_of(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(i + 1) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorCode::kParse, where + "expected 'key = value'");
    }
    try {
      apply_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
    } catch (const Error& e) {
      fail(e.code(), where + e.what());
    }
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    fail(e.code(), std::string("config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  return parse_config_text(read_text_file(path));
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [name, spec] : key_table()) out += name + " = " + spec.get(cfg) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Summaries

TrialSummary TrialSummary::from_records(std::vector<TrialRecord> records) {
  TrialSummary s;
  s.records = std::move(records);
  std::vector<double> pers;
  for (const auto& r : s.records) {
    if (r.per) {
      pers.push_back(*r.per);
    } else {
      ++s.excluded;
    }
  }
  if (pers.empty()) return s;
  std::sort(pers.begin(), pers.end());
  const std::size_t n = pers.size();
  s.median_per = n % 2 == 1 ? pers[n / 2] : 0.5 * (pers[n / 2 - 1] + pers[n / 2]);
  s.max_per = pers.back();
  const auto positive = std::count_if(pers.begin(), pers.end(), [](double p) { return p > 0.0; });
  s.fraction_positive = static_cast<double>(positive) / static_cast<double>(n);
  return s;
}

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

json config_json(const ExperimentConfig& cfg) {
  json j = json::object();
  j["parameterization"] = to_string(cfg.parameterization);
  j["d"] = cfg.d;
  j["q"] = cfg.q;
  j["sample_scale"] = cfg.sample_scale;
  j["lambda"] = cfg.lambda;
  j["learning_rate"] = cfg.learning_rate;
  j["epochs"] = cfg.epochs;
  j["grad_mode"] = to_string(cfg.grad_mode);
  j["optimizer"] = to_string(cfg.optimizer);
  j["target_mode"] = to_string(cfg.target_mode);
  j["fd_step"] = cfg.fd_step;
  j["inner_steps"] = cfg.inner_steps;
  j["inner_step_size"] = cfg.inner_step_size;
  j["inner_init"] = to_string(cfg.inner_init);
  j["trials"] = cfg.trials;
  j["master_seed"] = cfg.master_seed;
  j["dataset_path"] = cfg.dataset_path;
  j["normalize_features"] = cfg.normalize_features;
  j["hidden_sizes"] = cfg.hidden_sizes;
  j["activation"] = to_string(cfg.activation);
  j["train_epochs"] = cfg.train_epochs;
  j["train_lr"] = cfg.train_lr;
  j["box_halfwidth"] = cfg.box_halfwidth;
  j["output_format"] = to_string(cfg.output_format);
  return j;
}

}  // namespace

std::string summary_to_json(const TrialSummary& summary, const ExperimentConfig& cfg) {
  json j;
  j["config"] = config_json(cfg);
  json records = json::array();
  for (const auto& r : summary.records) {
    records.push_back({{"trial_id", r.trial_id},
                       {"seed", r.seed},
                       {"err_prior", r.err_prior},
                       {"err_estimate", r.err_estimate},
                       {"per", optional_json(r.per)}});
  }
  j["records"] = std::move(records);
  j["aggregates"] = {{"count", summary.records.size() - summary.excluded},
                     {"excluded", summary.excluded},
                     {"median_per", optional_json(summary.median_per)},
                     {"max_per", optional_json(summary.max_per)},
                     {"fraction_positive", optional_json(summary.fraction_positive)}};
  return j.dump(2) + "\n";
}

TrialSummary summary_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    TrialSummary s;
    for (const auto& r : j.at("records")) {
      TrialRecord rec;
      rec.trial_id = r.at("trial_id").get<int>();
      rec.seed = r.at("seed").get<std::uint64_t>();
      rec.err_prior = r.at("err_prior").get<double>();
      rec.err_estimate = r.at("err_estimate").get<double>();
      rec.per = optional_from_json(r.at("per"));
      s.records.push_back(rec);
    }
    const json& a = j.at("aggregates");
    s.excluded = a.at("excluded").get<std::size_t>();
    s.median_per = optional_from_json(a.at("median_per"));
    s.max_per = optional_from_json(a.at("max_per"));
    s.fraction_positive = optional_from_json(a.at("fraction_positive"));
    return s;
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("summary json: ") + e.what());
  }
}

std::string summary_to_csv(const TrialSummary& summary) {
  std::string out = "trial_id,seed,err_prior,err_estimate,per\n";
  for (const auto& r : summary.records) {
    out += std::to_string(r.trial_id) + "," + std::to_string(r.seed) + "," +
           format_g17(r.err_prior) + "," + format_g17(r.err_estimate) + "," +
           (r.per ? format_g17(*r.per) : std::string()) + "\n";
  }
  return out;
}

TrialSummary summary_from_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty() || trim(lines[0]) != "trial_id,seed,err_prior,err_estimate,per") {
    fail(ErrorCode::kParse, "summary csv: missing header");
  }
  std::vector<TrialRecord> records;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string where = "summary csv line " + std::to_string(i + 1) + ": ";
    const auto f = split(trim(lines[i]), ',');
    if (f.size() != 5) fail(ErrorCode::kParse, where + "expected 5 fields");
    TrialRecord r;
    bool ok = parse_number(f[0], r.trial_id) && parse_number(f[1], r.seed) &&
              parse_number(f[2], r.err_prior) && parse_number(f[3], r.err_estimate);
    if (!trim(f[4]).empty()) {
      double per = 0.0;
      ok = ok && parse_number(f[4], per);
      r.per = per;
    }
    if (!ok) fail(ErrorCode::kParse, where + "malformed field");
    records.push_back(r);
  }
  return TrialSummary::from_records(std::move(records));
}

void write_summary(const TrialSummary& summary, const ExperimentConfig& cfg,
                   const std::string& path, OutputFormat format) {
  write_text_file(path, format == OutputFormat::kJson ? summary_to_json(summary, cfg)
                                                      : summary_to_csv(summary));
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) fail(ErrorCode::kIo, "failed writing '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace advinfer
