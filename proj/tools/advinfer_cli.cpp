// Copyright 2026 The advinfer Authors
// SPDX-License-Identifier: Apache-2.0

// advinfer command-line front end. Results go to stdout (or --output),
// progress and diagnostics to stderr.
//
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "advinfer/advinfer.h"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct RuntimeFailure {
  std::string message;
};

struct ConfigDeleter {
  void operator()(advinfer_config* c) const { advinfer_config_destroy(c); }
};
struct ResultDeleter {
  void operator()(advinfer_result* r) const { advinfer_result_destroy(r); }
};
using ConfigPtr = std::unique_ptr<advinfer_config, ConfigDeleter>;
using ResultPtr = std::unique_ptr<advinfer_result, ResultDeleter>;

void check(advinfer_status s, const std::string& what) {
  if (s != ADVINFER_OK) {
    throw RuntimeFailure{what + ": " + advinfer_status_name(s) + ": " + advinfer_last_error()};
  }
}

std::string read_input(const std::string& path) {
  if (path == "-") {
    return std::string(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeFailure{"cannot open input '" + path + "'"};
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string output;
  int threads = 0;
  bool verbose = false;
  std::string input;
  std::string construct;
  int samples = 100000;
};

ConfigPtr build_config(const Options& o) {
  advinfer_config* raw = nullptr;
  if (o.config_path.empty()) {
    check(advinfer_config_create(&raw), "config");
  } else {
    check(advinfer_config_load(o.config_path.c_str(), &raw), "config " + o.config_path);
  }
  ConfigPtr cfg(raw);
  for (const std::string& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected key=value, got '" + kv + "'");
    check(advinfer_config_set(cfg.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()),
          "--set " + kv);
  }
  if (o.seed) check(advinfer_config_set(cfg.get(), "master_seed", std::to_string(*o.seed).c_str()), "--seed");
  return cfg;
}

/// Writes to `path` when given, stdout otherwise.
void deliver(const advinfer_result* r, const std::string& path) {
  if (path.empty()) {
    std::fwrite(advinfer_result_text(r), 1, advinfer_result_size(r), stdout);
    std::fflush(stdout);
    return;
  }
  check(advinfer_result_write(r, path.c_str()), "write " + path);
}

// `raw` is taken by reference so it is read after the producing call ran.
ResultPtr take(advinfer_status s, advinfer_result*& raw, const std::string& what) {
  ResultPtr r(raw);
  check(s, what);
  return r;
}

void progress_to_stderr(int done, int total, double per, void*) {
  if (std::isnan(per)) {
    std::fprintf(stderr, "[%d/%d] degenerate trial (prior already exact)\n", done, total);
  } else {
    std::fprintf(stderr, "[%d/%d] PER %.4f\n", done, total, per);
  }
}

std::string output_path_of(const Options& o, const advinfer_config* cfg) {
  if (!o.output.empty()) return o.output;
  advinfer_result* raw = nullptr;
  ResultPtr text = take(advinfer_config_serialize(cfg, &raw), raw, "config");
  std::istringstream lines(advinfer_result_text(text.get()));
  for (std::string line; std::getline(lines, line);) {
    if (line.rfind("output_path =", 0) == 0) {
      std::string v = line.substr(std::string("output_path =").size());
      const auto first = v.find_first_not_of(' ');
      return first == std::string::npos ? std::string() : v.substr(first);
    }
  }
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Infer attacker parameters from observed adversarial perturbations"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config_path, "Experiment config file (key = value lines)");
  app.add_option("--set", o.overrides, "Override a config key, key=value (repeatable)")
      ->type_size(1)
      ->allow_extra_args(false);
  app.add_option("--seed", o.seed, "Master seed (overrides master_seed)");
  app.add_option("--output,-o", o.output, "Write the result here instead of stdout");
  app.add_option("--threads", o.threads, "Worker threads for experiment, 0 = all cores")
      ->check(CLI::NonNegativeNumber);
  app.add_flag("--verbose,-v", o.verbose, "Progress on stderr");

  auto* attack = app.add_subcommand("attack", "Optimal attack for given attacker parameters");
  attack->add_option("--input,-i", o.input, "Request JSON ('-' for stdin)")->required();
  auto* infer = app.add_subcommand("infer", "MAP inference of attacker parameters from one attack");
  infer->add_option("--input,-i", o.input, "Request JSON ('-' for stdin)")->required();
  auto* identify = app.add_subcommand("identify", "Construct an attacker with a prescribed optimal attack");
  identify->add_option("--input,-i", o.input, "Request JSON ('-' for stdin)")->required();
  identify->add_option("--construct", o.construct, "objective | capability | knowledge")
      ->required()
      ->check(CLI::IsMember({"objective", "capability", "knowledge"}));
  identify->add_option("--samples", o.samples, "Boundary samples for the membership check")
      ->check(CLI::NonNegativeNumber);
  auto* train = app.add_subcommand("train", "Train the defender model (logistic or mlp)");
  auto* experiment = app.add_subcommand("experiment", "Run seeded trials and write the summary");
  auto* selftest = app.add_subcommand("selftest", "Run the built-in oracle checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    ConfigPtr cfg = build_config(o);
    advinfer_result* raw = nullptr;
    if (attack->parsed()) {
      const std::string req = read_input(o.input);
      deliver(take(advinfer_attack(req.c_str(), cfg.get(), &raw), raw, "attack").get(), o.output);
    } else if (infer->parsed()) {
      const std::string req = read_input(o.input);
      deliver(take(advinfer_infer(req.c_str(), cfg.get(), &raw), raw, "infer").get(), o.output);
    } else if (identify->parsed()) {
      const std::string req = read_input(o.input);
      std::uint64_t seed = o.seed.value_or(0);
      deliver(take(advinfer_identify(req.c_str(), o.construct.c_str(), o.samples, seed, &raw), raw,
                   "identify")
                  .get(),
              o.output);
    } else if (train->parsed()) {
      deliver(take(advinfer_train(cfg.get(), &raw), raw, "train").get(), o.output);
    } else if (experiment->parsed()) {
      const std::string out_path = output_path_of(o, cfg.get());
      const advinfer_status s = advinfer_run_experiment(
          cfg.get(), o.threads, o.verbose ? &progress_to_stderr : nullptr, nullptr, &raw);
      deliver(take(s, raw, "experiment").get(), out_path);
    } else if (selftest->parsed()) {
      const advinfer_status s = advinfer_selftest(o.seed.value_or(0), &raw);
      ResultPtr r(raw);
      if (r) deliver(r.get(), o.output);
      check(s, "selftest");
    }
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const RuntimeFailure& f) {
    std::fprintf(stderr, "error: %s\n", f.message.c_str());
    return kExitRuntime;
  }
  return 0;
}
