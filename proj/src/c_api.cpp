// Copyright 2026 The advinfer Authors
// SPDX-License-Identifier: Apache-2.0

#include "advinfer/advinfer.h"

#include <cmath>
#include <limits>
#include <new>
#include <string>

#include "advinfer/data_io.hpp"
#include "advinfer/experiments.hpp"
#include "advinfer/identifiability.hpp"
#include "advinfer/selftest.hpp"
#include "json_codec.hpp"

struct advinfer_config {
  advinfer::ExperimentConfig cfg;
};

struct advinfer_result {
  std::string text;
};

namespace {

using namespace advinfer;
using codec::json;

thread_local std::string g_last_error;

advinfer_status status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return ADVINFER_ERR_INVALID_ARGUMENT;
    case ErrorCode::kDimensionMismatch: return ADVINFER_ERR_DIMENSION_MISMATCH;
    case ErrorCode::kNonFinite: return ADVINFER_ERR_NON_FINITE;
    case ErrorCode::kDegenerate: return ADVINFER_ERR_DEGENERATE;
    case ErrorCode::kIo: return ADVINFER_ERR_IO;
    case ErrorCode::kParse: return ADVINFER_ERR_PARSE;
    case ErrorCode::kNumeric: return ADVINFER_ERR_NUMERIC;
  }
  return ADVINFER_ERR_INTERNAL;
}

template <typename F>
advinfer_status guarded(F&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return ADVINFER_ERR_INTERNAL;
}

void require_ptr(const void* p, const char* what) {
  if (p == nullptr) fail(ErrorCode::kInvalidArgument, std::string(what) + " must not be NULL");
}

advinfer_status emit(std::string text, advinfer_result** out) {
  *out = new advinfer_result{std::move(text)};
  return ADVINFER_OK;
}

ExperimentConfig config_or_default(const advinfer_config* cfg) {
  return cfg != nullptr ? cfg->cfg : ExperimentConfig{};
}

std::optional<Vector> optional_x(const json& req) {
  if (!req.contains("x")) return std::nullopt;
  return codec::vector_from_json(req.at("x"), "x");
}

}  // namespace

extern "C" {

const char* advinfer_version(void) { return "0.1.0"; }

const char* advinfer_last_error(void) { return g_last_error.c_str(); }

const char* advinfer_status_name(advinfer_status status) {
  switch (status) {
    case ADVINFER_OK: return "ok";
    case ADVINFER_ERR_INVALID_ARGUMENT: return "invalid argument";
    case ADVINFER_ERR_DIMENSION_MISMATCH: return "dimension mismatch";
    case ADVINFER_ERR_NON_FINITE: return "non-finite value";
    case ADVINFER_ERR_DEGENERATE: return "degenerate input";
    case ADVINFER_ERR_IO: return "i/o error";
    case ADVINFER_ERR_PARSE: return "parse error";
    case ADVINFER_ERR_NUMERIC: return "numerical failure";
    case ADVINFER_ERR_CHECK_FAILED: return "check failed";
    case ADVINFER_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

advinfer_status advinfer_config_create(advinfer_config** out) {
  return guarded([&] {
    require_ptr(out, "out");
    *out = new advinfer_config{};
    return ADVINFER_OK;
  });
}

advinfer_status advinfer_config_parse(const char* text, advinfer_config** out) {
  return guarded([&] {
    require_ptr(text, "text");
    require_ptr(out, "out");
    *out = new advinfer_config{parse_config_text(text)};
    return ADVINFER_OK;
  });
}

advinfer_status advinfer_config_load(const char* path, advinfer_config** out) {
  return guarded([&] {
    require_ptr(path, "path");
    require_ptr(out, "out");
    *out = new advinfer_config{parse_config(path)};
    return ADVINFER_OK;
  });
}

advinfer_status advinfer_config_set(advinfer_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require_ptr(cfg, "cfg");
    require_ptr(key, "key");
    require_ptr(value, "value");
    ExperimentConfig next = cfg->cfg;
    apply_setting(next, key, value);
    cfg->cfg = std::move(next);
    return ADVINFER_OK;
  });
}

advinfer_status advinfer_config_serialize(const advinfer_config* cfg, advinfer_result** out) {
  return guarded([&] {
    require_ptr(cfg, "cfg");
    require_ptr(out, "out");
    return emit(serialize_config(cfg->cfg), out);
  });
}

void advinfer_config_destroy(advinfer_config* cfg) { delete cfg; }

const char* advinfer_result_text(const advinfer_result* result) {
  return result != nullptr ? result->text.c_str() : "";
}

size_t advinfer_result_size(const advinfer_result* result) {
  return result != nullptr ? result->text.size() : 0;
}

advinfer_status advinfer_result_write(const advinfer_result* result, const char* path) {
  return guarded([&] {
    require_ptr(result, "result");
    require_ptr(path, "path");
    write_text_file(path, result->text);
    return ADVINFER_OK;
  });
}

void advinfer_result_destroy(advinfer_result* result) { delete result; }

advinfer_status advinfer_attack(const char* request_json, const advinfer_config* cfg,
                                advinfer_result** out) {
  return guarded([&] {
    require_ptr(request_json, "request_json");
    require_ptr(out, "out");
    const json req = codec::parse(request_json, "attack request");
    const AttackerParams attacker = codec::attacker_from_json(codec::member(req, "attacker"));
    json res;
    if (const auto* lin = std::get_if<LinearAttacker>(&attacker)) {
      const Vector alpha = optimal_attack_linear(*lin);
      res["alpha"] = codec::vector_to_json(alpha);
      res["objective"] = linear_attack_objective(*lin, alpha);
      res["constraint_norm"] = mahalanobis_norm(alpha, lin->C);
    } else {
      const auto& box = std::get<BoxAttacker>(attacker);
      const auto x = optional_x(req);
      if (!x) fail(ErrorCode::kInvalidArgument, "attack request: box attackers need 'x'");
      const Vector alpha = optimal_attack_box(box, *x, config_or_default(cfg).inner());
      res["alpha"] = codec::vector_to_json(alpha);
      res["target_probability"] = class_probabilities(box.model, *x + alpha)(box.target);
      res["predicted_class"] = predict_class(box.model, *x + alpha);
    }
    return emit(codec::dump(res), out);
  });
}

advinfer_status advinfer_infer(const char* request_json, const advinfer_config* cfg,
                               advinfer_result** out) {
  return guarded([&] {
    require_ptr(request_json, "request_json");
    require_ptr(out, "out");
    const json req = codec::parse(request_json, "infer request");
    const ExperimentConfig ecfg = config_or_default(cfg);
    InferenceConfig icfg = ecfg.inference();
    icfg.seed = ecfg.master_seed;
    const Vector alpha_obs = codec::vector_from_json(codec::member(req, "alpha_obs"), "alpha_obs");
    const json& prior_j = codec::member(req, "prior");
    const json& type = codec::member(prior_j, "type");
    json res;
    if (type == "linear") {
      const LinearPrior prior = make_linear_prior(codec::matrix_from_json(codec::member(prior_j, "M_star"), "M_star"));
      const InferenceResult r = infer_linear(alpha_obs, prior, icfg);
      res = codec::result_to_json(r);
      res["prior_mode"] = codec::attacker_to_json(linear_prior_mode(prior));
    } else if (type == "box") {
      const auto x = optional_x(req);
      if (!x) fail(ErrorCode::kInvalidArgument, "infer request: box priors need 'x'");
      const BoxPrior prior = build_box_prior(alpha_obs, codec::model_from_json(codec::member(prior_j, "model")), *x);
      const InferenceResult r = infer_box(alpha_obs, *x, prior, icfg);
      res = codec::result_to_json(r);
      res["prior_mode"] = codec::attacker_to_json(box_prior_mode(prior));
    } else {
      fail(ErrorCode::kParse, "infer request: prior.type must be 'linear' or 'box'");
    }
    return emit(codec::dump(res), out);
  });
}

advinfer_status advinfer_identify(const char* request_json, const char* construct, int samples,
                                  uint64_t seed, advinfer_result** out) {
  return guarded([&] {
    require_ptr(request_json, "request_json");
    require_ptr(construct, "construct");
    require_ptr(out, "out");
    if (samples < 0) fail(ErrorCode::kInvalidArgument, "samples must be non-negative");
    const json req = codec::parse(request_json, "identify request");
    const Vector alpha = codec::vector_from_json(codec::member(req, "alpha"), "alpha");
    auto mat = [&](const char* key) { return codec::matrix_from_json(codec::member(req, key), key); };
    auto pd = [&](const char* key) { return PDMatrix::from_product(mat(key)); };
    auto scalar = [&](const char* key) {
      const json& v = codec::member(req, key);
      if (!v.is_number()) fail(ErrorCode::kParse, std::string(key) + ": expected a number");
      return v.get<double>();
    };
    const std::string which = construct;
    const LinearAttacker a = [&] {
      if (which == "objective") {
        const Matrix M = mat("M");
        const PDMatrix C = pd("C");
        const double c = scalar("c");
        return LinearAttacker{M, C, c, construct_objective(alpha, M, C, c)};
      }
      if (which == "capability") {
        const Matrix M = mat("M");
        const PDMatrix W = pd("W");
        auto [C, c] = construct_capability(alpha, M, W);
        return LinearAttacker{M, std::move(C), c, W};
      }
      if (which == "knowledge") {
        const PDMatrix C = pd("C");
        const double c = scalar("c");
        const PDMatrix W = pd("W");
        return LinearAttacker{construct_knowledge(alpha, C, c, W), C, c, W};
      }
      fail(ErrorCode::kInvalidArgument, "construct must be objective, capability or knowledge");
    }();
    const MembershipReport rep = verify_membership(a, alpha, samples, 1e-6, seed);
    json res;
    res["construct"] = which;
    res["attacker"] = codec::attacker_to_json(a);
    res["alpha_opt"] = codec::vector_to_json(optimal_attack_linear(a));
    res["membership"] = {{"is_member", rep.is_member},
                         {"objective_at_alpha", rep.objective_at_alpha},
                         {"best_found_objective", rep.best_found_objective},
                         {"gap", rep.gap},
                         {"samples", samples}};
    return emit(codec::dump(res), out);
  });
}

advinfer_status advinfer_train(const advinfer_config* cfg, advinfer_result** out) {
  return guarded([&] {
    require_ptr(cfg, "cfg");
    require_ptr(out, "out");
    if (cfg->cfg.parameterization == Parameterization::kLinear) {
      fail(ErrorCode::kInvalidArgument, "train: parameterization must be logistic or mlp");
    }
    cfg->cfg.validate();
    const BoxSetup setup = prepare_box_setup(cfg->cfg);
    json res;
    res["model"] = codec::model_to_json(setup.model_star);
    res["dataset"] = cfg->cfg.dataset_path.empty() ? "synthetic-blobs" : cfg->cfg.dataset_path;
    res["initial_loss"] = setup.train_report.initial_loss;
    res["final_loss"] = setup.train_report.final_loss;
    res["train_accuracy"] = setup.train_report.train_accuracy;
    res["test_accuracy"] = accuracy(setup.model_star, setup.test);
    return emit(codec::dump(res), out);
  });
}

advinfer_status advinfer_run_experiment(const advinfer_config* cfg, int threads,
                                        advinfer_progress_fn progress, void* user_data,
                                        advinfer_result** out) {
  return guarded([&] {
    require_ptr(cfg, "cfg");
    require_ptr(out, "out");
    if (threads < 0) fail(ErrorCode::kInvalidArgument, "threads must be non-negative");
    TrialProgress cb;
    if (progress != nullptr) {
      cb = [&](int done, int total, const TrialRecord& r) {
        progress(done, total, r.per.value_or(std::numeric_limits<double>::quiet_NaN()), user_data);
      };
    }
    const TrialSummary summary = run_trials(cfg->cfg, threads, cb);
    return emit(cfg->cfg.output_format == OutputFormat::kJson ? summary_to_json(summary, cfg->cfg)
                                                              : summary_to_csv(summary),
                out);
  });
}

advinfer_status advinfer_selftest(uint64_t seed, advinfer_result** out) {
  return guarded([&] {
    require_ptr(out, "out");
    std::string text;
    bool all = true;
    for (const auto& c : run_selftest(seed)) {
      all = all && c.passed;
      text += std::string(c.passed ? "PASS " : "FAIL ") + c.name + ": " + c.detail + "\n";
    }
    emit(std::move(text), out);
    return all ? ADVINFER_OK : ADVINFER_ERR_CHECK_FAILED;
  });
}

advinfer_status advinfer_optimal_attack_linear(size_t q, size_t d, const double* M,
                                               const double* C, double c, const double* W,
                                               double* alpha_out) {
  return guarded([&] {
    require_ptr(M, "M");
    require_ptr(C, "C");
    require_ptr(W, "W");
    require_ptr(alpha_out, "alpha_out");
    if (q == 0 || d == 0) fail(ErrorCode::kInvalidArgument, "dimensions must be positive");
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const auto qi = static_cast<Index>(q), di = static_cast<Index>(d);
    const LinearAttacker a{Matrix(Eigen::Map<const RowMajor>(M, qi, di)),
                           PDMatrix::from_product(Eigen::Map<const RowMajor>(C, di, di)), c,
                           PDMatrix::from_product(Eigen::Map<const RowMajor>(W, qi, qi))};
    a.validate();
    const Vector alpha = optimal_attack_linear(a);
    for (Index i = 0; i < di; ++i) alpha_out[i] = alpha(i);
    return ADVINFER_OK;
  });
}

advinfer_status advinfer_per(double err_prior, double err_estimate, double* out) {
  return guarded([&] {
    require_ptr(out, "out");
    *out = per(err_prior, err_estimate);
    return ADVINFER_OK;
  });
}

}  // extern "C"
