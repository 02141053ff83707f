// Copyright 2026 The advinfer Authors
// SPDX-License-Identifier: Apache-2.0

#include "json_codec.hpp"

#include "advinfer/error.hpp"

namespace advinfer::codec {

namespace {

double number(const json& j, const char* what) {
  if (!j.is_number()) fail(ErrorCode::kParse, std::string(what) + ": expected a number");
  return j.get<double>();
}

}  // namespace

const json& member(const json& j, const char* key) {
  if (!j.is_object()) fail(ErrorCode::kParse, std::string("expected an object holding '") + key + "'");
  const auto it = j.find(key);
  if (it == j.end()) fail(ErrorCode::kParse, std::string("missing key '") + key + "'");
  return *it;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty() || !j[0].is_array() || j[0].empty()) {
    fail(ErrorCode::kParse, std::string(what) + ": expected a non-empty array of rows");
  }
  const std::size_t cols = j[0].size();
  Matrix m(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) {
      fail(ErrorCode::kParse, std::string(what) + ": rows have different lengths");
    }
    for (std::size_t k = 0; k < cols; ++k) {
      m(static_cast<Index>(i), static_cast<Index>(k)) = number(j[i][k], what);
    }
  }
  return m;
}

json vector_to_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vector vector_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty()) fail(ErrorCode::kParse, std::string(what) + ": expected a non-empty array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = number(j[i], what);
  return v;
}

json model_to_json(const ModelBelief& model) {
  if (const auto* lg = std::get_if<LogisticModel>(&model)) {
    return {{"kind", "logistic"}, {"M", matrix_to_json(lg->M)}};
  }
  const auto& mlp = std::get<MLPModel>(model);
  json layers = json::array();
  json acts = json::array();
  for (const auto& w : mlp.layers) layers.push_back(matrix_to_json(w));
  for (Activation a : mlp.activations) acts.push_back(to_string(a));
  return {{"kind", "mlp"}, {"layers", std::move(layers)}, {"activations", std::move(acts)}};
}

ModelBelief model_from_json(const json& j) {
  const json& kind = member(j, "kind");
  if (kind == "logistic") {
    ModelBelief m = LogisticModel{matrix_from_json(member(j, "M"), "model.M")};
    validate_model(m);
    return m;
  }
  if (kind == "mlp") {
    MLPModel mlp;
    const json& layers = member(j, "layers");
    const json& acts = member(j, "activations");
    if (!layers.is_array() || !acts.is_array() || layers.size() != acts.size()) {
      fail(ErrorCode::kParse, "model: layers and activations must be arrays of equal length");
    }
    for (const auto& w : layers) mlp.layers.push_back(matrix_from_json(w, "model.layers"));
    for (const auto& a : acts) {
      if (!a.is_string()) fail(ErrorCode::kParse, "model: activation must be a string");
      mlp.activations.push_back(activation_from_string(a.get<std::string>()));
    }
    ModelBelief m = std::move(mlp);
    validate_model(m);
    return m;
  }
  fail(ErrorCode::kParse, "model: kind must be 'logistic' or 'mlp'");
}

json attacker_to_json(const AttackerParams& a) {
  if (const auto* lin = std::get_if<LinearAttacker>(&a)) {
    return {{"type", "linear"},
            {"M", matrix_to_json(lin->M)},
            {"C", matrix_to_json(lin->C.product())},
            {"c", lin->c},
            {"W", matrix_to_json(lin->W.product())}};
  }
  const auto& box = std::get<BoxAttacker>(a);
  return {{"type", "box"},
          {"model", model_to_json(box.model)},
          {"c1", vector_to_json(box.c1)},
          {"c2", vector_to_json(box.c2)},
          {"target", box.target}};
}

namespace {

PDMatrix pd_member(const json& j, const char* product_key, const char* factor_key) {
  if (j.contains(factor_key)) return pd_from_factor(matrix_from_json(j.at(factor_key), factor_key));
  return PDMatrix::from_product(matrix_from_json(member(j, product_key), product_key));
}

}  // namespace

AttackerParams attacker_from_json(const json& j) {
  const json& type = member(j, "type");
  if (type == "linear") {
    LinearAttacker a{matrix_from_json(member(j, "M"), "M"), pd_member(j, "C", "G"),
                     number(member(j, "c"), "c"), pd_member(j, "W", "V")};
    a.validate();
    return a;
  }
  if (type == "box") {
    const json& t = member(j, "target");
    if (!t.is_number_integer()) fail(ErrorCode::kParse, "target: expected an integer");
    BoxAttacker a{model_from_json(member(j, "model")), vector_from_json(member(j, "c1"), "c1"),
                  vector_from_json(member(j, "c2"), "c2"), t.get<int>()};
    a.validate();
    return a;
  }
  fail(ErrorCode::kParse, "attacker: type must be 'linear' or 'box'");
}

json result_to_json(const InferenceResult& r) {
  json j;
  j["estimate"] = attacker_to_json(r.estimate);
  j["alpha_opt"] = vector_to_json(r.alpha_opt_final);
  j["initial_objective"] = r.initial_objective;
  j["final_objective"] = r.final_objective;
  j["converged"] = r.converged;
  if (r.z.size() > 0) j["z"] = vector_to_json(r.z);
  j["loss_trace"] = r.loss_trace;
  return j;
}

json parse(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string(what) + ": " + e.what());
  }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace advinfer::codec
