// Copyright 2026 The advinfer Authors
// SPDX-License-Identifier: Apache-2.0

// JSON encoding of attackers, models and inference results. Internal to the
// library; the public surface is the C API.

#pragma once

#include <string>

#include "advinfer/data_io.hpp"
#include "advinfer/inference.hpp"
#include "json.hpp"

namespace advinfer::codec {

using nlohmann::json;

json matrix_to_json(const Matrix& m);  // array of rows
Matrix matrix_from_json(const json& j, const char* what);
json vector_to_json(const Vector& v);
Vector vector_from_json(const json& j, const char* what);

json model_to_json(const ModelBelief& model);
ModelBelief model_from_json(const json& j);

/// Linear: {"type":"linear","M","C","c","W"} with C and W given as PD
/// matrices, or as factors under "G" / "V". Box: {"type":"box","model","c1",
/// "c2","target"}.
json attacker_to_json(const AttackerParams& a);
AttackerParams attacker_from_json(const json& j);

json result_to_json(const InferenceResult& r);

/// Parses text, mapping parse failures to ErrorCode::kParse.
json parse(std::string_view text, const char* what);
std::string dump(const json& j);

/// Typed member access with kParse errors naming the missing key.
const json& member(const json& j, const char* key);

}  // namespace advinfer::codec
