#pragma once

// JSON persistence of trained depth models. Doubles are written in shortest
// round-trip form, so save followed by load is bit-exact.

#include "rhc/learn.hpp"

#include <json.hpp>

#include <string>

namespace rhc {

nlohmann::json model_to_json(const DepthModel& model);
/// Throws std::runtime_error on malformed or unsupported documents.
DepthModel model_from_json(const nlohmann::json& doc);

void save_model(const std::string& path, const DepthModel& model);
DepthModel load_model(const std::string& path);

nlohmann::json plan_to_json(const BudgetPlan& plan);
BudgetPlan plan_from_json(const nlohmann::json& doc);
nlohmann::json lut_to_json(const ErrorLUT& lut);
ErrorLUT lut_from_json(const nlohmann::json& doc);

}  // namespace rhc
