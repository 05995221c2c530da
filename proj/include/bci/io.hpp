#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "bci/classify.hpp"
#include "bci/features.hpp"
#include "bci/validate.hpp"

namespace bci {

inline constexpr int kModelFormatVersion = 1;

nlohmann::json to_json(const FeatureSpec& spec);
FeatureSpec feature_spec_from_json(const nlohmann::json& j);

// Model document: format_version, kind, labels, exemplars, threshold,
// spec_fingerprint (hex) and the fitted feature spec it was trained with.
nlohmann::json model_to_json(const Model& model, const FeatureSpec& spec);
std::pair<Model, FeatureSpec> model_from_json(const nlohmann::json& j);

void save_model(const Model& model, const FeatureSpec& spec, const std::filesystem::path& file);
std::pair<Model, FeatureSpec> load_model(const std::filesystem::path& file);

nlohmann::json to_json(const EvaluationReport& r);
nlohmann::json to_json(const AgreementReport& r);
nlohmann::json to_json(const RobustnessReport& r);

std::string render_confusion(const EvaluationReport& r);

std::string fingerprint_hex(std::uint64_t fp);

}  // namespace bci
