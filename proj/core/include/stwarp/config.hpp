#pragma once

#include "stwarp/fit.hpp"
#include "stwarp/simulation.hpp"

#include <filesystem>
#include <string>

namespace stwarp {

/// Structured text (JSON with comments) for configs and results. Parse
/// failures throw ConfigError with the source name and line; unknown or
/// mistyped keys throw ConfigError naming the key path.

struct RunConfig {
  ModelSpec spec;
  FitConfig fit;
};

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

NonstationaryCovariance parse_model(const std::string& text, const std::string& source = "model");
std::string serialize_model(const NonstationaryCovariance& model);

RunConfig parse_run_config(const std::string& text, const std::string& source = "config");
RunConfig load_run_config(const std::filesystem::path& path);
std::string serialize_run_config(const RunConfig& cfg);

StudyConfig parse_study_config(const std::string& text, const std::string& source = "config");
StudyConfig load_study_config(const std::filesystem::path& path);
std::string serialize_study_config(const StudyConfig& cfg);

std::string serialize_fit_result(const FitResult& fit);
FitResult parse_fit_result(const std::string& text, const std::string& source = "fit");
FitResult load_fit_result(const std::filesystem::path& path);

std::string serialize_scores(const RepetitionScores& scores, std::span<const StudyRow> rows);
RepetitionScores parse_scores(const std::string& text, const std::string& source = "scores");

}  // namespace stwarp
