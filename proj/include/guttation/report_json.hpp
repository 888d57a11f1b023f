#pragma once

// Machine-readable output shared by the CLI, the relay and the bindings.
// Field names are stable; see README for the schema.

#include <optional>
#include <string>

#include "guttation/errors.hpp"
#include "guttation/image_analysis.hpp"
#include "guttation/interpretation.hpp"

namespace guttation {

std::string measurement_json(const Measurement& m, int indent = -1);
std::string reading_json(const ChipReading& reading, int indent = -1);
std::string report_json(const ReportCard& report, int indent = -1);

/// {"reading": ..., "report": ..., "error": ...}. A failed analysis has a
/// null reading and an error object naming code and stage.
struct AnalysisOutcome {
    std::optional<ChipReading> reading;
    ReportCard report;
    std::optional<ErrorCode> errorCode;
    std::optional<Stage> errorStage;
    std::string errorMessage;
};

AnalysisOutcome analyze_and_summarize(const Raster& image, const ChipLayout& layout,
                                      const std::vector<ReferenceScale>& scales, const ReadingContext& context,
                                      const AnalysisConfig& config = {},
                                      const RuleTable& rules = default_rule_table());
std::string outcome_json(const AnalysisOutcome& outcome, int indent = -1);

}  // namespace guttation
