#pragma once

#include "guttation/report_json.hpp"
#include "json_util.hpp"

namespace guttation::detail {

Json to_json(const Measurement& m);
Json to_json(const ChipReading& reading);
Json to_json(const ReportCard& report);
Json to_json(const AnalysisOutcome& outcome);

}  // namespace guttation::detail
