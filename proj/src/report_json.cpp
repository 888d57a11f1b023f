#include "report_json_internal.hpp"

namespace guttation {

namespace detail {

namespace {

Json sample_json(const ColorSample& s) {
    return {{"mean", to_json(s.mean)}, {"dispersion", to_json(s.dispersion)}, {"pixelCount", s.pixelCount}};
}

}  // namespace

Json to_json(const Measurement& m) {
    return {{"chemical", std::string(to_string(m.chemical))},
            {"value", m.value},
            {"tStar", m.tStar},
            {"curveDistance", m.curveDistance},
            {"extrapolated", m.extrapolated},
            {"confidence", m.confidence}};
}

Json to_json(const ChipReading& reading) {
    Json per = Json::object();
    for (const auto& [kind, usable] : reading.validity.perChemical) per[std::string(to_string(kind))] = usable;
    Json measurements = Json::array();
    for (const auto& m : reading.measurements) measurements.push_back(to_json(m));
    Json samples = Json::object();
    for (const auto& [kind, s] : reading.circleSamples) samples[std::string(to_string(kind))] = sample_json(s);
    const auto& t = reading.rectification.chipToImage;
    Json assignments = Json::array();
    for (const auto& [id, d] : reading.rectification.assignments)
        assignments.push_back({{"marker", id}, {"centroid", to_json(d.centroid)}, {"score", d.score}});
    return {{"status", std::string(to_string(reading.validity.status))},
            {"perChemical", per},
            {"notes", reading.validity.notes},
            {"measurements", measurements},
            {"circleSamples", samples},
            {"rectification",
             {{"chipToImage", Json::array({Json::array({t.m[0][0], t.m[0][1], t.m[0][2]}),
                                           Json::array({t.m[1][0], t.m[1][1], t.m[1][2]})})},
              {"residualPx", reading.rectification.residualPx},
              {"assignments", assignments}}}};
}

Json to_json(const ReportCard& report) {
    Json items = Json::array();
    for (const auto& i : report.interpretations) {
        items.push_back({{"chemical", std::string(to_string(i.chemical))},
                         {"signal", std::string(to_string(i.signal))},
                         {"headline", i.headline},
                         {"suggestion", i.suggestion},
                         {"rationale", i.rationale},
                         {"notes", i.notes},
                         {"value", i.value ? Json(*i.value) : Json(nullptr)}});
    }
    return {{"overall", std::string(to_string(report.overall))},
            {"overallHeadline", report.overallHeadline},
            {"interpretations", items}};
}

Json to_json(const AnalysisOutcome& outcome) {
    Json error = nullptr;
    if (outcome.errorCode) {
        error = {{"code", std::string(to_string(*outcome.errorCode))},
                 {"stage", outcome.errorStage ? Json(std::string(to_string(*outcome.errorStage))) : Json(nullptr)},
                 {"message", outcome.errorMessage}};
    }
    return {{"reading", outcome.reading ? to_json(*outcome.reading) : Json(nullptr)},
            {"report", to_json(outcome.report)},
            {"error", error}};
}

}  // namespace detail

std::string measurement_json(const Measurement& m, int indent) { return detail::to_json(m).dump(indent); }
std::string reading_json(const ChipReading& reading, int indent) { return detail::to_json(reading).dump(indent); }
std::string report_json(const ReportCard& report, int indent) { return detail::to_json(report).dump(indent); }
std::string outcome_json(const AnalysisOutcome& outcome, int indent) { return detail::to_json(outcome).dump(indent); }

AnalysisOutcome analyze_and_summarize(const Raster& image, const ChipLayout& layout,
                                      const std::vector<ReferenceScale>& scales, const ReadingContext& context,
                                      const AnalysisConfig& config, const RuleTable& rules) {
    AnalysisOutcome out;
    try {
        out.reading = analyze(image, layout, scales, config);
        out.report = summarize(*out.reading, context, rules);
    } catch (const PipelineError& e) {
        out.reading.reset();
        out.errorCode = e.code();
        out.errorStage = e.stage();
        out.errorMessage = e.what();
        out.report = unreadable_report(std::string(to_string(e.code())));
    }
    return out;
}

}  // namespace guttation
