#include "guttation/interpretation.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "guttation/errors.hpp"
#include "json_util.hpp"

namespace guttation {

namespace detail {
std::string_view embedded_rule_table();
}

using detail::Json;

namespace {

std::optional<double> bound_at(const Json& j, const std::string& path, const char* key) {
    const Json& v = detail::member(j, path, key);
    if (v.is_null()) return std::nullopt;
    return detail::number(v, path + "." + key);
}

bool flag_at(const Json& j, const std::string& path, const char* key) {
    const Json& v = detail::member(j, path, key);
    if (!v.is_boolean()) detail::field_error(path + "." + key, "expected a boolean");
    return v.get<bool>();
}

Signal signal_at(const Json& j, const std::string& path, const char* key) {
    const std::string name = detail::text_at(j, path, key);
    auto s = signal_from_string(name);
    if (!s) detail::field_error(path + "." + key, "unknown signal '" + name + "'");
    return *s;
}

ChemicalKind chemical_at(const Json& j, const std::string& path) {
    const std::string name = detail::text_at(j, path, "chemical");
    auto kind = chemical_from_string(name);
    if (!kind) detail::field_error(path + ".chemical", "unknown chemical '" + name + "'");
    return *kind;
}

std::string overall_headline(Signal s) {
    switch (s) {
        case Signal::Green: return "overall.healthy";
        case Signal::Yellow: return "overall.attention";
        case Signal::Red: return "overall.action_required";
        case Signal::Gray: return "overall.no_guttation_collected";
    }
    return "";
}

}  // namespace

std::string_view to_string(Signal signal) {
    switch (signal) {
        case Signal::Green: return "Green";
        case Signal::Yellow: return "Yellow";
        case Signal::Red: return "Red";
        case Signal::Gray: return "Gray";
    }
    return "Gray";
}

std::optional<Signal> signal_from_string(std::string_view name) {
    for (auto s : {Signal::Green, Signal::Yellow, Signal::Red, Signal::Gray})
        if (to_string(s) == name) return s;
    return std::nullopt;
}

int severity(Signal signal) {
    switch (signal) {
        case Signal::Gray: return -1;
        case Signal::Green: return 0;
        case Signal::Yellow: return 1;
        case Signal::Red: return 2;
    }
    return -1;
}

bool Rule::matches(double value) const {
    if (min && (minInclusive ? value < *min : value <= *min)) return false;
    if (max && (maxInclusive ? value > *max : value >= *max)) return false;
    return true;
}

RuleTable load_rule_table(std::string_view jsonText) {
    const Json doc = detail::parse_document(jsonText, "rule table");
    RuleTable table;
    table.version = detail::text_at(doc, "$", "version");
    if (doc.contains("species")) table.species = detail::text_at(doc, "$", "species");
    const Json& rules = detail::member(doc, "$", "rules");
    if (!rules.is_array()) detail::field_error("rules", "expected an array");
    for (std::size_t i = 0; i < rules.size(); ++i) {
        const std::string path = "rules[" + std::to_string(i) + "]";
        const Json& r = rules[i];
        table.rules.push_back({chemical_at(r, path), bound_at(r, path, "min"), bound_at(r, path, "max"),
                               flag_at(r, path, "minInclusive"), flag_at(r, path, "maxInclusive"),
                               signal_at(r, path, "signal"), detail::text_at(r, path, "headline"),
                               detail::text_at(r, path, "suggestion"),
                               r.contains("rationale") ? detail::text_at(r, path, "rationale") : ""});
        if (table.rules.back().signal == Signal::Gray)
            detail::field_error(path + ".signal", "Gray is reserved for unusable readings");
    }
    if (doc.contains("modifiers")) {
        const Json& mods = doc["modifiers"];
        for (std::size_t i = 0; i < mods.size(); ++i) {
            const std::string path = "modifiers[" + std::to_string(i) + "]";
            const std::string kind = detail::text_at(mods[i], path, "kind");
            if (kind != "lowTemperatureDowngrade") detail::field_error(path + ".kind", "unknown modifier '" + kind + "'");
            table.modifiers.push_back({chemical_at(mods[i], path), detail::number_at(mods[i], path, "maxTemperatureC"),
                                       detail::number_at(mods[i], path, "minValueExclusive"),
                                       signal_at(mods[i], path, "downgradeTo"), detail::text_at(mods[i], path, "note")});
        }
    }
    return table;
}

std::string serialize_rule_table(const RuleTable& table) {
    auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
    Json rules = Json::array();
    for (const auto& r : table.rules)
        rules.push_back({{"chemical", std::string(to_string(r.chemical))},
                         {"min", opt(r.min)},
                         {"max", opt(r.max)},
                         {"minInclusive", r.minInclusive},
                         {"maxInclusive", r.maxInclusive},
                         {"signal", std::string(to_string(r.signal))},
                         {"headline", r.headline},
                         {"suggestion", r.suggestion},
                         {"rationale", r.rationale}});
    Json mods = Json::array();
    for (const auto& m : table.modifiers)
        mods.push_back({{"chemical", std::string(to_string(m.chemical))},
                        {"kind", "lowTemperatureDowngrade"},
                        {"maxTemperatureC", m.maxTemperatureC},
                        {"minValueExclusive", m.minValueExclusive},
                        {"downgradeTo", std::string(to_string(m.downgradeTo))},
                        {"note", m.note}});
    return Json{{"format", "guttation-rules/1"},
                {"version", table.version},
                {"species", table.species},
                {"rules", rules},
                {"modifiers", mods}}
        .dump(2);
}

std::string_view default_rule_table_text() { return detail::embedded_rule_table(); }

const RuleTable& default_rule_table() {
    static const RuleTable table = load_rule_table(default_rule_table_text());
    return table;
}

std::vector<std::string> check_rule_table(const RuleTable& table, const std::vector<ReferenceScale>& scales) {
    std::vector<std::string> problems;
    for (auto kind : kAllChemicals) {
        const ReferenceScale& scale = scale_for(scales, kind);
        std::set<double> probes;
        const double lo = scale.knots.front().value, hi = scale.knots.back().value;
        const double pad = 0.5 * scale.span();
        constexpr int kSteps = 20000;
        for (int i = 0; i <= kSteps; ++i) probes.insert(lo - pad + (hi - lo + 2.0 * pad) * i / kSteps);
        for (const auto& r : table.rules) {
            if (r.chemical != kind) continue;
            for (const auto& b : {r.min, r.max})
                if (b) probes.insert({*b, std::nextafter(*b, -INFINITY), std::nextafter(*b, INFINITY)});
        }
        for (double v : probes) {
            int hits = 0;
            for (const auto& r : table.rules) hits += (r.chemical == kind && r.matches(v)) ? 1 : 0;
            if (hits != 1) {
                problems.push_back(std::string(to_string(kind)) + ": value " + std::to_string(v) + " matches " +
                                   std::to_string(hits) + " rules");
                break;
            }
        }
    }
    return problems;
}

Interpretation interpret(const Measurement& measurement, const ReadingContext& context, const RuleTable& table) {
    if (context.ambientTemperatureC &&
        (*context.ambientTemperatureC < -40.0 || *context.ambientTemperatureC > 60.0 ||
         !std::isfinite(*context.ambientTemperatureC)))
        throw Error(ErrorCode::InvalidArgument, "ambient temperature outside [-40, 60] C");

    std::optional<std::size_t> fired;
    for (std::size_t i = 0; i < table.rules.size(); ++i) {
        if (table.rules[i].chemical == measurement.chemical && table.rules[i].matches(measurement.value)) {
            fired = i;
            break;
        }
    }
    if (!fired)
        throw Error(ErrorCode::UnknownChemical,
                    "no rule covers " + std::string(to_string(measurement.chemical)) + " = " +
                        std::to_string(measurement.value));

    const Rule& rule = table.rules[*fired];
    Interpretation out;
    out.chemical = measurement.chemical;
    out.signal = rule.signal;
    out.headline = rule.headline;
    out.suggestion = rule.suggestion;
    out.rationale = rule.rationale;
    out.value = measurement.value;
    out.ruleIndex = fired;

    if (context.plantSpecies != table.species)
        out.notes.push_back("species_fallback:" + table.species);
    if (measurement.extrapolated) out.notes.push_back("extrapolated");

    for (const auto& mod : table.modifiers) {
        if (mod.chemical != measurement.chemical || !context.ambientTemperatureC) continue;
        if (*context.ambientTemperatureC > mod.maxTemperatureC || !(measurement.value > mod.minValueExclusive))
            continue;
        if (severity(out.signal) > severity(mod.downgradeTo)) out.signal = mod.downgradeTo;
        out.notes.push_back(mod.note);
    }
    return out;
}

Interpretation unusable(ChemicalKind chemical, std::string reason) {
    Interpretation out;
    out.chemical = chemical;
    out.signal = Signal::Gray;
    out.headline = "no_data";
    out.suggestion = "none";
    out.rationale = std::move(reason);
    return out;
}

ReportCard summarize(const ChipReading& reading, const ReadingContext& context, const RuleTable& table) {
    ReportCard card;
    for (auto kind : kAllChemicals) {
        const Measurement* m = reading.measurement(kind);
        if (!m) {
            std::string reason = std::string("status:") + std::string(to_string(reading.validity.status));
            const std::string suffix = ":" + std::string(to_string(kind));
            for (const auto& note : reading.validity.notes)
                if (note.size() > suffix.size() && note.compare(note.size() - suffix.size(), suffix.size(), suffix) == 0)
                    reason = note;
            card.interpretations.push_back(unusable(kind, reason));
        } else {
            card.interpretations.push_back(interpret(*m, context, table));
        }
    }
    Signal worst = Signal::Gray;
    for (const auto& i : card.interpretations)
        if (severity(i.signal) > severity(worst)) worst = i.signal;
    card.overall = worst;
    card.overallHeadline = (worst == Signal::Gray && reading.validity.status == ReadingStatus::Unreadable)
                               ? "overall.unreadable"
                               : overall_headline(worst);
    return card;
}

ReportCard unreadable_report(const std::string& reason) {
    ReportCard card;
    for (auto kind : kAllChemicals) card.interpretations.push_back(unusable(kind, reason));
    card.overall = Signal::Gray;
    card.overallHeadline = "overall.unreadable";
    return card;
}

}  // namespace guttation
