#pragma once

// Turning measurements into green/yellow/red signals with suggestion codes.
// Codes are resolved to display text by clients.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "guttation/calibration.hpp"
#include "guttation/chip_model.hpp"
#include "guttation/image_analysis.hpp"

namespace guttation {

enum class Signal { Green, Yellow, Red, Gray };

std::string_view to_string(Signal signal);
std::optional<Signal> signal_from_string(std::string_view name);
/// Green < Yellow < Red; Gray ranks below Green.
int severity(Signal signal);

struct Rule {
    ChemicalKind chemical = ChemicalKind::Nitrate;
    std::optional<double> min;  // nullopt = unbounded
    std::optional<double> max;
    bool minInclusive = true;
    bool maxInclusive = false;
    Signal signal = Signal::Green;
    std::string headline;
    std::string suggestion;
    std::string rationale;

    bool matches(double value) const;
};

/// Lowers the signal of non-zero readings taken at or below a temperature.
struct LowTemperatureDowngrade {
    ChemicalKind chemical = ChemicalKind::Acephate;
    double maxTemperatureC = 22.0;
    double minValueExclusive = 0.5;
    Signal downgradeTo = Signal::Yellow;
    std::string note;
};

struct RuleTable {
    std::string version;
    std::string species = "tomato";
    std::vector<Rule> rules;
    std::vector<LowTemperatureDowngrade> modifiers;
};

struct ReadingContext {
    std::optional<double> ambientTemperatureC;
    std::string plantSpecies = "tomato";
};

struct Interpretation {
    ChemicalKind chemical = ChemicalKind::Nitrate;
    Signal signal = Signal::Gray;
    std::string headline;
    std::string suggestion;
    std::string rationale;
    std::vector<std::string> notes;
    std::optional<double> value;
    /// Index of the rule that fired; nullopt for Gray.
    std::optional<std::size_t> ruleIndex;
};

struct ReportCard {
    std::vector<Interpretation> interpretations;  // kAllChemicals order
    Signal overall = Signal::Gray;
    std::string overallHeadline;
};

RuleTable load_rule_table(std::string_view jsonText);
std::string serialize_rule_table(const RuleTable& table);
std::string_view default_rule_table_text();
const RuleTable& default_rule_table();

/// Problems found by sweeping every chemical's value range (plus the
/// boundaries of each rule): values matched by zero or several rules.
std::vector<std::string> check_rule_table(const RuleTable& table, const std::vector<ReferenceScale>& scales);

/// Throws Error(UnknownChemical) when no rule covers the measurement and
/// Error(InvalidArgument) for an out-of-range temperature.
Interpretation interpret(const Measurement& measurement, const ReadingContext& context,
                         const RuleTable& table = default_rule_table());

Interpretation unusable(ChemicalKind chemical, std::string reason);

ReportCard summarize(const ChipReading& reading, const ReadingContext& context,
                     const RuleTable& table = default_rule_table());

/// Report for an image the pipeline could not read at all.
ReportCard unreadable_report(const std::string& reason);

}  // namespace guttation
