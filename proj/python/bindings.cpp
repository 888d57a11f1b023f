// Thin pybind11 layer. Structured results cross the boundary as JSON text,
// which the pure-Python wrapper decodes; that keeps one schema for the CLI,
// the relay and Python.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "guttation/calibration.hpp"
#include "guttation/chip_model.hpp"
#include "guttation/errors.hpp"
#include "guttation/interpretation.hpp"
#include "guttation/raster.hpp"
#include "guttation/relay.hpp"
#include "guttation/report_json.hpp"
#include "guttation/synth.hpp"

namespace py = pybind11;
using namespace guttation;

namespace {

using Rgb = std::array<double, 3>;

Color to_color(const Rgb& c) { return {c[0], c[1], c[2]}; }
Rgb from_color(const Color& c) { return {c.r, c.g, c.b}; }

std::array<Color, 4> to_colors(const std::array<Rgb, 4>& cs) {
    return {to_color(cs[0]), to_color(cs[1]), to_color(cs[2]), to_color(cs[3])};
}

ChemicalKind chemical(const std::string& name) {
    auto kind = chemical_from_string(name);
    if (!kind) throw Error(ErrorCode::UnknownChemical, "unknown chemical '" + name + "'");
    return *kind;
}

ChipLayout layout_or_default(const std::optional<std::string>& text) {
    return text ? load_layout(*text) : default_layout();
}

std::vector<ReferenceScale> scales_or_default(const std::optional<std::string>& text) {
    return text ? load_scales(*text) : default_scales();
}

std::string analyze_raster(const Raster& image, const std::optional<std::string>& layout,
                           const std::optional<std::string>& scales, std::optional<double> temperature) {
    ReadingContext context;
    context.ambientTemperatureC = temperature;
    const auto outcome = analyze_and_summarize(image, layout_or_default(layout), scales_or_default(scales), context);
    return outcome_json(outcome);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Native core of the guttation chip reader";

    static py::exception<Error> error(m, "GuttationError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::tuple args = py::make_tuple(std::string(to_string(e.code())), std::string(e.what()));
            PyErr_SetObject(error.ptr(), args.ptr());
        }
    });

    m.attr("GENERATOR_VERSION") = kGeneratorVersion;
    m.attr("CHEMICALS") = [] {
        py::list names;
        for (auto k : kAllChemicals) names.append(std::string(to_string(k)));
        return names;
    }();

    m.def("default_config_text", [] { return std::string(default_config_text()); });
    m.def("default_rules_text", [] { return std::string(default_rule_table_text()); });

    m.def("normalize_layout", [](const std::string& text) { return serialize_layout(load_layout(text)); },
          py::arg("text"), "Parse and validate a layout; returns canonical JSON.");
    m.def("normalize_scales", [](const std::string& text) { return serialize_scales(load_scales(text)); },
          py::arg("text"));

    m.def(
        "analyze_file",
        [](const std::filesystem::path& path, std::optional<std::string> layout, std::optional<std::string> scales,
           std::optional<double> temperature) {
            const Raster image = read_image(path);
            py::gil_scoped_release release;
            return analyze_raster(image, layout, scales, temperature);
        },
        py::arg("path"), py::arg("layout") = py::none(), py::arg("scales") = py::none(),
        py::arg("temperature") = py::none());

    m.def(
        "analyze_bytes",
        [](const py::bytes& data, std::optional<std::string> layout, std::optional<std::string> scales,
           std::optional<double> temperature) {
            const std::string raw = data;
            const Raster image =
                decode_image({reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()});
            py::gil_scoped_release release;
            return analyze_raster(image, layout, scales, temperature);
        },
        py::arg("data"), py::arg("layout") = py::none(), py::arg("scales") = py::none(),
        py::arg("temperature") = py::none());

    m.def(
        "curve_point",
        [](const std::array<Rgb, 4>& refs, double t) { return from_color(fit_curve(to_colors(refs)).at(t)); },
        py::arg("references"), py::arg("t"));

    m.def(
        "project",
        [](const std::array<Rgb, 4>& refs, const Rgb& reactant) {
            const auto p = project(fit_curve(to_colors(refs)), to_color(reactant));
            return py::make_tuple(p.tStar, p.distance);
        },
        py::arg("references"), py::arg("reactant"), "Closest curve parameter and RGB distance.");

    m.def(
        "quantify",
        [](const std::string& name, const Rgb& reactant, std::optional<std::array<Rgb, 4>> refs) {
            const ReferenceScale& scale = scale_for(default_scales(), chemical(name));
            std::array<ColorSample, 4> samples;
            for (int k = 0; k < 4; ++k)
                samples[k] = ColorSample::flat(refs ? to_color((*refs)[k]) : scale.knots[k].color, 100);
            return measurement_json(quantify(scale, samples, ColorSample::flat(to_color(reactant), 100)));
        },
        py::arg("chemical"), py::arg("reactant"), py::arg("references") = py::none(),
        "Quantify one reactant colour against a default scale (optionally with observed references).");

    m.def(
        "interpret",
        [](const std::string& name, double value, std::optional<double> temperature, const std::string& species) {
            Measurement meas;
            meas.chemical = chemical(name);
            meas.value = value;
            ReadingContext context;
            context.ambientTemperatureC = temperature;
            context.plantSpecies = species;
            ReportCard card;
            card.interpretations.push_back(interpret(meas, context));
            return report_json(card);
        },
        py::arg("chemical"), py::arg("value"), py::arg("temperature") = py::none(), py::arg("species") = "tomato");

    m.def(
        "check_rule_table",
        [](std::optional<std::string> rules) {
            return check_rule_table(rules ? load_rule_table(*rules) : default_rule_table(), default_scales());
        },
        py::arg("rules") = py::none(), "Values matched by zero or several rules; empty when exhaustive.");

    m.def(
        "generate_corpus",
        [](const std::filesystem::path& outDir, int count, std::uint64_t seed, bool noiseless,
           std::optional<std::string> spec) {
            CorpusSpec s = noiseless ? CorpusSpec::noiseless() : CorpusSpec{};
            if (spec) s = parse_corpus_spec(*spec);
            py::gil_scoped_release release;
            return serialize_manifest(generate_corpus(s, count, seed, outDir, default_layout(), default_scales()));
        },
        py::arg("out_dir"), py::arg("count"), py::arg("seed") = 0, py::arg("noiseless") = false,
        py::arg("spec") = py::none());

    m.def("parse_rfc3339", &parse_rfc3339, py::arg("text"), "Milliseconds since the epoch.");
    m.def("format_rfc3339", &format_rfc3339, py::arg("ms"));
}
