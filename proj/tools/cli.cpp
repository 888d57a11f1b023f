#include "cli.hpp"

#include <pthread.h>
#include <signal.h>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "guttation/chip_model.hpp"
#include "guttation/errors.hpp"
#include "guttation/raster.hpp"
#include "guttation/relay.hpp"
#include "guttation/report_json.hpp"
#include "guttation/synth.hpp"
#include "json.hpp"

namespace guttation::cli {

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

ChipLayout layout_from(const std::string& path) {
    return path.empty() ? default_layout() : load_layout(read_text(path));
}

std::vector<ReferenceScale> scales_from(const std::string& path) {
    return path.empty() ? default_scales() : load_scales(read_text(path));
}

std::string env_or(const char* name, std::string fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

void print_table(std::ostream& out, const AnalysisOutcome& outcome, const std::vector<ReferenceScale>& scales) {
    if (outcome.reading)
        out << "status: " << to_string(outcome.reading->validity.status) << '\n';
    else
        out << "status: failed (" << to_string(*outcome.errorCode) << ", stage "
            << (outcome.errorStage ? to_string(*outcome.errorStage) : std::string_view("unknown")) << ")\n";
    out << std::left << std::setw(10) << "chemical" << std::setw(16) << "value" << std::setw(8) << "signal"
        << "headline\n";
    for (const auto& i : outcome.report.interpretations) {
        std::ostringstream value;
        if (i.value)
            value << std::setprecision(4) << *i.value << ' ' << scale_for(scales, i.chemical).unit;
        else
            value << "no data";
        out << std::setw(10) << to_string(i.chemical) << std::setw(16) << value.str() << std::setw(8)
            << to_string(i.signal) << i.headline << '\n';
    }
    out << "overall: " << to_string(outcome.report.overall) << " (" << outcome.report.overallHeadline << ")\n";
}

struct AnalyzeArgs {
    std::string image, layout, scales, format = "json";
    std::optional<double> temperature;
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out, std::ostream& err) {
    ChipLayout layout;
    std::vector<ReferenceScale> scales;
    Raster image;
    try {
        layout = layout_from(a.layout);
        scales = scales_from(a.scales);
        image = read_image(a.image);
    } catch (const Error& e) {
        err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
        return kBadInput;
    }
    ReadingContext context;
    context.ambientTemperatureC = a.temperature;
    AnalysisOutcome outcome;
    try {
        outcome = analyze_and_summarize(image, layout, scales, context);
    } catch (const Error& e) {
        err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
        return kBadInput;
    }
    if (a.format == "table")
        print_table(out, outcome, scales);
    else
        out << outcome_json(outcome, 2) << '\n';
    if (outcome.errorCode) {
        err << "analysis failed: " << outcome.errorMessage << '\n';
        return kAnalysisFailed;
    }
    return outcome.reading->validity.status == ReadingStatus::Unreadable ? kAnalysisFailed : kOk;
}

struct GenerateArgs {
    std::string spec, out, layout, scales;
    int count = 100;
    std::uint64_t seed = 0;
    bool noiseless = false;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out, std::ostream& err) {
    try {
        if (a.count < 1) throw Error(ErrorCode::InvalidArgument, "--count must be at least 1");
        CorpusSpec spec = a.noiseless ? CorpusSpec::noiseless() : CorpusSpec{};
        if (!a.spec.empty()) spec = parse_corpus_spec(read_text(a.spec));
        const ChipLayout layout = layout_from(a.layout);
        const auto scales = scales_from(a.scales);
        const auto manifest = generate_corpus(spec, a.count, a.seed, a.out, layout, scales);
        out << "wrote " << manifest.cases.size() << " images and manifest.json to " << a.out << '\n';
        return kOk;
    } catch (const Error& e) {
        err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
        return kBadInput;
    }
}

struct ServeArgs {
    std::string config, host, dataDir, token;
    std::optional<int> port, workers;
};

// Later sources win: environment, then flags, then the config file.
int cmd_serve(const ServeArgs& a, std::ostream& out, std::ostream& err) {
    RelayConfig rc;
    std::string host = "0.0.0.0", token = env_or("AUTH_TOKEN", "");
    int port = 8080;
    try {
        port = std::stoi(env_or("PORT", "8080"));
        rc.dataDir = env_or("DATA_DIR", "relay-data");
        rc.workers = std::stoi(env_or("WORKERS", "1"));
    } catch (const std::exception&) {
        err << "error: PORT and WORKERS must be integers\n";
        return kBadInput;
    }
    if (!a.host.empty()) host = a.host;
    if (a.port) port = *a.port;
    if (!a.dataDir.empty()) rc.dataDir = a.dataDir;
    if (!a.token.empty()) token = a.token;
    if (a.workers) rc.workers = *a.workers;

    try {
        if (!a.config.empty()) {
            const fs::path base = fs::path(a.config).parent_path();
            auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
            const Json c = Json::parse(read_text(a.config));
            host = c.value("host", host);
            port = c.value("port", port);
            token = c.value("authToken", token);
            rc.workers = c.value("workers", rc.workers);
            if (c.contains("dataDir")) rc.dataDir = resolve(c.at("dataDir").get<std::string>());
            if (c.contains("layouts"))
                for (const auto& [id, path] : c.at("layouts").items())
                    rc.layouts[id] = load_layout(read_text(resolve(path.get<std::string>())));
            if (c.contains("scales"))
                for (const auto& [id, path] : c.at("scales").items())
                    rc.scales[id] = load_scales(read_text(resolve(path.get<std::string>())));
            if (c.contains("rules")) rc.rules = load_rule_table(read_text(resolve(c.at("rules").get<std::string>())));
        }
    } catch (const std::exception& e) {
        err << "error: bad config: " << e.what() << '\n';
        return kBadInput;
    }
    if (rc.workers < 0) {
        err << "error: workers must be non-negative\n";
        return kBadInput;
    }

    // Route termination signals to a dedicated thread; every thread started
    // below inherits the blocked mask.
    sigset_t signals, previous;
    sigemptyset(&signals);
    sigaddset(&signals, SIGTERM);
    sigaddset(&signals, SIGINT);
    pthread_sigmask(SIG_BLOCK, &signals, &previous);
    struct MaskGuard {
        sigset_t* prev;
        ~MaskGuard() { pthread_sigmask(SIG_SETMASK, prev, nullptr); }
    } guard{&previous};

    try {
        Relay relay(rc);
        RelayServer server(relay, token);
        if (!server.bind(host, port)) {
            err << "error: cannot bind " << host << ':' << port << '\n';
            return kServiceError;
        }
        out << "listening on http://" << host << ':' << server.port() << " data=" << rc.dataDir.string()
            << " pending=" << relay.pending_count() << std::endl;

        std::thread waiter([&] {
            int sig = 0;
            sigwait(&signals, &sig);
            server.stop();
        });
        server.serve();
        pthread_kill(waiter.native_handle(), SIGTERM);  // no-op if it already fired
        waiter.join();
        relay.shutdown();
        out << "stopped; pending=" << relay.pending_count() << std::endl;
        return kOk;
    } catch (const Error& e) {
        err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
        return kServiceError;
    }
}

struct SimulateArgs {
    std::string manifest, server, token, device;
    double cadence = 15.0, compression = 1.0;
    std::string format = "table";
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
    CorpusManifest manifest;
    try {
        manifest = parse_manifest(read_text(a.manifest));
    } catch (const Error& e) {
        err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
        return kBadInput;
    }
    SimulationConfig sc;
    sc.serverUrl = a.server.empty() ? env_or("GUTTATION_SERVER", "http://127.0.0.1:8080") : a.server;
    sc.authToken = a.token.empty() ? env_or("AUTH_TOKEN", "") : a.token;
    sc.deviceId = a.device;
    sc.cadenceMinutes = a.cadence;
    sc.timeCompression = a.compression;
    if (a.format == "table")
        sc.onUpload = [&out](std::size_t i, std::uint64_t id, double ms) {
            out << "upload " << i << " -> reading " << id << " (" << std::fixed << std::setprecision(1) << ms
                << " ms)" << std::endl;
        };
    try {
        const auto report = simulate_device(manifest, fs::path(a.manifest).parent_path(), sc);
        if (a.format == "json") {
            Json uploads = Json::array();
            for (const auto& u : report.uploads)
                uploads.push_back({{"image", u.imagePath},
                                   {"capturedAt", format_rfc3339(u.capturedAt)},
                                   {"readingId", u.readingId},
                                   {"attempts", u.attempts},
                                   {"latencyMs", u.latencyMs}});
            out << Json{{"deviceId", report.deviceId},
                        {"uploads", uploads},
                        {"storedReadings", report.storedReadings},
                        {"processedReadings", report.processedReadings},
                        {"reconciled", report.reconciled}}
                       .dump(2)
                << '\n';
        } else {
            out << "device " << report.deviceId << ": " << report.uploads.size() << " uploads, "
                << report.storedReadings << " stored, " << report.processedReadings << " processed, "
                << (report.reconciled ? "reconciled" : "NOT reconciled") << '\n';
        }
        return report.reconciled ? kOk : kServiceError;
    } catch (const Error& e) {
        err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
        return e.code() == ErrorCode::InvalidArgument ? kBadInput : kServiceError;
    }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Guttation chip reader: analysis, synthetic corpora and the upload relay", "guttation"};
    app.require_subcommand(1);

    AnalyzeArgs analyze;
    auto* an = app.add_subcommand("analyze", "Read a chip photograph and print measurements and signals");
    an->add_option("image", analyze.image, "PNG or JPEG photograph")->required();
    an->add_option("--layout", analyze.layout, "Chip configuration with a layout section");
    an->add_option("--scales", analyze.scales, "Chip configuration with a scales section");
    an->add_option("--format", analyze.format, "Output format")->check(CLI::IsMember({"json", "table"}));
    an->add_option("--temperature", analyze.temperature, "Ambient temperature in degrees C");

    GenerateArgs generate;
    auto* gen = app.add_subcommand("generate", "Render a synthetic corpus with a ground-truth manifest");
    gen->add_option("--spec", generate.spec, "Corpus spec JSON");
    gen->add_option("--out", generate.out, "Output directory")->required();
    gen->add_option("--count", generate.count, "Number of images");
    gen->add_option("--seed", generate.seed, "Random seed");
    gen->add_option("--layout", generate.layout, "Chip configuration with a layout section");
    gen->add_option("--scales", generate.scales, "Chip configuration with a scales section");
    gen->add_flag("--noiseless", generate.noiseless, "No warp, noise or lighting ramp (ignored with --spec)");

    ServeArgs serve;
    auto* sv = app.add_subcommand("serve", "Run the upload relay");
    sv->add_option("--config", serve.config, "Relay config JSON (overrides flags and environment)");
    sv->add_option("--host", serve.host, "Bind address");
    sv->add_option("--port", serve.port, "TCP port (env PORT)");
    sv->add_option("--data-dir", serve.dataDir, "Store directory (env DATA_DIR)");
    sv->add_option("--token", serve.token, "Bearer token (env AUTH_TOKEN)");
    sv->add_option("--workers", serve.workers, "Analysis threads (env WORKERS)");

    SimulateArgs simulate;
    auto* sim = app.add_subcommand("simulate", "Replay a corpus as a camera uploading on a cadence");
    sim->add_option("manifest", simulate.manifest, "Corpus manifest.json")->required();
    sim->add_option("--server", simulate.server, "Relay base URL (env GUTTATION_SERVER)");
    sim->add_option("--token", simulate.token, "Bearer token (env AUTH_TOKEN)");
    sim->add_option("--device", simulate.device, "Existing device id; registers a new one when absent");
    sim->add_option("--cadence-min", simulate.cadence, "Capture interval in minutes");
    sim->add_option("--compression", simulate.compression, "Time compression factor");
    sim->add_option("--format", simulate.format, "Output format")->check(CLI::IsMember({"json", "table"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kBadInput;
    }

    if (*an) return cmd_analyze(analyze, out, err);
    if (*gen) return cmd_generate(generate, out, err);
    if (*sv) return cmd_serve(serve, out, err);
    return cmd_simulate(simulate, out, err);
}

}  // namespace guttation::cli
