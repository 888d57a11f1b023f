// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.
// Usage: acceptance <path-to-guttation-binary>

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "guttation/calibration.hpp"
#include "guttation/image_analysis.hpp"
#include "guttation/interpretation.hpp"
#include "guttation/raster.hpp"
#include "guttation/relay.hpp"
#include "guttation/report_json.hpp"
#include "guttation/synth.hpp"
#include "httplib.h"
#include "json.hpp"

using namespace guttation;
using Json = nlohmann::json;
using Clock = std::chrono::steady_clock;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
    if (!ok) ++failures;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v, int digits = 3) {
    std::ostringstream s;
    s.precision(digits);
    s << v;
    return s.str();
}

class ScratchDir {
public:
    explicit ScratchDir(const std::string& tag) {
        path_ = fs::temp_directory_path() / ("guttation-accept-" + tag + "-" + std::to_string(::getpid()));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::array<ColorSample, 4> flat_refs(const ReferenceScale& s) {
    std::array<ColorSample, 4> refs;
    for (int k = 0; k < 4; ++k) refs[k] = ColorSample::flat(s.knots[k].color, 100);
    return refs;
}

// ---------------------------------------------------------------------------

void knot_fidelity() {
    const auto start = Clock::now();
    double worst = 0.0;
    for (const auto& s : default_scales()) {
        const auto refs = flat_refs(s);
        for (int k = 0; k < 4; ++k) {
            const auto m = quantify(s, refs, ColorSample::flat(s.knots[k].color));
            worst = std::max(worst, std::abs(m.value - s.knots[k].value) / s.span());
        }
    }
    const double t = seconds_since(start);
    report(worst <= 1e-6 && t < 1.0, "knot fidelity",
           "worst error " + fmt(worst) + " of span over 24 knots in " + fmt(t) + " s");
}

// Minimum distance over t = i / n, i = 0..n. The squared distance is a
// degree-6 polynomial in t, evaluated exactly at every grid point.
double grid_minimum(const CalibrationCurve& curve, const Color& c, int n) {
    std::array<double, 7> q{};
    const double target[3] = {c.r, c.g, c.b};
    for (int ch = 0; ch < 3; ++ch) {
        auto a = curve.coefficients[ch];
        a[0] -= target[ch];
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) q[i + j] += a[i] * a[j];
    }
    double best = q[0];
    const double inv = 1.0 / n;
    for (int i = 1; i <= n; ++i) {
        const double t = i * inv;
        const double v = (((((q[6] * t + q[5]) * t + q[4]) * t + q[3]) * t + q[2]) * t + q[1]) * t + q[0];
        best = std::min(best, v);
    }
    return std::sqrt(std::max(best, 0.0));
}

void projection_oracle() {
    std::mt19937_64 rng(20240501);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto color = [&] { return Color{u(rng), u(rng), u(rng)}; };

    std::vector<std::pair<CalibrationCurve, Color>> pairs;
    while (pairs.size() < 10000) {
        std::array<Color, 4> cs{color(), color(), color(), color()};
        try {
            pairs.emplace_back(fit_curve(cs), color());
        } catch (const Error&) {
            // degenerate draw
        }
    }

    const auto start = Clock::now();
    std::vector<double> refined(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) refined[i] = project(pairs[i].first, pairs[i].second).distance;
    const double tProject = seconds_since(start);

    const auto oracleStart = Clock::now();
    int bad = 0;
    double worstExcess = -1e300;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const double grid = grid_minimum(pairs[i].first, pairs[i].second, 1000000);
        worstExcess = std::max(worstExcess, refined[i] - grid);
        if (refined[i] > grid + 1e-6) ++bad;
    }
    const double tOracle = seconds_since(oracleStart);
    report(bad == 0 && tProject < 60.0, "projection oracle",
           std::to_string(pairs.size() - bad) + "/" + std::to_string(pairs.size()) +
               " within 1e-6 of the 1e6-point grid (worst excess " + fmt(worstExcess) + "), projection " +
               fmt(tProject) + " s, oracle " + fmt(tOracle) + " s");
}

struct RoundTrip {
    int analyzable = 0;
    double worstError = 0.0;  // fraction of span
    double worstCentroidPx = 0.0;
    std::size_t spuriousValues = 0;
    int unreacted = 0;
};

RoundTrip round_trip(const CorpusSpec& spec, int count, std::uint64_t seed, const fs::path& dir) {
    const auto layout = default_layout();
    const auto scales = default_scales();
    const auto manifest = generate_corpus(spec, count, seed, dir, layout, scales);
    RoundTrip out;
    for (const auto& entry : manifest.cases) {
        const Raster image = read_image(dir / entry.imagePath);
        ChipReading reading;
        try {
            reading = analyze(image, layout, scales);
        } catch (const PipelineError&) {
            continue;
        }
        if (reading.validity.status == ReadingStatus::Unreadable) continue;
        ++out.analyzable;

        const auto T = truth_transform(layout, entry.truth);
        for (const auto& [id, detection] : reading.rectification.assignments)
            for (const auto& marker : layout.markers)
                if (marker.id == id)
                    out.worstCentroidPx =
                        std::max(out.worstCentroidPx, norm(detection.centroid - T.apply(centroid(marker.shape))));

        out.spuriousValues += reading.measurements.size();
        const auto report = summarize(reading, {});
        if (reading.validity.status == ReadingStatus::Unreacted || report.overall == Signal::Gray) ++out.unreacted;
        for (const auto& m : reading.measurements) {
            const auto truth = entry.truth.concentrations.at(m.chemical);
            if (!truth) continue;
            const double span = scale_for(scales, m.chemical).span();
            out.worstError = std::max(out.worstError, std::abs(m.value - *truth) / span);
        }
    }
    return out;
}

void noiseless_round_trip() {
    ScratchDir dir("noiseless");
    const auto start = Clock::now();
    const auto r = round_trip(CorpusSpec::noiseless(), 100, 1001, dir.path());
    const double t = seconds_since(start);
    report(r.analyzable == 100 && r.worstError <= 0.01 && t < 30.0, "noiseless round trip",
           std::to_string(r.analyzable) + "/100 analyzable, worst error " + fmt(r.worstError * 100) +
               "% of span, " + fmt(t) + " s");
}

void perturbed_round_trip() {
    ScratchDir dir("perturbed");
    const auto r = round_trip(CorpusSpec{}, 100, 2002, dir.path());
    report(r.analyzable >= 95 && r.worstError <= 0.05 && r.worstCentroidPx <= 2.0, "perturbed round trip",
           std::to_string(r.analyzable) + "/100 analyzable, worst error " + fmt(r.worstError * 100) +
               "% of span, worst marker centroid error " + fmt(r.worstCentroidPx) + " px");
}

void unreacted_detection() {
    ScratchDir dir("dry");
    CorpusSpec spec;
    spec.dryFraction = 1.0;
    const auto r = round_trip(spec, 50, 3003, dir.path());
    report(r.unreacted >= 49 && r.spuriousValues == 0, "unreacted detection",
           std::to_string(r.unreacted) + "/50 Unreacted or Gray, " + std::to_string(r.spuriousValues) +
               " spurious values");
}

void interpretation_conformance() {
    struct Anchor {
        ChemicalKind chemical;
        double value;
        std::optional<double> temperature;
        Signal expected;
    };
    using C = ChemicalKind;
    const std::vector<Anchor> anchors{
        {C::Nitrate, 10.0, {}, Signal::Yellow},   {C::Nitrate, 10.01, {}, Signal::Red},
        {C::Nitrate, 12.0, {}, Signal::Red},      {C::Nitrite, 1.0, {}, Signal::Yellow},
        {C::Nitrite, 1.01, {}, Signal::Red},      {C::Nitrite, 0.5, {}, Signal::Green},
        {C::Nitrite, 0.51, {}, Signal::Yellow},   {C::Nitrite, 0.75, {}, Signal::Yellow},
        {C::Hardness, 100.0, {}, Signal::Green},  {C::Hardness, 100.01, {}, Signal::Red},
        {C::Hardness, 150.0, {}, Signal::Red},    {C::PH, 6.5, {}, Signal::Green},
        {C::PH, 6.0, {}, Signal::Green},          {C::PH, 7.0, {}, Signal::Green},
        {C::Lead, 25.0, {}, Signal::Red},         {C::Lead, 30.0, {}, Signal::Red},
        {C::Lead, 24.99, {}, Signal::Green},      {C::Acephate, 0, {}, Signal::Green},
        {C::Acephate, 1, {}, Signal::Yellow},     {C::Acephate, 2, {}, Signal::Red},
        {C::Acephate, 3, {}, Signal::Red},        {C::Acephate, 2, 20.0, Signal::Yellow},
        {C::Acephate, 3, 22.0, Signal::Yellow},   {C::Acephate, 3, 22.5, Signal::Red},
        {C::Acephate, 1, 15.0, Signal::Yellow},   {C::Acephate, 0, 15.0, Signal::Green},
    };
    int ok = 0;
    std::string firstMiss;
    for (const auto& a : anchors) {
        Measurement m;
        m.chemical = a.chemical;
        m.value = a.value;
        m.confidence = 1.0;
        ReadingContext ctx;
        ctx.ambientTemperatureC = a.temperature;
        const Signal got = interpret(m, ctx).signal;
        if (got == a.expected) {
            ++ok;
        } else if (firstMiss.empty()) {
            firstMiss = "; first miss " + std::string(to_string(a.chemical)) + "=" + fmt(a.value) + " gave " +
                        std::string(to_string(got));
        }
    }
    report(ok == static_cast<int>(anchors.size()), "interpretation conformance",
           std::to_string(ok) + "/" + std::to_string(anchors.size()) + " anchors exact" + firstMiss);
}

// --- end-to-end relay ------------------------------------------------------

int free_port() {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
    socklen_t len = sizeof(addr);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    ::close(fd);
    return ntohs(addr.sin_port);
}

class ServeProcess {
public:
    ServeProcess(std::string binary, fs::path dataDir, int port, std::string token)
        : binary_(std::move(binary)), dataDir_(std::move(dataDir)), port_(port), token_(std::move(token)) {}
    ~ServeProcess() { kill(SIGTERM); }

    bool start() {
        const std::string log = (dataDir_.parent_path() / "serve.log").string();
        pid_ = ::fork();
        if (pid_ == 0) {
            const int fd = ::open(log.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
            if (fd >= 0) {
                ::dup2(fd, STDOUT_FILENO);
                ::dup2(fd, STDERR_FILENO);
                ::close(fd);
            }
            const std::string port = std::to_string(port_);
            const std::string data = dataDir_.string();
            ::execl(binary_.c_str(), binary_.c_str(), "serve", "--host", "127.0.0.1", "--port", port.c_str(),
                    "--data-dir", data.c_str(), "--token", token_.c_str(), "--workers", "2", nullptr);
            ::_exit(127);
        }
        httplib::Client probe("127.0.0.1", port_);
        probe.set_connection_timeout(std::chrono::milliseconds(200));
        const auto deadline = Clock::now() + std::chrono::seconds(15);
        while (Clock::now() < deadline) {
            if (auto res = probe.Get("/healthz"); res && res->status == 200) return true;
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
        }
        return false;
    }

    void kill(int sig) {
        if (pid_ <= 0) return;
        ::kill(pid_, sig);
        int status = 0;
        ::waitpid(pid_, &status, 0);
        pid_ = -1;
    }

private:
    std::string binary_;
    fs::path dataDir_;
    int port_;
    std::string token_;
    pid_t pid_ = -1;
};

void end_to_end_relay(const std::string& binary) {
    ScratchDir dir("relay");
    const fs::path data = dir.path() / "data";
    const fs::path corpusDir = dir.path() / "corpus";
    const auto manifest = generate_corpus(CorpusSpec{}, 10, 4004, corpusDir, default_layout(), default_scales());
    const std::string token = "acceptance-token";
    const int port = free_port();
    std::string problems;
    auto problem = [&](const std::string& p) { problems += (problems.empty() ? "" : "; ") + p; };

    SimulationConfig cfg;
    cfg.serverUrl = "http://127.0.0.1:" + std::to_string(port);
    cfg.authToken = token;
    cfg.cadenceMinutes = 15.0;
    cfg.timeCompression = 900.0;
    cfg.attempts = 6;
    cfg.backoffBase = std::chrono::milliseconds(500);
    cfg.reconcileTimeout = std::chrono::milliseconds(60000);

    // Run 1: fresh server, clean run.
    auto server = std::make_unique<ServeProcess>(binary, data, port, token);
    if (!server->start()) {
        report(false, "end-to-end relay", "server did not come up");
        return;
    }
    const auto start = Clock::now();
    SimulationReport first;
    try {
        first = simulate_device(manifest, corpusDir, cfg);
    } catch (const std::exception& e) {
        problem(std::string("first run: ") + e.what());
    }
    const double tFirst = seconds_since(start);
    if (!first.reconciled || first.processedReadings != 10 || tFirst > 60.0)
        problem("first run reconciled " + std::to_string(first.processedReadings) + "/10 in " + fmt(tFirst) + " s");

    httplib::Client client("127.0.0.1", port);
    client.set_bearer_token_auth(token);
    auto readings_of = [&](const std::string& deviceId) {
        auto res = client.Get("/api/v1/devices/" + deviceId + "/readings?limit=1000");
        return res && res->status == 200 ? Json::parse(res->body)["readings"] : Json::array();
    };
    {
        const Json rows = readings_of(first.deviceId);
        bool ordered = rows.size() == 10;
        for (std::size_t i = 0; ordered && i < rows.size(); ++i)
            ordered = rows[i]["readingId"] == first.uploads[i].readingId &&
                      rows[i]["capturedAt"] == format_rfc3339(first.uploads[i].capturedAt);
        if (!ordered) problem("first run readings not queryable in capture order");
    }

    // Run 2: kill -9 after the fifth accepted upload, restart shortly after.
    std::thread restarter;
    std::atomic<bool> restarted{true};
    SimulationConfig killCfg = cfg;
    killCfg.onUpload = [&](std::size_t index, std::uint64_t, double) {
        if (index != 4) return;
        server->kill(SIGKILL);
        restarted = false;
        restarter = std::thread([&] {
            std::this_thread::sleep_for(std::chrono::milliseconds(1500));
            server = std::make_unique<ServeProcess>(binary, data, port, token);
            restarted = server->start();
        });
    };
    SimulationReport second;
    try {
        second = simulate_device(manifest, corpusDir, killCfg);
    } catch (const std::exception& e) {
        problem(std::string("kill run: ") + e.what());
    }
    if (restarter.joinable()) restarter.join();
    if (!restarted) problem("server did not restart");
    std::size_t retried = 0;
    for (const auto& u : second.uploads) retried += u.attempts > 1;
    {
        const Json rows = readings_of(second.deviceId);
        std::set<std::uint64_t> stored;
        for (const auto& r : rows)
            if (r["status"] == "processed") stored.insert(r["readingId"].get<std::uint64_t>());
        std::size_t lost = 0;
        for (const auto& u : second.uploads) lost += !stored.count(u.readingId);
        if (second.uploads.size() != 10 || lost != 0 || !second.reconciled)
            problem("kill run: " + std::to_string(second.uploads.size()) + " accepted, " + std::to_string(lost) +
                    " lost");
    }

    // Duplicate upload of an already accepted image.
    std::size_t storeSize = 0;
    bool duplicateFree = false;
    if (!first.uploads.empty()) {
        const auto& u = first.uploads[0];
        const std::string bytes = slurp(corpusDir / u.imagePath);
        const httplib::Headers headers{{"X-Captured-At", format_rfc3339(u.capturedAt)}};
        auto res = client.Post("/api/v1/devices/" + first.deviceId + "/images", headers, bytes, "image/png");
        const bool acked = res && res->status == 200 && Json::parse(res->body)["readingId"] == u.readingId;
        const Json rows = readings_of(first.deviceId);
        std::set<std::tuple<std::string, std::string>> keys;
        for (const auto& r : rows) keys.emplace(r["capturedAt"], r["image"]["sha256"]);
        storeSize = rows.size();
        duplicateFree = acked && keys.size() == rows.size() && rows.size() == 10;
        if (!duplicateFree) problem("duplicate upload changed the store");
    }
    server->kill(SIGTERM);

    // The on-disk store agrees after a clean shutdown.
    try {
        RelayConfig rc;
        rc.dataDir = data;
        rc.workers = 0;
        Relay offline(rc);
        if (offline.reading_count() != 20 || offline.pending_count() != 0)
            problem("store holds " + std::to_string(offline.reading_count()) + " readings, " +
                    std::to_string(offline.pending_count()) + " pending");
    } catch (const std::exception& e) {
        problem(std::string("store replay: ") + e.what());
    }

    report(problems.empty(), "end-to-end relay",
           problems.empty() ? "10/10 in capture order in " + fmt(tFirst) + " s; kill -9 mid-run lost 0 of 10 (" +
                                  std::to_string(retried) + " uploads retried); duplicate left " +
                                  std::to_string(storeSize) + " readings"
                            : problems);
}

// --- determinism -----------------------------------------------------------

std::string run_capture(const std::string& command, int& status) {
    std::string out;
    FILE* pipe = ::popen(command.c_str(), "r");
    if (!pipe) {
        status = -1;
        return out;
    }
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof(buf), pipe)) out.append(buf, n);
    status = ::pclose(pipe);
    return out;
}

void exhaustiveness_and_determinism(const std::string& binary) {
    const auto gaps = check_rule_table(default_rule_table(), default_scales());

    ScratchDir dir("determinism");
    std::vector<std::string> manifests;
    std::vector<std::vector<std::string>> readings;
    bool commandsOk = true;
    for (const char* run : {"a", "b"}) {
        const fs::path out = dir.path() / run;
        int status = 0;
        run_capture("'" + binary + "' generate --out '" + out.string() + "' --count 20 --seed 5005", status);
        commandsOk = commandsOk && status == 0;
        manifests.push_back(slurp(out / "manifest.json"));
        std::vector<std::string> jsons;
        for (const auto& entry : parse_manifest(manifests.back()).cases) {
            jsons.push_back(run_capture("'" + binary + "' analyze '" + (out / entry.imagePath).string() +
                                            "' --format json --temperature 24",
                                        status));
            commandsOk = commandsOk && WIFEXITED(status) && WEXITSTATUS(status) <= 1;
        }
        readings.push_back(std::move(jsons));
    }
    const bool sameManifest = !manifests[0].empty() && manifests[0] == manifests[1];
    std::size_t sameReadings = 0;
    for (std::size_t i = 0; i < readings[0].size() && i < readings[1].size(); ++i)
        sameReadings += !readings[0][i].empty() && readings[0][i] == readings[1][i];
    report(gaps.empty() && commandsOk && sameManifest && sameReadings == 20 && readings[0].size() == 20,
           "exhaustiveness and determinism",
           std::to_string(gaps.size()) + " rule-table gaps; manifests " + (sameManifest ? "identical" : "differ") +
               "; " + std::to_string(sameReadings) + "/20 reading JSON identical");
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance <guttation-binary>\n";
        return 2;
    }
    const std::string binary = fs::absolute(argv[1]).string();
    ::signal(SIGPIPE, SIG_IGN);

    const std::vector<std::pair<const char*, std::function<void()>>> checks{
        {"knot fidelity", knot_fidelity},
        {"projection oracle", projection_oracle},
        {"noiseless round trip", noiseless_round_trip},
        {"perturbed round trip", perturbed_round_trip},
        {"unreacted detection", unreacted_detection},
        {"interpretation conformance", interpretation_conformance},
        {"end-to-end relay", [&] { end_to_end_relay(binary); }},
        {"exhaustiveness and determinism", [&] { exhaustiveness_and_determinism(binary); }},
    };
    for (const auto& [name, check] : checks) {
        try {
            check();
        } catch (const std::exception& e) {
            report(false, name, std::string("threw ") + e.what());
        }
    }
    std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
    return failures == 0 ? 0 : 1;
}
