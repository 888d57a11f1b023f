#include <chrono>
#include <set>
#include <thread>

#include "guttation/errors.hpp"
#include "guttation/raster.hpp"
#include "guttation/relay.hpp"
#include "httplib.h"
#include "json_util.hpp"

namespace guttation {

using detail::Json;
using Clock = std::chrono::steady_clock;

namespace {

httplib::Headers auth_headers(const SimulationConfig& cfg) {
    httplib::Headers h;
    if (!cfg.authToken.empty()) h.emplace("Authorization", "Bearer " + cfg.authToken);
    return h;
}

std::string error_text(const httplib::Result& res) {
    try {
        const Json body = Json::parse(res->body);
        return body.at("error").at("code").get<std::string>() + ": " + body.at("error").at("message").get<std::string>();
    } catch (const std::exception&) {
        return "HTTP " + std::to_string(res->status);
    }
}

// Non-retryable client errors surface immediately with a matching code.
[[noreturn]] void reject(const httplib::Result& res) {
    if (res->status == 401 || res->status == 403) throw Error(ErrorCode::TransportError, error_text(res));
    if (res->status == 404) throw Error(ErrorCode::UnknownDevice, error_text(res));
    throw Error(ErrorCode::InvalidArgument, error_text(res));
}

// Sends with up to `attempts` tries; transport failures and 5xx responses
// back off base, 2*base, 4*base, ...
template <typename Send>
httplib::Result with_retry(const SimulationConfig& cfg, int& attemptsUsed, Send send) {
    std::string last = "no attempt made";
    for (int attempt = 1; attempt <= std::max(1, cfg.attempts); ++attempt) {
        attemptsUsed = attempt;
        auto res = send();
        if (res && res->status < 500) {
            if (res->status >= 400) reject(res);
            return res;
        }
        last = res ? error_text(res) : httplib::to_string(res.error());
        if (attempt < cfg.attempts) std::this_thread::sleep_for(cfg.backoffBase * (1 << (attempt - 1)));
    }
    throw Error(ErrorCode::TransportError,
                "request failed after " + std::to_string(cfg.attempts) + " attempts: " + last);
}

std::unique_ptr<httplib::Client> make_client(const SimulationConfig& cfg) {
    auto client = std::make_unique<httplib::Client>(cfg.serverUrl);
    client->set_connection_timeout(std::chrono::seconds(5));
    client->set_read_timeout(std::chrono::seconds(30));
    client->set_write_timeout(std::chrono::seconds(30));
    client->set_default_headers(auth_headers(cfg));
    return client;
}

}  // namespace

SimulationReport simulate_device(const CorpusManifest& corpus, const std::filesystem::path& corpusDir,
                                 const SimulationConfig& cfg) {
    if (!(cfg.cadenceMinutes > 0.0) || !(cfg.timeCompression > 0.0))
        throw Error(ErrorCode::InvalidArgument, "cadence and compression must be positive");
    auto client = make_client(cfg);
    SimulationReport report;
    int attempts = 0;

    report.deviceId = cfg.deviceId;
    if (report.deviceId.empty()) {
        const Json body = {{"label", cfg.deviceLabel}, {"layoutId", "default"}, {"scalesId", "default"}};
        auto res = with_retry(cfg, attempts, [&] { return client->Post("/api/v1/devices", body.dump(), "application/json"); });
        report.deviceId = Json::parse(res->body).at("deviceId").get<std::string>();
    }

    const auto cadenceMs = static_cast<Timestamp>(cfg.cadenceMinutes * 60000.0);
    const Timestamp start =
        cfg.startTime.value_or(now_utc() - cadenceMs * static_cast<Timestamp>(corpus.cases.size()));
    const auto wallGap = std::chrono::duration<double>(cfg.cadenceMinutes * 60.0 / cfg.timeCompression);
    const auto sessionStart = Clock::now();

    for (std::size_t i = 0; i < corpus.cases.size(); ++i) {
        std::this_thread::sleep_until(sessionStart +
                                      std::chrono::duration_cast<Clock::duration>(wallGap * static_cast<double>(i)));
        const auto& entry = corpus.cases[i];
        const auto raw = read_file_bytes(corpusDir / entry.imagePath);
        const std::string bytes(raw.begin(), raw.end());
        const std::string ext = std::filesystem::path(entry.imagePath).extension().string();
        const std::string type = (ext == ".jpg" || ext == ".jpeg") ? "image/jpeg" : "image/png";

        UploadResult up;
        up.imagePath = entry.imagePath;
        up.capturedAt = start + cadenceMs * static_cast<Timestamp>(i);
        const httplib::Headers headers{{"X-Captured-At", format_rfc3339(up.capturedAt)}};
        const std::string path = "/api/v1/devices/" + report.deviceId + "/images";

        const auto sent = Clock::now();
        up.sentAtS = std::chrono::duration<double>(sent - sessionStart).count();
        auto res = with_retry(cfg, up.attempts, [&] { return client->Post(path, headers, bytes, type); });
        up.latencyMs = std::chrono::duration<double, std::milli>(Clock::now() - sent).count();
        up.readingId = Json::parse(res->body).at("readingId").get<std::uint64_t>();
        if (cfg.onUpload) cfg.onUpload(i, up.readingId, up.latencyMs);
        report.uploads.push_back(std::move(up));
    }

    std::set<std::uint64_t> expected;
    for (const auto& u : report.uploads) expected.insert(u.readingId);
    const auto deadline = Clock::now() + cfg.reconcileTimeout;
    for (;;) {
        std::set<std::uint64_t> stored, processed;
        bool ok = true;
        std::string from = format_rfc3339(start);
        const std::string to = format_rfc3339(start + cadenceMs * static_cast<Timestamp>(corpus.cases.size()) + 1);
        for (;;) {
            httplib::Params params{{"from", from}, {"to", to}, {"limit", std::to_string(kMaxQueryLimit)}};
            auto res = client->Get("/api/v1/devices/" + report.deviceId + "/readings", params, httplib::Headers{});
            if (!res || res->status >= 500) {
                ok = false;  // server briefly away; poll again
                break;
            }
            if (res->status >= 400) reject(res);
            const Json list = Json::parse(res->body).at("readings");
            for (const auto& r : list) {
                const auto id = r.at("readingId").get<std::uint64_t>();
                if (!expected.count(id)) continue;
                stored.insert(id);
                if (r.at("status") == "processed") processed.insert(id);
            }
            if (list.size() < kMaxQueryLimit) break;
            from = format_rfc3339(parse_rfc3339(list.back().at("capturedAt").get<std::string>()) + 1);
        }
        if (ok) {
            report.storedReadings = stored.size();
            report.processedReadings = processed.size();
            report.reconciled = processed.size() == expected.size() && expected.size() == report.uploads.size();
            if (report.reconciled) break;
        }
        if (Clock::now() >= deadline) break;
        std::this_thread::sleep_for(cfg.pollInterval);
    }
    return report;
}

}  // namespace guttation
