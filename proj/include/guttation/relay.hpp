#pragma once

// Upload relay: devices post chip photos, a worker pool analyses them, and
// every event lands in an append-only NDJSON log under the data directory.
// Images are stored content-addressed under images/<sha256>.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <vector>

#include "guttation/chip_model.hpp"
#include "guttation/interpretation.hpp"
#include "guttation/synth.hpp"

namespace guttation {

/// Milliseconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

/// Accepts "YYYY-MM-DDTHH:MM:SS[.fff...](Z|+HH:MM|-HH:MM)"; throws
/// Error(InvalidArgument) otherwise.
Timestamp parse_rfc3339(std::string_view text);
/// Always "YYYY-MM-DDTHH:MM:SS.mmmZ".
std::string format_rfc3339(Timestamp ts);
Timestamp now_utc();

std::string sha256_hex(std::string_view bytes);

struct DeviceRecord {
    std::string deviceId;
    std::string label;
    std::string layoutId;
    std::string scalesId;
    Timestamp registeredAt = 0;
    std::optional<Timestamp> lastSeenAt;
};

struct ReadingRecord {
    std::uint64_t readingId = 0;
    std::string deviceId;
    Timestamp capturedAt = 0;
    std::optional<double> ambientTemperatureC;
    std::string imageHash;
    std::string imagePath;  // relative to the data directory
    bool pending = true;
    std::optional<Timestamp> processedAt;
    /// AnalysisOutcome JSON ({"reading", "report", "error"}); empty while pending.
    std::string outcome;
};

/// Full record as served over HTTP.
std::string record_json(const ReadingRecord& record, int indent = -1);
std::string device_json(const DeviceRecord& device, int indent = -1);

struct RelayConfig {
    std::filesystem::path dataDir = "relay-data";
    /// Background analysis threads; 0 leaves processing to process_pending().
    int workers = 1;
    std::size_t maxImageBytes = 10u << 20;
    /// Layout and scale registries by id; "default" is always present.
    std::map<std::string, ChipLayout> layouts;
    std::map<std::string, std::vector<ReferenceScale>> scales;
    RuleTable rules = default_rule_table();
};

struct IngestAck {
    std::uint64_t readingId = 0;
    bool duplicate = false;
};

struct ReadingQuery {
    std::string deviceId;
    std::optional<Timestamp> from;  // inclusive
    std::optional<Timestamp> to;    // exclusive
    std::size_t limit = 100;
};

inline constexpr std::size_t kMaxQueryLimit = 1000;

class Relay {
public:
    /// Replays the log in `config.dataDir` (dropping a torn final line) and
    /// re-enqueues uploads that never got a result.
    explicit Relay(RelayConfig config);
    ~Relay();

    Relay(const Relay&) = delete;
    Relay& operator=(const Relay&) = delete;

    /// Throws Error(ValidationError) when layoutId or scalesId do not resolve.
    DeviceRecord register_device(const std::string& label, const std::string& layoutId,
                                 const std::string& scalesId);
    std::vector<DeviceRecord> devices() const;
    std::optional<DeviceRecord> device(const std::string& deviceId) const;

    /// Persists the image and the upload before returning. Throws Error with
    /// UnknownDevice, PayloadTooLarge or UndecodableImage, and InvalidArgument
    /// for capture times more than five minutes in the future.
    IngestAck ingest(const std::string& deviceId, std::string_view imageBytes, Timestamp capturedAt,
                     std::optional<double> ambientTemperatureC = std::nullopt);

    /// Processes queued uploads on the calling thread; returns how many.
    std::size_t process_pending();
    std::size_t pending_count() const;

    /// Throws Error with UnknownDevice or InvalidRange.
    std::vector<ReadingRecord> query_readings(const ReadingQuery& query) const;
    std::optional<ReadingRecord> reading(std::uint64_t readingId) const;
    std::size_t reading_count() const;

    const RelayConfig& config() const { return config_; }
    std::filesystem::path log_path() const;

    /// Stops accepting uploads, lets workers drain the queue, joins them.
    void shutdown();

private:
    void replay();
    void append(const std::string& line);
    std::optional<std::uint64_t> take_job();
    void finish_job();
    void process(std::uint64_t readingId);
    void worker_loop();
    void apply_result(std::uint64_t readingId, Timestamp processedAt, std::string outcome);

    RelayConfig config_;
    int logFd_ = -1;
    std::mutex writeMutex_;

    mutable std::shared_mutex stateMutex_;
    std::map<std::string, DeviceRecord> devices_;
    std::map<std::uint64_t, ReadingRecord> readings_;
    /// (deviceId, capturedAt, imageHash) -> readingId
    std::map<std::tuple<std::string, Timestamp, std::string>, std::uint64_t> uploads_;
    /// deviceId -> (capturedAt, readingId), kept sorted for range queries.
    std::map<std::string, std::set<std::pair<Timestamp, std::uint64_t>>> byDevice_;
    std::uint64_t nextReadingId_ = 1;
    std::uint64_t nextDeviceSeq_ = 1;

    mutable std::mutex queueMutex_;
    std::condition_variable queueCv_;
    std::deque<std::uint64_t> queue_;
    std::size_t inFlight_ = 0;
    bool stopping_ = false;
    std::vector<std::thread> workers_;
};

/// HTTP front end. Requests need "Authorization: Bearer <token>" when the
/// token is non-empty; /healthz is always open.
class RelayServer {
public:
    RelayServer(Relay& relay, std::string authToken);
    ~RelayServer();

    /// Returns false when the address cannot be bound. Port 0 picks a free port.
    bool bind(const std::string& host, int port);
    int port() const;
    /// Blocks until stop().
    void serve();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct SimulationConfig {
    std::string serverUrl = "http://127.0.0.1:8080";
    std::string authToken;
    /// Registered on first use when empty.
    std::string deviceId;
    std::string deviceLabel = "simulated-camera";
    double cadenceMinutes = 15.0;
    double timeCompression = 1.0;
    /// Capture time of the first image. Defaults to one cadence per image
    /// before now, so every simulated capture lies in the past.
    std::optional<Timestamp> startTime;
    int attempts = 3;
    std::chrono::milliseconds backoffBase{1000};
    std::chrono::milliseconds reconcileTimeout{60000};
    std::chrono::milliseconds pollInterval{200};
    std::function<void(std::size_t index, std::uint64_t readingId, double latencyMs)> onUpload;
};

struct UploadResult {
    std::string imagePath;
    Timestamp capturedAt = 0;
    std::uint64_t readingId = 0;
    int attempts = 0;
    double latencyMs = 0.0;
    /// Seconds since the session started at which the upload was sent.
    double sentAtS = 0.0;
};

struct SimulationReport {
    std::string deviceId;
    std::vector<UploadResult> uploads;
    std::size_t storedReadings = 0;
    std::size_t processedReadings = 0;
    bool reconciled = false;
};

/// Uploads every corpus image in order on the compressed cadence, then
/// polls until each upload has a processed reading or the timeout passes.
/// Throws Error(TransportError) when an upload fails after all attempts and
/// Error(UnknownDevice) / Error(InvalidArgument) for rejected requests.
SimulationReport simulate_device(const CorpusManifest& corpus, const std::filesystem::path& corpusDir,
                                 const SimulationConfig& config);

}  // namespace guttation
