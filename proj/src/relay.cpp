#include "guttation/relay.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "guttation/errors.hpp"
#include "guttation/raster.hpp"
#include "report_json_internal.hpp"

namespace guttation {

using detail::Json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kLogName = "readings.ndjson";
constexpr Timestamp kMaxFutureSkewMs = 5 * 60 * 1000;

[[noreturn]] void io_error(const std::string& what) {
    throw Error(ErrorCode::IoError, what + ": " + std::strerror(errno));
}

void write_all(int fd, const char* data, std::size_t size, const std::string& what) {
    while (size > 0) {
        const ssize_t n = ::write(fd, data, size);
        if (n < 0) {
            if (errno == EINTR) continue;
            io_error(what);
        }
        data += n;
        size -= static_cast<std::size_t>(n);
    }
}

void fsync_dir(const fs::path& dir) {
    const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
    if (fd >= 0) {
        ::fsync(fd);
        ::close(fd);
    }
}

// Write-to-temp then rename, so a crash never leaves a partial image under
// its final content-addressed name.
void store_image(const fs::path& target, std::string_view bytes) {
    if (fs::exists(target)) return;
    static std::atomic<std::uint64_t> counter{0};
    const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd < 0) io_error("cannot create " + tmp.string());
    try {
        write_all(fd, bytes.data(), bytes.size(), "writing " + tmp.string());
        if (::fsync(fd) != 0) io_error("fsync " + tmp.string());
    } catch (...) {
        ::close(fd);
        fs::remove(tmp);
        throw;
    }
    ::close(fd);
    fs::rename(tmp, target);
    fsync_dir(target.parent_path());
}

bool looks_like_png_or_jpeg(std::string_view b) {
    static constexpr unsigned char kPng[] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (b.size() >= 8 && std::memcmp(b.data(), kPng, 8) == 0) return true;
    return b.size() >= 3 && static_cast<unsigned char>(b[0]) == 0xFF && static_cast<unsigned char>(b[1]) == 0xD8 &&
           static_cast<unsigned char>(b[2]) == 0xFF;
}

std::string new_device_id() {
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    static constexpr char kHex[] = "0123456789abcdef";
    std::string id = "dev-";
    std::uint64_t bits = rng();
    for (int i = 0; i < 16; ++i, bits >>= 4) id.push_back(kHex[bits & 15]);
    return id;
}

Json device_to_json(const DeviceRecord& d) {
    return {{"deviceId", d.deviceId},
            {"label", d.label},
            {"layoutId", d.layoutId},
            {"scalesId", d.scalesId},
            {"registeredAt", format_rfc3339(d.registeredAt)},
            {"lastSeenAt", d.lastSeenAt ? Json(format_rfc3339(*d.lastSeenAt)) : Json(nullptr)}};
}

}  // namespace

std::string device_json(const DeviceRecord& device, int indent) { return device_to_json(device).dump(indent); }

std::string record_json(const ReadingRecord& r, int indent) {
    Json doc = {{"readingId", r.readingId},
                {"deviceId", r.deviceId},
                {"capturedAt", format_rfc3339(r.capturedAt)},
                {"processedAt", r.processedAt ? Json(format_rfc3339(*r.processedAt)) : Json(nullptr)},
                {"status", r.pending ? "pending" : "processed"},
                {"ambientTemperatureC", r.ambientTemperatureC ? Json(*r.ambientTemperatureC) : Json(nullptr)},
                {"image", {{"sha256", r.imageHash}, {"path", r.imagePath}}},
                {"reading", nullptr},
                {"report", nullptr},
                {"error", nullptr}};
    if (!r.outcome.empty()) {
        const Json outcome = Json::parse(r.outcome);
        for (const char* key : {"reading", "report", "error"}) doc[key] = outcome.at(key);
    }
    return doc.dump(indent);
}

Relay::Relay(RelayConfig config) : config_(std::move(config)) {
    if (!config_.layouts.count("default")) config_.layouts.emplace("default", default_layout());
    if (!config_.scales.count("default")) config_.scales.emplace("default", default_scales());
    fs::create_directories(config_.dataDir / "images");
    replay();
    logFd_ = ::open(log_path().c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
    if (logFd_ < 0) io_error("cannot open " + log_path().string());
    for (int i = 0; i < config_.workers; ++i) workers_.emplace_back([this] { worker_loop(); });
}

Relay::~Relay() {
    shutdown();
    if (logFd_ >= 0) ::close(logFd_);
}

fs::path Relay::log_path() const { return config_.dataDir / kLogName; }

void Relay::replay() {
    std::ifstream in(log_path(), std::ios::binary);
    if (!in) return;
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    in.close();

    std::size_t pos = 0, good = 0, lineNo = 0;
    while (pos < text.size()) {
        const std::size_t nl = text.find('\n', pos);
        ++lineNo;
        if (nl == std::string::npos) break;  // torn tail: never acknowledged
        const std::string_view line(text.data() + pos, nl - pos);
        Json rec;
        try {
            rec = Json::parse(line);
        } catch (const Json::exception&) {
            if (text.find('\n', nl + 1) == std::string::npos && nl + 1 >= text.size()) break;
            throw Error(ErrorCode::IoError, log_path().string() + ": corrupt record on line " + std::to_string(lineNo));
        }
        const std::string type = rec.at("type");
        if (type == "device") {
            DeviceRecord d{rec.at("deviceId"), rec.at("label"), rec.at("layoutId"), rec.at("scalesId"),
                           rec.at("registeredAt").get<Timestamp>(), std::nullopt};
            devices_[d.deviceId] = d;
            byDevice_[d.deviceId];
        } else if (type == "ingest") {
            ReadingRecord r;
            r.readingId = rec.at("readingId");
            r.deviceId = rec.at("deviceId");
            r.capturedAt = rec.at("capturedAt");
            if (!rec.at("ambientTemperatureC").is_null()) r.ambientTemperatureC = rec.at("ambientTemperatureC");
            r.imageHash = rec.at("imageHash");
            r.imagePath = rec.at("imagePath");
            uploads_[{r.deviceId, r.capturedAt, r.imageHash}] = r.readingId;
            byDevice_[r.deviceId].insert({r.capturedAt, r.readingId});
            nextReadingId_ = std::max(nextReadingId_, r.readingId + 1);
            readings_[r.readingId] = std::move(r);
        } else if (type == "result") {
            auto it = readings_.find(rec.at("readingId").get<std::uint64_t>());
            if (it != readings_.end()) {
                it->second.pending = false;
                it->second.processedAt = rec.at("processedAt").get<Timestamp>();
                it->second.outcome = rec.at("outcome").dump();
                auto& seen = devices_[it->second.deviceId].lastSeenAt;
                seen = std::max(seen.value_or(0), *it->second.processedAt);
            }
        }
        pos = good = nl + 1;
    }
    if (good < text.size()) fs::resize_file(log_path(), good);

    for (const auto& [id, r] : readings_)
        if (r.pending) queue_.push_back(id);
}

void Relay::append(const std::string& line) {
    std::lock_guard lock(writeMutex_);
    const std::string framed = line + "\n";
    write_all(logFd_, framed.data(), framed.size(), "appending to " + log_path().string());
    if (::fsync(logFd_) != 0) io_error("fsync " + log_path().string());
}

DeviceRecord Relay::register_device(const std::string& label, const std::string& layoutId,
                                    const std::string& scalesId) {
    if (!config_.layouts.count(layoutId)) throw Error(ErrorCode::ValidationError, "unknown layoutId '" + layoutId + "'");
    if (!config_.scales.count(scalesId)) throw Error(ErrorCode::ValidationError, "unknown scalesId '" + scalesId + "'");
    DeviceRecord d{new_device_id(), label, layoutId, scalesId, now_utc(), std::nullopt};
    {
        std::shared_lock lock(stateMutex_);
        while (devices_.count(d.deviceId)) d.deviceId = new_device_id();
    }
    Json rec = device_to_json(d);
    rec["type"] = "device";
    rec["registeredAt"] = d.registeredAt;
    rec.erase("lastSeenAt");
    append(rec.dump());
    std::unique_lock lock(stateMutex_);
    devices_[d.deviceId] = d;
    byDevice_[d.deviceId];
    return d;
}

std::vector<DeviceRecord> Relay::devices() const {
    std::shared_lock lock(stateMutex_);
    std::vector<DeviceRecord> out;
    for (const auto& [id, d] : devices_) out.push_back(d);
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return std::tie(a.registeredAt, a.deviceId) < std::tie(b.registeredAt, b.deviceId);
    });
    return out;
}

std::optional<DeviceRecord> Relay::device(const std::string& deviceId) const {
    std::shared_lock lock(stateMutex_);
    auto it = devices_.find(deviceId);
    if (it == devices_.end()) return std::nullopt;
    return it->second;
}

IngestAck Relay::ingest(const std::string& deviceId, std::string_view imageBytes, Timestamp capturedAt,
                        std::optional<double> ambientTemperatureC) {
    if (!device(deviceId)) throw Error(ErrorCode::UnknownDevice, "unknown device '" + deviceId + "'");
    if (imageBytes.size() > config_.maxImageBytes)
        throw Error(ErrorCode::PayloadTooLarge, "image is " + std::to_string(imageBytes.size()) + " bytes; limit is " +
                                                    std::to_string(config_.maxImageBytes));
    if (capturedAt > now_utc() + kMaxFutureSkewMs)
        throw Error(ErrorCode::InvalidArgument, "capturedAt lies in the future");
    if (ambientTemperatureC && !(*ambientTemperatureC >= -40.0 && *ambientTemperatureC <= 60.0))
        throw Error(ErrorCode::InvalidArgument, "ambient temperature outside [-40, 60] C");
    if (!looks_like_png_or_jpeg(imageBytes)) throw Error(ErrorCode::UndecodableImage, "not a PNG or JPEG image");
    try {
        decode_image({reinterpret_cast<const std::uint8_t*>(imageBytes.data()), imageBytes.size()});
    } catch (const Error& e) {
        throw Error(ErrorCode::UndecodableImage, e.what());
    }

    const std::string hash = sha256_hex(imageBytes);
    const auto key = std::make_tuple(deviceId, capturedAt, hash);
    auto existing = [&]() -> std::optional<std::uint64_t> {
        std::shared_lock lock(stateMutex_);
        auto it = uploads_.find(key);
        return it == uploads_.end() ? std::nullopt : std::optional(it->second);
    };
    if (auto id = existing()) return {*id, true};

    const std::string relPath = "images/" + hash;
    store_image(config_.dataDir / relPath, imageBytes);

    ReadingRecord r;
    {
        // Allocation, append and index update form one critical section so
        // concurrent duplicates resolve to a single reading.
        std::lock_guard writeLock(writeMutex_);
        if (auto id = existing()) return {*id, true};
        r.readingId = nextReadingId_;
        r.deviceId = deviceId;
        r.capturedAt = capturedAt;
        r.ambientTemperatureC = ambientTemperatureC;
        r.imageHash = hash;
        r.imagePath = relPath;
        const Json rec = {{"type", "ingest"},
                          {"readingId", r.readingId},
                          {"deviceId", deviceId},
                          {"capturedAt", capturedAt},
                          {"ambientTemperatureC", ambientTemperatureC ? Json(*ambientTemperatureC) : Json(nullptr)},
                          {"imageHash", hash},
                          {"imagePath", relPath},
                          {"receivedAt", now_utc()}};
        const std::string framed = rec.dump() + "\n";
        write_all(logFd_, framed.data(), framed.size(), "appending to " + log_path().string());
        if (::fsync(logFd_) != 0) io_error("fsync " + log_path().string());

        std::unique_lock lock(stateMutex_);
        ++nextReadingId_;
        uploads_[key] = r.readingId;
        byDevice_[deviceId].insert({capturedAt, r.readingId});
        readings_[r.readingId] = r;
    }
    {
        std::lock_guard lock(queueMutex_);
        queue_.push_back(r.readingId);
    }
    queueCv_.notify_one();
    return {r.readingId, false};
}

std::optional<std::uint64_t> Relay::take_job() {
    std::lock_guard lock(queueMutex_);
    if (queue_.empty()) return std::nullopt;
    const std::uint64_t id = queue_.front();
    queue_.pop_front();
    ++inFlight_;
    return id;
}

void Relay::finish_job() {
    {
        std::lock_guard lock(queueMutex_);
        --inFlight_;
    }
    queueCv_.notify_all();
}

void Relay::process(std::uint64_t readingId) {
    ReadingRecord r;
    DeviceRecord d;
    {
        std::shared_lock lock(stateMutex_);
        r = readings_.at(readingId);
        d = devices_.at(r.deviceId);
    }
    if (!r.pending) return;

    AnalysisOutcome outcome;
    try {
        const Raster image = decode_image(read_file_bytes(config_.dataDir / r.imagePath));
        ReadingContext context;
        context.ambientTemperatureC = r.ambientTemperatureC;
        outcome = analyze_and_summarize(image, config_.layouts.at(d.layoutId), config_.scales.at(d.scalesId), context,
                                        AnalysisConfig{}, config_.rules);
    } catch (const Error& e) {
        outcome = {};
        outcome.errorCode = e.code();
        outcome.errorMessage = e.what();
        outcome.report = unreadable_report(std::string(to_string(e.code())));
    }
    apply_result(readingId, now_utc(), detail::to_json(outcome).dump());
}

void Relay::apply_result(std::uint64_t readingId, Timestamp processedAt, std::string outcome) {
    const Json rec = {{"type", "result"},
                      {"readingId", readingId},
                      {"processedAt", processedAt},
                      {"outcome", Json::parse(outcome)}};
    append(rec.dump());
    std::unique_lock lock(stateMutex_);
    auto& r = readings_.at(readingId);
    r.pending = false;
    r.processedAt = processedAt;
    r.outcome = std::move(outcome);
    auto& seen = devices_.at(r.deviceId).lastSeenAt;
    seen = std::max(seen.value_or(0), processedAt);
}

std::size_t Relay::process_pending() {
    std::size_t done = 0;
    while (auto id = take_job()) {
        try {
            process(*id);
        } catch (...) {
            finish_job();
            throw;
        }
        finish_job();
        ++done;
    }
    return done;
}

void Relay::worker_loop() {
    for (;;) {
        std::uint64_t id;
        {
            std::unique_lock lock(queueMutex_);
            queueCv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
            if (queue_.empty()) return;  // stopping with nothing left
            id = queue_.front();
            queue_.pop_front();
            ++inFlight_;
        }
        try {
            process(id);
        } catch (const std::exception&) {
            // The upload stays pending in the log and is retried on restart.
        }
        finish_job();
    }
}

std::size_t Relay::pending_count() const {
    std::shared_lock lock(stateMutex_);
    std::size_t n = 0;
    for (const auto& [id, r] : readings_) n += r.pending ? 1 : 0;
    return n;
}

std::vector<ReadingRecord> Relay::query_readings(const ReadingQuery& q) const {
    if (q.from && q.to && *q.from > *q.to)
        throw Error(ErrorCode::InvalidRange, "from (" + format_rfc3339(*q.from) + ") is after to (" +
                                                 format_rfc3339(*q.to) + ")");
    if (q.limit == 0) throw Error(ErrorCode::InvalidArgument, "limit must be positive");
    const std::size_t limit = std::min(q.limit, kMaxQueryLimit);

    std::shared_lock lock(stateMutex_);
    auto dev = byDevice_.find(q.deviceId);
    if (dev == byDevice_.end() || !devices_.count(q.deviceId))
        throw Error(ErrorCode::UnknownDevice, "unknown device '" + q.deviceId + "'");
    std::vector<ReadingRecord> out;
    auto it = q.from ? dev->second.lower_bound({*q.from, 0}) : dev->second.begin();
    for (; it != dev->second.end() && out.size() < limit; ++it) {
        if (q.to && it->first >= *q.to) break;
        out.push_back(readings_.at(it->second));
    }
    return out;
}

std::optional<ReadingRecord> Relay::reading(std::uint64_t readingId) const {
    std::shared_lock lock(stateMutex_);
    auto it = readings_.find(readingId);
    if (it == readings_.end()) return std::nullopt;
    return it->second;
}

std::size_t Relay::reading_count() const {
    std::shared_lock lock(stateMutex_);
    return readings_.size();
}

void Relay::shutdown() {
    {
        std::lock_guard lock(queueMutex_);
        stopping_ = true;
    }
    queueCv_.notify_all();
    for (auto& w : workers_)
        if (w.joinable()) w.join();
    workers_.clear();
}

}  // namespace guttation
