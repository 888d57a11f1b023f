#include <atomic>
#include <charconv>
#include <thread>

#include "guttation/errors.hpp"
#include "guttation/relay.hpp"
#include "httplib.h"
#include "report_json_internal.hpp"

namespace guttation {

using detail::Json;

namespace {

struct ChemicalText {
    ChemicalKind kind;
    const char* name;
    const char* role;
    const char* whyItMatters;
};

// Short educational blurbs served to the end-user app.
constexpr ChemicalText kChemicalText[] = {
    {ChemicalKind::Acephate, "Acephate", "Organophosphate insecticide taken up systemically by the plant.",
     "Residues in produce are a health concern and the compound harms pollinators."},
    {ChemicalKind::Lead, "Lead", "Heavy metal absorbed from polluted soil or irrigation water.",
     "Lead accumulates in edible tissue and is toxic even at low doses."},
    {ChemicalKind::Nitrate, "Nitrate", "Main nitrogen source for plant growth.",
     "Too little starves the plant; too much ends up in the produce."},
    {ChemicalKind::Nitrite, "Nitrite", "Intermediate of nitrogen turnover in soil and plant.",
     "Elevated nitrite points to over-fertilisation or poor soil aeration."},
    {ChemicalKind::PH, "pH", "Acidity of the plant's xylem sap.",
     "Nutrient uptake works best in a slightly acidic window."},
    {ChemicalKind::Hardness, "Water hardness", "Dissolved calcium and magnesium carried by irrigation water.",
     "Very hard water leaves mineral build-up that stresses roots."},
};

Json chemical_info(ChemicalKind kind, const std::vector<ReferenceScale>& scales, const RuleTable& rules) {
    const ChemicalText* text = nullptr;
    for (const auto& t : kChemicalText)
        if (t.kind == kind) text = &t;
    const ReferenceScale& scale = scale_for(scales, kind);
    Json knots = Json::array();
    for (const auto& k : scale.knots) knots.push_back({{"value", k.value}, {"label", k.label}, {"color", detail::to_json(k.color)}});
    Json ranges = Json::array();
    Json healthy = Json::array();
    auto bound = [](const std::optional<double>& b) { return b ? Json(*b) : Json(nullptr); };
    for (const auto& r : rules.rules) {
        if (r.chemical != kind) continue;
        Json range = {{"min", bound(r.min)},          {"max", bound(r.max)},
                      {"minInclusive", r.minInclusive}, {"maxInclusive", r.maxInclusive},
                      {"signal", std::string(to_string(r.signal))}, {"headline", r.headline},
                      {"suggestion", r.suggestion}};
        if (r.signal == Signal::Green) healthy.push_back(range);
        ranges.push_back(std::move(range));
    }
    return {{"chemical", std::string(to_string(kind))},
            {"name", text->name},
            {"role", text->role},
            {"whyItMatters", text->whyItMatters},
            {"unit", scale.unit},
            {"quantization", quantization_of(kind) == Quantization::Ordinal ? "ordinal" : "continuous"},
            {"knots", knots},
            {"healthyRanges", healthy},
            {"ranges", ranges}};
}

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnknownDevice:
        case ErrorCode::UnknownChemical: return 404;
        case ErrorCode::PayloadTooLarge: return 413;
        case ErrorCode::UndecodableImage: return 415;
        case ErrorCode::IoError: return 500;
        default: return 400;
    }
}

void send_json(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
    send_json(res, status, {{"error", {{"code", code}, {"message", message}}}});
}

std::optional<Timestamp> time_param(const httplib::Request& req, const char* key) {
    if (!req.has_param(key)) return std::nullopt;
    return parse_rfc3339(req.get_param_value(key));
}

std::uint64_t parse_id(const std::string& text) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size())
        throw Error(ErrorCode::InvalidArgument, "not a reading id: '" + text + "'");
    return v;
}

}  // namespace

struct RelayServer::Impl {
    Relay& relay;
    std::string token;
    httplib::Server server;
    int port = -1;
    std::atomic<bool> served{false};

    Impl(Relay& r, std::string t) : relay(r), token(std::move(t)) {
        server.set_payload_max_length(relay.config().maxImageBytes + 1);
        // SO_REUSEADDR only: the library default also sets SO_REUSEPORT, which
        // would let a second relay silently share a port already in use.
        server.set_socket_options([](socket_t sock) {
            int yes = 1;
            setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
        });
        server.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
            if (token.empty() || req.path == "/healthz") return httplib::Server::HandlerResponse::Unhandled;
            if (req.get_header_value("Authorization") == "Bearer " + token)
                return httplib::Server::HandlerResponse::Unhandled;
            send_error(res, 401, "Unauthorized", "missing or wrong bearer token");
            return httplib::Server::HandlerResponse::Handled;
        });
        server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            try {
                std::rethrow_exception(ep);
            } catch (const Error& e) {
                send_error(res, http_status(e.code()), to_string(e.code()), e.what());
            } catch (const Json::exception& e) {
                send_error(res, 400, "ParseError", e.what());
            } catch (const std::exception& e) {
                send_error(res, 500, "InternalError", e.what());
            }
        });
        server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (!res.body.empty()) return;
            if (res.status == 413)
                send_error(res, 413, "PayloadTooLarge", "request body exceeds the upload limit");
            else if (res.status == 404)
                send_error(res, 404, "NotFound", "no such endpoint");
            else
                send_error(res, res.status, "HttpError", httplib::status_message(res.status));
        });

        server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, {{"status", "ok"}});
        });

        server.Post("/api/v1/devices", [this](const httplib::Request& req, httplib::Response& res) {
            const Json body = Json::parse(req.body);
            const auto d = relay.register_device(body.value("label", std::string()),
                                                 body.value("layoutId", std::string("default")),
                                                 body.value("scalesId", std::string("default")));
            send_json(res, 201, {{"deviceId", d.deviceId}});
        });

        server.Get("/api/v1/devices", [this](const httplib::Request&, httplib::Response& res) {
            Json list = Json::array();
            for (const auto& d : relay.devices()) list.push_back(Json::parse(device_json(d)));
            send_json(res, 200, {{"devices", list}});
        });

        server.Post(R"(/api/v1/devices/([A-Za-z0-9_-]{1,64})/images)",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        const std::string type = req.get_header_value("Content-Type");
                        if (type != "image/png" && type != "image/jpeg")
                            throw Error(ErrorCode::UndecodableImage, "Content-Type must be image/png or image/jpeg");
                        if (!req.has_header("X-Captured-At"))
                            throw Error(ErrorCode::InvalidArgument, "missing X-Captured-At header");
                        const Timestamp capturedAt = parse_rfc3339(req.get_header_value("X-Captured-At"));
                        std::optional<double> temperature;
                        if (req.has_header("X-Ambient-Temperature-C")) {
                            try {
                                temperature = std::stod(req.get_header_value("X-Ambient-Temperature-C"));
                            } catch (const std::exception&) {
                                throw Error(ErrorCode::InvalidArgument, "X-Ambient-Temperature-C is not a number");
                            }
                        }
                        const auto ack = relay.ingest(req.matches[1], req.body, capturedAt, temperature);
                        send_json(res, ack.duplicate ? 200 : 202,
                                  {{"readingId", ack.readingId}, {"status", "pending"}, {"duplicate", ack.duplicate}});
                    });

        server.Get(R"(/api/v1/devices/([A-Za-z0-9_-]{1,64})/readings)",
                   [this](const httplib::Request& req, httplib::Response& res) {
                       ReadingQuery q;
                       q.deviceId = req.matches[1];
                       q.from = time_param(req, "from");
                       q.to = time_param(req, "to");
                       if (req.has_param("limit")) {
                           const std::string text = req.get_param_value("limit");
                           std::size_t v = 0;
                           auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
                           if (ec != std::errc() || p != text.data() + text.size())
                               throw Error(ErrorCode::InvalidArgument, "limit must be a positive integer");
                           q.limit = v;
                       }
                       Json list = Json::array();
                       for (const auto& r : relay.query_readings(q)) list.push_back(Json::parse(record_json(r)));
                       send_json(res, 200, {{"readings", list}});
                   });

        server.Get(R"(/api/v1/readings/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
            const auto r = relay.reading(parse_id(req.matches[1]));
            if (!r) {
                send_error(res, 404, "UnknownReading", "no reading " + std::string(req.matches[1]));
                return;
            }
            send_json(res, 200, Json::parse(record_json(*r)));
        });

        server.Get(R"(/api/v1/chemicals/([A-Za-z]+))", [this](const httplib::Request& req, httplib::Response& res) {
            const auto kind = chemical_from_string(std::string(req.matches[1]));
            if (!kind) throw Error(ErrorCode::UnknownChemical, "unknown chemical '" + std::string(req.matches[1]) + "'");
            const std::string scalesId = req.has_param("scalesId") ? req.get_param_value("scalesId") : "default";
            auto it = relay.config().scales.find(scalesId);
            if (it == relay.config().scales.end())
                throw Error(ErrorCode::ValidationError, "unknown scalesId '" + scalesId + "'");
            send_json(res, 200, chemical_info(*kind, it->second, relay.config().rules));
        });
    }
};

RelayServer::RelayServer(Relay& relay, std::string authToken)
    : impl_(std::make_unique<Impl>(relay, std::move(authToken))) {}

RelayServer::~RelayServer() {
    // The library only closes its socket from a running listen loop, so a
    // bound-but-never-served instance spins one up briefly to release the port.
    if (impl_->port > 0 && !impl_->served.exchange(true)) {
        std::thread loop([this] { impl_->server.listen_after_bind(); });
        impl_->server.wait_until_ready();
        impl_->server.stop();
        loop.join();
        return;
    }
    stop();
}

bool RelayServer::bind(const std::string& host, int port) {
    if (port == 0) {
        impl_->port = impl_->server.bind_to_any_port(host);
        return impl_->port > 0;
    }
    if (!impl_->server.bind_to_port(host, port)) return false;
    impl_->port = port;
    return true;
}

int RelayServer::port() const { return impl_->port; }

void RelayServer::serve() {
    impl_->served = true;
    impl_->server.listen_after_bind();
}

void RelayServer::stop() {
    if (impl_) impl_->server.stop();
}

}  // namespace guttation
