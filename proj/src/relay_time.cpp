#include <openssl/evp.h>

#include <array>
#include <algorithm>
#include <chrono>
#include <cstdio>

#include "guttation/errors.hpp"
#include "guttation/relay.hpp"

namespace guttation {

namespace {

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp < 10 ? mp + 3 : mp - 9;
    y = static_cast<int>(yoe + era * 400 + (m <= 2));
}

[[noreturn]] void bad_time(std::string_view text) {
    throw Error(ErrorCode::InvalidArgument, "not an RFC 3339 timestamp: '" + std::string(text) + "'");
}

int digits(std::string_view text, std::size_t pos, std::size_t count) {
    if (pos + count > text.size()) bad_time(text);
    int value = 0;
    for (std::size_t i = pos; i < pos + count; ++i) {
        if (text[i] < '0' || text[i] > '9') bad_time(text);
        value = value * 10 + (text[i] - '0');
    }
    return value;
}

void expect(std::string_view text, std::size_t pos, std::string_view options) {
    if (pos >= text.size() || options.find(text[pos]) == std::string_view::npos) bad_time(text);
}

}  // namespace

Timestamp parse_rfc3339(std::string_view text) {
    const int year = digits(text, 0, 4);
    expect(text, 4, "-");
    const int month = digits(text, 5, 2);
    expect(text, 7, "-");
    const int day = digits(text, 8, 2);
    expect(text, 10, "Tt ");
    const int hour = digits(text, 11, 2);
    expect(text, 13, ":");
    const int minute = digits(text, 14, 2);
    expect(text, 16, ":");
    const int second = digits(text, 17, 2);
    std::size_t pos = 19;

    std::int64_t millis = 0;
    if (pos < text.size() && text[pos] == '.') {
        ++pos;
        int scale = 100;
        const std::size_t start = pos;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
            millis += (text[pos] - '0') * scale;
            scale /= 10;
            ++pos;
        }
        if (pos == start) bad_time(text);
    }

    std::int64_t offsetMin = 0;
    if (pos < text.size() && (text[pos] == 'Z' || text[pos] == 'z')) {
        ++pos;
    } else if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
        const int sign = text[pos] == '-' ? -1 : 1;
        const int oh = digits(text, pos + 1, 2);
        expect(text, pos + 3, ":");
        const int om = digits(text, pos + 4, 2);
        if (oh > 23 || om > 59) bad_time(text);
        offsetMin = sign * (oh * 60 + om);
        pos += 6;
    } else {
        bad_time(text);
    }
    if (pos != text.size()) bad_time(text);

    static constexpr std::array<int, 12> kDays{31, 29, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    if (month < 1 || month > 12 || day < 1 || day > kDays[month - 1] || (month == 2 && day == 29 && !leap) ||
        hour > 23 || minute > 59 || second > 60)
        bad_time(text);

    const std::int64_t days = days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day));
    const std::int64_t secs = days * 86400 + hour * 3600 + minute * 60 + std::min(second, 59) - offsetMin * 60;
    return secs * 1000 + millis;
}

std::string format_rfc3339(Timestamp ts) {
    std::int64_t secs = ts / 1000, millis = ts % 1000;
    if (millis < 0) {
        millis += 1000;
        secs -= 1;
    }
    std::int64_t days = secs / 86400, rem = secs % 86400;
    if (rem < 0) {
        rem += 86400;
        days -= 1;
    }
    int y;
    unsigned m, d;
    civil_from_days(days, y, m, d);
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", y, m, d, static_cast<int>(rem / 3600),
                  static_cast<int>(rem / 60 % 60), static_cast<int>(rem % 60), static_cast<int>(millis));
    return buf;
}

Timestamp now_utc() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorCode::IoError, "SHA-256 failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * length);
    for (unsigned i = 0; i < length; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 15]);
    }
    return out;
}

}  // namespace guttation
