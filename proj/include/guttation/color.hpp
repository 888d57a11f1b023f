#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

namespace guttation {

/// Linear RGB triple with channels in [0, 1].
struct Color {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;

    double operator[](int i) const { return i == 0 ? r : (i == 1 ? g : b); }
    double& operator[](int i) { return i == 0 ? r : (i == 1 ? g : b); }

    static Color from_bytes(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
        return {r8 / 255.0, g8 / 255.0, b8 / 255.0};
    }

    bool in_unit_cube() const {
        return r >= 0.0 && r <= 1.0 && g >= 0.0 && g <= 1.0 && b >= 0.0 && b <= 1.0;
    }

    friend bool operator==(const Color&, const Color&) = default;
};

inline double distance(const Color& a, const Color& b) {
    const double dr = a.r - b.r, dg = a.g - b.g, db = a.b - b.b;
    return std::sqrt(dr * dr + dg * dg + db * db);
}

/// Rec. 709 relative luminance (no gamma handling; channels treated as linear).
inline double luminance(const Color& c) { return 0.2126 * c.r + 0.7152 * c.g + 0.0722 * c.b; }

inline std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace guttation

namespace guttation {

/// Robust colour estimate of a sampled region.
struct ColorSample {
    Color mean;
    /// Per-channel standard deviation.
    Color dispersion;
    int pixelCount = 0;

    static ColorSample flat(const Color& c, int pixels = 1) { return {c, {}, pixels}; }
};

}  // namespace guttation
