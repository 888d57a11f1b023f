#include "guttation/image_analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>

#include <opencv2/imgproc.hpp>

namespace guttation {

namespace {

// --- fiducial detection -----------------------------------------------------

cv::Mat luminance_image(const Raster& image) {
    cv::Mat lum(image.height, image.width, CV_8UC1);
    for (int y = 0; y < image.height; ++y) {
        auto* row = lum.ptr<std::uint8_t>(y);
        for (int x = 0; x < image.width; ++x) {
            const auto* p = image.at(x, y);
            row[x] = static_cast<std::uint8_t>(std::lround(0.2126 * p[0] + 0.7152 * p[1] + 0.0722 * p[2]));
        }
    }
    return lum;
}

double masked_median(const cv::Mat& values, const cv::Mat& mask) {
    std::array<int, 256> hist{};
    int n = 0;
    for (int y = 0; y < values.rows; ++y) {
        const auto* v = values.ptr<std::uint8_t>(y);
        const auto* m = mask.ptr<std::uint8_t>(y);
        for (int x = 0; x < values.cols; ++x)
            if (m[x]) {
                ++hist[v[x]];
                ++n;
            }
    }
    if (n == 0) return -1.0;
    int cum = 0;
    for (int i = 0; i < 256; ++i) {
        cum += hist[i];
        if (2 * cum >= n) return i;
    }
    return 255.0;
}

std::optional<MarkerTag> classify(const std::vector<cv::Point>& contour, double area, const DetectionConfig& cfg,
                                  double& quality) {
    const double perimeter = cv::arcLength(contour, true);
    std::vector<cv::Point> approx;
    cv::approxPolyDP(contour, approx, cfg.polygonEpsilonFraction * perimeter, true);
    if (approx.size() == 3 || approx.size() == 4) {
        const double poly_area = std::abs(cv::contourArea(approx));
        if (poly_area <= 0.0) return std::nullopt;
        quality = std::clamp(1.0 - 3.0 * std::abs(1.0 - area / poly_area), 0.0, 1.0);
        if (approx.size() == 3) return MarkerTag::Triangle;
        if (!cv::isContourConvex(approx)) return std::nullopt;
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (int i = 0; i < 4; ++i) {
            const cv::Point d = approx[i] - approx[(i + 1) % 4];
            const double len = std::hypot(d.x, d.y);
            lo = std::min(lo, len);
            hi = std::max(hi, len);
        }
        const double ratio = hi / lo;
        if (ratio < cfg.squareSideRatioMin || ratio > cfg.squareSideRatioMax) return std::nullopt;
        return MarkerTag::Square;
    }
    // Isoperimetric ratio of the convex hull, which removes pixel staircase.
    std::vector<cv::Point> hull;
    cv::convexHull(contour, hull);
    const double hull_perimeter = cv::arcLength(hull, true);
    const double hull_area = cv::contourArea(hull);
    if (hull_perimeter <= 0.0) return std::nullopt;
    const double iso = 4.0 * M_PI * hull_area / (hull_perimeter * hull_perimeter);
    if (iso < cfg.circleMinIsoperimetric) return std::nullopt;
    quality = std::clamp(std::min(iso, area / hull_area), 0.0, 1.0);
    return MarkerTag::Circle;
}

std::vector<MarkerDetection> detect_pass(const cv::Mat& lum, double pxPerMm, const DetectionConfig& cfg) {
    int block = static_cast<int>(std::lround(2.0 * cfg.markerDiameterMm * pxPerMm));
    block = std::max(block | 1, 3);
    cv::Mat binary;
    cv::adaptiveThreshold(lum, binary, 255, cv::ADAPTIVE_THRESH_MEAN_C, cv::THRESH_BINARY_INV, block,
                          cfg.thresholdOffset * 255.0);

    std::vector<std::vector<cv::Point>> contours;
    std::vector<cv::Vec4i> hierarchy;
    cv::findContours(binary, contours, hierarchy, cv::RETR_CCOMP, cv::CHAIN_APPROX_NONE);

    const double image_area = static_cast<double>(lum.rows) * lum.cols;
    std::vector<MarkerDetection> out;
    for (std::size_t i = 0; i < contours.size(); ++i) {
        if (hierarchy[i][3] >= 0) continue;  // hole boundary
        const auto& contour = contours[i];
        const cv::Rect rect = cv::boundingRect(contour);
        if (rect.x <= 0 || rect.y <= 0 || rect.x + rect.width >= lum.cols || rect.y + rect.height >= lum.rows)
            continue;
        const double area = cv::contourArea(contour);
        if (area < cfg.minAreaPx || area > 0.25 * image_area) continue;

        double quality = 0.0;
        const auto tag = classify(contour, area, cfg, quality);
        if (!tag) continue;

        const int ring = std::max(3, static_cast<int>(std::lround(0.25 * std::sqrt(area))));
        const int pad = ring + 3;
        const cv::Rect roi = (rect + cv::Point(-pad, -pad) + cv::Size(2 * pad, 2 * pad)) &
                             cv::Rect(0, 0, lum.cols, lum.rows);
        const cv::Mat patch = lum(roi);

        cv::Mat inside = cv::Mat::zeros(roi.size(), CV_8UC1);
        cv::drawContours(inside, contours, static_cast<int>(i), cv::Scalar(255), cv::FILLED, cv::LINE_8,
                         cv::noArray(), 0, cv::Point(-roi.x, -roi.y));
        cv::Mat core, near, far;
        cv::erode(inside, core, cv::getStructuringElement(cv::MORPH_RECT, {3, 3}));
        if (cv::countNonZero(core) == 0) core = inside;
        cv::dilate(inside, near, cv::getStructuringElement(cv::MORPH_ELLIPSE, {5, 5}));
        cv::dilate(inside, far, cv::getStructuringElement(cv::MORPH_ELLIPSE, {2 * ring + 5, 2 * ring + 5}));
        const cv::Mat ring_mask = far & ~near;

        const double fg = masked_median(patch, core);
        const double bg = masked_median(patch, ring_mask);
        if (fg < 0.0 || bg <= fg + 1.0) continue;
        const double darkness = std::clamp((0.5 - fg / bg) / 0.3, 0.0, 1.0);
        const double score = quality * darkness;
        if (score < cfg.minScore) continue;

        // Coverage-weighted centroid for sub-pixel accuracy on anti-aliased edges.
        double sw = 0.0, sx = 0.0, sy = 0.0;
        for (int y = 0; y < patch.rows; ++y) {
            const auto* v = patch.ptr<std::uint8_t>(y);
            const auto* m = near.ptr<std::uint8_t>(y);
            for (int x = 0; x < patch.cols; ++x) {
                if (!m[x]) continue;
                const double w = std::clamp((bg - v[x]) / (bg - fg), 0.0, 1.0);
                sw += w;
                sx += w * (roi.x + x + 0.5);
                sy += w * (roi.y + y + 0.5);
            }
        }
        if (sw <= 0.0) continue;
        out.push_back({*tag, {sx / sw, sy / sw}, score, sw});
    }
    std::sort(out.begin(), out.end(), [](const MarkerDetection& a, const MarkerDetection& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.centroid.y != b.centroid.y) return a.centroid.y < b.centroid.y;
        return a.centroid.x < b.centroid.x;
    });
    return out;
}

// --- rectification ----------------------------------------------------------

struct Fit {
    AffineTransform transform;
    double rms = 0.0;
    bool ok = false;
};

Fit fit_affine(const std::vector<Point2>& src, const std::vector<Point2>& dst) {
    // Centre both point sets for conditioning, then solve the 2x2 normal equations.
    const double n = static_cast<double>(src.size());
    Point2 cs, cd;
    for (std::size_t i = 0; i < src.size(); ++i) {
        cs = cs + src[i];
        cd = cd + dst[i];
    }
    cs = (1.0 / n) * cs;
    cd = (1.0 / n) * cd;
    double sxx = 0, sxy = 0, syy = 0, ux = 0, uy = 0, vx = 0, vy = 0;
    for (std::size_t i = 0; i < src.size(); ++i) {
        const Point2 s = src[i] - cs, d = dst[i] - cd;
        sxx += s.x * s.x;
        sxy += s.x * s.y;
        syy += s.y * s.y;
        ux += s.x * d.x;
        uy += s.y * d.x;
        vx += s.x * d.y;
        vy += s.y * d.y;
    }
    const double det = sxx * syy - sxy * sxy;
    Fit fit;
    if (std::abs(det) <= 1e-12 * std::max(1.0, sxx * syy)) return fit;
    const double a = (ux * syy - uy * sxy) / det, b = (uy * sxx - ux * sxy) / det;
    const double c = (vx * syy - vy * sxy) / det, d = (vy * sxx - vx * sxy) / det;
    fit.transform = AffineTransform::from_rows(a, b, cd.x - a * cs.x - b * cs.y, c, d, cd.y - c * cs.x - d * cs.y);
    double sum = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
        const Point2 e = fit.transform.apply(src[i]) - dst[i];
        sum += dot(e, e);
    }
    fit.rms = std::sqrt(sum / n);
    fit.ok = true;
    return fit;
}

bool collinear(const std::vector<Point2>& pts) {
    Point2 c;
    for (const auto& p : pts) c = c + p;
    c = (1.0 / pts.size()) * c;
    double sxx = 0, sxy = 0, syy = 0;
    for (const auto& p : pts) {
        const Point2 d = p - c;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    const double tr = sxx + syy, det = sxx * syy - sxy * sxy;
    const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
    const double lmax = tr / 2.0 + disc, lmin = tr / 2.0 - disc;
    return lmax <= 0.0 || lmin <= 1e-4 * lmax;
}

struct Assignment {
    std::vector<int> candidateFor;  // per layout marker, -1 = unassigned
    int count = 0;
    Fit fit;
};

// --- sampling ---------------------------------------------------------------

class ChannelHistogram {
public:
    void add(const std::uint8_t* rgb) {
        for (int c = 0; c < 3; ++c) {
            ++hist_[c][rgb[c]];
            sum_[c] += rgb[c];
            sum2_[c] += static_cast<double>(rgb[c]) * rgb[c];
        }
        ++n_;
    }
    int count() const { return n_; }

    ColorSample summary() const {
        ColorSample s;
        s.pixelCount = n_;
        for (int c = 0; c < 3; ++c) {
            s.mean[c] = grouped_median(hist_[c]) / 255.0;
            const double mu = sum_[c] / n_;
            s.dispersion[c] = std::sqrt(std::max(0.0, sum2_[c] / n_ - mu * mu)) / 255.0;
        }
        return s;
    }

private:
    // Median of 8-bit data treated as grouped into unit-width bins, which
    // resolves below one code value when the data straddle a bin.
    double grouped_median(const std::array<int, 256>& h) const {
        const double half = 0.5 * n_;
        double cum = 0.0;
        for (int v = 0; v < 256; ++v) {
            if (h[v] == 0) continue;
            if (cum + h[v] >= half) return v - 0.5 + (half - cum) / h[v];
            cum += h[v];
        }
        return 255.0;
    }

    std::array<std::array<int, 256>, 3> hist_{};
    std::array<double, 3> sum_{};
    std::array<double, 3> sum2_{};
    int n_ = 0;
};

ColorSample sample_where(const Raster& image, const AffineTransform& chipToImage, std::array<Point2, 2> boundsMm,
                         const std::function<bool(Point2)>& inside, const std::string& what) {
    double xmin = std::numeric_limits<double>::infinity(), ymin = xmin;
    double xmax = -xmin, ymax = -xmin;
    for (const Point2 corner : {boundsMm[0], Point2{boundsMm[1].x, boundsMm[0].y}, boundsMm[1],
                                Point2{boundsMm[0].x, boundsMm[1].y}}) {
        const Point2 p = chipToImage.apply(corner);
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    if (!(xmin >= 0.0 && ymin >= 0.0 && xmax <= image.width && ymax <= image.height))
        throw Error(ErrorCode::RegionOutOfImage, what + " maps outside the image");

    const AffineTransform toChip = chipToImage.inverse();
    ChannelHistogram hist;
    const int x0 = static_cast<int>(std::floor(xmin)), x1 = std::min(image.width, static_cast<int>(std::ceil(xmax)));
    const int y0 = static_cast<int>(std::floor(ymin)), y1 = std::min(image.height, static_cast<int>(std::ceil(ymax)));
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
            if (inside(toChip.apply({x + 0.5, y + 0.5}))) hist.add(image.at(x, y));
    if (hist.count() < 4)
        throw Error(ErrorCode::EmptyRegion, what + " covers only " + std::to_string(hist.count()) + " pixels");
    return hist.summary();
}

// Bare substrate just outside a test circle, inside the reference clearance.
ColorSample sample_substrate_ring(const Raster& image, const AffineTransform& chipToImage, const RegionSpec& circle,
                                  double clearanceMm) {
    const auto& c = std::get<CircleShape>(circle.shape);
    const double inner = c.radius + 0.2 * clearanceMm, outer = c.radius + 0.8 * clearanceMm;
    const std::array<Point2, 2> box{{{c.center.x - outer, c.center.y - outer}, {c.center.x + outer, c.center.y + outer}}};
    return sample_where(
        image, chipToImage, box,
        [&](Point2 p) {
            const double d = norm(p - c.center);
            return d >= inner && d <= outer;
        },
        "substrate ring of " + circle.id);
}

double max_channel(const Color& c) { return std::max({c.r, c.g, c.b}); }

}  // namespace

std::string_view to_string(ReadingStatus status) {
    switch (status) {
        case ReadingStatus::Reacted: return "Reacted";
        case ReadingStatus::Unreacted: return "Unreacted";
        case ReadingStatus::Partial: return "Partial";
        case ReadingStatus::Unreadable: return "Unreadable";
    }
    return "Unknown";
}

const Measurement* ChipReading::measurement(ChemicalKind kind) const {
    for (const auto& m : measurements)
        if (m.chemical == kind) return &m;
    return nullptr;
}

std::vector<MarkerDetection> detect_fiducials(const Raster& image, const DetectionConfig& config) {
    if (image.width < 64 || image.height < 64)
        throw Error(ErrorCode::ImageDecodeError, "image smaller than 64x64");
    const cv::Mat lum = luminance_image(image);

    std::vector<MarkerDetection> best;
    for (double factor : {1.0, 0.5, 2.0, 0.25, 4.0}) {
        if (factor < config.minScale || factor > config.maxScale) continue;
        auto found = detect_pass(lum, config.nominalPxPerMm * factor, config);
        if (found.size() > best.size()) best = std::move(found);
        if (best.size() >= 3) break;
    }
    return best;
}

Rectification estimate_rectification(const std::vector<MarkerDetection>& markers, const ChipLayout& layout,
                                     const DetectionConfig& config) {
    constexpr std::size_t kMaxPerTag = 6;
    const std::size_t n_layout = layout.markers.size();

    // Candidates grouped per layout marker by matching tag, best score first.
    std::vector<std::vector<int>> options(n_layout);
    std::map<MarkerTag, std::size_t> layout_tag_count, detected_tag_count;
    for (const auto& m : layout.markers) ++layout_tag_count[*m.markerTag];
    for (std::size_t j = 0; j < n_layout; ++j) {
        for (std::size_t i = 0; i < markers.size(); ++i)
            if (markers[i].shapeTag == layout.markers[j].markerTag && options[j].size() < kMaxPerTag)
                options[j].push_back(static_cast<int>(i));
    }
    for (const auto& [tag, n] : layout_tag_count) {
        std::size_t avail = 0;
        for (const auto& d : markers)
            if (d.shapeTag == tag) ++avail;
        detected_tag_count[tag] = std::min(avail, n);
    }
    std::size_t matchable = 0;
    for (const auto& [tag, n] : detected_tag_count) matchable += n;
    if (matchable < 3)
        throw Error(ErrorCode::InsufficientMarkers,
                    "found " + std::to_string(matchable) + " usable markers, need at least 3");

    std::vector<Point2> layout_centers;
    std::vector<double> layout_areas;
    double span_mm = 0.0;
    for (const auto& m : layout.markers) {
        layout_centers.push_back(centroid(m.shape));
        layout_areas.push_back(area(m.shape));
    }
    for (const auto& a : layout_centers)
        for (const auto& b : layout_centers) span_mm = std::max(span_mm, norm(a - b));

    const double nominal2 = config.nominalPxPerMm * config.nominalPxPerMm;
    std::vector<Assignment> accepted;
    bool saw_degenerate = false;
    std::vector<int> current(n_layout, -1);
    std::vector<bool> used(markers.size(), false);

    std::function<void(std::size_t)> recurse = [&](std::size_t j) {
        if (j == n_layout) {
            std::vector<Point2> src, dst;
            for (std::size_t k = 0; k < n_layout; ++k)
                if (current[k] >= 0) {
                    src.push_back(layout_centers[k]);
                    dst.push_back(markers[current[k]].centroid);
                }
            if (src.size() < 3) return;
            if (collinear(dst)) {
                saw_degenerate = true;
                return;
            }
            Fit fit = fit_affine(src, dst);
            if (!fit.ok) return;
            const double det = fit.transform.determinant();
            if (det <= 0.0) return;  // mirror image: not a physical view of the chip
            const double rel = det / nominal2;
            if (rel < config.minScale * config.minScale || rel > config.maxScale * config.maxScale) return;
            const double tolerance = std::max(2.0, 0.05 * span_mm * std::sqrt(det));
            if (fit.rms > tolerance) return;
            for (std::size_t k = 0; k < n_layout; ++k) {
                if (current[k] < 0) continue;
                const double ratio = markers[current[k]].areaPx / (det * layout_areas[k]);
                if (ratio < 0.6 || ratio > 1.6) return;
            }
            accepted.push_back({current, static_cast<int>(src.size()), fit});
            return;
        }
        current[j] = -1;
        recurse(j + 1);
        for (int i : options[j]) {
            if (used[i]) continue;
            used[i] = true;
            current[j] = i;
            recurse(j + 1);
            used[i] = false;
            current[j] = -1;
        }
    };
    recurse(0);

    if (accepted.empty()) {
        if (saw_degenerate) throw Error(ErrorCode::DegenerateGeometry, "detected markers are collinear");
        throw Error(ErrorCode::InsufficientMarkers, "no geometrically consistent marker assignment");
    }
    std::stable_sort(accepted.begin(), accepted.end(), [](const Assignment& a, const Assignment& b) {
        if (a.count != b.count) return a.count > b.count;
        return a.fit.rms < b.fit.rms;
    });
    const Assignment& best = accepted.front();
    if (accepted.size() > 1 && accepted[1].count == best.count &&
        accepted[1].fit.rms <= 1.05 * best.fit.rms + 1e-6)
        throw Error(ErrorCode::AmbiguousAssignment, "two marker assignments fit equally well");

    Rectification r;
    r.chipToImage = best.fit.transform;
    r.residualPx = best.fit.rms;
    for (std::size_t k = 0; k < n_layout; ++k)
        if (best.candidateFor[k] >= 0) r.assignments.emplace_back(layout.markers[k].id, markers[best.candidateFor[k]]);
    return r;
}

ColorSample sample_color(const Raster& image, const AffineTransform& chipToImage, const RegionSpec& region,
                         const SamplingConfig& config) {
    const double factor = std::holds_alternative<CircleShape>(region.shape) ? config.circleRadiusFraction
                                                                           : std::sqrt(config.barAreaFraction);
    const Shape core = scaled(region.shape, factor);
    return sample_where(
        image, chipToImage, bounds(core), [&](Point2 p) { return contains(core, p); }, "region " + region.id);
}

ValidityAssessment assess_validity(const std::map<ChemicalKind, ColorSample>& circleSamples,
                                   const BarSamples& barSamples, const ChipLayout& layout,
                                   const ValidityConfig& config,
                                   const std::map<ChemicalKind, ColorSample>* substrateSamples) {
    ValidityAssessment v;
    for (auto kind : kAllChemicals) v.perChemical[kind] = false;

    bool bars_ok = true;
    for (auto kind : kAllChemicals) {
        const std::string name(to_string(kind));
        for (int k = 0; k < kKnotCount; ++k) {
            auto it = barSamples.find({kind, k});
            if (it == barSamples.end()) {
                v.notes.push_back("bar_missing:" + name + ":" + std::to_string(k));
                bars_ok = false;
            } else if (max_channel(it->second.dispersion) > config.maxBarDispersion) {
                v.notes.push_back("bar_dispersion:" + name + ":" + std::to_string(k));
                bars_ok = false;
            }
        }
        if (!circleSamples.count(kind)) {
            v.notes.push_back("circle_missing:" + name);
            bars_ok = false;
        }
    }
    if (!bars_ok) {
        v.status = ReadingStatus::Unreadable;
        return v;
    }

    int usable = 0, degenerate = 0;
    for (auto kind : kAllChemicals) {
        const std::string name(to_string(kind));
        bool distinct = true;
        for (int a = 0; a < kKnotCount; ++a)
            for (int b = a + 1; b < kKnotCount; ++b)
                distinct = distinct && distance(barSamples.at({kind, a}).mean, barSamples.at({kind, b}).mean) >=
                                           kMinKnotColorSeparation;
        if (!distinct) {
            v.notes.push_back("degenerate_reference:" + name);
            ++degenerate;
            continue;
        }

        Color dry = config.dryColor;
        if (substrateSamples) {
            if (auto it = substrateSamples->find(kind); it != substrateSamples->end()) {
                for (int c = 0; c < 3; ++c)
                    if (layout.substrateColor[c] > 0.0)
                        dry[c] = std::min(1.0, dry[c] * it->second.mean[c] / layout.substrateColor[c]);
            }
        }
        if (distance(circleSamples.at(kind).mean, dry) <= config.dryEpsilon) {
            v.notes.push_back("unreacted:" + name);
            continue;
        }
        v.perChemical[kind] = true;
        ++usable;
    }

    if (usable == static_cast<int>(kAllChemicals.size()))
        v.status = ReadingStatus::Reacted;
    else if (usable > 0)
        v.status = ReadingStatus::Partial;
    else if (degenerate > 0)
        v.status = ReadingStatus::Unreadable;
    else
        v.status = ReadingStatus::Unreacted;
    return v;
}

ChipReading analyze(const Raster& image, const ChipLayout& layout, const std::vector<ReferenceScale>& scales,
                    const AnalysisConfig& config) {
    std::vector<MarkerDetection> detections;
    try {
        detections = detect_fiducials(image, config.detection);
    } catch (const Error& e) {
        throw PipelineError(Stage::Fiducials, e);
    }

    ChipReading reading;
    try {
        reading.rectification = estimate_rectification(detections, layout, config.detection);
    } catch (const Error& e) {
        throw PipelineError(e.code() == ErrorCode::InsufficientMarkers ? Stage::Fiducials : Stage::Rectification, e);
    }
    const AffineTransform& T = reading.rectification.chipToImage;

    BarSamples bars;
    std::map<ChemicalKind, ColorSample> substrate;
    try {
        for (const auto& m : layout.markers) sample_color(image, T, m, config.sampling);
        for (const auto& c : layout.testCircles) {
            reading.circleSamples[*c.chemical] = sample_color(image, T, c, config.sampling);
            substrate[*c.chemical] = sample_substrate_ring(image, T, c, layout.clearances.referenceToCircle);
        }
        for (const auto& b : layout.referenceBars) bars[{*b.chemical, *b.knotIndex}] = sample_color(image, T, b, config.sampling);
    } catch (const Error& e) {
        throw PipelineError(Stage::Sampling, e);
    }

    reading.validity = assess_validity(reading.circleSamples, bars, layout, config.validity, &substrate);

    for (auto kind : kAllChemicals) {
        if (!reading.validity.perChemical[kind]) continue;
        std::array<ColorSample, 4> refs;
        for (int k = 0; k < kKnotCount; ++k) refs[k] = bars.at({kind, k});
        try {
            reading.measurements.push_back(
                quantify(scale_for(scales, kind), refs, reading.circleSamples.at(kind), config.calibration));
        } catch (const Error& e) {
            if (e.code() != ErrorCode::DegenerateColors) throw PipelineError(Stage::Calibration, e);
            reading.validity.perChemical[kind] = false;
            reading.validity.notes.push_back("degenerate_reference:" + std::string(to_string(kind)));
        }
    }
    if (reading.validity.status == ReadingStatus::Reacted && reading.measurements.size() < kAllChemicals.size())
        reading.validity.status = reading.measurements.empty() ? ReadingStatus::Unreadable : ReadingStatus::Partial;
    return reading;
}

}  // namespace guttation
