#include "guttation/chip_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "guttation/errors.hpp"
#include "json_util.hpp"

namespace guttation {

namespace detail {
std::string_view embedded_chip_config();
}

using detail::Json;

namespace {

constexpr std::array<std::string_view, 6> kChemicalNames{"Acephate", "Lead",  "Nitrate",
                                                         "Nitrite",  "PH",    "Hardness"};

std::string fmt_mm(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::vector<Point2> rect_vertices(const RectShape& r) {
    return {r.corner,
            {r.corner.x + r.width, r.corner.y},
            {r.corner.x + r.width, r.corner.y + r.height},
            {r.corner.x, r.corner.y + r.height}};
}

double polygon_signed_area(const std::vector<Point2>& v) {
    double a = 0.0;
    for (std::size_t i = 0, n = v.size(); i < n; ++i) a += cross(v[i], v[(i + 1) % n]);
    return 0.5 * a;
}

bool polygon_contains(const std::vector<Point2>& v, Point2 p) {
    bool inside = false;
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
        if ((v[i].y > p.y) != (v[j].y > p.y)) {
            const double x = v[j].x + (p.y - v[j].y) * (v[i].x - v[j].x) / (v[i].y - v[j].y);
            if (p.x < x) inside = !inside;
        }
    }
    return inside;
}

double point_segment_distance(Point2 p, Point2 a, Point2 b) {
    const Point2 ab = b - a;
    const double len2 = dot(ab, ab);
    double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return norm(p - (a + t * ab));
}

bool segments_intersect(Point2 a, Point2 b, Point2 c, Point2 d) {
    const double d1 = cross(b - a, c - a), d2 = cross(b - a, d - a);
    const double d3 = cross(d - c, a - c), d4 = cross(d - c, b - c);
    return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

double point_polygon_distance(Point2 p, const std::vector<Point2>& v) {
    if (polygon_contains(v, p)) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0, n = v.size(); i < n; ++i)
        best = std::min(best, point_segment_distance(p, v[i], v[(i + 1) % n]));
    return best;
}

double polygon_polygon_distance(const std::vector<Point2>& a, const std::vector<Point2>& b) {
    if (polygon_contains(b, a.front()) || polygon_contains(a, b.front())) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const Point2 p = a[i], q = a[(i + 1) % a.size()];
        for (std::size_t j = 0; j < b.size(); ++j) {
            const Point2 r = b[j], s = b[(j + 1) % b.size()];
            if (segments_intersect(p, q, r, s)) return 0.0;
            best = std::min({best, point_segment_distance(p, r, s), point_segment_distance(q, r, s),
                             point_segment_distance(r, p, q), point_segment_distance(s, p, q)});
        }
    }
    return best;
}

std::vector<Point2> polygon_of(const Shape& s) {
    if (const auto* r = std::get_if<RectShape>(&s)) return rect_vertices(*r);
    return std::get<PolygonShape>(s).vertices;
}

// Least-squares affine fit src -> dst; returns RMS residual and determinant.
struct PointFit {
    double rms = 0.0;
    double det = 0.0;
    bool ok = false;
};

PointFit fit_points(const std::vector<Point2>& src, const std::vector<Point2>& dst) {
    // Normal equations for [x y 1] * M^T = dst, solved per output coordinate.
    double s[3][3] = {};
    double bx[3] = {}, by[3] = {};
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double row[3] = {src[i].x, src[i].y, 1.0};
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) s[a][b] += row[a] * row[b];
            bx[a] += row[a] * dst[i].x;
            by[a] += row[a] * dst[i].y;
        }
    }
    const double det3 = s[0][0] * (s[1][1] * s[2][2] - s[1][2] * s[2][1]) -
                        s[0][1] * (s[1][0] * s[2][2] - s[1][2] * s[2][0]) +
                        s[0][2] * (s[1][0] * s[2][1] - s[1][1] * s[2][0]);
    PointFit fit;
    if (std::abs(det3) < 1e-12) return fit;
    auto solve = [&](const double* rhs, double* out) {
        for (int c = 0; c < 3; ++c) {
            double m[3][3];
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) m[a][b] = (b == c) ? rhs[a] : s[a][b];
            out[c] = (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                      m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                      m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])) /
                     det3;
        }
    };
    double px[3], py[3];
    solve(bx, px);
    solve(by, py);
    double sum = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double ex = px[0] * src[i].x + px[1] * src[i].y + px[2] - dst[i].x;
        const double ey = py[0] * src[i].x + py[1] * src[i].y + py[2] - dst[i].y;
        sum += ex * ex + ey * ey;
    }
    fit.rms = std::sqrt(sum / static_cast<double>(src.size()));
    fit.det = px[0] * py[1] - px[1] * py[0];
    fit.ok = true;
    return fit;
}

bool marker_tag_matches_shape(MarkerTag tag, const Shape& shape) {
    switch (tag) {
        case MarkerTag::Triangle:
            return std::holds_alternative<PolygonShape>(shape) &&
                   std::get<PolygonShape>(shape).vertices.size() == 3;
        case MarkerTag::Square:
            if (const auto* r = std::get_if<RectShape>(&shape))
                return std::abs(r->width - r->height) <= 1e-9 * std::max(r->width, r->height);
            return std::holds_alternative<PolygonShape>(shape) &&
                   std::get<PolygonShape>(shape).vertices.size() == 4;
        case MarkerTag::Circle:
            return std::holds_alternative<CircleShape>(shape);
    }
    return false;
}

// True when some non-identity, tag-preserving relabelling of the markers is
// realised by an orientation-preserving affine map of the chip onto itself.
bool markers_ambiguous(const std::vector<RegionSpec>& markers) {
    const std::size_t n = markers.size();
    std::vector<Point2> centers;
    for (const auto& m : markers) centers.push_back(centroid(m.shape));
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double scale = 0.0;
    for (const auto& c : centers) scale = std::max(scale, norm(c - centers.front()));
    while (std::next_permutation(perm.begin(), perm.end())) {
        bool tags_ok = true;
        for (std::size_t i = 0; i < n && tags_ok; ++i)
            tags_ok = markers[i].markerTag == markers[perm[i]].markerTag;
        if (!tags_ok) continue;
        std::vector<Point2> dst;
        for (std::size_t i = 0; i < n; ++i) dst.push_back(centers[perm[i]]);
        const PointFit fit = fit_points(centers, dst);
        if (fit.ok && fit.det > 0.0 && fit.rms <= 1e-6 * std::max(scale, 1.0)) return true;
    }
    return false;
}

// --- JSON ------------------------------------------------------------------

Json shape_to_json(const Shape& shape) {
    return std::visit(
        [](const auto& s) -> Json {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, CircleShape>) {
                return {{"type", "circle"}, {"center", detail::to_json(s.center)}, {"radius", s.radius}};
            } else if constexpr (std::is_same_v<T, RectShape>) {
                return {{"type", "rectangle"},
                        {"corner", detail::to_json(s.corner)},
                        {"width", s.width},
                        {"height", s.height}};
            } else {
                Json v = Json::array();
                for (const auto& p : s.vertices) v.push_back(detail::to_json(p));
                return {{"type", "polygon"}, {"vertices", v}};
            }
        },
        shape);
}

Shape shape_from_json(const Json& j, const std::string& path) {
    const std::string type = detail::text_at(j, path, "type");
    if (type == "circle") {
        CircleShape c{detail::point(detail::member(j, path, "center"), path + ".center"),
                      detail::number_at(j, path, "radius")};
        if (!(c.radius > 0.0)) detail::field_error(path + ".radius", "must be positive");
        return c;
    }
    if (type == "rectangle") {
        RectShape r{detail::point(detail::member(j, path, "corner"), path + ".corner"),
                    detail::number_at(j, path, "width"), detail::number_at(j, path, "height")};
        if (!(r.width > 0.0)) detail::field_error(path + ".width", "must be positive");
        if (!(r.height > 0.0)) detail::field_error(path + ".height", "must be positive");
        return r;
    }
    if (type == "polygon") {
        const Json& v = detail::member(j, path, "vertices");
        if (!v.is_array() || v.size() < 3) detail::field_error(path + ".vertices", "expected at least 3 vertices");
        PolygonShape p;
        for (std::size_t i = 0; i < v.size(); ++i)
            p.vertices.push_back(detail::point(v[i], path + ".vertices[" + std::to_string(i) + "]"));
        return p;
    }
    detail::field_error(path + ".type", "unknown shape type '" + type + "'");
}

ChemicalKind chemical_at(const Json& j, const std::string& path) {
    const std::string name = detail::text_at(j, path, "chemical");
    auto kind = chemical_from_string(name);
    if (!kind) detail::field_error(path + ".chemical", "unknown chemical '" + name + "'");
    return *kind;
}

Json region_to_json(const RegionSpec& r) {
    Json j{{"id", r.id}, {"shape", shape_to_json(r.shape)}};
    if (r.chemical) j["chemical"] = std::string(to_string(*r.chemical));
    if (r.knotIndex) j["knotIndex"] = *r.knotIndex;
    if (r.markerTag) j["tag"] = std::string(to_string(*r.markerTag));
    return j;
}

RegionSpec region_from_json(const Json& j, const std::string& path, RegionKind kind) {
    RegionSpec r;
    r.kind = kind;
    r.id = detail::text_at(j, path, "id");
    r.shape = shape_from_json(detail::member(j, path, "shape"), path + ".shape");
    if (j.contains("chemical")) r.chemical = chemical_at(j, path);
    if (j.contains("knotIndex")) {
        const Json& k = j["knotIndex"];
        if (!k.is_number_integer()) detail::field_error(path + ".knotIndex", "expected an integer");
        r.knotIndex = k.get<int>();
    }
    if (j.contains("tag")) {
        const std::string tag = detail::text_at(j, path, "tag");
        r.markerTag = marker_tag_from_string(tag);
        if (!r.markerTag) detail::field_error(path + ".tag", "unknown marker tag '" + tag + "'");
    }
    return r;
}

std::vector<RegionSpec> regions_from_json(const Json& layout, const std::string& path, const char* key,
                                          RegionKind kind) {
    const Json& arr = detail::member(layout, path, key);
    const std::string here = path + "." + key;
    if (!arr.is_array()) detail::field_error(here, "expected an array");
    std::vector<RegionSpec> out;
    for (std::size_t i = 0; i < arr.size(); ++i)
        out.push_back(region_from_json(arr[i], here + "[" + std::to_string(i) + "]", kind));
    return out;
}

const Json& section(const Json& doc, const char* key) {
    if (doc.is_object() && doc.contains(key)) return doc[key];
    return doc;
}

ChipLayout layout_from_json(const Json& j) {
    const std::string path = "layout";
    if (!j.is_object()) detail::field_error(path, "expected an object");
    ChipLayout layout;
    layout.id = j.contains("id") ? detail::text_at(j, path, "id") : "default";
    layout.chipWidth = detail::number_at(j, path, "chipWidth");
    layout.chipHeight = detail::number_at(j, path, "chipHeight");
    layout.chipOrigin = detail::point(detail::member(j, path, "chipOrigin"), path + ".chipOrigin");
    if (j.contains("substrateColor"))
        layout.substrateColor = detail::color(j["substrateColor"], path + ".substrateColor");
    if (j.contains("clearances")) {
        const Json& c = j["clearances"];
        const std::string cp = path + ".clearances";
        layout.clearances = {detail::number_at(c, cp, "circleToCircle"),
                             detail::number_at(c, cp, "referenceToCircle"),
                             detail::number_at(c, cp, "referenceToReference"),
                             detail::number_at(c, cp, "markerToRegion")};
    }
    if (j.contains("estimates")) {
        for (const auto& e : j["estimates"]) {
            if (!e.is_string()) detail::field_error(path + ".estimates", "expected strings");
            layout.estimates.push_back(e.get<std::string>());
        }
    }
    layout.markers = regions_from_json(j, path, "markers", RegionKind::Marker);
    layout.testCircles = regions_from_json(j, path, "testCircles", RegionKind::TestCircle);
    layout.referenceBars = regions_from_json(j, path, "referenceBars", RegionKind::ReferenceBar);
    return layout;
}

Json layout_to_json(const ChipLayout& layout) {
    auto list = [](const std::vector<RegionSpec>& regions) {
        Json a = Json::array();
        for (const auto& r : regions) a.push_back(region_to_json(r));
        return a;
    };
    return {{"id", layout.id},
            {"chipWidth", layout.chipWidth},
            {"chipHeight", layout.chipHeight},
            {"chipOrigin", detail::to_json(layout.chipOrigin)},
            {"substrateColor", detail::to_json(layout.substrateColor)},
            {"clearances",
             {{"circleToCircle", layout.clearances.circleToCircle},
              {"referenceToCircle", layout.clearances.referenceToCircle},
              {"referenceToReference", layout.clearances.referenceToReference},
              {"markerToRegion", layout.clearances.markerToRegion}}},
            {"estimates", layout.estimates},
            {"markers", list(layout.markers)},
            {"testCircles", list(layout.testCircles)},
            {"referenceBars", list(layout.referenceBars)}};
}

}  // namespace

// --- names -----------------------------------------------------------------

Quantization quantization_of(ChemicalKind kind) {
    return kind == ChemicalKind::Acephate ? Quantization::Ordinal : Quantization::Continuous;
}

std::string_view to_string(ChemicalKind kind) { return kChemicalNames[index_of(kind)]; }

std::optional<ChemicalKind> chemical_from_string(std::string_view name) {
    for (auto kind : kAllChemicals) {
        const auto canonical = to_string(kind);
        if (canonical.size() != name.size()) continue;
        bool same = true;
        for (std::size_t i = 0; i < name.size() && same; ++i)
            same = std::tolower(static_cast<unsigned char>(canonical[i])) ==
                   std::tolower(static_cast<unsigned char>(name[i]));
        if (same) return kind;
    }
    return std::nullopt;
}

std::string_view to_string(MarkerTag tag) {
    switch (tag) {
        case MarkerTag::Triangle: return "triangle";
        case MarkerTag::Square: return "square";
        case MarkerTag::Circle: return "circle";
    }
    return "unknown";
}

std::optional<MarkerTag> marker_tag_from_string(std::string_view name) {
    if (name == "triangle") return MarkerTag::Triangle;
    if (name == "square") return MarkerTag::Square;
    if (name == "circle") return MarkerTag::Circle;
    return std::nullopt;
}

// --- scales ----------------------------------------------------------------

std::array<Color, kKnotCount> ReferenceScale::colors() const {
    std::array<Color, kKnotCount> out;
    for (int k = 0; k < kKnotCount; ++k) out[k] = knots[k].color;
    return out;
}

std::array<double, kKnotCount> ReferenceScale::values() const {
    std::array<double, kKnotCount> out;
    for (int k = 0; k < kKnotCount; ++k) out[k] = knots[k].value;
    return out;
}

std::vector<std::string> check_scale(const ReferenceScale& scale) {
    std::vector<std::string> problems;
    const std::string name(to_string(scale.chemical));
    for (int k = 0; k + 1 < kKnotCount; ++k) {
        if (!(scale.knots[k + 1].value > scale.knots[k].value))
            problems.push_back(name + ": knot values must be strictly increasing (knot " +
                               std::to_string(k) + " -> " + std::to_string(k + 1) + ")");
    }
    for (int k = 0; k < kKnotCount; ++k) {
        if (!scale.knots[k].color.in_unit_cube())
            problems.push_back(name + ": knot " + std::to_string(k) + " colour outside [0, 1]");
        for (int m = k + 1; m < kKnotCount; ++m) {
            const double d = distance(scale.knots[k].color, scale.knots[m].color);
            if (d < kMinKnotColorSeparation)
                problems.push_back(name + ": knot colours " + std::to_string(k) + " and " +
                                   std::to_string(m) + " are only " + fmt_mm(d) + " apart");
        }
    }
    if (quantization_of(scale.chemical) == Quantization::Ordinal) {
        for (int k = 0; k < kKnotCount; ++k)
            if (scale.knots[k].value != k)
                problems.push_back(name + ": ordinal knot " + std::to_string(k) + " must have value " +
                                   std::to_string(k));
    }
    return problems;
}

const ReferenceScale& scale_for(const std::vector<ReferenceScale>& scales, ChemicalKind kind) {
    for (const auto& s : scales)
        if (s.chemical == kind) return s;
    throw Error(ErrorCode::UnknownChemical, "no reference scale for " + std::string(to_string(kind)));
}

std::vector<ReferenceScale> load_scales(std::string_view configText) {
    const Json doc = detail::parse_document(configText, "scales config");
    const Json& arr = section(doc, "scales");
    if (!arr.is_array()) detail::field_error("scales", "expected an array");
    std::vector<ReferenceScale> scales;
    std::set<ChemicalKind> seen;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string path = "scales[" + std::to_string(i) + "]";
        ReferenceScale s;
        s.chemical = chemical_at(arr[i], path);
        s.unit = arr[i].contains("unit") ? detail::text_at(arr[i], path, "unit") : "";
        const Json& knots = detail::member(arr[i], path, "knots");
        if (!knots.is_array() || knots.size() != kKnotCount)
            detail::field_error(path + ".knots", "expected exactly 4 knots");
        for (int k = 0; k < kKnotCount; ++k) {
            const std::string kp = path + ".knots[" + std::to_string(k) + "]";
            s.knots[k].value = detail::number_at(knots[k], kp, "value");
            s.knots[k].color = detail::color(detail::member(knots[k], kp, "color"), kp + ".color");
            if (knots[k].contains("label")) s.knots[k].label = detail::text_at(knots[k], kp, "label");
        }
        if (auto problems = check_scale(s); !problems.empty())
            throw Error(ErrorCode::ValidationError, path + ": " + problems.front());
        if (!seen.insert(s.chemical).second)
            throw Error(ErrorCode::ValidationError,
                        path + ": duplicate scale for " + std::string(to_string(s.chemical)));
        scales.push_back(std::move(s));
    }
    if (seen.size() != kAllChemicals.size())
        throw Error(ErrorCode::ValidationError, "expected one scale per chemical");
    return scales;
}

std::string serialize_scales(const std::vector<ReferenceScale>& scales) {
    Json arr = Json::array();
    for (const auto& s : scales) {
        Json knots = Json::array();
        for (const auto& k : s.knots) {
            Json kj{{"value", k.value}, {"color", detail::to_json(k.color)}};
            if (!k.label.empty()) kj["label"] = k.label;
            knots.push_back(kj);
        }
        arr.push_back({{"chemical", std::string(to_string(s.chemical))}, {"unit", s.unit}, {"knots", knots}});
    }
    return Json{{"scales", arr}}.dump(2);
}

// --- shapes ----------------------------------------------------------------

Point2 centroid(const Shape& shape) {
    if (const auto* c = std::get_if<CircleShape>(&shape)) return c->center;
    if (const auto* r = std::get_if<RectShape>(&shape))
        return {r->corner.x + 0.5 * r->width, r->corner.y + 0.5 * r->height};
    const auto& v = std::get<PolygonShape>(shape).vertices;
    const double a = polygon_signed_area(v);
    Point2 c;
    for (std::size_t i = 0, n = v.size(); i < n; ++i) {
        const double w = cross(v[i], v[(i + 1) % n]);
        c.x += (v[i].x + v[(i + 1) % n].x) * w;
        c.y += (v[i].y + v[(i + 1) % n].y) * w;
    }
    return (1.0 / (6.0 * a)) * c;
}

double area(const Shape& shape) {
    if (const auto* c = std::get_if<CircleShape>(&shape)) return M_PI * c->radius * c->radius;
    if (const auto* r = std::get_if<RectShape>(&shape)) return r->width * r->height;
    return std::abs(polygon_signed_area(std::get<PolygonShape>(shape).vertices));
}

bool contains(const Shape& shape, Point2 p) {
    if (const auto* c = std::get_if<CircleShape>(&shape)) {
        const double dx = p.x - c->center.x, dy = p.y - c->center.y;
        return dx * dx + dy * dy <= c->radius * c->radius;
    }
    if (const auto* r = std::get_if<RectShape>(&shape))
        return p.x >= r->corner.x && p.x <= r->corner.x + r->width && p.y >= r->corner.y &&
               p.y <= r->corner.y + r->height;
    return polygon_contains(std::get<PolygonShape>(shape).vertices, p);
}

std::array<Point2, 2> bounds(const Shape& shape) {
    if (const auto* c = std::get_if<CircleShape>(&shape))
        return {{{c->center.x - c->radius, c->center.y - c->radius},
                 {c->center.x + c->radius, c->center.y + c->radius}}};
    if (const auto* r = std::get_if<RectShape>(&shape))
        return {{r->corner, {r->corner.x + r->width, r->corner.y + r->height}}};
    const auto& v = std::get<PolygonShape>(shape).vertices;
    Point2 lo = v.front(), hi = v.front();
    for (const auto& p : v) {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
    }
    return {{lo, hi}};
}

Shape scaled(const Shape& shape, double factor) {
    const Point2 c = centroid(shape);
    if (const auto* circle = std::get_if<CircleShape>(&shape)) return CircleShape{c, circle->radius * factor};
    if (const auto* r = std::get_if<RectShape>(&shape)) {
        const double w = r->width * factor, h = r->height * factor;
        return RectShape{{c.x - 0.5 * w, c.y - 0.5 * h}, w, h};
    }
    PolygonShape p;
    for (const auto& v : std::get<PolygonShape>(shape).vertices) p.vertices.push_back(c + factor * (v - c));
    return p;
}

double clearance(const Shape& a, const Shape& b) {
    const auto* ca = std::get_if<CircleShape>(&a);
    const auto* cb = std::get_if<CircleShape>(&b);
    if (ca && cb) return std::max(0.0, norm(ca->center - cb->center) - ca->radius - cb->radius);
    if (ca) return std::max(0.0, point_polygon_distance(ca->center, polygon_of(b)) - ca->radius);
    if (cb) return std::max(0.0, point_polygon_distance(cb->center, polygon_of(a)) - cb->radius);
    return polygon_polygon_distance(polygon_of(a), polygon_of(b));
}

std::vector<Point2> outline(const Shape& shape, int segments) {
    if (const auto* c = std::get_if<CircleShape>(&shape)) {
        std::vector<Point2> pts;
        for (int i = 0; i < segments; ++i) {
            const double a = 2.0 * M_PI * i / segments;
            pts.push_back({c->center.x + c->radius * std::cos(a), c->center.y + c->radius * std::sin(a)});
        }
        return pts;
    }
    return polygon_of(shape);
}

// --- layout ----------------------------------------------------------------

const RegionSpec& ChipLayout::test_circle(ChemicalKind kind) const {
    for (const auto& r : testCircles)
        if (r.chemical == kind) return r;
    throw Error(ErrorCode::ValidationError, "layout has no test circle for " + std::string(to_string(kind)));
}

const RegionSpec& ChipLayout::reference_bar(ChemicalKind kind, int knotIndex) const {
    for (const auto& r : referenceBars)
        if (r.chemical == kind && r.knotIndex == knotIndex) return r;
    throw Error(ErrorCode::ValidationError, "layout has no reference bar " + std::to_string(knotIndex) +
                                                " for " + std::string(to_string(kind)));
}

std::vector<const RegionSpec*> ChipLayout::all_regions() const {
    std::vector<const RegionSpec*> out;
    for (const auto* list : {&markers, &testCircles, &referenceBars})
        for (const auto& r : *list) out.push_back(&r);
    return out;
}

std::vector<Violation> validate_layout(const ChipLayout& layout) {
    std::vector<Violation> out;
    auto add = [&](std::string code, std::string message, std::vector<std::string> regions = {},
                   std::vector<double> measured = {}) {
        out.push_back({std::move(code), std::move(message), std::move(regions), std::move(measured)});
    };

    if (!(layout.chipWidth > 0.0) || !(layout.chipHeight > 0.0))
        add("chip_size", "chip dimensions must be positive", {}, {layout.chipWidth, layout.chipHeight});

    // Markers.
    if (layout.markers.size() != 4)
        add("marker_count", "expected exactly 4 markers", {}, {static_cast<double>(layout.markers.size())});
    bool markers_well_formed = true;
    for (const auto& m : layout.markers) {
        if (m.kind != RegionKind::Marker || !m.markerTag) {
            add("marker_tag_missing", "marker carries no shape tag", {m.id});
            markers_well_formed = false;
        } else if (!marker_tag_matches_shape(*m.markerTag, m.shape)) {
            add("marker_shape_mismatch", "marker shape does not match its tag", {m.id});
        }
        if (m.chemical || m.knotIndex) add("marker_fields", "marker must not carry a chemical or knotIndex", {m.id});
    }
    if (markers_well_formed && layout.markers.size() >= 3) {
        std::set<MarkerTag> tags;
        for (const auto& m : layout.markers) tags.insert(*m.markerTag);
        if (tags.size() < 2 || markers_ambiguous(layout.markers)) {
            std::vector<std::string> ids;
            for (const auto& m : layout.markers) ids.push_back(m.id);
            add("marker_ambiguous", "marker identities ambiguous", ids);
        }
    }

    // Test circles.
    std::map<ChemicalKind, int> circle_count;
    for (const auto& c : layout.testCircles) {
        if (!c.chemical) {
            add("circle_chemical_missing", "test circle carries no chemical", {c.id});
            continue;
        }
        if (!std::holds_alternative<CircleShape>(c.shape))
            add("circle_shape", "test circle must be a circle", {c.id});
        if (c.knotIndex || c.markerTag) add("circle_fields", "test circle must not carry knotIndex or tag", {c.id});
        ++circle_count[*c.chemical];
    }
    bool one_per_chemical = layout.testCircles.size() == kAllChemicals.size();
    for (auto kind : kAllChemicals) one_per_chemical = one_per_chemical && circle_count[kind] == 1;
    if (!one_per_chemical)
        add("circle_count", "expected one TestCircle per chemical", {},
            {static_cast<double>(layout.testCircles.size())});

    // Reference bars.
    std::map<ChemicalKind, std::array<int, kKnotCount>> bar_count;
    for (const auto& b : layout.referenceBars) {
        if (!b.chemical) {
            add("bar_chemical_missing", "reference bar carries no chemical", {b.id});
            continue;
        }
        if (!b.knotIndex) {
            add("bar_knot_missing", "reference bar carries no knotIndex", {b.id});
            continue;
        }
        if (*b.knotIndex < 0 || *b.knotIndex >= kKnotCount) {
            add("bar_knot_range", "knotIndex out of range", {b.id}, {static_cast<double>(*b.knotIndex)});
            continue;
        }
        ++bar_count[*b.chemical][*b.knotIndex];
    }
    for (auto kind : kAllChemicals) {
        for (int k = 0; k < kKnotCount; ++k) {
            const int n = bar_count[kind][k];
            if (n != 1)
                add("bar_count",
                    "expected one ReferenceBar for " + std::string(to_string(kind)) + " knot " +
                        std::to_string(k),
                    {}, {static_cast<double>(n)});
        }
    }

    // Bounds.
    const Point2 lo = layout.chipOrigin;
    const Point2 hi{lo.x + layout.chipWidth, lo.y + layout.chipHeight};
    const auto regions = layout.all_regions();
    for (const auto* r : regions) {
        const auto b = bounds(r->shape);
        if (b[0].x < lo.x || b[0].y < lo.y || b[1].x > hi.x || b[1].y > hi.y)
            add("region_out_of_bounds", "region " + r->id + " extends beyond the chip", {r->id},
                {b[0].x, b[0].y, b[1].x, b[1].y});
    }

    // Pairwise clearances.
    for (std::size_t i = 0; i < regions.size(); ++i) {
        for (std::size_t j = i + 1; j < regions.size(); ++j) {
            const RegionSpec& a = *regions[i];
            const RegionSpec& b = *regions[j];
            double required = 0.0;
            std::string label;
            if (a.kind == RegionKind::Marker || b.kind == RegionKind::Marker) {
                required = layout.clearances.markerToRegion;
                label = "marker";
            } else if (a.kind == RegionKind::TestCircle && b.kind == RegionKind::TestCircle) {
                required = layout.clearances.circleToCircle;
                label = "circle-circle";
            } else if (a.kind == RegionKind::ReferenceBar && b.kind == RegionKind::ReferenceBar) {
                required = layout.clearances.referenceToReference;
                label = "reference-reference";
            } else {
                required = layout.clearances.referenceToCircle;
                label = "reference-circle";
            }
            const double gap = clearance(a.shape, b.shape);
            if (gap + 1e-9 < required)
                add("clearance",
                    "regions " + a.id + " and " + b.id + " are " + fmt_mm(gap) + " mm apart; " +
                        fmt_mm(required) + " mm " + label + " clearance required",
                    {a.id, b.id}, {gap, required});
        }
    }
    return out;
}

ChipLayout load_layout(std::string_view configText) {
    const Json doc = detail::parse_document(configText, "layout config");
    ChipLayout layout = layout_from_json(section(doc, "layout"));
    if (auto violations = validate_layout(layout); !violations.empty()) {
        std::string message = violations.front().message;
        if (violations.size() > 1)
            message += " (and " + std::to_string(violations.size() - 1) + " more violations)";
        throw Error(ErrorCode::ValidationError, message);
    }
    return layout;
}

std::string serialize_layout(const ChipLayout& layout) {
    return Json{{"format", "guttation-chip/1"}, {"layout", layout_to_json(layout)}}.dump(2);
}

std::string_view default_config_text() { return detail::embedded_chip_config(); }

ChipLayout default_layout() {
    static const ChipLayout layout = load_layout(default_config_text());
    return layout;
}

std::vector<ReferenceScale> default_scales() {
    static const std::vector<ReferenceScale> scales = load_scales(default_config_text());
    return scales;
}

}  // namespace guttation
