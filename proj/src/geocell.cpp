#include "geokey/geocell.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include "geokey/error.hpp"

namespace geokey::geo {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;
// Coordinates are quantised to nanodegrees before cell indexing so that
// decimal inputs such as 0.05 land on the cell boundary they name.
constexpr double kNanoPerDegree = 1e9;
constexpr std::int64_t kNanoPerCell = 50'000'000;

int alphabet_index(char c) {
  const auto pos = kAlphabet.find(c);
  return pos == std::string_view::npos ? -1 : static_cast<int>(pos);
}

std::int64_t to_nano(double degrees) {
  return std::llround(degrees * kNanoPerDegree);
}

int floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return static_cast<int>(q);
}

double row_south(int row) { return static_cast<double>(row - kLatRows / 2) / kBase; }
double col_west(int col) { return static_cast<double>(col - kLngCols / 2) / kBase; }

GeoPoint normalize(GeoPoint p) {
  p.lat = std::clamp(p.lat, -90.0, 90.0);
  if (p.lng >= 180.0) p.lng -= 360.0;
  if (p.lng < -180.0) p.lng += 360.0;
  return p;
}

struct Vec3 {
  double x, y, z;
};

Vec3 to_vec(GeoPoint p) {
  const double lat = p.lat * kDegToRad;
  const double lng = p.lng * kDegToRad;
  return {std::cos(lat) * std::cos(lng), std::cos(lat) * std::sin(lng),
          std::sin(lat)};
}

GeoPoint to_point(Vec3 v) {
  return normalize({std::atan2(v.z, std::hypot(v.x, v.y)) * kRadToDeg,
                    std::atan2(v.y, v.x) * kRadToDeg});
}

double angle_between(const Vec3& a, const Vec3& b) {
  const Vec3 c{a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z,
               a.x * b.y - a.y * b.x};
  return std::atan2(std::sqrt(c.x * c.x + c.y * c.y + c.z * c.z),
                    a.x * b.x + a.y * b.y + a.z * b.z);
}

// Slerp with integer fractions so that sampling a segment backwards hits
// bit-identical points.
GeoPoint slerp_step(const Vec3& a, const Vec3& b, double angle, long i, long n) {
  const double s = std::sin(angle);
  const double wa = std::sin(static_cast<double>(n - i) / n * angle) / s;
  const double wb = std::sin(static_cast<double>(i) / n * angle) / s;
  return to_point({wa * a.x + wb * b.x, wa * a.y + wb * b.y, wa * a.z + wb * b.z});
}

// ---- planar polygon helpers, (x, y) = (lng, lat) ----

struct P2 {
  double x, y;
};

double cross(P2 o, P2 a, P2 b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool on_segment(P2 p, P2 a, P2 b) {
  return cross(a, b, p) == 0.0 && p.x >= std::min(a.x, b.x) &&
         p.x <= std::max(a.x, b.x) && p.y >= std::min(a.y, b.y) &&
         p.y <= std::max(a.y, b.y);
}

int sign(double v) { return (v > 0) - (v < 0); }

// Closed segment intersection.
bool segments_intersect(P2 a, P2 b, P2 c, P2 d) {
  const int d1 = sign(cross(c, d, a));
  const int d2 = sign(cross(c, d, b));
  const int d3 = sign(cross(a, b, c));
  const int d4 = sign(cross(a, b, d));
  if (d1 * d2 < 0 && d3 * d4 < 0) return true;
  return (d1 == 0 && on_segment(a, c, d)) || (d2 == 0 && on_segment(b, c, d)) ||
         (d3 == 0 && on_segment(c, a, b)) || (d4 == 0 && on_segment(d, a, b));
}

// Boundary counts as inside.
bool point_in_polygon(P2 p, const std::vector<P2>& poly) {
  const std::size_t n = poly.size();
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const P2 a = poly[i];
    const P2 b = poly[j];
    if (on_segment(p, a, b)) return true;
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
      if (p.x < x) inside = !inside;
    }
  }
  return inside;
}

double signed_area(const std::vector<P2>& poly) {
  double sum = 0.0;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    sum += poly[j].x * poly[i].y - poly[i].x * poly[j].y;
  }
  return sum / 2.0;
}

struct Rect {
  double x0, y0, x1, y1;
};

bool rect_touches_polygon(const Rect& r, const std::vector<P2>& poly) {
  for (const P2& v : poly) {
    if (v.x >= r.x0 && v.x <= r.x1 && v.y >= r.y0 && v.y <= r.y1) return true;
  }
  const std::array<P2, 4> corners{P2{r.x0, r.y0}, P2{r.x1, r.y0},
                                  P2{r.x1, r.y1}, P2{r.x0, r.y1}};
  for (const P2& c : corners) {
    if (point_in_polygon(c, poly)) return true;
  }
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    for (std::size_t k = 0; k < 4; ++k) {
      if (segments_intersect(poly[j], poly[i], corners[k], corners[(k + 1) % 4])) {
        return true;
      }
    }
  }
  return false;
}

// Sutherland-Hodgman against one axis-aligned half plane.
template <typename Inside, typename Cut>
std::vector<P2> clip_half(const std::vector<P2>& in, Inside inside, Cut cut) {
  std::vector<P2> out;
  if (in.empty()) return out;
  P2 prev = in.back();
  bool prev_in = inside(prev);
  for (const P2& cur : in) {
    const bool cur_in = inside(cur);
    if (cur_in != prev_in) out.push_back(cut(prev, cur));
    if (cur_in) out.push_back(cur);
    prev = cur;
    prev_in = cur_in;
  }
  return out;
}

double overlap_area(const Rect& r, const std::vector<P2>& poly) {
  auto at_x = [](P2 a, P2 b, double x) {
    return P2{x, a.y + (x - a.x) / (b.x - a.x) * (b.y - a.y)};
  };
  auto at_y = [](P2 a, P2 b, double y) {
    return P2{a.x + (y - a.y) / (b.y - a.y) * (b.x - a.x), y};
  };
  std::vector<P2> p = poly;
  p = clip_half(p, [&](P2 q) { return q.x >= r.x0; },
                [&](P2 a, P2 b) { return at_x(a, b, r.x0); });
  p = clip_half(p, [&](P2 q) { return q.x <= r.x1; },
                [&](P2 a, P2 b) { return at_x(a, b, r.x1); });
  p = clip_half(p, [&](P2 q) { return q.y >= r.y0; },
                [&](P2 a, P2 b) { return at_y(a, b, r.y0); });
  p = clip_half(p, [&](P2 q) { return q.y <= r.y1; },
                [&](P2 a, P2 b) { return at_y(a, b, r.y1); });
  if (p.size() < 3) return 0.0;
  return std::abs(signed_area(p));
}

bool self_intersecting(const std::vector<P2>& poly) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const P2 a = poly[i];
    const P2 b = poly[(i + 1) % n];
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      const P2 c = poly[j];
      const P2 d = poly[(j + 1) % n];
      if (adjacent) {
        // Adjacent edges may only share their common vertex; a collinear
        // fold-back overlaps.
        const P2 shared = (j == i + 1) ? b : a;
        const P2 other_ab = (j == i + 1) ? a : b;
        const P2 other_cd = (j == i + 1) ? d : c;
        if (cross(shared, other_ab, other_cd) == 0.0 &&
            (on_segment(other_cd, shared, other_ab) ||
             on_segment(other_ab, shared, other_cd))) {
          return true;
        }
        continue;
      }
      if (segments_intersect(a, b, c, d)) return true;
    }
  }
  return false;
}

}  // namespace

void validate(GeoPoint p) {
  if (!std::isfinite(p.lat) || !std::isfinite(p.lng) || p.lat < -90.0 ||
      p.lat > 90.0 || p.lng < -180.0 || p.lng > 180.0) {
    throw Error(ErrorCode::kInvalidInput,
                "coordinate out of range: (" + std::to_string(p.lat) + ", " +
                    std::to_string(p.lng) + ")");
  }
}

Geocode Geocode::parse(std::string_view text) {
  if (text.size() != kLength) {
    throw Error(ErrorCode::kInvalidGeocode,
                "geocode must have 6 characters: '" + std::string(text) + "'");
  }
  Geocode code;
  for (std::size_t i = 0; i < kLength; ++i) {
    if (alphabet_index(text[i]) < 0) {
      throw Error(ErrorCode::kInvalidGeocode,
                  "character outside alphabet in '" + std::string(text) + "'");
    }
    code.digits_[i] = text[i];
  }
  if (alphabet_index(text[0]) > 8) {
    throw Error(ErrorCode::kInvalidGeocode,
                "latitude row out of range in '" + std::string(text) + "'");
  }
  if (alphabet_index(text[1]) > 17) {
    throw Error(ErrorCode::kInvalidGeocode,
                "longitude column out of range in '" + std::string(text) + "'");
  }
  return code;
}

Geocode Geocode::from_cell(int row, int col) {
  if (row < 0 || row >= kLatRows || col < 0 || col >= kLngCols) {
    throw Error(ErrorCode::kInvalidGeocode, "cell index out of range");
  }
  Geocode code;
  code.digits_ = {kAlphabet[row / 400], kAlphabet[col / 400],
                  kAlphabet[(row / 20) % 20], kAlphabet[(col / 20) % 20],
                  kAlphabet[row % 20], kAlphabet[col % 20]};
  return code;
}

Geocode Geocode::from_ordinal(std::uint32_t ordinal) {
  if (ordinal >= kCellCount) {
    throw Error(ErrorCode::kInvalidGeocode, "ordinal out of range");
  }
  static constexpr std::array<std::uint32_t, kLength> kRadix{9, 18, 20, 20, 20, 20};
  Geocode code;
  for (std::size_t i = kLength; i-- > 0;) {
    code.digits_[i] = kAlphabet[ordinal % kRadix[i]];
    ordinal /= kRadix[i];
  }
  return code;
}

int Geocode::row() const {
  return alphabet_index(digits_[0]) * 400 + alphabet_index(digits_[2]) * 20 +
         alphabet_index(digits_[4]);
}

int Geocode::col() const {
  return alphabet_index(digits_[1]) * 400 + alphabet_index(digits_[3]) * 20 +
         alphabet_index(digits_[5]);
}

std::uint32_t Geocode::ordinal() const {
  static constexpr std::array<std::uint32_t, kLength> kRadix{9, 18, 20, 20, 20, 20};
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < kLength; ++i) {
    v = v * kRadix[i] + static_cast<std::uint32_t>(alphabet_index(digits_[i]));
  }
  return v;
}

bool CellBounds::contains(GeoPoint p) const {
  const auto lat = to_nano(p.lat);
  const auto lng = to_nano(p.lng);
  const auto s = to_nano(south);
  const auto w = to_nano(west);
  const bool lat_ok = lat >= s && (lat < s + kNanoPerCell ||
                                   (south >= 89.95 - 1e-9 && p.lat <= 90.0));
  return lat_ok && lng >= w && lng < w + kNanoPerCell;
}

Geocode encode(GeoPoint p) {
  validate(p);
  const int row = std::min(
      floor_div(to_nano(p.lat + 90.0), kNanoPerCell), kLatRows - 1);
  int col = floor_div(to_nano(p.lng + 180.0), kNanoPerCell);
  col = ((col % kLngCols) + kLngCols) % kLngCols;
  return Geocode::from_cell(row, col);
}

CellBounds decode(const Geocode& code) {
  return {row_south(code.row()), col_west(code.col())};
}

std::vector<Geocode> neighbors(const Geocode& code) {
  std::vector<Geocode> out;
  out.reserve(8);
  const int row = code.row();
  const int col = code.col();
  for (int dr = -1; dr <= 1; ++dr) {
    const int r = row + dr;
    if (r < 0 || r >= kLatRows) continue;
    for (int dc = -1; dc <= 1; ++dc) {
      if (dr == 0 && dc == 0) continue;
      out.push_back(Geocode::from_cell(r, (col + dc + kLngCols) % kLngCols));
    }
  }
  return out;
}

double distance_m(GeoPoint a, GeoPoint b) {
  return angle_between(to_vec(a), to_vec(b)) * kEarthRadiusM;
}

GeoPoint interpolate(GeoPoint a, GeoPoint b, double fraction) {
  const Vec3 va = to_vec(a);
  const Vec3 vb = to_vec(b);
  const double angle = angle_between(va, vb);
  if (angle == 0.0) return a;
  const double s = std::sin(angle);
  const double wa = std::sin((1.0 - fraction) * angle) / s;
  const double wb = std::sin(fraction * angle) / s;
  return to_point({wa * va.x + wb * vb.x, wa * va.y + wb * vb.y,
                   wa * va.z + wb * vb.z});
}

GeoPoint destination(GeoPoint from, double bearing_deg, double dist_m) {
  const double lat1 = from.lat * kDegToRad;
  const double lng1 = from.lng * kDegToRad;
  const double brg = bearing_deg * kDegToRad;
  const double d = dist_m / kEarthRadiusM;
  const double lat2 = std::asin(std::sin(lat1) * std::cos(d) +
                                std::cos(lat1) * std::sin(d) * std::cos(brg));
  const double lng2 =
      lng1 + std::atan2(std::sin(brg) * std::sin(d) * std::cos(lat1),
                        std::cos(d) - std::sin(lat1) * std::sin(lat2));
  return normalize({lat2 * kRadToDeg, std::remainder(lng2 * kRadToDeg, 360.0)});
}

std::vector<Geocode> cover_route(std::span<const GeoPoint> waypoints,
                                 double step_m) {
  if (waypoints.empty()) {
    throw Error(ErrorCode::kInvalidInput, "route needs at least one waypoint");
  }
  if (!(step_m > 0.0) || step_m > kMaxRouteStepM) {
    throw Error(ErrorCode::kInvalidInput, "route step must be in (0, 1000] m");
  }
  for (const GeoPoint& p : waypoints) validate(p);

  std::vector<Geocode> out;
  auto push = [&out](GeoPoint p) {
    const Geocode c = encode(normalize(p));
    if (out.empty() || out.back() != c) out.push_back(c);
  };

  push(waypoints.front());
  for (std::size_t k = 0; k + 1 < waypoints.size(); ++k) {
    const GeoPoint a = waypoints[k];
    const GeoPoint b = waypoints[k + 1];
    const Vec3 va = to_vec(a);
    const Vec3 vb = to_vec(b);
    const double angle = angle_between(va, vb);
    if (std::numbers::pi - angle < 1e-12) {
      throw Error(ErrorCode::kInvalidInput,
                  "antipodal waypoints have no unique great circle");
    }
    const long n = std::max(1L, static_cast<long>(std::ceil(angle * kEarthRadiusM / step_m)));
    for (long i = 1; i < n; ++i) push(slerp_step(va, vb, angle, i, n));
    push(b);
  }
  return out;
}

std::set<Geocode> cover_area(std::span<const GeoPoint> polygon, CoverRule rule) {
  if (polygon.size() < 3) {
    throw Error(ErrorCode::kInvalidInput, "polygon needs at least 3 vertices");
  }
  for (const GeoPoint& p : polygon) validate(p);

  // Unwrap longitudes so every edge takes the short way round.
  std::vector<P2> poly;
  poly.reserve(polygon.size());
  poly.push_back({polygon[0].lng, polygon[0].lat});
  for (std::size_t i = 1; i < polygon.size(); ++i) {
    double x = polygon[i].lng;
    const double prev = poly.back().x;
    while (x - prev > 180.0) x -= 360.0;
    while (x - prev < -180.0) x += 360.0;
    poly.push_back({x, polygon[i].lat});
  }
  double closing = polygon[0].lng;
  while (closing - poly.back().x > 180.0) closing -= 360.0;
  while (closing - poly.back().x < -180.0) closing += 360.0;
  if (std::abs(closing - poly.front().x) > 1e-9) {
    throw Error(ErrorCode::kInvalidInput, "polygons enclosing a pole are not supported");
  }

  if (std::abs(signed_area(poly)) < 1e-18) {
    throw Error(ErrorCode::kInvalidInput, "degenerate polygon (zero area)");
  }
  if (self_intersecting(poly)) {
    throw Error(ErrorCode::kInvalidInput, "polygon is self-intersecting");
  }

  double min_x = poly[0].x, max_x = poly[0].x;
  double min_y = poly[0].y, max_y = poly[0].y;
  for (const P2& v : poly) {
    min_x = std::min(min_x, v.x);
    max_x = std::max(max_x, v.x);
    min_y = std::min(min_y, v.y);
    max_y = std::max(max_y, v.y);
  }
  const int row_lo = std::max(0, static_cast<int>(std::floor((min_y + 90.0) * kBase)) - 1);
  const int row_hi = std::min(kLatRows - 1, static_cast<int>(std::floor((max_y + 90.0) * kBase)) + 1);
  const int col_lo = static_cast<int>(std::floor((min_x + 180.0) * kBase)) - 1;
  const int col_hi = static_cast<int>(std::floor((max_x + 180.0) * kBase)) + 1;

  std::set<Geocode> out;
  for (int row = row_lo; row <= row_hi; ++row) {
    const double y0 = row_south(row);
    const double y1 = row_south(row + 1);
    for (int col = col_lo; col <= col_hi; ++col) {
      const Rect r{col_west(col), y0, col_west(col + 1), y1};
      const bool hit = rule == CoverRule::kClosed
                           ? rect_touches_polygon(r, poly)
                           : overlap_area(r, poly) > 1e-12;
      if (hit) {
        out.insert(Geocode::from_cell(row, ((col % kLngCols) + kLngCols) % kLngCols));
      }
    }
  }

  if (rule == CoverRule::kClosed) {
    for (std::size_t i = 0; i < polygon.size(); ++i) {
      const std::array<GeoPoint, 2> edge{polygon[i], polygon[(i + 1) % polygon.size()]};
      for (const Geocode& c : cover_route(edge)) out.insert(c);
    }
  }
  return out;
}

}  // namespace geokey::geo
