#pragma once

// Six-digit base-20 grid cells in the Open Location Code convention:
// 20 degree, 1 degree and 0.05 degree resolution, latitude and longitude
// digits interleaved pairwise. 3600 latitude rows x 7200 longitude columns.

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <iterator>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace geokey::geo {

inline constexpr std::string_view kAlphabet = "23456789CFGHJMPQRVWX";
inline constexpr int kBase = 20;
inline constexpr int kLatRows = 3600;
inline constexpr int kLngCols = 7200;
inline constexpr std::uint32_t kCellCount = 25'920'000;
inline constexpr double kCellDegrees = 0.05;
inline constexpr double kEarthRadiusM = 6'371'000.0;
inline constexpr double kDefaultRouteStepM = 500.0;
inline constexpr double kMaxRouteStepM = 1000.0;

struct GeoPoint {
  double lat = 0.0;
  double lng = 0.0;
};

// Throws Error(kInvalidInput) unless lat in [-90, 90] and lng in [-180, 180].
void validate(GeoPoint p);

class Geocode {
 public:
  static constexpr std::size_t kLength = 6;

  // Parses the 6-character text form. Throws Error(kInvalidGeocode).
  static Geocode parse(std::string_view text);
  // row in [0, 3600) counted from the south pole, col in [0, 7200) from
  // the antimeridian.
  static Geocode from_cell(int row, int col);
  // Position in enumeration (lexicographic) order, [0, kCellCount).
  static Geocode from_ordinal(std::uint32_t ordinal);

  std::string_view str() const { return {digits_.data(), digits_.size()}; }
  const std::array<char, kLength>& digits() const { return digits_; }
  int row() const;
  int col() const;
  std::uint32_t ordinal() const;

  friend auto operator<=>(const Geocode&, const Geocode&) = default;

 private:
  Geocode() = default;
  std::array<char, kLength> digits_{};
};

struct CellBounds {
  static constexpr double kLatExtent = kCellDegrees;
  static constexpr double kLngExtent = kCellDegrees;

  double south = 0.0;
  double west = 0.0;

  double north() const { return south + kLatExtent; }
  double east() const { return west + kLngExtent; }
  GeoPoint center() const {
    return {south + kLatExtent / 2, west + kLngExtent / 2};
  }
  // Half-open membership, matching encode().
  bool contains(GeoPoint p) const;
};

Geocode encode(GeoPoint p);
CellBounds decode(const Geocode& code);

// Edge- and corner-adjacent cells; longitude wraps, rows beyond the poles
// are dropped. Returns 8 cells, or 5 for the polar rows.
std::vector<Geocode> neighbors(const Geocode& code);

// Cells visited by great-circle segments between consecutive waypoints,
// sampled at no more than step_m metres, with consecutive repeats removed.
std::vector<Geocode> cover_route(std::span<const GeoPoint> waypoints,
                                 double step_m = kDefaultRouteStepM);

enum class CoverRule {
  // Every cell whose closed bounds touch the closed polygon, plus the cells
  // of the great-circle route along each polygon edge.
  kClosed,
  // Cells sharing positive area with the polygon (half-open partition).
  kInterior,
};

// Polygon edges are straight lines in (lat, lng); the polygon may cross the
// antimeridian but must not enclose a pole.
std::set<Geocode> cover_area(std::span<const GeoPoint> polygon,
                             CoverRule rule = CoverRule::kClosed);

// Every valid geocode exactly once, in lexicographic order.
class GeocodeRange {
 public:
  class iterator {
   public:
    using iterator_category = std::forward_iterator_tag;
    using value_type = Geocode;
    using difference_type = std::ptrdiff_t;
    using pointer = void;
    using reference = Geocode;

    iterator() = default;
    explicit iterator(std::uint32_t ordinal) : ordinal_(ordinal) {}

    Geocode operator*() const { return Geocode::from_ordinal(ordinal_); }
    iterator& operator++() {
      ++ordinal_;
      return *this;
    }
    iterator operator++(int) {
      iterator tmp = *this;
      ++ordinal_;
      return tmp;
    }
    friend bool operator==(const iterator&, const iterator&) = default;

   private:
    std::uint32_t ordinal_ = 0;
  };

  iterator begin() const { return iterator(0); }
  iterator end() const { return iterator(kCellCount); }
  std::uint32_t size() const { return kCellCount; }
};

inline GeocodeRange enumerate_all() { return {}; }

// Great-circle helpers on a sphere of radius kEarthRadiusM.
double distance_m(GeoPoint a, GeoPoint b);
GeoPoint interpolate(GeoPoint a, GeoPoint b, double fraction);
// Point reached after travelling distance_m from `from` on initial bearing
// bearing_deg (clockwise from north).
GeoPoint destination(GeoPoint from, double bearing_deg, double distance_m);

}  // namespace geokey::geo

template <>
struct std::hash<geokey::geo::Geocode> {
  std::size_t operator()(const geokey::geo::Geocode& c) const noexcept {
    return std::hash<std::uint32_t>{}(c.ordinal());
  }
};
