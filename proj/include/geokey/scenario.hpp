#pragma once

// Discrete-event simulation of the authorization exchange over an acoustic
// channel: propagation delay = distance / sound speed, delivery only between
// the same or adjacent cells, independent per-packet loss.
//
// Scenario text format, version 1 (one directive per line, '#' comments):
//
//   geokey-scenario 1
//   seed 42
//   loss_prob 0.0
//   duration_s 86400
//   start_day 19700
//   sound_speed 1500
//   challenge_interval_s 60
//   clock_skew_s 2
//   asset name=NAME role=verifier|prover|adversary|forger
//         [keystore=PATH] [speed=M_PER_S] [depart=S] [claim=GEOCODE]
//         route=LAT,LNG[;LAT,LNG...]
//
// Keystore paths are bundle or store files, relative to the scenario file.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "geokey/geocell.hpp"
#include "geokey/keystore.hpp"

namespace geokey::sim {

enum class Role {
  kVerifier,
  kProver,     // answers with its own cell's key, silent without one
  kAdversary,  // answers with a captured key for `claim`, wherever it is
  kForger,     // answers with a random MAC
};

struct AssetSpec {
  std::string name;
  Role role = Role::kProver;
  std::vector<geo::GeoPoint> route;  // one point: stationary
  double speed_mps = 0.0;
  double depart_s = 0.0;
  std::shared_ptr<const keystore::KeyStore> store;
  std::optional<geo::Geocode> claim;
};

struct ScenarioSpec {
  std::uint64_t seed = 1;
  double loss_prob = 0.0;
  double duration_s = 3600.0;
  std::uint32_t start_day = 0;
  double sound_speed = 1500.0;
  double challenge_interval_s = 60.0;
  // Each asset's clock offset is drawn uniformly from +-clock_skew_s.
  // Simulated time 0 is clock_skew_s seconds into start_day.
  double clock_skew_s = 2.0;
  std::vector<AssetSpec> assets;
};

ScenarioSpec parse_scenario(const std::string& text,
                            const std::filesystem::path& base_dir = ".");
ScenarioSpec load_scenario(const std::filesystem::path& file);

struct Metrics {
  std::uint64_t challenges_sent = 0;
  std::uint64_t challenges_lost = 0;
  std::uint64_t responses_sent = 0;
  std::uint64_t responses_lost = 0;
  std::uint64_t silent = 0;
  std::uint64_t accepted = 0;
  std::uint64_t rejected_bad_mac = 0;
  std::uint64_t rejected_stale = 0;
  std::uint64_t rejected_replayed = 0;
  std::uint64_t rejected_no_key = 0;
  std::uint64_t timeouts = 0;
  std::uint64_t distinct_cells_accepted = 0;
  std::uint64_t repeated_timestamp_epoch_pairs = 0;
  std::uint64_t delay_samples = 0;
  double delay_mean_s = 0.0;
  double delay_max_s = 0.0;
};

struct AssetOutcome {
  std::uint64_t accepted = 0;
  std::uint64_t rejected = 0;
  std::uint64_t timeouts = 0;
  std::set<geo::Geocode> accepted_cells;
  std::set<geo::Geocode> rejected_cells;
};

struct ScenarioResult {
  Metrics metrics;
  std::map<std::string, AssetOutcome> by_prover;
};

// Deterministic for a given spec (including seed). Transcript lines are
// written to `transcript` when given.
ScenarioResult run_scenario(const ScenarioSpec& spec, std::ostream* transcript = nullptr);

std::string to_json(const Metrics& m);

// Position along a waypoint route at constant speed after `depart_s`.
class Trajectory {
 public:
  Trajectory(std::vector<geo::GeoPoint> route, double speed_mps, double depart_s);
  geo::GeoPoint at(double t_s) const;
  double length_m() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }

 private:
  std::vector<geo::GeoPoint> route_;
  std::vector<double> cumulative_;
  double speed_;
  double depart_;
};

// Deterministic zig-zag survey route of exactly length_m, legs of leg_m
// alternating heading_deg +- swing_deg.
std::vector<geo::GeoPoint> zigzag_route(geo::GeoPoint start, double length_m,
                                        double leg_m, double heading_deg,
                                        double swing_deg);

}  // namespace geokey::sim
