#include "geokey/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <queue>
#include <random>
#include <sstream>
#include <tuple>

#include "geokey/authz.hpp"
#include "geokey/error.hpp"
#include "geokey/secrets.hpp"

namespace geokey::sim {

namespace {

constexpr double kSecondsPerDay = 86400.0;

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kFormat, "scenario: bad number for " + what + ": '" + s + "'");
  }
}

Role parse_role(const std::string& s) {
  if (s == "verifier") return Role::kVerifier;
  if (s == "prover") return Role::kProver;
  if (s == "adversary") return Role::kAdversary;
  if (s == "forger") return Role::kForger;
  throw Error(ErrorCode::kFormat, "scenario: unknown role '" + s + "'");
}

std::shared_ptr<const keystore::KeyStore> load_store(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kIo, "scenario: keystore not found: " + path.string());
  }
  const Bytes data = secrets::read_file(path);
  auto store = std::make_shared<keystore::KeyStore>();
  std::size_t off = 0;
  while (off < data.size()) {
    const ByteView rest = ByteView(data).subspan(off);
    if (rest.size() < keystore::kHeaderSize) {
      throw Error(ErrorCode::kFormat, "scenario: truncated keystore " + path.string());
    }
    const std::size_t n =
        static_cast<std::size_t>(keystore::size_report(get_u64_be(rest.data() + 21)));
    if (n > rest.size()) throw Error(ErrorCode::kFormat, "scenario: truncated keystore");
    store->import_bundle(rest.first(n));
    off += n;
  }
  return store;
}

}  // namespace

ScenarioSpec parse_scenario(const std::string& text, const std::filesystem::path& base_dir) {
  ScenarioSpec spec;
  std::map<std::filesystem::path, std::shared_ptr<const keystore::KeyStore>> stores;
  std::istringstream in(text);
  std::string line;
  bool header = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream words(line);
    std::string key;
    if (!(words >> key)) continue;
    const std::string where = " (line " + std::to_string(lineno) + ")";
    if (!header) {
      std::string version;
      words >> version;
      if (key != "geokey-scenario" || version != "1") {
        throw Error(ErrorCode::kFormat, "scenario: expected 'geokey-scenario 1' header" + where);
      }
      header = true;
      continue;
    }
    if (key == "asset") {
      AssetSpec a;
      std::string tok;
      bool has_role = false;
      while (words >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) {
          throw Error(ErrorCode::kFormat, "scenario: expected key=value, got '" + tok + "'" + where);
        }
        const std::string k = tok.substr(0, eq);
        const std::string v = tok.substr(eq + 1);
        if (k == "name") {
          a.name = v;
        } else if (k == "role") {
          a.role = parse_role(v);
          has_role = true;
        } else if (k == "keystore") {
          if (v != "none") {
            const auto path = (base_dir / v).lexically_normal();
            auto& slot = stores[path];
            if (!slot) slot = load_store(path);
            a.store = slot;
          }
        } else if (k == "speed") {
          a.speed_mps = to_double(v, "speed");
        } else if (k == "depart") {
          a.depart_s = to_double(v, "depart");
        } else if (k == "claim") {
          a.claim = geo::Geocode::parse(v);
        } else if (k == "route") {
          for (const std::string& wp : split(v, ';')) {
            const auto parts = split(wp, ',');
            if (parts.size() != 2) {
              throw Error(ErrorCode::kFormat, "scenario: waypoint must be LAT,LNG" + where);
            }
            const geo::GeoPoint p{to_double(parts[0], "lat"), to_double(parts[1], "lng")};
            geo::validate(p);
            a.route.push_back(p);
          }
        } else {
          throw Error(ErrorCode::kFormat, "scenario: unknown asset field '" + k + "'" + where);
        }
      }
      if (a.name.empty() || !has_role || a.route.empty()) {
        throw Error(ErrorCode::kFormat, "scenario: asset needs name, role and route" + where);
      }
      if (a.role == Role::kAdversary && !a.claim) {
        throw Error(ErrorCode::kFormat, "scenario: adversary needs claim=GEOCODE" + where);
      }
      spec.assets.push_back(std::move(a));
      continue;
    }
    std::string value;
    if (!(words >> value)) {
      throw Error(ErrorCode::kFormat, "scenario: missing value for '" + key + "'" + where);
    }
    if (key == "seed") {
      spec.seed = static_cast<std::uint64_t>(to_double(value, key));
    } else if (key == "loss_prob") {
      spec.loss_prob = to_double(value, key);
    } else if (key == "duration_s") {
      spec.duration_s = to_double(value, key);
    } else if (key == "start_day") {
      spec.start_day = static_cast<std::uint32_t>(to_double(value, key));
    } else if (key == "sound_speed") {
      spec.sound_speed = to_double(value, key);
    } else if (key == "challenge_interval_s") {
      spec.challenge_interval_s = to_double(value, key);
    } else if (key == "clock_skew_s") {
      spec.clock_skew_s = to_double(value, key);
    } else {
      throw Error(ErrorCode::kFormat, "scenario: unknown directive '" + key + "'" + where);
    }
  }
  if (!header) throw Error(ErrorCode::kFormat, "scenario: empty file");
  if (spec.loss_prob < 0.0 || spec.loss_prob >= 1.0) {
    throw Error(ErrorCode::kFormat, "scenario: loss_prob must be in [0, 1)");
  }
  if (!(spec.duration_s > 0.0) || !(spec.challenge_interval_s > 0.0) || !(spec.sound_speed > 0.0)) {
    throw Error(ErrorCode::kFormat, "scenario: duration, interval and sound speed must be positive");
  }
  return spec;
}

ScenarioSpec load_scenario(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::kIo, "cannot open scenario " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), file.parent_path());
}

Trajectory::Trajectory(std::vector<geo::GeoPoint> route, double speed_mps, double depart_s)
    : route_(std::move(route)), speed_(speed_mps), depart_(depart_s) {
  if (route_.empty()) throw Error(ErrorCode::kInvalidInput, "trajectory needs a waypoint");
  cumulative_.push_back(0.0);
  for (std::size_t i = 1; i < route_.size(); ++i) {
    cumulative_.push_back(cumulative_.back() + geo::distance_m(route_[i - 1], route_[i]));
  }
}

geo::GeoPoint Trajectory::at(double t_s) const {
  if (route_.size() == 1 || speed_ <= 0.0) return route_.front();
  const double s = std::clamp((t_s - depart_) * speed_, 0.0, cumulative_.back());
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
  if (it == cumulative_.end()) return route_.back();
  const std::size_t leg = static_cast<std::size_t>(it - cumulative_.begin()) - 1;
  const double len = cumulative_[leg + 1] - cumulative_[leg];
  if (len <= 0.0) return route_[leg];
  return geo::interpolate(route_[leg], route_[leg + 1], (s - cumulative_[leg]) / len);
}

std::vector<geo::GeoPoint> zigzag_route(geo::GeoPoint start, double length_m, double leg_m,
                                        double heading_deg, double swing_deg) {
  if (!(length_m > 0.0) || !(leg_m > 0.0)) {
    throw Error(ErrorCode::kInvalidInput, "route length and leg must be positive");
  }
  geo::validate(start);
  std::vector<geo::GeoPoint> out{start};
  double remaining = length_m;
  for (int i = 0; remaining > 0.0; ++i) {
    const double d = std::min(leg_m, remaining);
    const double bearing = heading_deg + (i % 2 == 0 ? swing_deg : -swing_deg);
    out.push_back(geo::destination(out.back(), bearing, d));
    remaining -= d;
  }
  return out;
}

// ---- simulation ----

namespace {

enum class EventKind { kChallenge, kChallengeArrive, kResponseArrive, kTimeout };

struct Event {
  double t;
  std::uint64_t seq;
  EventKind kind;
  std::size_t exchange;

  bool operator>(const Event& o) const { return std::tie(t, seq) > std::tie(o.t, o.seq); }
};

struct Exchange {
  std::size_t verifier;
  std::size_t prover;
  double sent_at;
  authz::ChallengePacket challenge;
  authz::ResponsePacket response;
  geo::Geocode attributed_cell = geo::Geocode::from_cell(0, 0);
  bool closed = false;
};

class Simulator {
 public:
  Simulator(const ScenarioSpec& spec, std::ostream* transcript)
      : spec_(spec), transcript_(transcript), rng_(spec.seed), caches_(spec.assets.size()) {
    std::uniform_real_distribution<double> skew(-spec.clock_skew_s, spec.clock_skew_s);
    for (const AssetSpec& a : spec.assets) {
      tracks_.emplace_back(a.route, a.speed_mps, a.depart_s);
      skew_s_.push_back(spec.clock_skew_s > 0.0 ? skew(rng_) : 0.0);
    }
  }

  ScenarioResult run() {
    schedule_challenges();
    while (!queue_.empty()) {
      const Event ev = queue_.top();
      queue_.pop();
      switch (ev.kind) {
        case EventKind::kChallenge: on_challenge(ev); break;
        case EventKind::kChallengeArrive: on_challenge_arrive(ev); break;
        case EventKind::kResponseArrive: on_response_arrive(ev); break;
        case EventKind::kTimeout: on_timeout(ev); break;
      }
    }
    Metrics& m = result_.metrics;
    m.distinct_cells_accepted = accepted_cells_.size();
    if (m.delay_samples > 0) m.delay_mean_s = delay_sum_ / static_cast<double>(m.delay_samples);
    return std::move(result_);
  }

 private:
  // Simulated time 0 is clock_skew_s into start_day, so no clock reads
  // earlier than start_day.
  double abs_seconds(std::size_t asset, double t) const {
    return spec_.start_day * kSecondsPerDay + spec_.clock_skew_s + t + skew_s_[asset];
  }
  std::uint64_t clock_ticks(std::size_t asset, double t) const {
    return static_cast<std::uint64_t>(std::floor(abs_seconds(asset, t) / authz::kTickSeconds));
  }
  std::uint32_t day(std::size_t asset, double t) const {
    return static_cast<std::uint32_t>(std::floor(abs_seconds(asset, t) / kSecondsPerDay));
  }
  geo::Geocode cell(std::size_t asset, double t) const {
    return geo::encode(tracks_[asset].at(t));
  }

  bool in_range(std::size_t a, std::size_t b, double t) const {
    const geo::Geocode ca = cell(a, t);
    const geo::Geocode cb = cell(b, t);
    if (ca == cb) return true;
    const auto n = geo::neighbors(ca);
    return std::find(n.begin(), n.end(), cb) != n.end();
  }

  double delay(std::size_t a, std::size_t b, double t) const {
    return geo::distance_m(tracks_[a].at(t), tracks_[b].at(t)) / spec_.sound_speed;
  }

  bool lost() {
    if (spec_.loss_prob <= 0.0) return false;
    return std::bernoulli_distribution(spec_.loss_prob)(rng_);
  }

  void push(double t, EventKind kind, std::size_t exchange) {
    queue_.push({t, seq_++, kind, exchange});
  }

  void schedule_challenges() {
    std::vector<std::size_t> verifiers, provers;
    for (std::size_t i = 0; i < spec_.assets.size(); ++i) {
      (spec_.assets[i].role == Role::kVerifier ? verifiers : provers).push_back(i);
    }
    const auto rounds =
        static_cast<std::uint64_t>(std::ceil(spec_.duration_s / spec_.challenge_interval_s));
    for (std::uint64_t k = 0; k < rounds; ++k) {
      const double base = static_cast<double>(k) * spec_.challenge_interval_s;
      for (std::size_t v : verifiers) {
        // Stagger by one tick per prover so a verifier never reuses a
        // timestamp.
        for (std::size_t j = 0; j < provers.size(); ++j) {
          const double t = base + static_cast<double>(j) * authz::kTickSeconds;
          if (t >= spec_.duration_s) continue;
          exchanges_.push_back({v, provers[j], t, {}, {}});
          push(t, EventKind::kChallenge, exchanges_.size() - 1);
        }
      }
    }
  }

  void log(const Exchange& x, double t, std::string_view outcome, double d = -1.0) {
    if (!transcript_) return;
    auto& out = *transcript_;
    out << std::fixed << std::setprecision(3) << "t=" << t
        << " verifier=" << spec_.assets[x.verifier].name
        << " prover=" << spec_.assets[x.prover].name << " ts=" << x.challenge.timestamp_ticks
        << " nonce=" << x.challenge.nonce << " outcome=" << outcome;
    if (outcome == "accepted" || outcome.starts_with("rejected")) {
      out << " cell=" << x.attributed_cell.str();
    }
    if (d >= 0.0) out << " delay_s=" << d;
    out << '\n';
  }

  void record_delay(double d) {
    Metrics& m = result_.metrics;
    ++m.delay_samples;
    delay_sum_ += d;
    m.delay_max_s = std::max(m.delay_max_s, d);
  }

  void on_challenge(const Event& ev) {
    Exchange& x = exchanges_[ev.exchange];
    if (!in_range(x.verifier, x.prover, ev.t)) {
      x.closed = true;  // nobody to hear it
      return;
    }
    x.challenge = authz::make_challenge(clock_ticks(x.verifier, ev.t), rng_);
    ++result_.metrics.challenges_sent;
    push(ev.t + authz::kFreshnessWindowTicks * authz::kTickSeconds, EventKind::kTimeout,
         ev.exchange);
    if (lost()) {
      ++result_.metrics.challenges_lost;
      log(x, ev.t, "challenge-lost");
      return;
    }
    const double d = delay(x.verifier, x.prover, ev.t);
    record_delay(d);
    push(ev.t + d, EventKind::kChallengeArrive, ev.exchange);
  }

  void on_challenge_arrive(const Event& ev) {
    Exchange& x = exchanges_[ev.exchange];
    const AssetSpec& p = spec_.assets[x.prover];
    const geo::Geocode own = cell(x.prover, ev.t);
    std::optional<authz::ResponsePacket> resp;
    switch (p.role) {
      case Role::kProver:
        if (p.store) resp = authz::respond(x.challenge, *p.store, own, day(x.prover, ev.t));
        break;
      case Role::kAdversary:
        if (p.store) resp = authz::respond(x.challenge, *p.store, *p.claim, day(x.prover, ev.t));
        break;
      case Role::kForger:
        resp = authz::ResponsePacket{static_cast<std::uint32_t>(rng_())};
        break;
      case Role::kVerifier:
        break;
    }
    if (!resp) {
      ++result_.metrics.silent;
      return;
    }
    x.response = *resp;
    // The verifier localises the responder acoustically; it checks the
    // proof against the cell the responder is actually in.
    x.attributed_cell = own;
    ++result_.metrics.responses_sent;
    if (lost()) {
      ++result_.metrics.responses_lost;
      log(x, ev.t, "response-lost");
      return;
    }
    const double d = delay(x.prover, x.verifier, ev.t);
    record_delay(d);
    push(ev.t + d, EventKind::kResponseArrive, ev.exchange);
  }

  void on_response_arrive(const Event& ev) {
    Exchange& x = exchanges_[ev.exchange];
    const AssetSpec& v = spec_.assets[x.verifier];
    AssetOutcome& outcome = result_.by_prover[spec_.assets[x.prover].name];
    Metrics& m = result_.metrics;
    authz::Verdict verdict{false, authz::RejectReason::kNoKey, std::nullopt};
    if (v.store) {
      verdict = authz::verify(x.challenge, x.response, *v.store, x.attributed_cell,
                              clock_ticks(x.verifier, ev.t), day(x.verifier, ev.t),
                              caches_[x.verifier]);
    }
    if (verdict.key_interval) {
      const auto key = std::make_tuple(x.verifier, x.challenge.timestamp_ticks,
                                       verdict.key_interval->start_day,
                                       verdict.key_interval->end_day);
      if (!seen_pairs_.insert(key).second) ++m.repeated_timestamp_epoch_pairs;
    }
    x.closed = true;
    if (verdict.accepted) {
      ++m.accepted;
      ++outcome.accepted;
      outcome.accepted_cells.insert(x.attributed_cell);
      accepted_cells_.insert(x.attributed_cell);
      log(x, ev.t, "accepted", ev.t - x.sent_at);
      return;
    }
    ++outcome.rejected;
    outcome.rejected_cells.insert(x.attributed_cell);
    switch (verdict.reason) {
      case authz::RejectReason::kBadMac: ++m.rejected_bad_mac; break;
      case authz::RejectReason::kStale: ++m.rejected_stale; break;
      case authz::RejectReason::kReplayed: ++m.rejected_replayed; break;
      case authz::RejectReason::kNoKey: ++m.rejected_no_key; break;
    }
    log(x, ev.t, "rejected-" + std::string(authz::to_string(verdict.reason)), ev.t - x.sent_at);
  }

  void on_timeout(const Event& ev) {
    Exchange& x = exchanges_[ev.exchange];
    if (x.closed) return;
    ++result_.metrics.timeouts;
    ++result_.by_prover[spec_.assets[x.prover].name].timeouts;
    log(x, ev.t, "timeout-unauthorized");
  }

  const ScenarioSpec& spec_;
  std::ostream* transcript_;
  std::mt19937_64 rng_;
  std::vector<Trajectory> tracks_;
  std::vector<double> skew_s_;
  std::vector<authz::ReplayCache> caches_;
  std::vector<Exchange> exchanges_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
  std::uint64_t seq_ = 0;
  double delay_sum_ = 0.0;
  std::set<geo::Geocode> accepted_cells_;
  std::set<std::tuple<std::size_t, std::uint32_t, std::uint32_t, std::uint32_t>> seen_pairs_;
  ScenarioResult result_;
};

}  // namespace

ScenarioResult run_scenario(const ScenarioSpec& spec, std::ostream* transcript) {
  if (spec.loss_prob < 0.0 || spec.loss_prob >= 1.0) {
    throw Error(ErrorCode::kInvalidInput, "loss_prob must be in [0, 1)");
  }
  if (!(spec.duration_s > 0.0) || !(spec.challenge_interval_s > 0.0) ||
      !(spec.sound_speed > 0.0)) {
    throw Error(ErrorCode::kInvalidInput,
                "duration, challenge interval and sound speed must be positive");
  }
  if (!(spec.clock_skew_s >= 0.0)) {
    throw Error(ErrorCode::kInvalidInput, "clock_skew_s must not be negative");
  }
  for (const AssetSpec& a : spec.assets) {
    if (a.route.empty()) throw Error(ErrorCode::kInvalidInput, "asset " + a.name + " has no position");
    if (a.role == Role::kAdversary && !a.claim) {
      throw Error(ErrorCode::kInvalidInput, "adversary " + a.name + " has no claimed cell");
    }
  }
  return Simulator(spec, transcript).run();
}

std::string to_json(const Metrics& m) {
  nlohmann::ordered_json j{
      {"challenges_sent", m.challenges_sent},
      {"challenges_lost", m.challenges_lost},
      {"responses_sent", m.responses_sent},
      {"responses_lost", m.responses_lost},
      {"silent", m.silent},
      {"accepted", m.accepted},
      {"rejected_bad_mac", m.rejected_bad_mac},
      {"rejected_stale", m.rejected_stale},
      {"rejected_replayed", m.rejected_replayed},
      {"rejected_no_key", m.rejected_no_key},
      {"timeouts", m.timeouts},
      {"distinct_cells_accepted", m.distinct_cells_accepted},
      {"repeated_timestamp_epoch_pairs", m.repeated_timestamp_epoch_pairs},
      {"delay_samples", m.delay_samples},
      {"delay_mean_s", m.delay_mean_s},
      {"delay_max_s", m.delay_max_s},
  };
  return j.dump();
}

}  // namespace geokey::sim
