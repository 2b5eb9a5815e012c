#include "geokey/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "geokey/authority.hpp"
#include "geokey/bench.hpp"
#include "geokey/error.hpp"
#include "geokey/geocell.hpp"
#include "geokey/kdf.hpp"
#include "geokey/keystore.hpp"
#include "geokey/random.hpp"
#include "geokey/scenario.hpp"
#include "geokey/secrets.hpp"
#include "geokey/service.hpp"

namespace geokey::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr std::string_view kRedacted = "<redacted; pass --reveal to print key material>";

geo::GeoPoint parse_point(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) {
    throw Error(ErrorCode::kInvalidInput, "expected LAT,LNG but got '" + text + "'");
  }
  try {
    const geo::GeoPoint p{std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
    geo::validate(p);
    return p;
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::kInvalidInput, "expected LAT,LNG but got '" + text + "'");
  }
}

std::vector<geo::GeoPoint> parse_points(const std::vector<std::string>& texts) {
  std::vector<geo::GeoPoint> out;
  for (const auto& t : texts) out.push_back(parse_point(t));
  return out;
}

std::vector<geo::Geocode> parse_codes(const std::vector<std::string>& texts) {
  std::vector<geo::Geocode> out;
  for (const auto& t : texts) out.push_back(geo::Geocode::parse(t));
  return out;
}

keystore::LicenseeId parse_id(const std::string& hex) {
  const Bytes b = from_hex(hex);
  if (b.size() != 16) throw Error(ErrorCode::kInvalidInput, "identifier must be 32 hex characters");
  keystore::LicenseeId id;
  std::copy(b.begin(), b.end(), id.begin());
  return id;
}

// Master key from a key file or from a set of share files.
struct KeySource {
  std::string master_key;
  std::vector<std::string> shares;
  unsigned threshold = secrets::kThreshold;

  void add_options(CLI::App* app) {
    app->add_option("--master-key", master_key, "Master key file (GKMK)");
    app->add_option("--share", shares, "Share files (GKSH) to combine")->take_all();
    app->add_option("--threshold", threshold, "Shares required to combine")
        ->capture_default_str();
  }

  secrets::MasterKey load() const {
    if (!master_key.empty()) return secrets::parse_master_key(secrets::read_file(master_key));
    if (shares.empty()) {
      throw Error(ErrorCode::kServiceUnavailable, "no master key: pass --master-key or --share");
    }
    std::vector<secrets::Share> s;
    for (const auto& f : shares) s.push_back(secrets::parse_share(secrets::read_file(f)));
    return secrets::combine(s, threshold);
  }
};

void write_shares(const std::vector<secrets::Share>& shares, const fs::path& dir,
                  std::vector<std::string>& names) {
  for (const auto& s : shares) {
    std::ostringstream name;
    name << "share-" << std::setw(2) << std::setfill('0') << int{s.x} << ".gksh";
    secrets::write_file(dir / name.str(), secrets::serialize_share(s));
    names.push_back(name.str());
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Geocoded, timestamped key management for underwater authorization", "geokey"};
  app.require_subcommand(1, 1);
  bool as_json = false;
  app.add_flag("--json", as_json, "Machine-readable output");

  std::function<void()> action;

  // ---- ceremony ----
  auto* ceremony = app.add_subcommand("ceremony", "Master-key ceremony and custody");
  ceremony->require_subcommand(1, 1);

  struct {
    unsigned participant = 0;
    std::uint32_t entropy = 35;
    std::string out;
  } contribute;
  auto* c_contribute = ceremony->add_subcommand("contribute", "Generate one participant's contribution");
  c_contribute->add_option("--participant", contribute.participant, "Participant id 1..11")->required();
  c_contribute->add_option("--entropy-bits", contribute.entropy, "Declared entropy")->capture_default_str();
  c_contribute->add_option("--out", contribute.out, "Contribution file")->required();
  c_contribute->callback([&] {
    action = [&] {
      const auto c = secrets::make_contribution(contribute.participant, contribute.entropy);
      secrets::write_file(contribute.out, secrets::serialize_contribution(c));
      out << "wrote contribution " << contribute.participant << " to " << contribute.out << '\n';
    };
  });

  struct {
    std::vector<std::string> contributions;
    std::string out_dir;
    std::string nonce;
    std::string master_key_out;
    unsigned k = secrets::kThreshold;
    unsigned n = secrets::kParticipants;
  } assemble;
  auto* c_assemble = ceremony->add_subcommand("assemble", "Assemble the master key and split it into shares");
  c_assemble->add_option("--contribution", assemble.contributions, "The 11 contribution files")
      ->required()
      ->take_all();
  c_assemble->add_option("--out-dir", assemble.out_dir, "Directory for shares and custody record")->required();
  c_assemble->add_option("--nonce", assemble.nonce, "Ceremony nonce (32 hex); random if omitted");
  c_assemble->add_option("--master-key-out", assemble.master_key_out, "Also write the master key file");
  c_assemble->add_option("--threshold", assemble.k)->capture_default_str();
  c_assemble->add_option("--shares", assemble.n)->capture_default_str();
  c_assemble->callback([&] {
    action = [&] {
      std::vector<secrets::Contribution> cs;
      for (const auto& f : assemble.contributions) {
        cs.push_back(secrets::parse_contribution(secrets::read_file(f)));
      }
      secrets::CeremonyId id{};
      if (assemble.nonce.empty()) {
        fill_random(id);
      } else {
        id = parse_id(assemble.nonce);
      }
      const auto mk = secrets::assemble_master_key(cs, id);
      const auto shares = secrets::split(mk, assemble.k, assemble.n);
      fs::create_directories(assemble.out_dir);
      std::vector<std::string> names;
      write_shares(shares, assemble.out_dir, names);
      std::ofstream custody(fs::path(assemble.out_dir) / "ceremony.txt");
      custody << "ceremony_id " << to_hex(mk.ceremony_id) << '\n'
              << "participants " << cs.size() << '\n'
              << "total_entropy_bits " << mk.total_entropy_bits << '\n'
              << "threshold " << assemble.k << '\n'
              << "shares " << assemble.n << '\n';
      for (const auto& n : names) custody << "share_file " << n << '\n';
      if (!assemble.master_key_out.empty()) {
        secrets::write_file(assemble.master_key_out, secrets::serialize_master_key(mk));
      }
      if (as_json) {
        out << json{{"ceremony_id", to_hex(mk.ceremony_id)},
                    {"total_entropy_bits", mk.total_entropy_bits},
                    {"shares", names}}
                   .dump()
            << '\n';
      } else {
        out << "ceremony_id " << to_hex(mk.ceremony_id) << '\n'
            << "total_entropy_bits " << mk.total_entropy_bits << '\n'
            << "wrote " << names.size() << " shares to " << assemble.out_dir << '\n';
      }
    };
  });

  struct {
    KeySource source;
    std::string out_dir;
    unsigned k = secrets::kThreshold;
    unsigned n = secrets::kParticipants;
  } split_cmd;
  auto* c_split = ceremony->add_subcommand("split", "Split a master key file into shares");
  c_split->add_option("--master-key", split_cmd.source.master_key, "Master key file")->required();
  c_split->add_option("--out-dir", split_cmd.out_dir)->required();
  c_split->add_option("--threshold", split_cmd.k)->capture_default_str();
  c_split->add_option("--shares", split_cmd.n)->capture_default_str();
  c_split->callback([&] {
    action = [&] {
      const auto mk = split_cmd.source.load();
      fs::create_directories(split_cmd.out_dir);
      std::vector<std::string> names;
      write_shares(secrets::split(mk, split_cmd.k, split_cmd.n), split_cmd.out_dir, names);
      out << "wrote " << names.size() << " shares to " << split_cmd.out_dir << '\n';
    };
  });

  struct {
    std::vector<std::string> shares;
    unsigned k = secrets::kThreshold;
    std::string out;
  } combine_cmd;
  auto* c_combine = ceremony->add_subcommand("combine", "Reconstruct the master key from shares");
  c_combine->add_option("--share", combine_cmd.shares)->required()->take_all();
  c_combine->add_option("--threshold", combine_cmd.k)->capture_default_str();
  c_combine->add_option("--out", combine_cmd.out, "Master key file to write")->required();
  c_combine->callback([&] {
    action = [&] {
      std::vector<secrets::Share> s;
      for (const auto& f : combine_cmd.shares) s.push_back(secrets::parse_share(secrets::read_file(f)));
      const auto mk = secrets::combine(s, combine_cmd.k);
      secrets::write_file(combine_cmd.out, secrets::serialize_master_key(mk));
      out << "combined " << s.size() << " shares of ceremony " << to_hex(mk.ceremony_id) << '\n';
    };
  });

  // ---- derive ----
  struct {
    KeySource source;
    std::string geocode;
    std::uint32_t start = 0;
    std::uint32_t end = 0;
    unsigned bits = kdf::kDefaultDerivedBits;
    bool reveal = false;
    bool tub = false;
  } derive;
  auto* c_derive = app.add_subcommand("derive", "Derive the key for one cell and interval");
  derive.source.add_options(c_derive);
  c_derive->add_option("--geocode", derive.geocode)->required();
  c_derive->add_option("--start-day", derive.start)->required();
  c_derive->add_option("--end-day", derive.end)->required();
  c_derive->add_option("--bits", derive.bits, "Derived material length")->capture_default_str();
  c_derive->add_flag("--tub", derive.tub, "Print only the 256-bit TUB key");
  c_derive->add_flag("--reveal", derive.reveal, "Print key material");
  c_derive->callback([&] {
    action = [&] {
      const auto code = geo::Geocode::parse(derive.geocode);
      const kdf::TimeInterval t{derive.start, derive.end};
      const kdf::Deriver d(derive.source.load(), derive.bits);
      const Bytes material = d.derive_material(code, t);
      const std::string hex =
          derive.tub ? to_hex(kdf::tub_key(material)) : to_hex(material);
      const std::string shown = derive.reveal ? hex : std::string(kRedacted);
      if (as_json) {
        out << json{{"geocode", derive.geocode},
                    {"start_day", derive.start},
                    {"end_day", derive.end},
                    {"key", shown}}
                   .dump()
            << '\n';
      } else {
        out << shown << '\n';
      }
    };
  });

  // ---- enumerate ----
  bool count_only = false;
  auto* c_enum = app.add_subcommand("enumerate", "List every geocode");
  c_enum->add_flag("--count-only", count_only, "Print only the number of cells");
  c_enum->callback([&] {
    action = [&] {
      std::uint64_t n = 0;
      if (count_only) {
        for ([[maybe_unused]] const geo::Geocode c : geo::enumerate_all()) ++n;
        out << n << '\n';
        return;
      }
      std::string buf;
      buf.reserve(7 * 4096);
      for (const geo::Geocode c : geo::enumerate_all()) {
        buf.append(c.str());
        buf.push_back('\n');
        if (buf.size() >= 7 * 4096) {
          out << buf;
          buf.clear();
        }
      }
      out << buf;
    };
  });

  // ---- cover ----
  auto* cover = app.add_subcommand("cover", "Cells covered by a route or an area");
  cover->require_subcommand(1, 1);
  struct {
    std::vector<std::string> points;
    double step = geo::kDefaultRouteStepM;
    std::string rule = "closed";
  } cover_args;
  auto print_codes = [&](const auto& codes) {
    if (count_only) {
      out << codes.size() << '\n';
    } else if (as_json) {
      json arr = json::array();
      for (const auto& c : codes) arr.push_back(std::string(c.str()));
      out << arr.dump() << '\n';
    } else {
      for (const auto& c : codes) out << c.str() << '\n';
    }
  };
  auto* c_route = cover->add_subcommand("route", "Cells along a great-circle route");
  c_route->add_option("--waypoint", cover_args.points, "LAT,LNG (repeat)")->required()->take_all();
  c_route->add_option("--step", cover_args.step, "Sampling step in metres")->capture_default_str();
  c_route->add_flag("--count-only", count_only);
  c_route->callback([&] {
    action = [&] { print_codes(geo::cover_route(parse_points(cover_args.points), cover_args.step)); };
  });
  auto* c_area = cover->add_subcommand("area", "Cells covering a polygon");
  c_area->add_option("--vertex", cover_args.points, "LAT,LNG (repeat)")->required()->take_all();
  c_area->add_option("--rule", cover_args.rule, "closed or interior")
      ->check(CLI::IsMember({"closed", "interior"}))
      ->capture_default_str();
  c_area->add_flag("--count-only", count_only);
  c_area->callback([&] {
    action = [&] {
      const auto rule = cover_args.rule == "interior" ? geo::CoverRule::kInterior
                                                      : geo::CoverRule::kClosed;
      print_codes(geo::cover_area(parse_points(cover_args.points), rule));
    };
  });

  // ---- keystore ----
  auto* ks = app.add_subcommand("keystore", "Device key store");
  ks->require_subcommand(1, 1);
  struct {
    std::string store;
    std::string bundle;
    std::string out;
    std::string licensee;
    std::string geocode;
    std::uint32_t day = 0;
    std::uint64_t records = 0;
    bool reveal = false;
  } ks_args;
  auto* k_import = ks->add_subcommand("import", "Import a bundle into a store file");
  k_import->add_option("--store", ks_args.store)->required();
  k_import->add_option("--bundle", ks_args.bundle)->required();
  k_import->callback([&] {
    action = [&] {
      auto store = keystore::KeyStore::open(ks_args.store);
      const auto n = store->import_bundle(secrets::read_file(ks_args.bundle));
      out << "imported " << n << " records; store holds " << store->size() << '\n';
    };
  });
  auto* k_export = ks->add_subcommand("export", "Export a store as one bundle");
  k_export->add_option("--store", ks_args.store)->required();
  k_export->add_option("--out", ks_args.out)->required();
  k_export->add_option("--licensee", ks_args.licensee, "Licensee id for the header (32 hex)");
  k_export->callback([&] {
    action = [&] {
      auto store = keystore::KeyStore::open(ks_args.store);
      const keystore::LicenseeId id = ks_args.licensee.empty() ? keystore::LicenseeId{}
                                                               : parse_id(ks_args.licensee);
      secrets::write_file(ks_args.out, store->export_bundle(id));
      out << "exported " << store->size() << " records\n";
    };
  });
  auto* k_lookup = ks->add_subcommand("lookup", "Find the key for a cell on a day");
  k_lookup->add_option("--store", ks_args.store)->required();
  k_lookup->add_option("--geocode", ks_args.geocode)->required();
  k_lookup->add_option("--day", ks_args.day)->required();
  k_lookup->add_flag("--reveal", ks_args.reveal);
  k_lookup->callback([&] {
    action = [&] {
      auto store = keystore::KeyStore::open(ks_args.store);
      const auto hit = store->lookup(geo::Geocode::parse(ks_args.geocode), ks_args.day);
      if (!hit) {
        out << (as_json ? R"({"hit":false})" : "miss") << '\n';
        return;
      }
      const std::string key = ks_args.reveal ? to_hex(hit->key) : std::string(kRedacted);
      if (as_json) {
        out << json{{"hit", true},
                    {"start_day", hit->interval.start_day},
                    {"end_day", hit->interval.end_day},
                    {"key", key}}
                   .dump()
            << '\n';
      } else {
        out << "hit [" << hit->interval.start_day << ", " << hit->interval.end_day << ") " << key
            << '\n';
      }
    };
  });
  auto* k_prune = ks->add_subcommand("prune", "Drop expired records");
  k_prune->add_option("--store", ks_args.store)->required();
  k_prune->add_option("--now-day", ks_args.day)->required();
  k_prune->callback([&] {
    action = [&] {
      auto store = keystore::KeyStore::open(ks_args.store);
      out << "removed " << store->prune_expired(ks_args.day) << '\n';
    };
  });
  auto* k_size = ks->add_subcommand("size", "Serialized bundle size for N records");
  k_size->add_option("--records", ks_args.records)->required();
  k_size->callback([&] {
    action = [&] {
      const auto bytes = keystore::size_report(ks_args.records);
      if (as_json) {
        out << json{{"records", ks_args.records}, {"bytes", bytes}}.dump() << '\n';
      } else {
        out << bytes << '\n';
      }
    };
  });

  // ---- authority ----
  auto* auth = app.add_subcommand("authority", "Licence issuance and delegation");
  auth->require_subcommand(1, 1);
  struct {
    KeySource source;
    std::string id;
    std::vector<std::string> cells;
    std::vector<std::string> vertices;
    std::uint32_t start = 0;
    std::uint32_t end = 0;
    std::string purpose;
    std::string out;
    std::string audit_log;
    std::string config;
  } au;
  auto* a_issue = auth->add_subcommand("issue", "Issue a licence bundle");
  au.source.add_options(a_issue);
  a_issue->add_option("--licensee", au.id, "Licensee id (32 hex)")->required();
  a_issue->add_option("--cell", au.cells)->take_all();
  a_issue->add_option("--vertex", au.vertices, "Area polygon LAT,LNG (repeat)")->take_all();
  a_issue->add_option("--start-day", au.start)->required();
  a_issue->add_option("--end-day", au.end)->required();
  a_issue->add_option("--purpose", au.purpose);
  a_issue->add_option("--out", au.out, "Bundle file")->required();
  a_issue->add_option("--audit-log", au.audit_log);
  a_issue->callback([&] {
    action = [&] {
      auto log = std::make_shared<authority::AuditLog>(
          au.audit_log.empty() ? std::nullopt : std::optional<fs::path>(au.audit_log));
      authority::Authority a(log);
      a.unlock(au.source.load());
      authority::LicenseRequest req;
      req.licensee_id = parse_id(au.id);
      req.polygon = parse_points(au.vertices);
      req.cells = parse_codes(au.cells);
      req.start_day = au.start;
      req.end_day = au.end;
      req.purpose = au.purpose;
      const auto bundle = a.issue(req);
      secrets::write_file(au.out, keystore::serialize_bundle(bundle));
      out << "issued " << bundle.records.size() << " records to " << au.out << '\n';
    };
  });
  auto* a_delegate = auth->add_subcommand("delegate", "Delegate cells to a sub-authority");
  au.source.add_options(a_delegate);
  a_delegate->add_option("--subauthority", au.id, "Sub-authority id (32 hex)")->required();
  a_delegate->add_option("--cell", au.cells)->required()->take_all();
  a_delegate->add_option("--start-day", au.start)->required();
  a_delegate->add_option("--end-day", au.end)->required();
  a_delegate->add_option("--out", au.out)->required();
  a_delegate->add_option("--audit-log", au.audit_log);
  a_delegate->callback([&] {
    action = [&] {
      auto log = std::make_shared<authority::AuditLog>(
          au.audit_log.empty() ? std::nullopt : std::optional<fs::path>(au.audit_log));
      authority::Authority a(log);
      a.unlock(au.source.load());
      const auto bundle = a.delegate({parse_id(au.id), parse_codes(au.cells), au.start, au.end});
      secrets::write_file(au.out, keystore::serialize_bundle(bundle));
      out << "delegated " << bundle.records.size() << " records to " << au.out << '\n';
    };
  });
  auto* a_serve = auth->add_subcommand("serve", "Run the authority service");
  a_serve->add_option("--config", au.config, "Service config (JSON)")->required();
  a_serve->callback([&] {
    action = [&] {
      std::ifstream in(au.config);
      if (!in) throw Error(ErrorCode::kIo, "cannot open " + au.config);
      std::stringstream ss;
      ss << in.rdbuf();
      authority::Service service(
          authority::ServiceConfig::from_json(ss.str(), fs::path(au.config).parent_path()));
      const int port = service.start();
      out << "listening on port " << port << (service.tls() ? " (TLS)" : " (plaintext)")
          << std::endl;
      service.wait();
    };
  });

  // ---- sim ----
  auto* sim = app.add_subcommand("sim", "Acoustic authorization simulation");
  sim->require_subcommand(1, 1);
  struct {
    std::string scenario;
    std::string transcript;
    std::string metrics;
  } sim_args;
  auto* s_run = sim->add_subcommand("run", "Run a scenario file");
  s_run->add_option("--scenario", sim_args.scenario)->required();
  s_run->add_option("--transcript", sim_args.transcript, "Transcript output file");
  s_run->add_option("--metrics", sim_args.metrics, "Metrics JSON output file");
  s_run->callback([&] {
    action = [&] {
      const auto spec = sim::load_scenario(sim_args.scenario);
      std::ofstream transcript;
      if (!sim_args.transcript.empty()) transcript.open(sim_args.transcript, std::ios::app);
      const auto result = sim::run_scenario(spec, transcript.is_open() ? &transcript : nullptr);
      const std::string metrics = sim::to_json(result.metrics);
      if (!sim_args.metrics.empty()) {
        std::ofstream(sim_args.metrics) << metrics << '\n';
      }
      out << metrics << '\n';
    };
  });

  // ---- bench ----
  auto* bench_cmd = app.add_subcommand("bench", "Benchmarks");
  bench_cmd->require_subcommand(1, 1);
  struct {
    KeySource source;
    std::uint32_t start = 0;
    std::uint32_t end = kdf::kEpochDays;
    std::uint32_t limit = geo::kCellCount;
    std::string out;
  } bk;
  auto* b_keyspace = bench_cmd->add_subcommand("keyspace", "Derive keys for every cell for one epoch");
  bk.source.add_options(b_keyspace);
  b_keyspace->add_option("--start-day", bk.start)->capture_default_str();
  b_keyspace->add_option("--end-day", bk.end)->capture_default_str();
  b_keyspace->add_option("--limit", bk.limit, "Only the first N cells")->capture_default_str();
  b_keyspace->add_option("--out", bk.out, "Write the bundle here instead of discarding it");
  b_keyspace->callback([&] {
    action = [&] {
      secrets::MasterKey mk;
      if (bk.source.master_key.empty() && bk.source.shares.empty()) {
        fill_random(mk.key);  // throwaway test key
      } else {
        mk = bk.source.load();
      }
      const kdf::Deriver d(mk);
      bench::KeyspaceReport r;
      if (bk.out.empty()) {
        bench::CountingBuf buf;
        std::ostream sink(&buf);
        r = bench::derive_keyspace(d, {bk.start, bk.end}, sink, bk.limit);
      } else {
        std::ofstream file(bk.out, std::ios::binary | std::ios::trunc);
        r = bench::derive_keyspace(d, {bk.start, bk.end}, file, bk.limit);
      }
      out << json{{"records", r.records},
                  {"bytes", r.bytes},
                  {"expected_bytes", keystore::size_report(r.records)},
                  {"under_7gb", r.bytes < 7'000'000'000ULL},
                  {"seconds", r.seconds}}
                 .dump()
          << '\n';
    };
  });

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(std::move(rev));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return 1;
  }

  try {
    if (action) action();
    return 0;
  } catch (const Error& e) {
    err << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace geokey::cli
