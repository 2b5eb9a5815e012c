#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <random>
#include <thread>

#include <httplib.h>

#include "geokey/authority.hpp"
#include "geokey/keystore.hpp"
#include "geokey/service.hpp"
#include "support.hpp"

using namespace geokey;
using namespace geokey::authority;
using geo::Geocode;
using nlohmann::json;

namespace {

secrets::MasterKey test_master() {
  std::mt19937_64 rng(99);
  secrets::MasterKey mk;
  for (auto& b : mk.key) b = static_cast<std::uint8_t>(rng());
  mk.ceremony_id.fill(0x5A);
  return mk;
}

LicenseeId id_of(std::uint8_t v) {
  LicenseeId id;
  id.fill(v);
  return id;
}

bool contains_bytes(ByteView hay, ByteView needle) {
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

std::unique_ptr<Authority> unlocked_authority(
    std::shared_ptr<AuditLog> log = std::make_shared<AuditLog>()) {
  auto a = std::make_unique<Authority>(std::move(log));
  a->unlock(test_master());
  return a;
}

}  // namespace

TEST_CASE("locked authority refuses work") {
  Authority a;
  CHECK(!a.unlocked());
  LicenseRequest req;
  req.licensee_id = id_of(1);
  req.cells = {Geocode::parse("6FG222")};
  req.start_day = 0;
  req.end_day = 40;
  CHECK_ERROR(a.issue(req), ErrorCode::kServiceUnavailable);
  CHECK_ERROR(a.delegate({id_of(2), req.cells, 0, 40}), ErrorCode::kServiceUnavailable);
  a.unlock(test_master());
  CHECK(a.unlocked());
  CHECK(a.issue(req).records.size() == 1);
  a.lock();
  CHECK_ERROR(a.issue(req), ErrorCode::kServiceUnavailable);
}

TEST_CASE("unlock from shares") {
  const auto mk = test_master();
  const auto shares = secrets::split(mk);
  Authority a;
  CHECK_ERROR(a.unlock(std::span(shares).first(5)), ErrorCode::kThresholdNotMet);
  CHECK(!a.unlocked());
  a.unlock(std::span(shares).subspan(3, 6));
  LicenseRequest req{id_of(1), {}, {Geocode::parse("6FG222")}, 0, 40, ""};
  CHECK(a.issue(req).records[0].key ==
        kdf::derive_geokey(mk, Geocode::parse("6FG222"), {0, 40}).key);
}

TEST_CASE("issue") {
  auto log = std::make_shared<AuditLog>();
  const auto a_ptr = unlocked_authority(log);
  const Authority& a = *a_ptr;

  LicenseRequest one{id_of(1), {}, {Geocode::parse("9FFGWQ")}, 100, 140, "survey"};
  const auto b1 = a.issue(one);
  REQUIRE(b1.records.size() == 1);
  CHECK(b1.licensee_id == id_of(1));
  CHECK(b1.records[0].interval == kdf::TimeInterval{100, 140});

  LicenseRequest area;
  area.licensee_id = id_of(2);
  area.polygon = {{0, 0}, {0, 1}, {1, 1}, {1, 0}};
  area.start_day = 0;
  area.end_day = 150;
  // The closed rule adds the ring of touching cells; the explicit
  // 400-cell list gives the 400 x 3 figure.
  std::vector<Geocode> cells;
  for (const auto& c : geo::cover_area(area.polygon, geo::CoverRule::kInterior)) cells.push_back(c);
  REQUIRE(cells.size() == 400);
  LicenseRequest listed{id_of(2), {}, cells, 0, 150, ""};
  const auto b2 = a.issue(listed);
  CHECK(b2.records.size() == 1200);

  const auto b3 = a.issue(area);
  CHECK(b3.records.size() == 484 * 3);
  const auto covered = geo::cover_area(area.polygon);
  for (const auto& r : b3.records) {
    CHECK(covered.count(r.geocode) == 1);
    CHECK(r.interval.start_day >= 0);
    CHECK(r.interval.end_day <= 150);
  }

  CHECK(keystore::serialize_bundle(a.issue(listed)) == keystore::serialize_bundle(b2));

  const auto lines = log->lines();
  REQUIRE(lines.size() >= 4);
  CHECK(lines[1].find(" issue ") != std::string::npos);
  CHECK(lines[1].find("licensee=" + to_hex(id_of(1))) != std::string::npos);
  CHECK(lines[1].find("cells=1") != std::string::npos);
  CHECK(lines[1].find("span=[100,140)") != std::string::npos);
  CHECK(lines[1].find("purpose=\"survey\"") != std::string::npos);

  LicenseRequest empty{id_of(3), {}, {}, 0, 10, ""};
  CHECK_ERROR(a.issue(empty), ErrorCode::kInvalidInput);
  LicenseRequest bad_span{id_of(3), {}, {Geocode::parse("6FG222")}, 10, 10, ""};
  CHECK_ERROR(a.issue(bad_span), ErrorCode::kInvalidInput);
}

TEST_CASE("delegate") {
  const auto a_ptr = unlocked_authority();
  const Authority& a = *a_ptr;
  const std::vector<Geocode> cells{Geocode::parse("6FG222"), Geocode::parse("6FG223")};
  const auto d = a.delegate({id_of(7), cells, 0, 60});
  REQUIRE(d.records.size() == 2);
  const auto issued = a.issue({id_of(7), {}, cells, 0, 60, ""});
  CHECK(d.records == issued.records);

  // A fabricated key for a cell outside the delegation never matches.
  std::mt19937_64 rng(3);
  const auto real = kdf::derive_geokey(test_master(), Geocode::parse("6FG224"), {0, 60}).key;
  for (int i = 0; i < 1000; ++i) {
    kdf::KeyMaterial guess;
    for (auto& b : guess) b = static_cast<std::uint8_t>(rng());
    CHECK(guess != real);
  }
  CHECK_ERROR(a.delegate({id_of(7), {}, 0, 60}), ErrorCode::kInvalidInput);
}

TEST_CASE("outputs never contain the master key") {
  const auto mk = test_master();
  const auto a_ptr = unlocked_authority();
  const Authority& a = *a_ptr;
  const Bytes b = keystore::serialize_bundle(
      a.issue({id_of(1), {{0, 0}, {0, 0.3}, {0.3, 0.3}, {0.3, 0}}, {}, 0, 150, ""}));
  const Bytes d = keystore::serialize_bundle(
      a.delegate({id_of(2), {Geocode::parse("6FG222")}, 0, 60}));
  for (const Bytes* out : {&b, &d}) {
    CHECK(!contains_bytes(*out, mk.key));
    // Any 16-byte window of the key is also absent.
    for (std::size_t off = 0; off + 16 <= mk.key.size(); off += 16) {
      CHECK(!contains_bytes(*out, ByteView(mk.key).subspan(off, 16)));
    }
  }
}

TEST_CASE("audit log file and timestamps") {
  testing::TempDir dir;
  const auto fixed = std::chrono::system_clock::time_point(std::chrono::seconds(1'700'000'000));
  CHECK(iso8601(fixed) == "2023-11-14T22:13:20Z");
  auto log = std::make_shared<AuditLog>(dir / "audit.log", [fixed] { return fixed; });
  const auto a_ptr = unlocked_authority(log);
  const Authority& a = *a_ptr;
  a.issue({id_of(1), {}, {Geocode::parse("6FG222")}, 0, 40, "a b"});
  std::ifstream in(dir / "audit.log");
  std::string first, second;
  std::getline(in, first);
  std::getline(in, second);
  CHECK(first.rfind("2023-11-14T22:13:20Z unlock ", 0) == 0);
  CHECK(second.rfind("2023-11-14T22:13:20Z issue licensee=", 0) == 0);
}

// ---- service ----

namespace {

struct ServiceFixture {
  testing::TempDir dir;
  std::string admin = "admin-token";
  std::string lic1 = "token-one";
  std::string lic2 = "token-two";

  ServiceConfig config(bool plaintext = true) {
    secrets::write_file(dir / "mk.gkmk", secrets::serialize_master_key(test_master()));
    const json j = {
        {"data_dir", "data"},
        {"allow_plaintext", plaintext},
        {"master_key", "mk.gkmk"},
        {"credentials",
         {{{"token", admin}, {"role", "admin"}},
          {{"token", lic1}, {"role", "licensee"}, {"licensee_id", to_hex(id_of(1))}},
          {{"token", lic2}, {"role", "licensee"}, {"licensee_id", to_hex(id_of(2))}}}}};
    return ServiceConfig::from_json(j.dump(), dir.path());
  }
};

std::string license_body(std::uint8_t id, std::vector<std::string> cells, int start, int end) {
  return json{{"version", 1},
              {"licensee_id", to_hex(id_of(id))},
              {"cells", cells},
              {"start_day", start},
              {"end_day", end},
              {"purpose", "test"}}
      .dump();
}

}  // namespace

TEST_CASE("service handlers") {
  ServiceFixture fx;
  Service svc(fx.config());
  CHECK(svc.authority().unlocked());

  CHECK(svc.submit_license("", license_body(1, {"6FG222"}, 0, 40)).status == 401);
  CHECK(svc.submit_license("nope", license_body(1, {"6FG222"}, 0, 40)).status == 401);
  CHECK(svc.submit_license(fx.lic2, license_body(1, {"6FG222"}, 0, 40)).status == 403);
  CHECK(svc.submit_license(fx.lic1, "{not json").status == 400);
  CHECK(svc.submit_license(fx.lic1, license_body(1, {"ZZZZZZ"}, 0, 40)).status == 400);
  CHECK(svc.fetch_bundle(fx.lic1, to_hex(id_of(1))).status == 404);

  const Reply r = svc.submit_license(fx.lic1, license_body(1, {"6FG222", "6FG223"}, 0, 90));
  CHECK(r.status == 201);
  const json body = json::parse(r.body);
  CHECK(body["records"] == 4);
  CHECK(body["epochs"] == 2);

  const Reply f = svc.fetch_bundle(fx.lic1, to_hex(id_of(1)));
  REQUIRE(f.status == 200);
  CHECK(f.content_type == "application/octet-stream");
  keystore::KeyStore store;
  CHECK(store.import_bundle(Bytes(f.body.begin(), f.body.end())) == 4);
  CHECK(store.lookup(Geocode::parse("6FG223"), 89)->key ==
        kdf::derive_geokey(test_master(), Geocode::parse("6FG223"), {60, 90}).key);

  CHECK(svc.fetch_bundle(fx.lic2, to_hex(id_of(1))).status == 403);
  CHECK(svc.fetch_bundle(fx.admin, to_hex(id_of(1))).status == 200);
  CHECK(svc.fetch_bundle(fx.admin, "abc").status == 400);

  const std::string dbody =
      json{{"subauthority_id", to_hex(id_of(9))}, {"cells", {"6FG222"}}, {"start_day", 0},
           {"end_day", 60}}
          .dump();
  CHECK(svc.delegate(fx.lic1, dbody).status == 403);
  const Reply d = svc.delegate(fx.admin, dbody);
  CHECK(d.status == 200);
  CHECK(keystore::parse_bundle(Bytes(d.body.begin(), d.body.end())).records.size() == 1);

  svc.authority().lock();
  CHECK(svc.submit_license(fx.lic1, license_body(1, {"6FG222"}, 0, 40)).status == 503);

  std::ifstream audit(fx.dir / "data/audit.log");
  std::string line;
  int n = 0;
  while (std::getline(audit, line)) ++n;
  CHECK(n >= 14);
}

TEST_CASE("service persists bundles across restarts") {
  ServiceFixture fx;
  {
    Service svc(fx.config());
    CHECK(svc.submit_license(fx.lic1, license_body(1, {"6FG222"}, 0, 40)).status == 201);
  }
  Service svc(fx.config());
  CHECK(svc.fetch_bundle(fx.lic1, to_hex(id_of(1))).status == 200);
}

TEST_CASE("service refuses plaintext unless allowed") {
  ServiceFixture fx;
  Service svc(fx.config(false));
  CHECK_ERROR(svc.start(), ErrorCode::kInvalidInput);
}

TEST_CASE("concurrent submissions over HTTP") {
  ServiceFixture fx;
  Service svc(fx.config());
  const int port = svc.start();
  auto submit = [&](const std::string& token, std::uint8_t id, int* status) {
    httplib::Client cli("127.0.0.1", port);
    cli.set_bearer_token_auth(token);
    auto res = cli.Post("/v1/licenses", license_body(id, {"6FG222", "9FFGWQ"}, 0, 60),
                        "application/json");
    *status = res ? res->status : -1;
  };
  int s1 = 0, s2 = 0;
  std::thread t1(submit, fx.lic1, 1, &s1), t2(submit, fx.lic2, 2, &s2);
  t1.join();
  t2.join();
  CHECK(s1 == 201);
  CHECK(s2 == 201);

  httplib::Client cli("127.0.0.1", port);
  cli.set_bearer_token_auth(fx.lic2);
  auto res = cli.Get("/v1/bundles/" + to_hex(id_of(2)));
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(keystore::parse_bundle(Bytes(res->body.begin(), res->body.end())).records.size() == 2);
  svc.stop();

  int issues = 0;
  std::ifstream audit(fx.dir / "data/audit.log");
  for (std::string line; std::getline(audit, line);) {
    if (line.find(" issue ") != std::string::npos) ++issues;
  }
  CHECK(issues == 2);
}

TEST_CASE("service over TLS") {
  ServiceFixture fx;
  const std::string cmd =
      "openssl req -x509 -newkey rsa:2048 -nodes -days 1 -subj /CN=localhost "
      "-addext subjectAltName=IP:127.0.0.1,DNS:localhost -keyout '" +
      (fx.dir / "key.pem").string() + "' -out '" + (fx.dir / "cert.pem").string() +
      "' >/dev/null 2>&1";
  REQUIRE(std::system(cmd.c_str()) == 0);
  ServiceConfig cfg = fx.config(false);
  cfg.tls_cert = fx.dir / "cert.pem";
  cfg.tls_key = fx.dir / "key.pem";
  Service svc(cfg);
  CHECK(svc.tls());
  const int port = svc.start();

  httplib::SSLClient cli("127.0.0.1", port);
  cli.set_ca_cert_path((fx.dir / "cert.pem").c_str());
  cli.enable_server_certificate_verification(true);
  cli.set_bearer_token_auth(fx.lic1);
  auto res = cli.Post("/v1/licenses", license_body(1, {"6FG222"}, 0, 40), "application/json");
  REQUIRE(res);
  CHECK(res->status == 201);
  res = cli.Get("/v1/bundles/" + to_hex(id_of(1)));
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(keystore::parse_bundle(Bytes(res->body.begin(), res->body.end())).records.size() == 1);

  // Plain HTTP against the TLS port gets no usable reply.
  httplib::Client plain("127.0.0.1", port);
  plain.set_connection_timeout(2);
  plain.set_read_timeout(2);
  auto bad = plain.Get("/v1/bundles/" + to_hex(id_of(1)));
  CHECK((!bad || bad->status != 200));

  httplib::SSLClient anon("127.0.0.1", port);
  anon.enable_server_certificate_verification(false);
  res = anon.Get("/v1/bundles/" + to_hex(id_of(1)));
  REQUIRE(res);
  CHECK(res->status == 401);
  svc.stop();
}
