#include "geokey/service.hpp"

#include <httplib.h>

#include <condition_variable>
#include <json.hpp>
#include <map>
#include <thread>

#include "geokey/error.hpp"

namespace geokey::authority {

using nlohmann::json;

namespace {

LicenseeId parse_id(const std::string& hex) {
  const Bytes b = from_hex(hex);
  if (b.size() != 16) {
    throw Error(ErrorCode::kInvalidInput, "identifier must be 32 hex characters");
  }
  LicenseeId id;
  std::copy(b.begin(), b.end(), id.begin());
  return id;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnauthenticated: return 401;
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kServiceUnavailable: return 503;
    case ErrorCode::kIo: return 500;
    default: return 400;
  }
}

Reply error_reply(int status, std::string_view code, const std::string& message) {
  return {status, "application/json",
          json{{"error", code}, {"message", message}}.dump()};
}

std::vector<geo::Geocode> parse_cells(const json& j) {
  std::vector<geo::Geocode> out;
  for (const auto& c : j) out.push_back(geo::Geocode::parse(c.get<std::string>()));
  return out;
}

void check_version(const json& j) {
  if (j.value("version", 1) != 1) {
    throw Error(ErrorCode::kFormat, "unsupported request version");
  }
}

}  // namespace

ServiceConfig ServiceConfig::from_json(const std::string& text,
                                       const std::filesystem::path& base_dir) {
  ServiceConfig cfg;
  json j;
  try {
    j = json::parse(text);
    cfg.host = j.value("host", cfg.host);
    cfg.port = j.value("port", cfg.port);
    cfg.data_dir = resolve(base_dir, j.value("data_dir", std::string(".")));
    if (j.contains("tls_cert")) cfg.tls_cert = resolve(base_dir, j["tls_cert"].get<std::string>());
    if (j.contains("tls_key")) cfg.tls_key = resolve(base_dir, j["tls_key"].get<std::string>());
    cfg.allow_plaintext = j.value("allow_plaintext", false);
    for (const auto& c : j.value("credentials", json::array())) {
      Credential cred;
      cred.token = c.at("token").get<std::string>();
      const std::string role = c.value("role", std::string("licensee"));
      if (role == "admin") {
        cred.role = Credential::Role::kAdmin;
      } else if (role == "licensee") {
        cred.role = Credential::Role::kLicensee;
        cred.licensee_id = parse_id(c.at("licensee_id").get<std::string>());
      } else {
        throw Error(ErrorCode::kFormat, "unknown credential role '" + role + "'");
      }
      cfg.credentials.push_back(std::move(cred));
    }
    for (const auto& s : j.value("shares", json::array())) {
      cfg.share_files.push_back(resolve(base_dir, s.get<std::string>()));
    }
    if (j.contains("master_key")) {
      cfg.master_key_file = resolve(base_dir, j["master_key"].get<std::string>());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("service config: ") + e.what());
  }
  return cfg;
}

struct Service::Impl {
  ServiceConfig config;
  std::shared_ptr<AuditLog> audit;
  Authority authority;
  std::mutex stores_mutex;
  std::map<LicenseeId, std::unique_ptr<keystore::KeyStore>> stores;
  std::unique_ptr<httplib::Server> server;
  std::thread thread;

  explicit Impl(ServiceConfig cfg)
      : config(std::move(cfg)),
        audit(std::make_shared<AuditLog>(config.data_dir / "audit.log")),
        authority(audit) {}

  const Credential* authenticate(const std::string& bearer) const {
    if (bearer.empty()) return nullptr;
    for (const Credential& c : config.credentials) {
      if (c.token == bearer) return &c;
    }
    return nullptr;
  }

  keystore::KeyStore& store_for(const LicenseeId& id) {
    std::lock_guard lock(stores_mutex);
    auto& slot = stores[id];
    if (!slot) {
      const auto dir = config.data_dir / "bundles";
      std::filesystem::create_directories(dir);
      slot = keystore::KeyStore::open(dir / (to_hex(id) + ".store"));
    }
    return *slot;
  }

  keystore::KeyStore* existing_store(const LicenseeId& id) {
    std::lock_guard lock(stores_mutex);
    auto it = stores.find(id);
    if (it != stores.end()) return it->second.get();
    const auto file = config.data_dir / "bundles" / (to_hex(id) + ".store");
    if (!std::filesystem::exists(file)) return nullptr;
    auto& slot = stores[id];
    slot = keystore::KeyStore::open(file);
    return slot.get();
  }
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {
  std::filesystem::create_directories(impl_->config.data_dir);
  if (impl_->config.master_key_file) {
    impl_->authority.unlock(
        secrets::parse_master_key(secrets::read_file(*impl_->config.master_key_file)));
  } else if (!impl_->config.share_files.empty()) {
    std::vector<secrets::Share> shares;
    for (const auto& f : impl_->config.share_files) {
      shares.push_back(secrets::parse_share(secrets::read_file(f)));
    }
    impl_->authority.unlock(shares);
  }
}

Service::~Service() { stop(); }

Authority& Service::authority() { return impl_->authority; }

bool Service::tls() const {
  return impl_->config.tls_cert.has_value() && impl_->config.tls_key.has_value();
}

Reply Service::submit_license(const std::string& bearer, const std::string& body) {
  const Credential* who = impl_->authenticate(bearer);
  if (!who) {
    impl_->audit->append("reject", "endpoint=licenses reason=unauthenticated");
    return error_reply(401, "unauthenticated", "missing or unknown credential");
  }
  try {
    const json j = json::parse(body);
    check_version(j);
    LicenseRequest req;
    req.licensee_id = parse_id(j.at("licensee_id").get<std::string>());
    if (who->role == Credential::Role::kLicensee && who->licensee_id != req.licensee_id) {
      impl_->audit->append("reject", "endpoint=licenses reason=forbidden licensee=" +
                                         to_hex(req.licensee_id));
      return error_reply(403, "forbidden", "credential does not cover this licensee");
    }
    if (j.contains("area")) {
      for (const auto& v : j["area"]) {
        req.polygon.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
      }
    }
    if (j.contains("cells")) req.cells = parse_cells(j["cells"]);
    req.start_day = j.at("start_day").get<std::uint32_t>();
    req.end_day = j.at("end_day").get<std::uint32_t>();
    req.purpose = j.value("purpose", std::string());

    const keystore::Bundle bundle = impl_->authority.issue(req);
    const std::size_t epochs = kdf::epochs_for(req.start_day, req.end_day).size();
    impl_->store_for(req.licensee_id).import_bundle(keystore::serialize_bundle(bundle));
    return {201, "application/json",
            json{{"licensee_id", to_hex(req.licensee_id)},
                 {"records", bundle.records.size()},
                 {"cells", bundle.records.size() / epochs},
                 {"epochs", epochs}}
                .dump()};
  } catch (const json::exception& e) {
    impl_->audit->append("reject", "endpoint=licenses reason=malformed");
    return error_reply(400, "format", e.what());
  } catch (const Error& e) {
    impl_->audit->append("reject", "endpoint=licenses reason=" + std::string(to_string(e.code())));
    return error_reply(status_for(e.code()), to_string(e.code()), e.what());
  }
}

Reply Service::fetch_bundle(const std::string& bearer, const std::string& licensee_hex) {
  const Credential* who = impl_->authenticate(bearer);
  if (!who) {
    impl_->audit->append("reject", "endpoint=bundles reason=unauthenticated");
    return error_reply(401, "unauthenticated", "missing or unknown credential");
  }
  try {
    const LicenseeId id = parse_id(licensee_hex);
    if (who->role == Credential::Role::kLicensee && who->licensee_id != id) {
      impl_->audit->append("reject", "endpoint=bundles reason=forbidden licensee=" + to_hex(id));
      return error_reply(403, "forbidden", "credential does not cover this licensee");
    }
    keystore::KeyStore* store = impl_->existing_store(id);
    if (!store) {
      impl_->audit->append("fetch", "licensee=" + to_hex(id) + " result=not-found");
      return error_reply(404, "not-found", "no bundle for licensee " + to_hex(id));
    }
    const Bytes data = store->export_bundle(id);
    impl_->audit->append("fetch", "licensee=" + to_hex(id) +
                                      " records=" + std::to_string(store->size()));
    return {200, "application/octet-stream", std::string(data.begin(), data.end())};
  } catch (const Error& e) {
    impl_->audit->append("reject", "endpoint=bundles reason=" + std::string(to_string(e.code())));
    return error_reply(status_for(e.code()), to_string(e.code()), e.what());
  }
}

Reply Service::delegate(const std::string& bearer, const std::string& body) {
  const Credential* who = impl_->authenticate(bearer);
  if (!who) {
    impl_->audit->append("reject", "endpoint=delegations reason=unauthenticated");
    return error_reply(401, "unauthenticated", "missing or unknown credential");
  }
  if (who->role != Credential::Role::kAdmin) {
    impl_->audit->append("reject", "endpoint=delegations reason=forbidden");
    return error_reply(403, "forbidden", "delegation requires an admin credential");
  }
  try {
    const json j = json::parse(body);
    check_version(j);
    Delegation d;
    d.subauthority_id = parse_id(j.at("subauthority_id").get<std::string>());
    d.cells = parse_cells(j.at("cells"));
    d.start_day = j.at("start_day").get<std::uint32_t>();
    d.end_day = j.at("end_day").get<std::uint32_t>();
    const Bytes data = keystore::serialize_bundle(impl_->authority.delegate(d));
    return {200, "application/octet-stream", std::string(data.begin(), data.end())};
  } catch (const json::exception& e) {
    impl_->audit->append("reject", "endpoint=delegations reason=malformed");
    return error_reply(400, "format", e.what());
  } catch (const Error& e) {
    impl_->audit->append("reject",
                         "endpoint=delegations reason=" + std::string(to_string(e.code())));
    return error_reply(status_for(e.code()), to_string(e.code()), e.what());
  }
}

int Service::start() {
  if (impl_->server) throw Error(ErrorCode::kInvalidInput, "service already started");
  if (tls()) {
    impl_->server = std::make_unique<httplib::SSLServer>(
        impl_->config.tls_cert->c_str(), impl_->config.tls_key->c_str());
    if (!impl_->server->is_valid()) {
      throw Error(ErrorCode::kIo, "cannot load TLS certificate or key");
    }
  } else if (impl_->config.allow_plaintext) {
    impl_->server = std::make_unique<httplib::Server>();
  } else {
    throw Error(ErrorCode::kInvalidInput,
                "TLS certificate and key required (or allow_plaintext for local testing)");
  }

  auto bearer = [](const httplib::Request& req) {
    const std::string h = req.get_header_value("Authorization");
    constexpr std::string_view kPrefix = "Bearer ";
    return h.starts_with(kPrefix) ? h.substr(kPrefix.size()) : std::string();
  };
  auto send = [](httplib::Response& res, const Reply& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };

  auto& srv = *impl_->server;
  srv.Post("/v1/licenses", [this, bearer, send](const httplib::Request& req,
                                                httplib::Response& res) {
    send(res, submit_license(bearer(req), req.body));
  });
  srv.Get(R"(/v1/bundles/([0-9A-Fa-f]+))", [this, bearer, send](const httplib::Request& req,
                                                              httplib::Response& res) {
    send(res, fetch_bundle(bearer(req), req.matches[1].str()));
  });
  srv.Post("/v1/delegations", [this, bearer, send](const httplib::Request& req,
                                                   httplib::Response& res) {
    send(res, delegate(bearer(req), req.body));
  });

  int port = impl_->config.port;
  if (port == 0) {
    port = srv.bind_to_any_port(impl_->config.host);
  } else if (!srv.bind_to_port(impl_->config.host, port)) {
    port = -1;
  }
  if (port < 0) {
    throw Error(ErrorCode::kIo, "cannot bind " + impl_->config.host);
  }
  impl_->thread = std::thread([&srv] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  return port;
}

void Service::stop() {
  if (impl_ && impl_->server) {
    impl_->server->stop();
    if (impl_->thread.joinable()) impl_->thread.join();
    impl_->server.reset();
  }
}

void Service::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace geokey::authority
