#pragma once

// HTTPS front end for the authority. Wire protocol v1:
//
//   POST /v1/licenses           JSON licence request     -> 201 JSON summary
//   GET  /v1/bundles/{licensee} -                        -> 200 bundle bytes
//   POST /v1/delegations        JSON delegation (admin)  -> 200 bundle bytes
//
// Callers authenticate with "Authorization: Bearer <token>" against the
// static credential list. Errors are JSON {"error": code, "message": text}.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "geokey/authority.hpp"

namespace geokey::authority {

struct Credential {
  enum class Role { kAdmin, kLicensee };

  std::string token;
  Role role = Role::kLicensee;
  LicenseeId licensee_id{};  // kLicensee only
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks a free port
  std::filesystem::path data_dir;
  std::optional<std::filesystem::path> tls_cert;
  std::optional<std::filesystem::path> tls_key;
  // Without TLS files the service refuses to start unless this is set.
  bool allow_plaintext = false;
  std::vector<Credential> credentials;
  // Presented at startup to reconstruct the master key.
  std::vector<std::filesystem::path> share_files;
  std::optional<std::filesystem::path> master_key_file;

  // Relative paths resolve against base_dir.
  static ServiceConfig from_json(const std::string& text,
                                 const std::filesystem::path& base_dir);
};

struct Reply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Request handlers, independent of the transport. `bearer` is the token
  // from the Authorization header (empty if absent).
  Reply submit_license(const std::string& bearer, const std::string& body);
  Reply fetch_bundle(const std::string& bearer, const std::string& licensee_hex);
  Reply delegate(const std::string& bearer, const std::string& body);

  // Binds and serves on a background thread; returns the bound port.
  int start();
  void stop();
  // Blocks until stop() is called from another thread.
  void wait();

  Authority& authority();
  bool tls() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace geokey::authority
