#include "geokey/authority.hpp"

#include <algorithm>
#include <ctime>
#include <fstream>

#include "geokey/error.hpp"

namespace geokey::authority {

std::string iso8601(std::chrono::system_clock::time_point t) {
  const std::time_t secs = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

AuditLog::AuditLog(std::optional<std::filesystem::path> file, Clock clock)
    : file_(std::move(file)), clock_(std::move(clock)) {}

void AuditLog::append(const std::string& event, const std::string& fields) {
  std::lock_guard lock(mutex_);
  std::string line = iso8601(clock_()) + " " + event;
  if (!fields.empty()) line += " " + fields;
  if (file_) {
    std::ofstream out(*file_, std::ios::app);
    out << line << '\n';
    if (!out) throw Error(ErrorCode::kIo, "cannot append to audit log " + file_->string());
  }
  lines_.push_back(std::move(line));
}

std::vector<std::string> AuditLog::lines() const {
  std::lock_guard lock(mutex_);
  return lines_;
}

Authority::Authority(std::shared_ptr<AuditLog> audit) : audit_(std::move(audit)) {}

void Authority::unlock(std::span<const secrets::Share> shares, unsigned threshold) {
  unlock(secrets::combine(shares, threshold));
}

void Authority::unlock(const secrets::MasterKey& mk) {
  auto d = std::make_shared<const kdf::Deriver>(mk);
  std::unique_lock lock(mutex_);
  deriver_ = std::move(d);
  audit_->append("unlock", "ceremony=" + to_hex(mk.ceremony_id));
}

void Authority::lock() {
  std::unique_lock lock(mutex_);
  deriver_.reset();
}

bool Authority::unlocked() const {
  std::shared_lock lock(mutex_);
  return deriver_ != nullptr;
}

std::shared_ptr<const kdf::Deriver> Authority::deriver() const {
  std::shared_lock lock(mutex_);
  if (!deriver_) {
    throw Error(ErrorCode::kServiceUnavailable, "master key not available");
  }
  return deriver_;
}

std::vector<geo::Geocode> Authority::resolve_cells(const LicenseRequest& req) const {
  std::vector<geo::Geocode> cells;
  if (!req.polygon.empty()) {
    const auto covered = geo::cover_area(req.polygon);
    cells.assign(covered.begin(), covered.end());
  } else {
    cells = req.cells;
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  }
  if (cells.empty()) throw Error(ErrorCode::kInvalidInput, "licence area covers no cells");
  return cells;
}

keystore::Bundle Authority::derive_bundle(const LicenseeId& id,
                                          const std::vector<geo::Geocode>& cells,
                                          const std::vector<kdf::TimeInterval>& epochs) const {
  const auto d = deriver();
  keystore::Bundle bundle{id, {}};
  bundle.records.reserve(cells.size() * epochs.size());
  for (const geo::Geocode& c : cells) {
    for (const kdf::TimeInterval& t : epochs) {
      const kdf::GeoKey k = d->derive(c, t);
      bundle.records.push_back({c, t, k.key});
    }
  }
  return bundle;
}

namespace {
std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  return out + "\"";
}
}  // namespace

keystore::Bundle Authority::issue(const LicenseRequest& req) const {
  const auto epochs = kdf::epochs_for(req.start_day, req.end_day);
  const auto cells = resolve_cells(req);
  keystore::Bundle bundle = derive_bundle(req.licensee_id, cells, epochs);
  audit_->append("issue", "licensee=" + to_hex(req.licensee_id) +
                              " cells=" + std::to_string(cells.size()) +
                              " epochs=" + std::to_string(epochs.size()) +
                              " records=" + std::to_string(bundle.records.size()) +
                              " span=[" + std::to_string(req.start_day) + "," +
                              std::to_string(req.end_day) + ")" +
                              " purpose=" + quoted(req.purpose));
  return bundle;
}

keystore::Bundle Authority::delegate(const Delegation& d) const {
  if (d.cells.empty()) throw Error(ErrorCode::kInvalidInput, "delegation has no cells");
  const auto epochs = kdf::epochs_for(d.start_day, d.end_day);
  std::vector<geo::Geocode> cells = d.cells;
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  keystore::Bundle bundle = derive_bundle(d.subauthority_id, cells, epochs);
  audit_->append("delegate", "subauthority=" + to_hex(d.subauthority_id) +
                                 " cells=" + std::to_string(cells.size()) +
                                 " epochs=" + std::to_string(epochs.size()) +
                                 " records=" + std::to_string(bundle.records.size()) +
                                 " span=[" + std::to_string(d.start_day) + "," +
                                 std::to_string(d.end_day) + ")");
  return bundle;
}

}  // namespace geokey::authority
