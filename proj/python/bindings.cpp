#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "geokey/authz.hpp"
#include "geokey/cipher.hpp"
#include "geokey/error.hpp"
#include "geokey/geocell.hpp"
#include "geokey/kdf.hpp"
#include "geokey/keystore.hpp"
#include "geokey/scenario.hpp"
#include "geokey/secrets.hpp"

namespace py = pybind11;
using namespace geokey;

namespace {

Bytes to_bytes(const py::bytes& b) {
  const std::string s = b;
  return Bytes(s.begin(), s.end());
}

template <typename Container>
py::bytes to_py(const Container& c) {
  return py::bytes(reinterpret_cast<const char*>(c.data()), c.size());
}

secrets::MasterKey master_from(const py::bytes& key) {
  const Bytes k = to_bytes(key);
  if (k.size() != secrets::kMasterKeyLen) {
    throw Error(ErrorCode::kInvalidInput, "master key must be 255 bytes");
  }
  secrets::MasterKey mk;
  std::copy(k.begin(), k.end(), mk.key.begin());
  return mk;
}

std::vector<geo::GeoPoint> points(const std::vector<std::pair<double, double>>& pts) {
  std::vector<geo::GeoPoint> out;
  for (const auto& [lat, lng] : pts) out.push_back({lat, lng});
  return out;
}

template <typename Range>
std::vector<std::string> codes(const Range& r) {
  std::vector<std::string> out;
  for (const auto& c : r) out.emplace_back(c.str());
  return out;
}

}  // namespace

PYBIND11_MODULE(_geokey, m) {
  m.doc() = "Geocoded, timestamped symmetric keys";

  static py::exception<Error> exc(m, "GeokeyError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(exc, (std::string(to_string(e.code())) + ": " + e.what()).c_str());
    }
  });

  m.attr("CELL_COUNT") = geo::kCellCount;

  // geocell
  m.def("encode", [](double lat, double lng) { return std::string(geo::encode({lat, lng}).str()); },
        py::arg("lat"), py::arg("lng"));
  m.def(
      "decode",
      [](const std::string& code) {
        const auto b = geo::decode(geo::Geocode::parse(code));
        return py::make_tuple(b.south, b.west, b.north(), b.east());
      },
      "(south, west, north, east) of a cell");
  m.def("neighbors", [](const std::string& code) {
    return codes(geo::neighbors(geo::Geocode::parse(code)));
  });
  m.def(
      "cover_route",
      [](const std::vector<std::pair<double, double>>& waypoints, double step_m) {
        return codes(geo::cover_route(points(waypoints), step_m));
      },
      py::arg("waypoints"), py::arg("step_m") = geo::kDefaultRouteStepM);
  m.def(
      "cover_area",
      [](const std::vector<std::pair<double, double>>& polygon, const std::string& rule) {
        if (rule != "closed" && rule != "interior") {
          throw Error(ErrorCode::kInvalidInput, "rule must be 'closed' or 'interior'");
        }
        return codes(geo::cover_area(points(polygon), rule == "interior"
                                                           ? geo::CoverRule::kInterior
                                                           : geo::CoverRule::kClosed));
      },
      py::arg("polygon"), py::arg("rule") = "closed");
  m.def("geocode_at", [](std::uint32_t ordinal) {
    return std::string(geo::Geocode::from_ordinal(ordinal).str());
  });

  // cipher
  m.def(
      "rc5_encrypt_block",
      [](const py::bytes& key, const py::bytes& block, unsigned rounds) {
        return to_py(cipher::encrypt_block(to_bytes(block), cipher::key_schedule(to_bytes(key), rounds)));
      },
      py::arg("key"), py::arg("block"), py::arg("rounds") = cipher::kDefaultRounds);
  m.def(
      "rc5_decrypt_block",
      [](const py::bytes& key, const py::bytes& block, unsigned rounds) {
        return to_py(cipher::decrypt_block(to_bytes(block), cipher::key_schedule(to_bytes(key), rounds)));
      },
      py::arg("key"), py::arg("block"), py::arg("rounds") = cipher::kDefaultRounds);
  m.def(
      "cbc_mac",
      [](const py::bytes& key, const py::bytes& msg, unsigned bits, unsigned rounds) {
        return cipher::cbc_mac(to_bytes(msg), cipher::key_schedule(to_bytes(key), rounds), bits)
            .value;
      },
      py::arg("key"), py::arg("msg"), py::arg("bits") = 64,
      py::arg("rounds") = cipher::kDefaultRounds);

  // secrets
  m.def(
      "split",
      [](const py::bytes& master, unsigned k, unsigned n) {
        std::vector<py::tuple> out;
        for (const auto& s : secrets::split(master_from(master), k, n)) {
          out.push_back(py::make_tuple(s.x, to_py(s.y)));
        }
        return out;
      },
      py::arg("master"), py::arg("k") = secrets::kThreshold,
      py::arg("n") = secrets::kParticipants);
  m.def(
      "combine",
      [](const std::vector<std::pair<unsigned, py::bytes>>& shares, unsigned k) {
        std::vector<secrets::Share> in;
        for (const auto& [x, y] : shares) {
          secrets::Share s;
          s.x = static_cast<std::uint8_t>(x);
          const Bytes b = to_bytes(y);
          if (b.size() != secrets::kMasterKeyLen) {
            throw Error(ErrorCode::kInvalidShares, "share must be 255 bytes");
          }
          std::copy(b.begin(), b.end(), s.y.begin());
          in.push_back(s);
        }
        return to_py(secrets::combine(in, k).key);
      },
      py::arg("shares"), py::arg("k") = secrets::kThreshold);

  // kdf
  m.def(
      "derive",
      [](const py::bytes& master, const std::string& code, std::uint32_t start_day,
         std::uint32_t end_day, unsigned bits) {
        const kdf::Deriver d(master_from(master), bits);
        return to_py(d.derive_material(geo::Geocode::parse(code), {start_day, end_day}));
      },
      py::arg("master"), py::arg("geocode"), py::arg("start_day"), py::arg("end_day"),
      py::arg("bits") = kdf::kDefaultDerivedBits);
  m.def("tub_key", [](const py::bytes& material) { return to_py(kdf::tub_key(to_bytes(material))); });
  m.def("epochs_for", [](std::uint32_t start, std::uint32_t end) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
    for (const auto& t : kdf::epochs_for(start, end)) out.emplace_back(t.start_day, t.end_day);
    return out;
  });

  // keystore
  m.def("size_report", &keystore::size_report);
  py::class_<keystore::KeyStore>(m, "KeyStore")
      .def(py::init<>())
      .def_static("open", [](const std::string& path) { return keystore::KeyStore::open(path); })
      .def("import_bundle",
           [](keystore::KeyStore& s, const py::bytes& data) { return s.import_bundle(to_bytes(data)); })
      .def("lookup",
           [](const keystore::KeyStore& s, const std::string& code,
              std::uint32_t day) -> std::optional<py::tuple> {
             const auto hit = s.lookup(geo::Geocode::parse(code), day);
             if (!hit) return std::nullopt;
             return py::make_tuple(to_py(hit->key), hit->interval.start_day, hit->interval.end_day);
           })
      .def("prune_expired", &keystore::KeyStore::prune_expired)
      .def("export_bundle", [](const keystore::KeyStore& s) { return to_py(s.export_bundle()); })
      .def("__len__", &keystore::KeyStore::size);
  m.def(
      "issue_bundle",
      [](const py::bytes& master, const std::vector<std::string>& cells, std::uint32_t start_day,
         std::uint32_t end_day) {
        const kdf::Deriver d(master_from(master));
        keystore::Bundle b;
        for (const auto& t : kdf::epochs_for(start_day, end_day)) {
          for (const auto& c : cells) {
            const auto code = geo::Geocode::parse(c);
            b.records.push_back({code, t, d.derive(code, t).key});
          }
        }
        return to_py(keystore::serialize_bundle(b));
      },
      "Bundle of derived keys for explicit cells, one record per cell and epoch.");

  // authz
  m.def("challenge_bytes", [](std::uint64_t clock_ticks, std::uint32_t nonce) {
    return to_py(authz::make_challenge(clock_ticks, nonce).serialize());
  });
  m.def("response_mac", [](const py::bytes& challenge, const std::string& code,
                           const py::bytes& key) {
    const Bytes k = to_bytes(key);
    if (k.size() != kdf::kGeoKeyLen) throw Error(ErrorCode::kInvalidInput, "key must be 32 bytes");
    kdf::KeyMaterial km;
    std::copy(k.begin(), k.end(), km.begin());
    return authz::response_mac(authz::ChallengePacket::parse(to_bytes(challenge)),
                               geo::Geocode::parse(code), km);
  });
  m.def(
      "run_scenario",
      [](const std::string& text, const std::string& base_dir) {
        const auto r = sim::run_scenario(sim::parse_scenario(text, base_dir));
        return py::module_::import("json").attr("loads")(sim::to_json(r.metrics));
      },
      py::arg("text"), py::arg("base_dir") = ".",
      "Runs a scenario given as text; returns the metrics dict.");
}
