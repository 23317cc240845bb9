#pragma once

// Experiment reports: a deterministic JSON payload (hashed), CSV data tables,
// and run metadata kept outside the hash.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "swapsim/csv.hpp"
#include "swapsim/qcore.hpp"

namespace swapsim {

using Json = nlohmann::ordered_json;

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Shortest round-trip decimal text.
inline std::string number_text(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  int failed_trials = 0;
};

inline Json to_json(const Estimate& e) {
  Json j;
  j["value"] = e.value;
  j["stderr"] = e.std_error;
  if (e.failed_trials) j["failed_trials"] = e.failed_trials;
  return j;
}

inline Json matrix_json(const Matrix& m) {
  Json re = Json::array(), im = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json rr = Json::array(), ri = Json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
      rr.push_back(m(i, k).real());
      ri.push_back(m(i, k).imag());
    }
    re.push_back(std::move(rr));
    im.push_back(std::move(ri));
  }
  Json j;
  j["re"] = std::move(re);
  j["im"] = std::move(im);
  return j;
}

struct Table {
  std::string name;  // file stem
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const {
    std::vector<csv::Row> all;
    all.push_back(header);
    all.insert(all.end(), rows.begin(), rows.end());
    return csv::write(all);
  }
};

/// Complex matrix as (row, col, re, im) records.
inline Table matrix_table(std::string name, const Matrix& m) {
  Table t{std::move(name), {"row", "col", "re", "im"}, {}};
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index k = 0; k < m.cols(); ++k)
      t.rows.push_back({std::to_string(i), std::to_string(k), number_text(m(i, k).real()), number_text(m(i, k).imag())});
  return t;
}

struct Report {
  std::string experiment;
  Json payload;
  std::vector<Table> tables;

  /// Canonical payload text; the hash covers exactly these bytes.
  std::string payload_text() const { return payload.dump(2); }
  std::string payload_hash() const { return "fnv1a64:" + hex64(fnv1a64(payload_text())); }

  Json document(const Json& run) const {
    Json doc;
    doc["payload"] = payload;
    doc["payload_hash"] = payload_hash();
    doc["run"] = run;
    return doc;
  }
};

}  // namespace swapsim
