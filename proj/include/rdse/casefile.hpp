#pragma once

// IEEE Common Data Format ingestion and nodal admittance construction.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "rdse/errors.hpp"
#include "rdse/linalg.hpp"

namespace rdse {

enum class BusType { slack, pv, pq };

struct BusRecord {
  int id = 0;
  double base_voltage_kv = 0.0;  // 0 when the file leaves it unspecified
  BusType type = BusType::pq;
  double shunt_conductance = 0.0;  // p.u.
  double shunt_susceptance = 0.0;  // p.u.
  double initial_magnitude = 1.0;  // p.u.
  double initial_phase = 0.0;      // rad
};

struct BranchRecord {
  int from_bus = 0;
  int to_bus = 0;
  double resistance = 0.0;
  double reactance = 0.0;
  double line_charging = 0.0;
  double tap_ratio = 1.0;  // off-nominal turns ratio on the from side

  double series_conductance() const { return resistance / (resistance * resistance + reactance * reactance); }
  double series_susceptance() const { return -reactance / (resistance * resistance + reactance * reactance); }
};

/// Two-port pi-model of a branch: I_from = Yff V_from + Yft V_to, I_to = Ytf V_from + Ytt V_to.
struct BranchAdmittance {
  double gff, bff, gft, bft, gtf, btf, gtt, btt;
};

inline BranchAdmittance branch_admittance(const BranchRecord& br) {
  const double g = br.series_conductance();
  const double b = br.series_susceptance();
  const double t = br.tap_ratio;
  const double half = 0.5 * br.line_charging;
  return {g / (t * t), (b + half) / (t * t), -g / t, -b / t, -g / t, -b / t, g, b + half};
}

struct PowerNetwork {
  std::string title;
  double base_mva = 100.0;
  std::vector<BusRecord> buses;
  std::vector<BranchRecord> branches;
  Matrix G;  // real part of the bus admittance matrix
  Matrix B;  // imaginary part
  Index slack_index = 0;

  Index bus_count() const { return static_cast<Index>(buses.size()); }
  Index branch_count() const { return static_cast<Index>(branches.size()); }
  Index state_dim() const { return 2 * bus_count() - 1; }

  /// Position of bus `id` in `buses`; throws ValidationError when absent.
  Index bus_index(int id) const {
    for (std::size_t i = 0; i < buses.size(); ++i)
      if (buses[i].id == id) return static_cast<Index>(i);
    throw ValidationError("unknown bus id " + std::to_string(id));
  }
};

/// Dense G, B of the bus admittance matrix. Phase shifters are out of scope, so both stay symmetric.
inline std::pair<Matrix, Matrix> build_ybus(const std::vector<BusRecord>& buses,
                                            const std::vector<BranchRecord>& branches) {
  const Index n = static_cast<Index>(buses.size());
  std::unordered_map<int, Index> pos;
  for (Index i = 0; i < n; ++i) pos[buses[i].id] = i;
  Matrix G = Matrix::Zero(n, n);
  Matrix B = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    G(i, i) += buses[i].shunt_conductance;
    B(i, i) += buses[i].shunt_susceptance;
  }
  for (const auto& br : branches) {
    const Index f = pos.at(br.from_bus);
    const Index t = pos.at(br.to_bus);
    const auto y = branch_admittance(br);
    G(f, f) += y.gff;
    B(f, f) += y.bff;
    G(t, t) += y.gtt;
    B(t, t) += y.btt;
    G(f, t) += y.gft;
    B(f, t) += y.bft;
    G(t, f) += y.gtf;
    B(t, f) += y.btf;
  }
  return {std::move(G), std::move(B)};
}

/// Checks record invariants and fills ybus and slack_index.
inline void finalize_network(PowerNetwork& net) {
  std::unordered_map<int, int> seen;
  int slack_count = 0;
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    const auto& b = net.buses[i];
    if (++seen[b.id] > 1) throw ValidationError("duplicate bus id " + std::to_string(b.id));
    if (b.base_voltage_kv < 0.0) throw ValidationError("negative base kV at bus " + std::to_string(b.id));
    if (!(b.initial_magnitude > 0.0))
      throw ValidationError("non-positive voltage magnitude at bus " + std::to_string(b.id));
    if (b.type == BusType::slack) {
      ++slack_count;
      net.slack_index = static_cast<Index>(i);
    }
  }
  if (net.buses.empty()) throw ValidationError("network has no buses");
  if (slack_count != 1)
    throw ValidationError("expected exactly one slack bus, found " + std::to_string(slack_count));
  for (const auto& br : net.branches) {
    const std::string tag = std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus);
    if (!seen.count(br.from_bus) || !seen.count(br.to_bus))
      throw ValidationError("branch " + tag + " references an unknown bus");
    if (br.from_bus == br.to_bus) throw ValidationError("branch " + tag + " is a self loop");
    if (br.resistance == 0.0 && br.reactance == 0.0) throw ValidationError("branch " + tag + " has zero impedance");
    if (!(br.tap_ratio > 0.0)) throw ValidationError("branch " + tag + " has a non-positive tap ratio");
  }
  std::tie(net.G, net.B) = build_ybus(net.buses, net.branches);
}

namespace detail {

// 1-based inclusive column slice of a fixed-column card, blank-trimmed.
inline std::string_view columns(std::string_view card, std::size_t lo, std::size_t hi) {
  if (card.size() < lo) return {};
  auto s = card.substr(lo - 1, std::min(hi, card.size()) - (lo - 1));
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline double real_field(std::string_view card, std::size_t lo, std::size_t hi, std::size_t line, const char* name,
                         bool required = true) {
  const auto s = columns(card, lo, hi);
  if (s.empty()) {
    if (required) throw ParseError(std::string("missing ") + name, line);
    return 0.0;
  }
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ParseError(std::string("bad ") + name + " '" + std::string(s) + "'", line);
  return v;
}

inline int int_field(std::string_view card, std::size_t lo, std::size_t hi, std::size_t line, const char* name) {
  const auto s = columns(card, lo, hi);
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size())
    throw ParseError(std::string("bad ") + name + " '" + std::string(s) + "'", line);
  return v;
}

inline bool starts_with_terminator(std::string_view line) {
  auto s = columns(line, 1, line.size());
  return s.size() >= 2 && s[0] == '-' && s[1] == '9';
}

}  // namespace detail

/// Parses IEEE CDF text (fixed-column layout of the Washington archive).
/// Angles are converted to radians; shunts are already per unit in the format.
inline PowerNetwork parse_cdf(std::string_view text) {
  PowerNetwork net;
  std::vector<std::string> lines;
  {
    std::string buf{text};
    std::istringstream in(buf);
    std::string l;
    while (std::getline(in, l)) {
      if (!l.empty() && l.back() == '\r') l.pop_back();
      lines.push_back(std::move(l));
    }
  }
  if (lines.empty()) throw ParseError("empty case file", 0);
  net.title = std::string(detail::columns(lines[0], 1, lines[0].size()));
  if (const auto mva = detail::columns(lines[0], 32, 37); !mva.empty()) {
    net.base_mva = detail::real_field(lines[0], 32, 37, 1, "MVA base");
    if (!(net.base_mva > 0.0)) throw ParseError("non-positive MVA base", 1);
  }

  enum class Section { none, bus, branch, other } section = Section::none;
  bool saw_bus = false, saw_branch = false;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const std::string_view card = lines[k];
    const std::size_t lineno = k + 1;
    if (detail::columns(card, 1, card.size()).empty()) continue;
    if (section == Section::none) {
      if (card.find("BUS DATA FOLLOWS") != std::string_view::npos) {
        section = Section::bus;
        saw_bus = true;
      } else if (card.find("BRANCH DATA FOLLOWS") != std::string_view::npos) {
        section = Section::branch;
        saw_branch = true;
      } else if (card.find("FOLLOWS") != std::string_view::npos) {
        section = Section::other;
      } else if (card.find("END OF DATA") != std::string_view::npos) {
        break;
      }
      continue;
    }
    if (detail::starts_with_terminator(card)) {
      section = Section::none;
      continue;
    }
    if (section == Section::bus) {
      BusRecord b;
      b.id = detail::int_field(card, 1, 4, lineno, "bus number");
      const int type = detail::int_field(card, 25, 26, lineno, "bus type");
      if (type < 0 || type > 3) throw ParseError("bus type out of range", lineno);
      b.type = type == 3 ? BusType::slack : type == 2 ? BusType::pv : BusType::pq;
      b.initial_magnitude = detail::real_field(card, 28, 33, lineno, "voltage magnitude");
      b.initial_phase = detail::real_field(card, 34, 40, lineno, "voltage angle") * std::numbers::pi / 180.0;
      b.base_voltage_kv = detail::real_field(card, 77, 83, lineno, "base kV", false);
      b.shunt_conductance = detail::real_field(card, 107, 114, lineno, "shunt conductance");
      b.shunt_susceptance = detail::real_field(card, 115, 122, lineno, "shunt susceptance");
      net.buses.push_back(b);
    } else if (section == Section::branch) {
      BranchRecord br;
      br.from_bus = detail::int_field(card, 1, 4, lineno, "tap bus number");
      br.to_bus = detail::int_field(card, 6, 9, lineno, "z bus number");
      br.resistance = detail::real_field(card, 20, 29, lineno, "resistance");
      br.reactance = detail::real_field(card, 30, 40, lineno, "reactance");
      br.line_charging = detail::real_field(card, 41, 50, lineno, "line charging");
      const double ratio = detail::real_field(card, 77, 82, lineno, "turns ratio", false);
      const double shift = detail::real_field(card, 84, 90, lineno, "phase shift", false);
      if (shift != 0.0) throw ValidationError("line " + std::to_string(lineno) + ": phase shifters are not supported");
      br.tap_ratio = ratio == 0.0 ? 1.0 : ratio;
      net.branches.push_back(br);
    }
  }
  if (!saw_bus) throw ParseError("no BUS DATA section", 0);
  if (!saw_branch) throw ParseError("no BRANCH DATA section", 0);
  if (section == Section::bus || section == Section::branch) throw ParseError("unterminated data section", lines.size());
  finalize_network(net);
  return net;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline PowerNetwork load_cdf(const std::string& path) { return parse_cdf(read_text_file(path)); }

// Canonical JSON cache form.

inline constexpr int kNetworkSchemaVersion = 1;

inline const char* to_string(BusType t) {
  switch (t) {
    case BusType::slack: return "slack";
    case BusType::pv: return "pv";
    case BusType::pq: return "pq";
  }
  return "pq";
}

inline BusType bus_type_from_string(const std::string& s) {
  if (s == "slack") return BusType::slack;
  if (s == "pv") return BusType::pv;
  if (s == "pq") return BusType::pq;
  throw ValidationError("unknown bus type '" + s + "'");
}

inline nlohmann::json network_to_json(const PowerNetwork& net) {
  using nlohmann::json;
  json j;
  j["schema"] = "rdse.network";
  j["version"] = kNetworkSchemaVersion;
  j["title"] = net.title;
  j["base_mva"] = net.base_mva;
  j["slack_index"] = net.slack_index;
  j["buses"] = json::array();
  for (const auto& b : net.buses)
    j["buses"].push_back({{"id", b.id},
                          {"base_kv", b.base_voltage_kv},
                          {"type", to_string(b.type)},
                          {"shunt_g", b.shunt_conductance},
                          {"shunt_b", b.shunt_susceptance},
                          {"vm", b.initial_magnitude},
                          {"va", b.initial_phase}});
  j["branches"] = json::array();
  for (const auto& br : net.branches)
    j["branches"].push_back({{"from", br.from_bus},
                             {"to", br.to_bus},
                             {"r", br.resistance},
                             {"x", br.reactance},
                             {"b", br.line_charging},
                             {"tap", br.tap_ratio}});
  auto dump = [](const Matrix& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
      json row = json::array();
      for (Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  j["ybus"] = {{"G", dump(net.G)}, {"B", dump(net.B)}};
  return j;
}

/// Rebuilds a network from its JSON dump; a stored ybus must agree bit-for-bit with the rebuilt one.
inline PowerNetwork network_from_json(const nlohmann::json& j) {
  if (j.value("schema", "") != "rdse.network") throw ValidationError("not an rdse.network document");
  if (j.at("version").get<int>() != kNetworkSchemaVersion) throw ValidationError("unsupported network schema version");
  PowerNetwork net;
  net.title = j.value("title", "");
  net.base_mva = j.at("base_mva").get<double>();
  for (const auto& b : j.at("buses")) {
    BusRecord r;
    r.id = b.at("id").get<int>();
    r.base_voltage_kv = b.at("base_kv").get<double>();
    r.type = bus_type_from_string(b.at("type").get<std::string>());
    r.shunt_conductance = b.at("shunt_g").get<double>();
    r.shunt_susceptance = b.at("shunt_b").get<double>();
    r.initial_magnitude = b.at("vm").get<double>();
    r.initial_phase = b.at("va").get<double>();
    net.buses.push_back(r);
  }
  for (const auto& b : j.at("branches")) {
    BranchRecord r;
    r.from_bus = b.at("from").get<int>();
    r.to_bus = b.at("to").get<int>();
    r.resistance = b.at("r").get<double>();
    r.reactance = b.at("x").get<double>();
    r.line_charging = b.at("b").get<double>();
    r.tap_ratio = b.at("tap").get<double>();
    net.branches.push_back(r);
  }
  finalize_network(net);
  if (j.contains("ybus")) {
    const auto& y = j.at("ybus");
    for (Index i = 0; i < net.bus_count(); ++i)
      for (Index k = 0; k < net.bus_count(); ++k)
        if (y.at("G").at(i).at(k).get<double>() != net.G(i, k) || y.at("B").at(i).at(k).get<double>() != net.B(i, k))
          throw ValidationError("stored ybus disagrees with branch records");
  }
  return net;
}

}  // namespace rdse
