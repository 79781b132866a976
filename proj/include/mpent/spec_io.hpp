#pragma once

// JSON form of StateSpec:
//   {"m": 3, "components": [{"c": 0.6, "support": [0], "product_labels": [0, 0]},
//                           {"c": 0.8, "support": [1, 2], "product_labels": [0], "level": 2}]}
// Support parties may be indices or letters ("A", "B", ...).

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "mpent/canonical.hpp"

namespace mpent {

class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline PartyId party_from_json(const nlohmann::json& j) {
  if (j.is_number_unsigned()) return PartyId{j.get<std::size_t>()};
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s.size() == 1 && s[0] >= 'A' && s[0] <= 'Z') return PartyId{static_cast<std::size_t>(s[0] - 'A')};
  }
  throw SpecError("spec: support entries must be party indices or letters");
}

}  // namespace detail

inline nlohmann::json to_json(const StateSpec& spec) {
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : spec.components()) {
    nlohmann::json support = nlohmann::json::array();
    for (auto p : c.support) support.push_back(p.index);
    comps.push_back({{"c", c.coefficient}, {"support", support}, {"product_labels", c.product_labels}, {"level", c.level}});
  }
  return {{"m", spec.party_count()}, {"components", comps}};
}

inline StateSpec spec_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || !j.contains("m") || !j.contains("components")) throw SpecError("spec: need fields m and components");
    const auto m = j.at("m").get<std::size_t>();
    std::vector<CanonicalComponent> comps;
    for (const auto& jc : j.at("components")) {
      CanonicalComponent c;
      c.coefficient = jc.at("c").get<double>();
      for (const auto& p : jc.at("support")) c.support.push_back(detail::party_from_json(p));
      if (jc.contains("product_labels")) {
        c.product_labels = jc.at("product_labels").get<std::vector<Label>>();
      } else {
        c.product_labels.assign(m >= c.support.size() ? m - c.support.size() : 0, 0);
      }
      if (jc.contains("level")) c.level = jc.at("level").get<Label>();
      comps.push_back(std::move(c));
    }
    return StateSpec(m, std::move(comps));
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("spec: ") + e.what());
  } catch (const std::logic_error& e) {
    throw SpecError(std::string("spec: ") + e.what());
  }
}

inline StateSpec parse_spec(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("spec: malformed JSON: ") + e.what());
  }
  return spec_from_json(j);
}

inline StateSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("spec: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_spec(buf.str());
}

}  // namespace mpent
