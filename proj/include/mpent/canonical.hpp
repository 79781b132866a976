#pragma once

// Named states: EPR, GHZ, their multi-level versions, the tripartite states
// psi and psi', and the general family of superposed canonical components.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mpent/hilbert.hpp"
#include "mpent/locc.hpp"

namespace mpent {

/// copies() refuses to build states with more support terms than this.
inline constexpr std::size_t kExplicitBudget = 10'000'000;

inline PureState level_epr(Label r, PartyId a, PartyId b, std::size_t party_count = 2) {
  if (r < 1) throw std::invalid_argument("level_epr: level must be >= 1");
  if (a == b) throw std::invalid_argument("level_epr: parties must differ");
  if (a.index >= party_count || b.index >= party_count) throw std::out_of_range("level_epr: party out of range");
  std::vector<Label> dims(party_count, 1);
  dims[a.index] = r;
  dims[b.index] = r;
  PureState::AmplitudeMap m;
  const double amp = 1.0 / std::sqrt(static_cast<double>(r));
  for (Label i = 0; i < r; ++i) {
    BasisLabel l(party_count, 0);
    l[a.index] = i;
    l[b.index] = i;
    m.emplace(std::move(l), amp);
  }
  return PureState(std::move(dims), std::move(m));
}

inline PureState epr(PartyId a, PartyId b, std::size_t party_count = 2) { return level_epr(2, a, b, party_count); }

inline PureState level_ghz(Label t, std::span<const PartyId> parties, std::size_t party_count) {
  if (t < 1) throw std::invalid_argument("level_ghz: level must be >= 1");
  if (parties.size() < 2) throw std::invalid_argument("level_ghz: needs at least two parties");
  std::set<std::size_t> seen;
  for (PartyId p : parties) {
    if (p.index >= party_count) throw std::out_of_range("level_ghz: party out of range");
    if (!seen.insert(p.index).second) throw std::invalid_argument("level_ghz: duplicate party");
  }
  std::vector<Label> dims(party_count, 1);
  for (PartyId p : parties) dims[p.index] = t;
  PureState::AmplitudeMap m;
  const double amp = 1.0 / std::sqrt(static_cast<double>(t));
  for (Label i = 0; i < t; ++i) {
    BasisLabel l(party_count, 0);
    for (PartyId p : parties) l[p.index] = i;
    m.emplace(std::move(l), amp);
  }
  return PureState(std::move(dims), std::move(m));
}

/// t-level GHZ on all `party_count` parties.
inline PureState level_ghz(Label t, std::size_t party_count) {
  std::vector<PartyId> all;
  for (std::size_t p = 0; p < party_count; ++p) all.push_back(PartyId{p});
  return level_ghz(t, all, party_count);
}

inline PureState ghz(std::size_t n) {
  if (n < 2) throw std::invalid_argument("ghz: needs at least two parties");
  return level_ghz(2, n);
}

namespace detail {

inline void check_amplitudes(std::span<const double> c, const char* who) {
  double sum = 0.0;
  for (double x : c) {
    if (x < 0.0) throw std::invalid_argument(std::string(who) + ": coefficients must be non-negative");
    sum += x * x;
  }
  if (std::abs(sum - 1.0) > kNormTolerance) {
    throw std::invalid_argument(std::string(who) + ": squared coefficients must sum to 1");
  }
}

}  // namespace detail

/// c0|000> + c1|1>(|11> + |22>)/sqrt2 on local dimensions (2, 3, 3).
inline PureState psi(double c0, double c1) {
  const double c[] = {c0, c1};
  detail::check_amplitudes(c, "psi");
  const double h = c1 / std::sqrt(2.0);
  return PureState({2, 3, 3}, {{{0, 0, 0}, c0}, {{1, 1, 1}, h}, {{1, 2, 2}, h}});
}

/// Four locally orthogonal components on local dimensions (6, 6, 6): a
/// product term (c0), EPR_AB (c1), EPR_AC (c2) and EPR_BC (c3).
inline PureState psi_prime(double c0, double c1, double c2, double c3) {
  const double c[] = {c0, c1, c2, c3};
  detail::check_amplitudes(c, "psi_prime");
  const double r = 1.0 / std::sqrt(2.0);
  return PureState({6, 6, 6}, {{{0, 0, 0}, c0},
                               {{1, 1, 1}, c3 * r},
                               {{1, 2, 2}, c3 * r},
                               {{2, 3, 3}, c2 * r},
                               {{3, 3, 4}, c2 * r},
                               {{4, 4, 5}, c1 * r},
                               {{5, 5, 5}, c1 * r}});
}

/// One term of a superposition of locally orthogonal canonical states: a
/// `level`-level GHZ on `support` times a product vector on the other parties.
/// A single-party support denotes a plain product term.
struct CanonicalComponent {
  double coefficient = 0.0;
  std::vector<PartyId> support;
  /// One label per non-support party, in increasing party order.
  std::vector<Label> product_labels;
  Label level = 2;

  bool is_canonical() const { return support.size() >= 2; }
};

/// Validated description of a state sum_i c_i |tau_i>|product_i>.
///
/// Component i occupies its own contiguous label range on every party,
/// starting after the ranges of components < i, which makes the components
/// locally orthogonal by construction. Zero-coefficient components are
/// dropped.
class StateSpec {
 public:
  StateSpec(std::size_t party_count, std::vector<CanonicalComponent> components) : m_(party_count) {
    if (m_ < 2) throw std::invalid_argument("StateSpec: needs at least two parties");
    double sum = 0.0;
    for (auto& c : components) {
      if (c.coefficient < 0.0) throw std::invalid_argument("StateSpec: negative coefficient");
      sum += c.coefficient * c.coefficient;
      if (c.coefficient == 0.0) continue;
      validate(c);
      components_.push_back(std::move(c));
    }
    if (components_.empty()) throw std::invalid_argument("StateSpec: no component with positive coefficient");
    if (std::abs(sum - 1.0) > kNormTolerance) throw std::invalid_argument("StateSpec: squared coefficients must sum to 1");
    build_layout();
    std::vector<PureState> parts;
    for (std::size_t i = 0; i < components_.size(); ++i) parts.push_back(component_state(i));
    if (!check_local_orthogonality(parts)) throw std::invalid_argument("StateSpec: components are not locally orthogonal");
  }

  std::size_t party_count() const { return m_; }
  std::size_t size() const { return components_.size(); }
  const std::vector<CanonicalComponent>& components() const { return components_; }
  const std::vector<Label>& local_dims() const { return dims_; }

  std::vector<double> squared_coefficients() const {
    std::vector<double> out;
    for (const auto& c : components_) out.push_back(c.coefficient * c.coefficient);
    return out;
  }

  /// Width of component i's label range on party p.
  Label width(std::size_t i, PartyId p) const {
    const auto& c = components_[i];
    if (in_support(c, p)) return c.is_canonical() ? c.level : 1;
    return product_label(c, p) + 1;
  }

  Label offset(std::size_t i, PartyId p) const { return offsets_[p.index][i]; }

  /// Component whose label range on party p contains `label`.
  std::size_t component_of(PartyId p, Label label) const {
    const auto& off = offsets_[p.index];
    auto it = std::upper_bound(off.begin(), off.end(), label);
    return static_cast<std::size_t>(it - off.begin()) - 1;
  }

  /// Normalized |tau_i>|product_i> embedded in the full local dimensions.
  PureState component_state(std::size_t i) const {
    const auto& c = components_[i];
    const Label levels = c.is_canonical() ? c.level : 1;
    PureState::AmplitudeMap m;
    const double amp = 1.0 / std::sqrt(static_cast<double>(levels));
    for (Label g = 0; g < levels; ++g) {
      BasisLabel l(m_);
      for (std::size_t p = 0; p < m_; ++p) {
        const PartyId party{p};
        l[p] = offset(i, party) + (in_support(c, party) ? g : product_label(c, party));
      }
      m.emplace(std::move(l), amp);
    }
    return PureState(dims_, std::move(m));
  }

 private:
  static bool in_support(const CanonicalComponent& c, PartyId p) {
    return std::find(c.support.begin(), c.support.end(), p) != c.support.end();
  }

  Label product_label(const CanonicalComponent& c, PartyId p) const {
    std::size_t k = 0;
    for (std::size_t q = 0; q < p.index; ++q) {
      if (!in_support(c, PartyId{q})) ++k;
    }
    return c.product_labels[k];
  }

  void validate(const CanonicalComponent& c) const {
    if (c.support.empty()) throw std::invalid_argument("StateSpec: component support must be non-empty");
    std::set<std::size_t> seen;
    for (PartyId p : c.support) {
      if (p.index >= m_) throw std::out_of_range("StateSpec: support party out of range");
      if (!seen.insert(p.index).second) throw std::invalid_argument("StateSpec: duplicate support party");
    }
    if (c.product_labels.size() != m_ - c.support.size()) {
      throw std::invalid_argument("StateSpec: need one product label per non-support party");
    }
    if (c.is_canonical() && c.level < 2) throw std::invalid_argument("StateSpec: canonical level must be >= 2");
  }

  void build_layout() {
    offsets_.assign(m_, {});
    dims_.assign(m_, 0);
    for (std::size_t p = 0; p < m_; ++p) {
      Label at = 0;
      for (std::size_t i = 0; i < components_.size(); ++i) {
        offsets_[p].push_back(at);
        at += width(i, PartyId{p});
      }
      dims_[p] = at;
    }
  }

  std::size_t m_;
  std::vector<CanonicalComponent> components_;
  std::vector<std::vector<Label>> offsets_;
  std::vector<Label> dims_;
};

inline PureState psi_general(const StateSpec& spec) {
  PureState acc(spec.local_dims(), {});
  for (std::size_t i = 0; i < spec.size(); ++i) {
    acc = add(acc, spec.component_state(i).scaled(spec.components()[i].coefficient));
  }
  return acc;
}

/// The spec whose psi_general equals psi(c0, c1).
inline StateSpec psi_spec(double c0, double c1) {
  const double c[] = {c0, c1};
  detail::check_amplitudes(c, "psi_spec");
  return StateSpec(3, {{c0, {kAlice}, {0, 0}, 2}, {c1, {kBob, kClaire}, {0}, 2}});
}

/// The spec whose psi_general equals psi_prime(c0, c1, c2, c3).
inline StateSpec psi_prime_spec(double c0, double c1, double c2, double c3) {
  const double c[] = {c0, c1, c2, c3};
  detail::check_amplitudes(c, "psi_prime_spec");
  return StateSpec(3, {{c0, {kAlice}, {0, 0}, 2},
                       {c3, {kBob, kClaire}, {0}, 2},
                       {c2, {kAlice, kClaire}, {0}, 2},
                       {c1, {kAlice, kBob}, {0}, 2}});
}

/// Random spec on 3 or 4 parties with 2 to 4 components: random supports
/// (single-party supports are product terms), levels 2 or 3, product labels
/// 0 or 1, coefficients bounded away from zero.
inline StateSpec random_spec(Rng& rng) {
  auto below = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  const std::size_t m = 3 + below(2);
  const std::size_t count = 2 + below(3);
  std::vector<double> c(count);
  double norm = 0.0;
  for (auto& x : c) {
    x = 0.05 + rng.uniform();
    norm += x * x;
  }
  std::vector<CanonicalComponent> comps;
  for (std::size_t i = 0; i < count; ++i) {
    CanonicalComponent comp;
    comp.coefficient = c[i] / std::sqrt(norm);
    for (std::size_t p = 0; p < m; ++p) {
      if (rng.uniform() < 0.5) comp.support.push_back(PartyId{p});
    }
    if (comp.support.empty()) comp.support.push_back(PartyId{below(m)});
    for (std::size_t p = comp.support.size(); p < m; ++p) comp.product_labels.push_back(below(2));
    comp.level = 2 + below(2);
    comps.push_back(std::move(comp));
  }
  return StateSpec(m, std::move(comps));
}

/// N-fold tensor power with per-party label flattening.
inline PureState copies(const PureState& s, std::size_t n) {
  if (n < 1) throw std::invalid_argument("copies: N must be >= 1");
  double terms = 1.0;
  for (std::size_t i = 0; i < n; ++i) terms *= static_cast<double>(s.support_size());
  if (terms > static_cast<double>(kExplicitBudget)) {
    throw BudgetExceeded("copies: " + std::to_string(n) + " copies exceed the explicit budget of " +
                         std::to_string(kExplicitBudget) + " terms; use the analytic paths");
  }
  PureState out = s;
  for (std::size_t i = 1; i < n; ++i) out = tensor(out, s);
  return out;
}

}  // namespace mpent
