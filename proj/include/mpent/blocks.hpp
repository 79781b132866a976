#pragma once

// Block structure of N copies of a superposition of locally orthogonal
// canonical components. A block is fixed by how many of the N copies sit in
// each component; its states are locally orthogonal to every other block's
// on every party, so any single party can measure the block index.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpent/canonical.hpp"
#include "mpent/hilbert.hpp"
#include "mpent/locc.hpp"

namespace mpent {

/// Copies per component, in spec component order. For psi, counts[0] is the
/// number of |000> factors (the k of the binomial expansion).
struct BlockIndex {
  std::vector<std::size_t> counts;

  std::size_t total() const {
    std::size_t n = 0;
    for (auto c : counts) n += c;
    return n;
  }

  friend auto operator<=>(const BlockIndex&, const BlockIndex&) = default;
};

/// Up to this N multiplicities are computed in exact integer arithmetic.
inline constexpr std::size_t kExactCombinatoricsLimit = 30;
/// Refuse to enumerate more block indices than this.
inline constexpr double kBlockEnumerationLimit = 5e7;

inline double exact_multinomial(std::span<const std::size_t> counts) {
  unsigned __int128 result = 1;
  std::uint64_t n = 0;
  for (auto c : counts) {
    for (std::uint64_t j = 1; j <= c; ++j) {
      ++n;
      result = result * n / j;
    }
  }
  return static_cast<double>(result);
}

/// log2(N! / prod k_i!).
inline double log2_multinomial(std::span<const std::size_t> counts) {
  std::size_t n = 0;
  for (auto c : counts) n += c;
  if (n <= kExactCombinatoricsLimit) return std::log2(exact_multinomial(counts));
  double acc = std::lgamma(static_cast<double>(n) + 1.0);
  for (auto c : counts) acc -= std::lgamma(static_cast<double>(c) + 1.0);
  return acc / std::numbers::ln2;
}

inline double log2_binomial(std::size_t n, std::size_t k) {
  if (k > n) throw std::invalid_argument("log2_binomial: k > N");
  const std::size_t c[] = {k, n - k};
  return log2_multinomial(c);
}

inline double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  const std::size_t c[] = {k, n - k};
  return n <= kExactCombinatoricsLimit ? exact_multinomial(c) : std::exp2(log2_multinomial(c));
}

/// Number of count vectors with `parts` entries summing to n.
inline double block_count(std::size_t n, std::size_t parts) {
  return parts == 0 ? 0.0 : binomial(n + parts - 1, parts - 1);
}

/// Calls fn(const BlockIndex&) for every count vector of length `parts`
/// summing to n, in lexicographic order.
template <class Fn>
void for_each_block(std::size_t n, std::size_t parts, Fn&& fn) {
  if (parts == 0) throw std::invalid_argument("for_each_block: need at least one component");
  if (block_count(n, parts) > kBlockEnumerationLimit) {
    throw BudgetExceeded("for_each_block: too many block indices");
  }
  BlockIndex idx{std::vector<std::size_t>(parts, 0)};
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t pos, std::size_t left) {
    if (pos + 1 == parts) {
      idx.counts[pos] = left;
      fn(static_cast<const BlockIndex&>(idx));
      return;
    }
    for (std::size_t c = 0; c <= left; ++c) {
      idx.counts[pos] = c;
      rec(pos + 1, left - c);
    }
  };
  rec(0, n);
}

inline std::vector<BlockIndex> enumerate_blocks(std::size_t n, std::size_t parts) {
  std::vector<BlockIndex> out;
  for_each_block(n, parts, [&](const BlockIndex& idx) { out.push_back(idx); });
  return out;
}

/// log2 of multinomial(N; counts) * prod squared_coeffs^counts.
inline double block_log2_probability(std::size_t n, const BlockIndex& idx, std::span<const double> squared_coeffs) {
  if (idx.total() != n) throw std::invalid_argument("block_log2_probability: counts do not sum to N");
  if (idx.counts.size() != squared_coeffs.size()) throw std::invalid_argument("block_log2_probability: size mismatch");
  double acc = log2_multinomial(idx.counts);
  for (std::size_t i = 0; i < idx.counts.size(); ++i) {
    if (idx.counts[i] == 0) continue;
    if (squared_coeffs[i] <= 0.0) return -std::numeric_limits<double>::infinity();
    acc += static_cast<double>(idx.counts[i]) * std::log2(squared_coeffs[i]);
  }
  return acc;
}

struct BlockEntry {
  BlockIndex index;
  double coefficient = 0.0;        ///< prod c_i^{k_i}
  double multiplicity = 0.0;       ///< exact below 2^53
  double log2_multiplicity = 0.0;
  double log2_probability = 0.0;

  double probability() const { return std::exp2(log2_probability); }
};

struct BlockDecomposition {
  std::size_t n = 0;
  std::vector<BlockEntry> entries;
};

/// Analytic decomposition of N copies of psi_general(spec).
inline BlockDecomposition decompose(const StateSpec& spec, std::size_t n) {
  if (n < 1) throw std::invalid_argument("decompose: N must be >= 1");
  const auto sq = spec.squared_coefficients();
  BlockDecomposition d{n, {}};
  for_each_block(n, spec.size(), [&](const BlockIndex& idx) {
    BlockEntry e;
    e.log2_multiplicity = log2_multinomial(idx.counts);
    e.multiplicity = n <= kExactCombinatoricsLimit ? exact_multinomial(idx.counts) : std::exp2(e.log2_multiplicity);
    double log2_coeff = 0.0;
    for (std::size_t i = 0; i < idx.counts.size(); ++i) {
      log2_coeff += static_cast<double>(idx.counts[i]) * std::log2(spec.components()[i].coefficient);
    }
    e.coefficient = std::exp2(log2_coeff);
    e.log2_probability = block_log2_probability(n, idx, sq);
    e.index = idx;
    d.entries.push_back(std::move(e));
  });
  return d;
}

namespace detail {

inline Label checked_power(Label base, std::size_t n) {
  double v = 1.0;
  Label out = 1;
  for (std::size_t i = 0; i < n; ++i) {
    v *= static_cast<double>(base);
    out *= base;
  }
  if (v > static_cast<double>(kExplicitBudget)) throw BudgetExceeded("local dimension of N copies exceeds the explicit budget");
  return out;
}

}  // namespace detail

/// Block of the N-copy local label `label` as seen by party p.
inline BlockIndex block_of_label(const StateSpec& spec, std::size_t n, PartyId p, Label label) {
  const Label d = spec.local_dims()[p.index];
  BlockIndex idx{std::vector<std::size_t>(spec.size(), 0)};
  for (std::size_t j = 0; j < n; ++j) {
    ++idx.counts[spec.component_of(p, label % d)];
    label /= d;
  }
  return idx;
}

/// Projector on party p onto the local support of block `idx`.
inline LocalOperator block_projector(const StateSpec& spec, std::size_t n, const BlockIndex& idx, PartyId p) {
  const Label dim = detail::checked_power(spec.local_dims()[p.index], n);
  std::vector<Label> labels;
  for (Label l = 0; l < dim; ++l) {
    if (block_of_label(spec, n, p, l) == idx) labels.push_back(l);
  }
  return projector_onto_labels(p, labels, dim);
}

/// Projective block measurement on party p; outcome j is enumerate_blocks()[j].
inline Povm block_measurement(const StateSpec& spec, std::size_t n, PartyId p) {
  const auto blocks = enumerate_blocks(n, spec.size());
  const Label dim = detail::checked_power(spec.local_dims()[p.index], n);
  std::map<BlockIndex, std::size_t> position;
  for (std::size_t j = 0; j < blocks.size(); ++j) position.emplace(blocks[j], j);
  std::vector<std::vector<Label>> labels(blocks.size());
  for (Label l = 0; l < dim; ++l) labels[position.at(block_of_label(spec, n, p, l))].push_back(l);
  Povm povm{p, {}};
  for (const auto& ls : labels) povm.elements.push_back(projector_onto_labels(p, ls, dim));
  return povm;
}

struct ProjectedBlock {
  BlockIndex index;
  double weight = 0.0;  ///< squared norm of the projection
  PureState state;      ///< normalized; empty when weight vanishes
};

/// Projects an explicit N-copy state onto every block using party p's projectors.
inline std::vector<ProjectedBlock> project_blocks(const StateSpec& spec, const PureState& state, std::size_t n,
                                                  PartyId p = kAlice) {
  const auto povm = block_measurement(spec, n, p);
  const auto blocks = enumerate_blocks(n, spec.size());
  std::vector<ProjectedBlock> out;
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    PureState proj = apply_unnormalized(state, povm.elements[j]);
    const double w = proj.norm_squared();
    out.push_back({blocks[j], w, w > kImpossibleProbability ? proj.normalized() : PureState(proj.local_dims(), {})});
  }
  return out;
}

/// Decomposition of an explicit N-copy state. Block weights come from
/// projecting `state`; throws if they disagree with the analytic values.
inline BlockDecomposition decompose(const StateSpec& spec, const PureState& state, std::size_t n) {
  auto d = decompose(spec, n);
  const auto projected = project_blocks(spec, state, n);
  double total = 0.0;
  for (std::size_t j = 0; j < d.entries.size(); ++j) {
    const auto& e = d.entries[j];
    const double expected = e.coefficient * e.coefficient * e.multiplicity;
    total += projected[j].weight;
    if (std::abs(projected[j].weight - expected) > kNormTolerance) {
      throw std::invalid_argument("decompose: state does not have the block structure of the spec");
    }
  }
  if (std::abs(total - state.norm_squared()) > kNormTolerance) {
    throw std::invalid_argument("decompose: state has weight outside the spec's blocks");
  }
  return d;
}

/// Direct construction of a normalized block: the uniform superposition, over
/// all arrangements of components with the given counts, of the products of
/// the component states.
inline PureState assemble_block(const StateSpec& spec, std::size_t n, const BlockIndex& idx) {
  if (idx.total() != n || idx.counts.size() != spec.size()) throw std::invalid_argument("assemble_block: bad index");
  double terms = std::exp2(log2_multinomial(idx.counts));
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const auto& c = spec.components()[i];
    terms *= std::pow(static_cast<double>(c.is_canonical() ? c.level : 1), static_cast<double>(idx.counts[i]));
  }
  if (terms > static_cast<double>(kExplicitBudget)) throw BudgetExceeded("assemble_block: block too large");

  std::vector<PureState> parts;
  for (std::size_t i = 0; i < spec.size(); ++i) parts.push_back(spec.component_state(i));
  const std::size_t m = spec.party_count();
  std::vector<Label> dims(m);
  for (std::size_t p = 0; p < m; ++p) dims[p] = detail::checked_power(spec.local_dims()[p], n);

  PureState::AmplitudeMap amps;
  auto left = idx.counts;
  std::function<void(std::size_t, BasisLabel&, Amplitude)> rec = [&](std::size_t copy, BasisLabel& label, Amplitude a) {
    if (copy == n) {
      amps[label] += a;
      return;
    }
    for (std::size_t i = 0; i < left.size(); ++i) {
      if (left[i] == 0) continue;
      --left[i];
      for (const auto& [cl, cv] : parts[i].amplitudes()) {
        BasisLabel next = label;
        for (std::size_t p = 0; p < m; ++p) next[p] = next[p] * spec.local_dims()[p] + cl[p];
        rec(copy + 1, next, a * cv);
      }
      ++left[i];
    }
  };
  BasisLabel start(m, 0);
  rec(0, start, Amplitude{1.0});
  return PureState(dims, std::move(amps)).normalized();
}

// Canonical labeling of the blocks of psi^N.
//
// Within block (N,k) the rows are the length-N bit strings of weight k, in
// increasing numeric order, with copy 0 as the most significant bit and a 1
// marking a copy in the |000> component. Bob's and Claire's in-row index i
// enumerates the assignments of {1,2} to the N-k remaining copies in
// lexicographic order (most significant bit of i on the earliest such copy).

/// Weight-k strings of length n in increasing numeric order.
inline std::vector<std::uint64_t> weight_strings(std::size_t n, std::size_t k) {
  if (k > n || n > 62) throw std::invalid_argument("weight_strings: bad arguments");
  std::vector<std::uint64_t> out;
  if (k == 0) return {0};
  std::uint64_t v = (std::uint64_t{1} << k) - 1;
  const std::uint64_t limit = std::uint64_t{1} << n;
  while (v < limit) {
    out.push_back(v);
    const std::uint64_t low = v & (~v + 1);
    const std::uint64_t ripple = v + low;
    v = (((ripple ^ v) >> 2) / low) | ripple;
  }
  return out;
}

/// Alice's label in psi^N for row `mask`: digit 0 on |000> copies, 1 elsewhere.
inline Label natural_alice_label(std::size_t n, std::uint64_t mask) {
  return (~mask) & ((std::uint64_t{1} << n) - 1);
}

/// Bob's (or Claire's) label in psi^N for row `mask` and in-row index i.
inline Label natural_pair_label(std::size_t n, std::uint64_t mask, Label i) {
  const std::size_t free_slots = n - static_cast<std::size_t>(std::popcount(mask));
  Label label = 0;
  std::size_t slot = 0;
  for (std::size_t copy = 0; copy < n; ++copy) {
    const bool zero_copy = (mask >> (n - 1 - copy)) & 1U;
    Label digit = 0;
    if (!zero_copy) {
      digit = 1 + ((i >> (free_slots - 1 - slot)) & 1U);
      ++slot;
    }
    label = label * 3 + digit;
  }
  return label;
}

/// Normalized projection of psi^N onto block k (independent of c0, c1 > 0).
inline PureState block_state(std::size_t n, std::size_t k) {
  if (k > n) throw std::invalid_argument("block_state: k > N");
  const double h = 1.0 / std::sqrt(2.0);
  const auto spec = psi_spec(h, h);
  const auto state = copies(psi(h, h), n);
  const BlockIndex idx{{k, n - k}};
  return apply_element(state, block_projector(spec, n, idx, kAlice)).first;
}

/// r-level EPR_BC times t-level GHZ (r = 2^(N-k), t = b(N,k)) mapped into the
/// psi^N basis with the canonical labeling.
inline PureState canonical_block_from_resources(std::size_t n, std::size_t k) {
  if (k > n) throw std::invalid_argument("canonical_block_from_resources: k > N");
  const Label r = Label{1} << (n - k);
  const auto rows = weight_strings(n, k);
  const Label t = rows.size();
  if (static_cast<double>(r) * static_cast<double>(t) > static_cast<double>(kExplicitBudget)) {
    throw BudgetExceeded("canonical_block_from_resources: block too large");
  }
  PureState s = tensor(level_epr(r, kBob, kClaire, 3), level_ghz(t, 3));
  const Label alice_dim = Label{1} << n;
  const Label pair_dim = detail::checked_power(3, n);
  s = relabel(s, kAlice, [&](Label a) { return natural_alice_label(n, rows[a]); }, alice_dim);
  auto pair_map = [&](Label l) { return natural_pair_label(n, rows[l % t], l / t); };
  s = relabel(s, kBob, pair_map, pair_dim);
  s = relabel(s, kClaire, pair_map, pair_dim);
  return s;
}

/// Block (N,k) equals r-level EPR_BC x t-level GHZ under the canonical labeling.
inline bool verify_block_equivalence(std::size_t n, std::size_t k, double tol = kNormTolerance) {
  return states_equal(block_state(n, k), canonical_block_from_resources(n, k), tol);
}

using Subset = std::vector<std::size_t>;

inline std::string subset_name(const Subset& s) {
  std::string out;
  for (auto p : s) out += party_name(PartyId{p});
  return out;
}

inline Subset full_set(std::size_t m) {
  Subset s(m);
  for (std::size_t p = 0; p < m; ++p) s[p] = p;
  return s;
}

inline Subset support_subset(const CanonicalComponent& c) {
  Subset s;
  for (auto p : c.support) s.push_back(p.index);
  std::sort(s.begin(), s.end());
  return s;
}

/// Canonical resources held after the block measurement lands in a block.
struct BlockYields {
  /// Canonical units per subset from the components themselves
  /// (log2 of the level per copy in that component).
  std::map<Subset, double> per_subset;
  /// log2 of the block multiplicity: the level of the all-party GHZ.
  double ghz = 0.0;
};

inline BlockYields block_yields(const BlockIndex& idx, const StateSpec& spec) {
  if (idx.counts.size() != spec.size()) throw std::invalid_argument("block_yields: index size mismatch");
  BlockYields y;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const auto& c = spec.components()[i];
    if (!c.is_canonical()) continue;
    y.per_subset[support_subset(c)] += static_cast<double>(idx.counts[i]) * std::log2(static_cast<double>(c.level));
  }
  y.ghz = log2_multinomial(idx.counts);
  return y;
}

}  // namespace mpent
