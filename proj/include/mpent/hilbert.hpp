#pragma once

// Sparse multipartite pure states and the linear algebra the protocols need.
//
// A PureState keeps one local basis label per party. States of N copies keep
// the party structure and flatten the per-copy labels of each party in mixed
// radix, first copy most significant.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace mpent {

using Amplitude = std::complex<double>;
using Label = std::uint64_t;
using BasisLabel = std::vector<Label>;

/// Amplitudes with smaller magnitude are dropped after every operation.
inline constexpr double kPruneThreshold = 1e-12;
inline constexpr double kNormTolerance = 1e-9;

struct PartyId {
  std::size_t index = 0;
  friend constexpr auto operator<=>(PartyId, PartyId) = default;
};

inline constexpr PartyId kAlice{0};
inline constexpr PartyId kBob{1};
inline constexpr PartyId kClaire{2};

/// Raised when an explicit construction would exceed the simulation budget.
class BudgetExceeded : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// "A", "B", ... for parties 0..25, "P<i>" beyond.
inline std::string party_name(PartyId p) {
  if (p.index < 26) return std::string(1, static_cast<char>('A' + p.index));
  return "P" + std::to_string(p.index);
}

class PureState {
 public:
  using AmplitudeMap = std::map<BasisLabel, Amplitude>;

  PureState() = default;

  PureState(std::vector<Label> local_dims, AmplitudeMap amplitudes)
      : dims_(std::move(local_dims)) {
    for (Label d : dims_) {
      if (d == 0) throw std::invalid_argument("PureState: local dimension must be positive");
    }
    for (auto& [label, amp] : amplitudes) {
      if (label.size() != dims_.size()) {
        throw std::invalid_argument("PureState: label length differs from party count");
      }
      for (std::size_t p = 0; p < dims_.size(); ++p) {
        if (label[p] >= dims_[p]) {
          throw std::out_of_range("PureState: label " + std::to_string(label[p]) +
                                  " exceeds local dimension of party " + std::to_string(p));
        }
      }
      if (std::abs(amp) >= kPruneThreshold) amps_.emplace_hint(amps_.end(), label, amp);
    }
  }

  static PureState basis(std::vector<Label> local_dims, BasisLabel label) {
    AmplitudeMap m;
    m.emplace(std::move(label), Amplitude{1.0});
    return PureState(std::move(local_dims), std::move(m));
  }

  std::size_t party_count() const { return dims_.size(); }
  const std::vector<Label>& local_dims() const { return dims_; }
  Label local_dim(PartyId p) const { return dims_.at(p.index); }
  const AmplitudeMap& amplitudes() const { return amps_; }
  std::size_t support_size() const { return amps_.size(); }
  bool empty() const { return amps_.empty(); }

  Amplitude amplitude(const BasisLabel& label) const {
    auto it = amps_.find(label);
    return it == amps_.end() ? Amplitude{} : it->second;
  }

  double norm_squared() const {
    double acc = 0.0;
    for (const auto& [_, a] : amps_) acc += std::norm(a);
    return acc;
  }

  bool is_normalized(double tol = kNormTolerance) const {
    return std::abs(norm_squared() - 1.0) <= tol;
  }

  PureState scaled(Amplitude factor) const {
    AmplitudeMap m;
    for (const auto& [l, a] : amps_) m.emplace_hint(m.end(), l, a * factor);
    return PureState(dims_, std::move(m));
  }

  PureState normalized() const {
    const double n2 = norm_squared();
    if (n2 <= kPruneThreshold * kPruneThreshold) {
      throw std::domain_error("PureState: cannot normalize a zero vector");
    }
    return scaled(1.0 / std::sqrt(n2));
  }

  bool same_shape(const PureState& other) const { return dims_ == other.dims_; }

 private:
  std::vector<Label> dims_;
  AmplitudeMap amps_;
};

/// Sum of two states of identical shape.
inline PureState add(const PureState& a, const PureState& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("add: shape mismatch");
  auto m = a.amplitudes();
  for (const auto& [l, v] : b.amplitudes()) m[l] += v;
  return PureState(a.local_dims(), std::move(m));
}

/// Assigns each input party to an output party. An output party receiving
/// parties from both inputs gets dimension dim_a*dim_b and label
/// label_a*dim_b + label_b; output parties receiving nothing have dimension 1.
struct PartyMerge {
  std::size_t output_parties = 0;
  std::vector<std::size_t> left;
  std::vector<std::size_t> right;

  static PartyMerge aligned(std::size_t parties) {
    PartyMerge m;
    m.output_parties = parties;
    m.left.resize(parties);
    std::iota(m.left.begin(), m.left.end(), std::size_t{0});
    m.right = m.left;
    return m;
  }
};

inline PureState tensor(const PureState& a, const PureState& b, const PartyMerge& merge) {
  if (merge.left.size() != a.party_count() || merge.right.size() != b.party_count()) {
    throw std::invalid_argument("tensor: alignment does not cover every input party");
  }
  const std::size_t m = merge.output_parties;
  std::vector<Label> left_dim(m, 1), right_dim(m, 1);
  std::vector<int> left_used(m, 0), right_used(m, 0);
  for (std::size_t p = 0; p < merge.left.size(); ++p) {
    const std::size_t o = merge.left[p];
    if (o >= m || left_used[o]++) throw std::invalid_argument("tensor: bad left alignment");
    left_dim[o] = a.local_dims()[p];
  }
  for (std::size_t p = 0; p < merge.right.size(); ++p) {
    const std::size_t o = merge.right[p];
    if (o >= m || right_used[o]++) throw std::invalid_argument("tensor: bad right alignment");
    right_dim[o] = b.local_dims()[p];
  }
  std::vector<Label> dims(m);
  for (std::size_t o = 0; o < m; ++o) dims[o] = left_dim[o] * right_dim[o];

  PureState::AmplitudeMap out;
  BasisLabel label(m);
  for (const auto& [la, va] : a.amplitudes()) {
    for (const auto& [lb, vb] : b.amplitudes()) {
      std::fill(label.begin(), label.end(), Label{0});
      for (std::size_t p = 0; p < la.size(); ++p) label[merge.left[p]] += la[p] * right_dim[merge.left[p]];
      for (std::size_t p = 0; p < lb.size(); ++p) label[merge.right[p]] += lb[p];
      out[label] += va * vb;
    }
  }
  return PureState(std::move(dims), std::move(out));
}

inline PureState tensor(const PureState& a, const PureState& b) {
  if (a.party_count() != b.party_count()) {
    throw std::invalid_argument("tensor: party counts differ; pass an explicit PartyMerge");
  }
  return tensor(a, b, PartyMerge::aligned(a.party_count()));
}

/// <a|b>, conjugate-linear in a.
inline Amplitude inner(const PureState& a, const PureState& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("inner: dimension mismatch");
  Amplitude acc{};
  if (a.support_size() <= b.support_size()) {
    for (const auto& [l, va] : a.amplitudes()) acc += std::conj(va) * b.amplitude(l);
  } else {
    for (const auto& [l, vb] : b.amplitudes()) acc += std::conj(a.amplitude(l)) * vb;
  }
  return acc;
}

struct DensityMatrix {
  Eigen::MatrixXcd entries;

  std::size_t dim() const { return static_cast<std::size_t>(entries.rows()); }

  Eigen::VectorXd eigenvalues() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(entries, Eigen::EigenvaluesOnly);
    return solver.eigenvalues();
  }
};

namespace detail {

inline void check_cut(const PureState& s, std::span<const PartyId> parties) {
  if (parties.empty()) throw std::invalid_argument("subsystem must be non-empty");
  std::set<std::size_t> seen;
  for (PartyId p : parties) {
    if (p.index >= s.party_count()) throw std::out_of_range("party index out of range");
    if (!seen.insert(p.index).second) throw std::invalid_argument("duplicate party in subsystem");
  }
  if (seen.size() == s.party_count()) throw std::invalid_argument("subsystem must be a proper subset");
}

inline std::vector<bool> membership(std::size_t m, std::span<const PartyId> parties) {
  std::vector<bool> in(m, false);
  for (PartyId p : parties) in[p.index] = true;
  return in;
}

/// Reduced density matrix restricted to the kept labels that actually occur.
/// Row/column i corresponds to keys[i].
inline Eigen::MatrixXcd compact_reduced(const PureState& s, const std::vector<bool>& keep,
                                        std::vector<BasisLabel>* keys_out = nullptr) {
  std::map<BasisLabel, std::size_t> kept_index;
  std::map<BasisLabel, std::vector<std::pair<std::size_t, Amplitude>>> groups;
  BasisLabel kept, traced;
  for (const auto& [l, v] : s.amplitudes()) {
    kept.clear();
    traced.clear();
    for (std::size_t p = 0; p < l.size(); ++p) (keep[p] ? kept : traced).push_back(l[p]);
    auto [it, _] = kept_index.emplace(kept, kept_index.size());
    groups[traced].emplace_back(it->second, v);
  }
  const auto n = static_cast<Eigen::Index>(kept_index.size());
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& [_, vec] : groups) {
    for (const auto& [i, vi] : vec) {
      for (const auto& [j, vj] : vec) rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += vi * std::conj(vj);
    }
  }
  if (keys_out) {
    keys_out->assign(kept_index.size(), {});
    for (const auto& [k, i] : kept_index) (*keys_out)[i] = k;
  }
  return rho;
}

inline std::size_t distinct_labels(const PureState& s, const std::vector<bool>& keep) {
  std::set<BasisLabel> seen;
  BasisLabel kept;
  for (const auto& [l, _] : s.amplitudes()) {
    kept.clear();
    for (std::size_t p = 0; p < l.size(); ++p) {
      if (keep[p]) kept.push_back(l[p]);
    }
    seen.insert(kept);
  }
  return seen.size();
}

}  // namespace detail

/// Largest dense reduced density matrix reduced_density will build.
inline constexpr std::size_t kDenseReducedLimit = 4096;

/// Partial trace over the complement of `parties`. The kept index is mixed
/// radix over `parties` in the order given.
inline DensityMatrix reduced_density(const PureState& s, std::span<const PartyId> parties) {
  detail::check_cut(s, parties);
  std::size_t dim = 1;
  for (PartyId p : parties) {
    dim *= s.local_dim(p);
    if (dim > kDenseReducedLimit) throw BudgetExceeded("reduced_density: kept dimension too large");
  }
  const auto keep = detail::membership(s.party_count(), parties);
  std::vector<BasisLabel> keys;
  Eigen::MatrixXcd compact = detail::compact_reduced(s, keep, &keys);

  // compact_reduced orders kept labels by party index; re-index in the caller's order.
  std::vector<std::size_t> sorted_parties;
  for (PartyId p : parties) sorted_parties.push_back(p.index);
  std::sort(sorted_parties.begin(), sorted_parties.end());
  std::vector<Eigen::Index> full_index(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    std::size_t idx = 0;
    for (PartyId p : parties) {
      const auto pos = static_cast<std::size_t>(
          std::lower_bound(sorted_parties.begin(), sorted_parties.end(), p.index) - sorted_parties.begin());
      idx = idx * s.local_dim(p) + keys[i][pos];
    }
    full_index[i] = static_cast<Eigen::Index>(idx);
  }
  DensityMatrix rho{Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))};
  for (std::size_t i = 0; i < keys.size(); ++i) {
    for (std::size_t j = 0; j < keys.size(); ++j) {
      rho.entries(full_index[i], full_index[j]) =
          compact(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  return rho;
}

inline DensityMatrix reduced_density(const PureState& s, std::initializer_list<PartyId> parties) {
  return reduced_density(s, std::span<const PartyId>(parties.begin(), parties.size()));
}

/// Shannon entropy in bits.
inline double entropy(std::span<const double> p) {
  double sum = 0.0;
  for (double x : p) {
    if (x < 0.0) throw std::invalid_argument("entropy: negative probability");
    sum += x;
  }
  if (std::abs(sum - 1.0) > kNormTolerance) throw std::invalid_argument("entropy: probabilities do not sum to 1");
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log2(x);
  }
  return h;
}

inline double entropy(std::initializer_list<double> p) {
  return entropy(std::span<const double>(p.begin(), p.size()));
}

/// Von Neumann entropy (bits) of the reduced state on `cut`. Works on the
/// side of the cut with fewer occurring labels.
inline double entanglement_entropy(const PureState& s, std::span<const PartyId> cut) {
  detail::check_cut(s, cut);
  auto keep = detail::membership(s.party_count(), cut);
  auto other = keep;
  other.flip();
  if (detail::distinct_labels(s, other) < detail::distinct_labels(s, keep)) keep = other;
  const Eigen::MatrixXcd rho = detail::compact_reduced(s, keep);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(rho, Eigen::EigenvaluesOnly);
  const double trace = rho.trace().real();
  double h = 0.0;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    const double x = solver.eigenvalues()[i] / trace;
    if (x > 1e-15) h -= x * std::log2(x);
  }
  return std::max(h, 0.0);
}

inline double entanglement_entropy(const PureState& s, std::initializer_list<PartyId> cut) {
  return entanglement_entropy(s, std::span<const PartyId>(cut.begin(), cut.size()));
}

/// Applies `map` to the labels of one party. The map must be injective on the
/// labels that occur in the support and land below `new_dim`.
template <class LabelMap>
PureState relabel(const PureState& s, PartyId party, LabelMap&& map, Label new_dim) {
  if (party.index >= s.party_count()) throw std::out_of_range("relabel: party out of range");
  std::map<Label, Label> image;
  std::set<Label> targets;
  for (const auto& [l, _] : s.amplitudes()) {
    const Label old = l[party.index];
    if (image.count(old)) continue;
    const Label fresh = map(old);
    if (fresh >= new_dim) throw std::out_of_range("relabel: image exceeds new dimension");
    if (!targets.insert(fresh).second) throw std::invalid_argument("relabel: map is not injective on the support");
    image.emplace(old, fresh);
  }
  auto dims = s.local_dims();
  dims[party.index] = new_dim;
  PureState::AmplitudeMap out;
  for (const auto& [l, v] : s.amplitudes()) {
    BasisLabel nl = l;
    nl[party.index] = image.at(l[party.index]);
    out.emplace(std::move(nl), v);
  }
  return PureState(std::move(dims), std::move(out));
}

/// Table form: label l maps to table[l].
inline PureState relabel(const PureState& s, PartyId party, std::span<const Label> table, Label new_dim) {
  return relabel(
      s, party,
      [&](Label old) {
        if (old >= table.size()) throw std::out_of_range("relabel: label outside map table");
        return table[old];
      },
      new_dim);
}

/// Largest amplitude difference after aligning the global phase on the
/// largest-magnitude amplitude of `a`. Infinity for shape mismatch.
inline double max_distance(const PureState& a, const PureState& b) {
  if (!a.same_shape(b)) return std::numeric_limits<double>::infinity();
  Amplitude phase{1.0};
  const BasisLabel* pivot = nullptr;
  double best = -1.0;
  for (const auto& [l, v] : a.amplitudes()) {
    if (std::abs(v) > best) {
      best = std::abs(v);
      pivot = &l;
    }
  }
  if (pivot) {
    const Amplitude va = a.amplitude(*pivot);
    const Amplitude vb = b.amplitude(*pivot);
    if (std::abs(vb) > kPruneThreshold) phase = (vb / std::abs(vb)) * (std::conj(va) / std::abs(va));
  }
  double worst = 0.0;
  for (const auto& [l, v] : a.amplitudes()) worst = std::max(worst, std::abs(v * phase - b.amplitude(l)));
  for (const auto& [l, v] : b.amplitudes()) {
    if (!a.amplitudes().count(l)) worst = std::max(worst, std::abs(v));
  }
  return worst;
}

inline bool states_equal(const PureState& a, const PureState& b, double tol) {
  return max_distance(a, b) <= tol;
}

}  // namespace mpent
