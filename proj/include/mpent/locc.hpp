#pragma once

// Local operations and classical communication: local operators, POVMs,
// Born-rule sampling, transcripts, and the local-orthogonality test.

#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>

#include "mpent/hilbert.hpp"
#include "mpent/text.hpp"

namespace mpent {

using SparseMatrix = Eigen::SparseMatrix<Amplitude>;

/// Outcome whose probability is at most kImpossibleProbability.
class ImpossibleOutcome : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kImpossibleProbability = 1e-12;
inline constexpr double kCompletenessTolerance = 1e-9;
inline constexpr double kOrthogonalityTolerance = 1e-12;

/// A matrix (out_dim x in_dim) acting on one party's local space.
struct LocalOperator {
  PartyId party;
  SparseMatrix matrix;

  Label in_dim() const { return static_cast<Label>(matrix.cols()); }
  Label out_dim() const { return static_cast<Label>(matrix.rows()); }
};

inline LocalOperator identity_operator(PartyId party, Label dim) {
  SparseMatrix m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  m.setIdentity();
  return {party, std::move(m)};
}

/// Sends |l> to |map(l)> for every l < in_dim. Unitary when map is a bijection.
template <class LabelMap>
LocalOperator label_map_operator(PartyId party, Label in_dim, Label out_dim, LabelMap&& map) {
  std::vector<Eigen::Triplet<Amplitude>> triplets;
  triplets.reserve(in_dim);
  std::vector<bool> hit(out_dim, false);
  for (Label l = 0; l < in_dim; ++l) {
    const Label image = map(l);
    if (image >= out_dim) throw std::out_of_range("label_map_operator: image outside output space");
    if (hit[image]) throw std::invalid_argument("label_map_operator: map is not injective");
    hit[image] = true;
    triplets.emplace_back(static_cast<Eigen::Index>(image), static_cast<Eigen::Index>(l), Amplitude{1.0});
  }
  SparseMatrix m(static_cast<Eigen::Index>(out_dim), static_cast<Eigen::Index>(in_dim));
  m.setFromTriplets(triplets.begin(), triplets.end());
  return {party, std::move(m)};
}

/// Diagonal operator with the given entries.
inline LocalOperator diagonal_operator(PartyId party, std::span<const Amplitude> diagonal) {
  const auto n = static_cast<Eigen::Index>(diagonal.size());
  std::vector<Eigen::Triplet<Amplitude>> triplets;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (diagonal[static_cast<std::size_t>(i)] != Amplitude{}) triplets.emplace_back(i, i, diagonal[static_cast<std::size_t>(i)]);
  }
  SparseMatrix m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return {party, std::move(m)};
}

/// Diagonal 0/1 projector onto the span of `labels`.
inline LocalOperator projector_onto_labels(PartyId party, std::span<const Label> labels, Label dim) {
  std::vector<Amplitude> diag(dim, Amplitude{});
  for (Label l : labels) {
    if (l >= dim) throw std::out_of_range("projector_onto_labels: label " + std::to_string(l) + " out of range");
    diag[l] = 1.0;
  }
  return diagonal_operator(party, diag);
}

struct Povm {
  PartyId party;
  std::vector<LocalOperator> elements;

  std::size_t size() const { return elements.size(); }
};

/// True iff sum_j M_j^dagger M_j equals the identity within 1e-9 (max entry).
inline bool check_completeness(const Povm& p, Label dim) {
  const auto n = static_cast<Eigen::Index>(dim);
  SparseMatrix sum(n, n);
  for (const auto& e : p.elements) {
    if (e.party != p.party) throw std::invalid_argument("check_completeness: elements act on different parties");
    if (e.in_dim() != dim) throw std::invalid_argument("check_completeness: element dimension mismatch");
    sum += SparseMatrix(e.matrix.adjoint() * e.matrix);
  }
  SparseMatrix identity(n, n);
  identity.setIdentity();
  const SparseMatrix diff = sum - identity;
  double worst = 0.0;
  for (Eigen::Index k = 0; k < diff.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(diff, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
  }
  return worst <= kCompletenessTolerance;
}

/// op applied to s without renormalization.
inline PureState apply_unnormalized(const PureState& s, const LocalOperator& op) {
  const std::size_t party = op.party.index;
  if (party >= s.party_count()) throw std::out_of_range("apply: party out of range");
  if (op.in_dim() != s.local_dims()[party]) throw std::invalid_argument("apply: operator dimension mismatch");
  auto dims = s.local_dims();
  dims[party] = op.out_dim();
  PureState::AmplitudeMap out;
  for (const auto& [label, amp] : s.amplitudes()) {
    BasisLabel next = label;
    for (SparseMatrix::InnerIterator it(op.matrix, static_cast<Eigen::Index>(label[party])); it; ++it) {
      next[party] = static_cast<Label>(it.row());
      out[next] += it.value() * amp;
    }
  }
  return PureState(std::move(dims), std::move(out));
}

/// Applies one measurement element: returns the normalized post-measurement
/// state and the outcome probability.
inline std::pair<PureState, double> apply_element(const PureState& s, const LocalOperator& op) {
  PureState out = apply_unnormalized(s, op);
  const double p = out.norm_squared();
  if (p <= kImpossibleProbability) throw ImpossibleOutcome("apply_element: outcome has zero probability");
  return {out.scaled(1.0 / std::sqrt(p)), p};
}

/// Applies a sequence of local operators (typically one per party).
inline PureState apply_all(PureState s, std::span<const LocalOperator> ops) {
  for (const auto& op : ops) s = apply_unnormalized(s, op);
  return s;
}

inline std::vector<double> outcome_probabilities(const PureState& s, const Povm& p) {
  std::vector<double> probs;
  probs.reserve(p.size());
  for (const auto& e : p.elements) probs.push_back(apply_unnormalized(s, e).norm_squared());
  return probs;
}

struct TranscriptEntry {
  std::string step;
  PartyId party;
  std::size_t outcome = 0;
  double probability = 1.0;
};

/// Ordered record of the outcomes broadcast during a protocol run.
class Transcript {
 public:
  void push(TranscriptEntry e) {
    if (e.probability < 0.0 || e.probability > 1.0 + kNormTolerance) {
      throw std::invalid_argument("Transcript: probability outside [0,1]");
    }
    entries_.push_back(std::move(e));
  }

  void append(const Transcript& other) {
    entries_.insert(entries_.end(), other.entries_.begin(), other.entries_.end());
  }

  const std::vector<TranscriptEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  double branch_probability() const {
    double p = 1.0;
    for (const auto& e : entries_) p *= e.probability;
    return p;
  }

  /// One tab-separated line per entry: step, party, outcome, probability.
  std::string to_text() const {
    std::ostringstream os;
    os << "# step\tparty\toutcome\tprobability\n";
    for (const auto& e : entries_) {
      os << e.step << '\t' << party_name(e.party) << '\t' << e.outcome << '\t' << format_double(e.probability) << '\n';
    }
    return os.str();
  }

 private:
  std::vector<TranscriptEntry> entries_;
};

/// SplitMix64. Each Monte-Carlo trial gets its own stream via derive().
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Independent seed for sub-stream `stream` of `seed`.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    return mix(seed ^ mix(stream + 0x632BE59BD9B4E019ULL));
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

/// Index i with cumulative(i-1) <= u < cumulative(i); skips zero entries.
inline std::size_t draw_index(std::span<const double> probs, double u) {
  double total = 0.0;
  for (double p : probs) total += p;
  const double target = u * total;
  double acc = 0.0;
  std::size_t last_positive = probs.size();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last_positive = i;
    acc += probs[i];
    if (target < acc) return i;
  }
  if (last_positive == probs.size()) throw std::invalid_argument("draw_index: no positive probability");
  return last_positive;
}

struct SampleResult {
  std::size_t outcome = 0;
  PureState state;
  TranscriptEntry entry;
};

/// Born-rule sample of a complete POVM.
inline SampleResult sample(const PureState& s, const Povm& p, Rng& rng, std::string step = "measure") {
  if (!check_completeness(p, s.local_dim(p.party))) throw std::invalid_argument("sample: POVM is not complete");
  const auto probs = outcome_probabilities(s, p);
  double total = 0.0;
  for (double x : probs) total += x;
  if (std::abs(total - s.norm_squared()) > kCompletenessTolerance) {
    throw std::logic_error("sample: outcome probabilities do not sum to the state norm");
  }
  const std::size_t j = draw_index(probs, rng.uniform());
  auto [post, prob] = apply_element(s, p.elements[j]);
  return {j, std::move(post), TranscriptEntry{std::move(step), p.party, j, prob}};
}

/// Sparse single-party reduced density matrix, keyed by (row, column).
inline std::map<std::pair<Label, Label>, Amplitude> single_party_density(const PureState& s, PartyId party) {
  std::map<BasisLabel, std::vector<std::pair<Label, Amplitude>>> groups;
  for (const auto& [l, v] : s.amplitudes()) {
    BasisLabel rest = l;
    rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(party.index));
    groups[rest].emplace_back(l[party.index], v);
  }
  std::map<std::pair<Label, Label>, Amplitude> rho;
  const double n2 = s.norm_squared();
  for (const auto& [_, vec] : groups) {
    for (const auto& [i, vi] : vec) {
      for (const auto& [j, vj] : vec) rho[{i, j}] += vi * std::conj(vj) / n2;
    }
  }
  return rho;
}

/// Tr[rho_a rho_b] for the reduced states of a and b on `party`.
inline double local_overlap(const PureState& a, const PureState& b, PartyId party) {
  const auto ra = single_party_density(a, party);
  const auto rb = single_party_density(b, party);
  Amplitude acc{};
  for (const auto& [key, v] : ra) {
    auto it = rb.find({key.second, key.first});
    if (it != rb.end()) acc += v * it->second;
  }
  return std::abs(acc);
}

/// True iff every pair of components has vanishing single-party overlap
/// Tr[rho_i rho_j] on every party.
inline bool check_local_orthogonality(std::span<const PureState> components) {
  for (std::size_t i = 1; i < components.size(); ++i) {
    if (!components[i].same_shape(components[0])) throw std::invalid_argument("check_local_orthogonality: shape mismatch");
  }
  if (components.empty()) return true;
  const std::size_t m = components[0].party_count();
  for (std::size_t i = 0; i < components.size(); ++i) {
    for (std::size_t j = i + 1; j < components.size(); ++j) {
      for (std::size_t p = 0; p < m; ++p) {
        if (local_overlap(components[i], components[j], PartyId{p}) > kOrthogonalityTolerance) return false;
      }
    }
  }
  return true;
}

}  // namespace mpent
