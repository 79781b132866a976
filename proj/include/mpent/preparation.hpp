#pragma once

// Reverse protocol: build N copies of psi (or their truncation to a window
// of blocks around k = c0^2 N) from EPR_BC pairs and a multi-level GHZ.
//
// The inputs expand into rows, one per GHZ level, each holding R = 2^(N-k-)
// EPR terms. A POVM on Alice's GHZ register followed by cyclic shifts on all
// three parties gives each row its target weight; Bob then shortens each
// row to the length its block needs, Claire applying the same relabeling
// after hearing his outcome. A final local relabeling maps the result onto
// the N-copy basis.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mpent/blocks.hpp"
#include "mpent/canonical.hpp"
#include "mpent/hilbert.hpp"
#include "mpent/locc.hpp"

namespace mpent {

struct Window {
  std::size_t n = 0;
  std::size_t k_minus = 0;
  std::size_t k_plus = 0;
  double alpha = 0.0;  ///< 0 for windows given explicitly
  double beta = 0.0;

  std::size_t width() const { return k_plus - k_minus + 1; }
};

inline Window make_window(std::size_t n, std::size_t k_minus, std::size_t k_plus) {
  if (k_minus > k_plus || k_plus > n) throw std::invalid_argument("Window: need 0 <= k- <= k+ <= N");
  return {n, k_minus, k_plus, 0.0, 0.0};
}

inline constexpr double kDefaultAlpha = 1.0;
inline constexpr double kDefaultBeta = 0.6;

/// k± = c0^2 N ± alpha N^beta rounded inward and clamped to the blocks that
/// carry probability: [0, N] for 0 < c0^2 < 1, {0} for c0^2 = 0, {N} for
/// c0^2 = 1. If rounding inward empties the window, the nearest integer to
/// c0^2 N is used.
inline Window target_window(std::size_t n, double c0_sq, double alpha = kDefaultAlpha, double beta = kDefaultBeta) {
  if (n < 1) throw std::invalid_argument("target_window: N must be >= 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("target_window: alpha must be positive");
  if (!(beta > 0.5 && beta < 1.0)) throw std::invalid_argument("target_window: beta must lie in (1/2, 1)");
  if (c0_sq < 0.0 || c0_sq > 1.0) throw std::invalid_argument("target_window: c0^2 must lie in [0, 1]");
  Window w{n, 0, n, alpha, beta};
  if (c0_sq == 0.0) {
    w.k_plus = 0;
    return w;
  }
  if (c0_sq == 1.0) {
    w.k_minus = n;
    return w;
  }
  constexpr double eps = 1e-9;
  const double centre = c0_sq * static_cast<double>(n);
  const double half = alpha * std::pow(static_cast<double>(n), beta);
  const double lo = std::ceil(centre - half - eps);
  const double hi = std::floor(centre + half + eps);
  if (lo > hi) {
    w.k_minus = w.k_plus = static_cast<std::size_t>(std::llround(centre));
    return w;
  }
  w.k_minus = static_cast<std::size_t>(std::max(0.0, lo));
  w.k_plus = static_cast<std::size_t>(std::min(static_cast<double>(n), hi));
  return w;
}

/// F = |<N_window|psi^N>|^2 = sum of P(N,k) over the window.
inline double fidelity(std::size_t n, double c0_sq, const Window& w) {
  if (w.n != n || w.k_minus > w.k_plus || w.k_plus > n) throw std::invalid_argument("fidelity: invalid window");
  const double sq[] = {c0_sq, 1.0 - c0_sq};
  // Normalizing by the full mass cancels the rounding of the shared lgamma(N+1).
  double inside = 0.0, total = 0.0;
  for (std::size_t k = 0; k <= n; ++k) {
    const double p = std::exp2(block_log2_probability(n, BlockIndex{{k, n - k}}, sq));
    total += p;
    if (k >= w.k_minus && k <= w.k_plus) inside += p;
  }
  return inside / total;
}

/// Standard normal mass in [-x, x] at x = 2 alpha N^(beta - 1/2).
inline double fidelity_bound(std::size_t n, double alpha, double beta) {
  const double x = 2.0 * alpha * std::pow(static_cast<double>(n), beta - 0.5);
  return std::erf(x / std::sqrt(2.0));
}

struct ResourceCount {
  std::map<Subset, double> epr_per_subset;  ///< EPR pairs per party pair
  double ghz = 0.0;                         ///< two-level GHZ units (log2 of the GHZ level)

  double epr(const Subset& s) const {
    auto it = epr_per_subset.find(s);
    return it == epr_per_subset.end() ? 0.0 : it->second;
  }
  double epr_bc() const { return epr({1, 2}); }
};

/// Upper bound on the inputs needed for the window: N - k- EPR_BC pairs and
/// log2[(k+ - k- + 1) b(N,k0)] GHZ, k0 maximizing b(N,k) on the window
/// (smaller k on ties).
inline ResourceCount resource_count(std::size_t n, const Window& w) {
  if (w.n != n || w.k_minus > w.k_plus || w.k_plus > n) throw std::invalid_argument("resource_count: invalid window");
  const std::size_t k0 = std::clamp(n / 2, w.k_minus, w.k_plus);
  ResourceCount r;
  r.epr_per_subset[{1, 2}] = static_cast<double>(n - w.k_minus);
  r.ghz = std::log2(static_cast<double>(w.width())) + log2_binomial(n, k0);
  return r;
}

struct WeightingPovm {
  Povm povm;
  /// corrections[j] maps |i + j mod t> to |i>; applied by every party.
  std::vector<LocalOperator> corrections;
};

/// POVM {O_j} with O_j = sum_i w_i |i+j><i+j| (indices mod t). After outcome j
/// and the shift corrections on every party, a t-level GHZ becomes
/// sum_i w_i |iii>; every outcome has probability 1/t.
inline WeightingPovm ghz_weighting_povm(std::span<const double> weights, PartyId party = kAlice) {
  const Label t = weights.size();
  if (t == 0) throw std::invalid_argument("ghz_weighting_povm: empty weight vector");
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("ghz_weighting_povm: negative weight");
    sum += w * w;
  }
  if (std::abs(sum - 1.0) > kNormTolerance) throw std::invalid_argument("ghz_weighting_povm: weights are not normalized");
  WeightingPovm out{{party, {}}, {}};
  for (Label j = 0; j < t; ++j) {
    std::vector<Amplitude> diag(t);
    for (Label i = 0; i < t; ++i) diag[(i + j) % t] = weights[i];
    out.povm.elements.push_back(diagonal_operator(party, diag));
    out.corrections.push_back(label_map_operator(party, t, t, [&](Label l) { return (l + t - j) % t; }));
  }
  return out;
}

/// I_outer (x) op, acting on labels outer_index * op_dim + inner_index.
inline LocalOperator lift_inner(const LocalOperator& op, Label outer_dim, PartyId party) {
  const auto in = static_cast<Eigen::Index>(op.in_dim());
  const auto out = static_cast<Eigen::Index>(op.out_dim());
  std::vector<Eigen::Triplet<Amplitude>> triplets;
  for (Eigen::Index e = 0; e < static_cast<Eigen::Index>(outer_dim); ++e) {
    for (Eigen::Index k = 0; k < op.matrix.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(op.matrix, k); it; ++it) {
        triplets.emplace_back(e * out + it.row(), e * in + it.col(), it.value());
      }
    }
  }
  SparseMatrix m(static_cast<Eigen::Index>(outer_dim) * out, static_cast<Eigen::Index>(outer_dim) * in);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return {party, std::move(m)};
}

/// Local labels supporting one row and how many of them to keep.
struct Row {
  std::vector<Label> labels;
  Label keep = 0;
};

struct ShorteningStage {
  std::size_t row = 0;
  Povm povm;
  /// relabelings[o] moves the surviving segment of outcome o onto the row's
  /// first `keep` labels. Applied by the measuring party and its partner.
  std::vector<LocalOperator> relabelings;
};

namespace detail {

inline void validate_rows(std::span<const Row> rows, Label dim) {
  std::set<Label> used;
  for (const auto& r : rows) {
    const Label len = r.labels.size();
    if (r.keep < 1 || r.keep > len) throw std::invalid_argument("row_shorten: keep count must lie in [1, row length]");
    if (len % r.keep != 0) throw std::invalid_argument("row_shorten: row length must be divisible by the keep count");
    for (Label l : r.labels) {
      if (l >= dim) throw std::out_of_range("row_shorten: row label outside local space");
      if (!used.insert(l).second) throw std::invalid_argument("row_shorten: rows overlap");
    }
  }
}

}  // namespace detail

/// Stage shortening rows[target] to its first `keep` labels. Outcome o keeps
/// segment o of the row and damps everything outside the row by
/// sqrt(keep/length), leaving relative row weights unchanged.
inline ShorteningStage row_shorten_stage(std::span<const Row> rows, std::size_t target, PartyId party, Label dim) {
  detail::validate_rows(rows, dim);
  const Row& row = rows[target];
  const Label len = row.labels.size();
  const Label keep = row.keep;
  ShorteningStage stage{target, {party, {}}, {}};
  if (keep == len) {
    stage.povm.elements.push_back(identity_operator(party, dim));
    stage.relabelings.push_back(identity_operator(party, dim));
    return stage;
  }
  const double damp = std::sqrt(static_cast<double>(keep) / static_cast<double>(len));
  std::vector<Amplitude> outside(dim, damp);
  for (Label l : row.labels) outside[l] = 0.0;
  for (Label o = 0; o < len / keep; ++o) {
    auto diag = outside;
    std::map<Label, Label> swap;
    for (Label s = 0; s < keep; ++s) {
      const Label from = row.labels[o * keep + s];
      const Label to = row.labels[s];
      diag[from] = 1.0;
      if (from != to) {
        swap[from] = to;
        swap[to] = from;
      }
    }
    stage.povm.elements.push_back(diagonal_operator(party, diag));
    stage.relabelings.push_back(label_map_operator(party, dim, dim, [&](Label l) {
      auto it = swap.find(l);
      return it == swap.end() ? l : it->second;
    }));
  }
  return stage;
}

/// One stage per row, in the given order.
inline std::vector<ShorteningStage> row_shorten_povm(std::span<const Row> rows, PartyId party, Label dim) {
  std::vector<ShorteningStage> out;
  for (std::size_t j = 0; j < rows.size(); ++j) out.push_back(row_shorten_stage(rows, j, party, dim));
  return out;
}

/// Squared norm of `s` on each row, rows given as label sets of `party`.
inline std::vector<double> row_weights(const PureState& s, std::span<const Row> rows, PartyId party) {
  std::map<Label, std::size_t> owner;
  for (std::size_t j = 0; j < rows.size(); ++j) {
    for (Label l : rows[j].labels) owner[l] = j;
  }
  std::vector<double> w(rows.size(), 0.0);
  for (const auto& [label, amp] : s.amplitudes()) {
    auto it = owner.find(label[party.index]);
    if (it != owner.end()) w[it->second] += std::norm(amp);
  }
  return w;
}

/// One LOCC round: a POVM and, per outcome, the local corrections that follow.
struct ProtocolStep {
  std::string label;
  Povm povm;
  std::vector<std::vector<LocalOperator>> corrections;
};

inline std::pair<PureState, double> execute_outcome(const PureState& s, const ProtocolStep& step, std::size_t outcome) {
  auto [post, p] = apply_element(s, step.povm.elements.at(outcome));
  return {apply_all(std::move(post), step.corrections.at(outcome)), p};
}

/// Truncation of psi^N to the window's blocks, renormalized.
inline PureState build_target(std::size_t n, double c0, double c1, const Window& w) {
  if (w.n != n || w.k_minus > w.k_plus || w.k_plus > n) throw std::invalid_argument("build_target: invalid window");
  const auto state = copies(psi(c0, c1), n);
  const double h = 1.0 / std::sqrt(2.0);
  const auto layout = psi_spec(h, h);
  const Label dim = detail::checked_power(2, n);
  std::vector<Label> labels;
  for (Label l = 0; l < dim; ++l) {
    const auto k = block_of_label(layout, n, kAlice, l).counts[0];
    if (k >= w.k_minus && k <= w.k_plus) labels.push_back(l);
  }
  return apply_element(state, projector_onto_labels(kAlice, labels, dim)).first;
}

/// The preparation protocol for a given window, step by step.
class PreparationPlan {
 public:
  PreparationPlan(std::size_t n, double c0, double c1, const Window& w) : n_(n), c0_(c0), c1_(c1), window_(w) {
    const double c[] = {c0, c1};
    canonical_detail_check(c);
    if (w.n != n || w.k_minus > w.k_plus || w.k_plus > n) throw std::invalid_argument("PreparationPlan: invalid window");
    if (n > 20) throw BudgetExceeded("PreparationPlan: explicit preparation limited to N <= 20");
    epr_pairs_ = n - w.k_minus;
    epr_levels_ = Label{1} << epr_pairs_;
    const double sq[] = {c0 * c0, c1 * c1};
    double mass = 0.0;
    for (std::size_t k = w.k_minus; k <= w.k_plus; ++k) mass += std::exp2(block_log2_probability(n, BlockIndex{{k, n - k}}, sq));
    if (mass <= kImpossibleProbability) throw std::invalid_argument("PreparationPlan: window carries no probability");
    for (std::size_t k = w.k_minus; k <= w.k_plus; ++k) {
      const double log2p = block_log2_probability(n, BlockIndex{{k, n - k}}, sq);
      const double row_weight = std::sqrt(std::exp2(log2p - log2_binomial(n, k)) / mass);
      for (auto mask : weight_strings(n, k)) {
        rows_.push_back({k, mask});
        weights_.push_back(row_weight);
      }
    }
    levels_ = rows_.size();
    if (static_cast<double>(levels_) * static_cast<double>(epr_levels_) > static_cast<double>(kExplicitBudget)) {
      throw BudgetExceeded("PreparationPlan: resource state exceeds the explicit budget");
    }
    for (std::size_t g = 0; g < levels_; ++g) {
      if (target_length(g) < epr_levels_) shortened_rows_.push_back(g);
    }
  }

  std::size_t n() const { return n_; }
  const Window& window() const { return window_; }
  Label ghz_levels() const { return levels_; }
  Label epr_levels() const { return epr_levels_; }
  const std::vector<double>& row_weights() const { return weights_; }

  /// Inputs consumed: N - k- EPR_BC pairs and one GHZ with one level per row.
  ResourceCount resources() const {
    ResourceCount r;
    r.epr_per_subset[{1, 2}] = static_cast<double>(epr_pairs_);
    r.ghz = std::log2(static_cast<double>(levels_));
    return r;
  }

  /// EPR_BC^(N-k-) (x) GHZ register. The GHZ register is a product of
  /// two-level GHZ states when the level count is a power of two.
  PureState initial_state() const {
    PureState eprs = level_epr(1, kBob, kClaire, 3);
    for (std::size_t i = 0; i < epr_pairs_; ++i) eprs = tensor(eprs, epr(kBob, kClaire, 3));
    PureState ghzs = level_ghz(1, 3);
    if (std::has_single_bit(levels_)) {
      for (Label t = levels_; t > 1; t /= 2) ghzs = tensor(ghzs, ghz(3));
    } else {
      ghzs = level_ghz(levels_, 3);
    }
    return tensor(eprs, ghzs);
  }

  /// Rows as Bob's label sets: row g holds labels e * levels + g.
  std::vector<Row> bob_rows() const {
    std::vector<Row> rows(levels_);
    for (Label g = 0; g < levels_; ++g) {
      for (Label e = 0; e < epr_levels_; ++e) rows[g].labels.push_back(e * levels_ + g);
      rows[g].keep = target_length(g);
    }
    return rows;
  }

  /// Rows as Alice's label sets: row g is her GHZ level g.
  std::vector<Row> alice_rows() const {
    std::vector<Row> rows(levels_);
    for (Label g = 0; g < levels_; ++g) rows[g] = {{g}, 1};
    return rows;
  }

  std::size_t step_count() const { return 1 + shortened_rows_.size(); }

  ProtocolStep step(std::size_t i) const {
    if (i == 0) return weighting_step();
    const std::size_t g = shortened_rows_.at(i - 1);
    const auto rows = bob_rows();
    auto stage = row_shorten_stage(rows, g, kBob, levels_ * epr_levels_);
    ProtocolStep s{"shorten row " + std::to_string(g), std::move(stage.povm), {}};
    for (auto& r : stage.relabelings) {
      LocalOperator claire{kClaire, r.matrix};
      s.corrections.push_back({std::move(r), std::move(claire)});
    }
    return s;
  }

  /// Local relabeling of the shortened rows onto the N-copy basis.
  PureState finalize(const PureState& s) const {
    const Label alice_dim = Label{1} << n_;
    const Label pair_dim = detail::checked_power(3, n_);
    PureState out = relabel(s, kAlice, [&](Label g) { return natural_alice_label(n_, rows_[g].mask); }, alice_dim);
    auto pair_map = [&](Label l) {
      const Label g = l % levels_;
      const Label e = l / levels_;
      if (e >= target_length(g)) throw std::logic_error("finalize: row was not shortened");
      return natural_pair_label(n_, rows_[g].mask, e);
    };
    out = relabel(out, kBob, pair_map, pair_dim);
    return relabel(out, kClaire, pair_map, pair_dim);
  }

  PureState target() const { return build_target(n_, c0_, c1_, window_); }

 private:
  struct RowInfo {
    std::size_t k;
    std::uint64_t mask;
  };

  static void canonical_detail_check(std::span<const double> c) { detail::check_amplitudes(c, "PreparationPlan"); }

  Label target_length(Label g) const { return Label{1} << (n_ - rows_[g].k); }

  ProtocolStep weighting_step() const {
    auto w = ghz_weighting_povm(weights_, kAlice);
    ProtocolStep s{"weighting", std::move(w.povm), {}};
    for (const auto& u : w.corrections) {
      s.corrections.push_back({u, lift_inner(u, epr_levels_, kBob), lift_inner(u, epr_levels_, kClaire)});
    }
    return s;
  }

  std::size_t n_;
  double c0_, c1_;
  Window window_;
  std::size_t epr_pairs_ = 0;
  Label epr_levels_ = 1;
  Label levels_ = 0;
  std::vector<RowInfo> rows_;
  std::vector<double> weights_;
  std::vector<Label> shortened_rows_;
};

struct PreparationResult {
  PureState state;
  PureState target;
  Transcript transcript;
  ResourceCount resources;
  Window window;
  double distance = 0.0;  ///< max_distance(state, target)
};

/// Runs one Born-sampled branch of the protocol.
inline PreparationResult run_preparation(const PreparationPlan& plan, Rng& rng) {
  PureState s = plan.initial_state();
  Transcript tr;
  for (std::size_t i = 0; i < plan.step_count(); ++i) {
    const auto step = plan.step(i);
    const auto probs = outcome_probabilities(s, step.povm);
    const std::size_t j = draw_index(probs, rng.uniform());
    auto [next, p] = execute_outcome(s, step, j);
    tr.push({step.label, step.povm.party, j, p});
    s = std::move(next);
  }
  PreparationResult r{plan.finalize(s), plan.target(), std::move(tr), plan.resources(), plan.window(), 0.0};
  r.distance = max_distance(r.state, r.target);
  return r;
}

inline PreparationResult prepare_approx(std::size_t n, double c0, double c1, const Window& w, Rng& rng) {
  return run_preparation(PreparationPlan(n, c0, c1, w), rng);
}

inline PreparationResult prepare_approx(std::size_t n, double c0, double c1, double alpha, double beta, Rng& rng) {
  return prepare_approx(n, c0, c1, target_window(n, c0 * c0, alpha, beta), rng);
}

/// Two copies of psi from 2 EPR_BC and 2 GHZ, with certainty.
inline PreparationResult prepare_exact_N2(double c0, double c1, Rng& rng) {
  return prepare_approx(2, c0, c1, make_window(2, 0, 2), rng);
}

struct BranchReport {
  std::size_t steps = 0;
  double log2_branches = 0.0;     ///< log2 of the number of non-zero-probability branches
  double max_branch_spread = 0.0; ///< largest distance between outcomes of one step
  double max_probability_error = 0.0;
  double distance = 0.0;          ///< final state vs target
  PureState state;
  ResourceCount resources;
};

/// Checks every branch: at each step all outcomes of non-zero probability
/// must leave the same corrected state, so every path ends in the same output.
inline BranchReport verify_all_branches(const PreparationPlan& plan) {
  BranchReport rep;
  PureState s = plan.initial_state();
  for (std::size_t i = 0; i < plan.step_count(); ++i) {
    const auto step = plan.step(i);
    const auto probs = outcome_probabilities(s, step.povm);
    double total = 0.0;
    std::size_t live = 0;
    std::optional<PureState> reference;
    for (std::size_t j = 0; j < probs.size(); ++j) {
      total += probs[j];
      if (probs[j] <= kImpossibleProbability) continue;
      ++live;
      auto next = execute_outcome(s, step, j).first;
      if (!reference) {
        reference = std::move(next);
      } else {
        rep.max_branch_spread = std::max(rep.max_branch_spread, max_distance(*reference, next));
      }
    }
    rep.max_probability_error = std::max(rep.max_probability_error, std::abs(total - 1.0));
    rep.log2_branches += std::log2(static_cast<double>(live));
    s = std::move(*reference);
    ++rep.steps;
  }
  rep.state = plan.finalize(s);
  rep.distance = max_distance(rep.state, plan.target());
  rep.resources = plan.resources();
  return rep;
}

}  // namespace mpent
