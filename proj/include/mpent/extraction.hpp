#pragma once

// Forward protocol: measure N copies onto blocks and count the canonical
// resources obtained. A t-level GHZ counts as log2 t GHZ states and an r-level
// EPR as log2 r EPR pairs; non-powers of two give fractional yields.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpent/blocks.hpp"
#include "mpent/canonical.hpp"
#include "mpent/hilbert.hpp"
#include "mpent/locc.hpp"

namespace mpent {

/// Expected (or empirical) canonical resources per copy at finite N.
struct YieldReport {
  std::size_t n = 0;
  std::map<Subset, double> epr;           ///< per-copy canonical units per component subset
  double ghz = 0.0;                       ///< per-copy all-party GHZ units
  std::map<Subset, double> epr_variance;  ///< variance of the per-copy yield
  double ghz_variance = 0.0;
};

/// Asymptotic per-copy rates.
struct Rates {
  /// sum_i c_i^2 log2(level_i) over components supported on each subset.
  std::map<Subset, double> per_subset;
  /// S({c_i^2}): all-party GHZ rate from the block multiplicities.
  double full = 0.0;

  /// Rate of canonical states on `s`, including `full` when s is the full set.
  double total(const Subset& s, std::size_t party_count) const {
    double v = 0.0;
    if (auto it = per_subset.find(s); it != per_subset.end()) v += it->second;
    if (s == full_set(party_count)) v += full;
    return v;
  }
};

inline Rates asymptotic_rates(const StateSpec& spec) {
  Rates r;
  const auto sq = spec.squared_coefficients();
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const auto& c = spec.components()[i];
    if (!c.is_canonical()) continue;
    r.per_subset[support_subset(c)] += sq[i] * std::log2(static_cast<double>(c.level));
  }
  r.full = entropy(sq);
  return r;
}

/// Exact finite-N expectations of the block-measurement yields, summed in
/// log space over all block indices.
inline YieldReport expected_yields(const StateSpec& spec, std::size_t n) {
  if (n < 1) throw std::invalid_argument("expected_yields: N must be >= 1");
  const auto sq = spec.squared_coefficients();
  const double per = 1.0 / static_cast<double>(n);
  double mass = 0.0, ghz = 0.0, ghz2 = 0.0;
  std::map<Subset, double> epr, epr2;
  for_each_block(n, spec.size(), [&](const BlockIndex& idx) {
    const double p = std::exp2(block_log2_probability(n, idx, sq));
    if (p == 0.0) return;
    mass += p;
    const auto y = block_yields(idx, spec);
    ghz += p * y.ghz * per;
    ghz2 += p * (y.ghz * per) * (y.ghz * per);
    for (const auto& [subset, v] : y.per_subset) {
      epr[subset] += p * v * per;
      epr2[subset] += p * (v * per) * (v * per);
    }
  });
  YieldReport r;
  r.n = n;
  r.ghz = ghz / mass;
  r.ghz_variance = std::max(0.0, ghz2 / mass - r.ghz * r.ghz);
  for (const auto& [subset, v] : epr) {
    r.epr[subset] = v / mass;
    r.epr_variance[subset] = std::max(0.0, epr2[subset] / mass - r.epr[subset] * r.epr[subset]);
  }
  return r;
}

enum class SamplingMode {
  /// Build N copies explicitly and measure the block projectors on one party.
  explicit_state,
  /// Draw the block index from its multinomial distribution.
  analytic,
};

struct ExtractionRun {
  YieldReport expected;
  std::size_t trials = 0;
  std::vector<BlockIndex> blocks;
  std::vector<double> probabilities;  ///< Born probability of each block
  std::vector<std::size_t> counts;    ///< outcomes observed per block
  std::map<Subset, double> epr_mean, epr_stderr;
  double ghz_mean = 0.0, ghz_stderr = 0.0;
  /// Explicit mode: every observed post-measurement state matched the block
  /// assembled directly from the component states.
  bool post_states_verified = true;
  Transcript transcript;
};

/// Monte-Carlo run of the block measurement. Trial i draws from
/// Rng(Rng::derive(seed, i)).
inline ExtractionRun run_extraction(const StateSpec& spec, std::size_t n, std::size_t trials, std::uint64_t seed,
                                    SamplingMode mode, PartyId measuring = kAlice, bool record_transcript = false) {
  ExtractionRun run;
  run.expected = expected_yields(spec, n);
  run.trials = trials;
  run.blocks = enumerate_blocks(n, spec.size());

  PureState state;
  Povm povm;
  if (mode == SamplingMode::explicit_state) {
    state = copies(psi_general(spec), n);
    povm = block_measurement(spec, n, measuring);
    if (!check_completeness(povm, state.local_dim(measuring))) throw std::logic_error("run_extraction: block POVM incomplete");
    run.probabilities = outcome_probabilities(state, povm);
  } else {
    const auto sq = spec.squared_coefficients();
    for (const auto& b : run.blocks) run.probabilities.push_back(std::exp2(block_log2_probability(n, b, sq)));
  }

  std::vector<double> cumulative(run.probabilities.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < cumulative.size(); ++j) cumulative[j] = (acc += run.probabilities[j]);

  std::vector<BlockYields> yields;
  yields.reserve(run.blocks.size());
  for (const auto& b : run.blocks) yields.push_back(block_yields(b, spec));

  run.counts.assign(run.blocks.size(), 0);
  std::vector<bool> checked(run.blocks.size(), false);
  const double per = 1.0 / static_cast<double>(n);
  double g1 = 0.0, g2 = 0.0;
  std::map<Subset, double> e1, e2;
  for (const auto& [subset, _] : run.expected.epr) e1[subset] = e2[subset] = 0.0;

  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng(Rng::derive(seed, t));
    const double u = rng.uniform() * acc;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    auto j = static_cast<std::size_t>(it - cumulative.begin());
    if (j >= cumulative.size()) j = cumulative.size() - 1;
    while (run.probabilities[j] <= 0.0 && j > 0) --j;
    ++run.counts[j];

    if (mode == SamplingMode::explicit_state && !checked[j]) {
      checked[j] = true;
      const auto post = apply_element(state, povm.elements[j]).first;
      if (!states_equal(post, assemble_block(spec, n, run.blocks[j]), kNormTolerance)) run.post_states_verified = false;
    }
    if (record_transcript) {
      run.transcript.push({"trial " + std::to_string(t) + " block measurement", measuring, j, run.probabilities[j] / acc});
    }

    const double g = yields[j].ghz * per;
    g1 += g;
    g2 += g * g;
    for (auto& [subset, s1] : e1) {
      auto yit = yields[j].per_subset.find(subset);
      const double v = yit == yields[j].per_subset.end() ? 0.0 : yit->second * per;
      s1 += v;
      e2[subset] += v * v;
    }
  }

  auto moments = [&](double s1, double s2, double& mean, double& stderr_out) {
    if (trials == 0) {
      mean = stderr_out = std::nan("");
      return;
    }
    const double tn = static_cast<double>(trials);
    mean = s1 / tn;
    const double var = trials > 1 ? std::max(0.0, (s2 - tn * mean * mean) / (tn - 1.0)) : 0.0;
    stderr_out = std::sqrt(var / tn);
  };
  moments(g1, g2, run.ghz_mean, run.ghz_stderr);
  for (const auto& [subset, s1] : e1) moments(s1, e2[subset], run.epr_mean[subset], run.epr_stderr[subset]);
  return run;
}

/// Largest deviation, over all bipartitions S|rest, between the entanglement
/// entropy of psi_general(spec) across the cut and the sum of the rates of
/// every subset that straddles it.
inline double entropy_consistency_error(const StateSpec& spec) {
  const auto state = psi_general(spec);
  const auto rates = asymptotic_rates(spec);
  const std::size_t m = spec.party_count();
  double worst = 0.0;
  for (std::uint64_t mask = 1; mask + 1 < (std::uint64_t{1} << m); ++mask) {
    std::vector<PartyId> cut;
    for (std::size_t p = 0; p < m; ++p) {
      if ((mask >> p) & 1U) cut.push_back(PartyId{p});
    }
    double predicted = rates.full;
    for (const auto& [subset, l] : rates.per_subset) {
      bool inside = false, outside = false;
      for (auto p : subset) ((mask >> p) & 1U ? inside : outside) = true;
      if (inside && outside) predicted += l;
    }
    worst = std::max(worst, std::abs(entanglement_entropy(state, cut) - predicted));
  }
  return worst;
}

inline bool entropy_consistency(const StateSpec& spec, double tol = kNormTolerance) {
  return entropy_consistency_error(spec) <= tol;
}

}  // namespace mpent
