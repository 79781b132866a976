#pragma once

// Random inputs for property tests. Deterministic given the Rng seed.

#include <cmath>
#include <complex>
#include <vector>

#include "mpent/canonical.hpp"
#include "mpent/hilbert.hpp"
#include "mpent/locc.hpp"

namespace gen {

using namespace mpent;

inline std::size_t below(Rng& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

inline double normal(Rng& rng) {
  const double u1 = 1.0 - rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

inline std::vector<Label> dims(Rng& rng, std::size_t parties, Label max_dim) {
  std::vector<Label> d(parties);
  for (auto& x : d) x = 1 + below(rng, max_dim);
  return d;
}

/// Normalized state with up to `terms` random complex amplitudes.
inline PureState state(Rng& rng, const std::vector<Label>& d, std::size_t terms) {
  PureState::AmplitudeMap m;
  for (std::size_t t = 0; t < terms; ++t) {
    BasisLabel l(d.size());
    for (std::size_t p = 0; p < d.size(); ++p) l[p] = below(rng, d[p]);
    m[l] += Amplitude(normal(rng), normal(rng));
  }
  PureState s(d, std::move(m));
  return s.empty() ? PureState::basis(d, BasisLabel(d.size(), 0)) : s.normalized();
}

inline PureState state(Rng& rng, std::size_t parties = 3, Label max_dim = 3, std::size_t terms = 8) {
  return state(rng, dims(rng, parties, max_dim), terms);
}

/// Non-negative coefficients with squares summing to one.
inline std::vector<double> coefficients(Rng& rng, std::size_t n) {
  std::vector<double> c(n);
  double s = 0.0;
  for (auto& x : c) {
    x = 0.05 + rng.uniform();
    s += x * x;
  }
  for (auto& x : c) x /= std::sqrt(s);
  return c;
}

inline StateSpec spec(Rng& rng) { return random_spec(rng); }

}  // namespace gen
