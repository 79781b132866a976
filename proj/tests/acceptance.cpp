// Acceptance checks. One line per criterion; exit status is the number of
// failed criteria.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mpent/blocks.hpp"
#include "mpent/canonical.hpp"
#include "mpent/extraction.hpp"
#include "mpent/preparation.hpp"
#include "mpent/text.hpp"

#ifndef MPENT_CLI
#define MPENT_CLI "mpent"
#endif

using namespace mpent;

namespace {

struct Check {
  bool ok = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      if (ok) detail << "; first failure: " << what;
      ok = false;
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string run_command(const std::string& cmd, int& status) {
  std::string out;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) {
    status = -1;
    return out;
  }
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), p)) out += buf.data();
  status = pclose(p);
  return out;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log10(x[i]);
    my += std::log10(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log10(x[i]) - mx;
    sxy += dx * (std::log10(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

// 1. Two-copy block structure.
Check criterion1() {
  Check c;
  const auto t0 = Clock::now();
  const double c0 = 0.6, c1 = 0.8;
  const auto spec = psi_spec(c0, c1);
  const auto d = decompose(spec, 2);
  c.require(d.entries.size() == 3, "three blocks");
  const double coef[] = {c1 * c1, c0 * c1, c0 * c0};
  const double mult[] = {1, 2, 1};
  for (std::size_t k = 0; k < 3 && k < d.entries.size(); ++k) {
    c.require(std::abs(d.entries[k].coefficient - coef[k]) < 1e-12, "coefficient k=" + std::to_string(k));
    c.require(d.entries[k].multiplicity == mult[k], "multiplicity k=" + std::to_string(k));
  }
  const auto state = copies(psi(c0, c1), 2);
  const auto proj = project_blocks(spec, state, 2);
  for (std::size_t k = 0; k < proj.size(); ++k) {
    c.require(std::abs(proj[k].weight - coef[k] * coef[k] * mult[k]) < 1e-9, "projected weight");
    c.require(states_equal(proj[k].state, assemble_block(spec, 2, proj[k].index), 1e-9), "projected state");
  }
  const double s = seconds_since(t0);
  c.require(s < 1.0, "runtime < 1 s");
  c.detail << "blocks=" << d.entries.size() << " time=" << s << "s" ;
  return c;
}

// 2. Block equivalence under canonical relabeling, N <= 8.
Check criterion2() {
  Check c;
  const auto t0 = Clock::now();
  int cases = 0, passed = 0;
  for (std::size_t n = 1; n <= 8; ++n) {
    for (std::size_t k = 0; k <= n; ++k) {
      ++cases;
      const bool ok = verify_block_equivalence(n, k, 1e-9);
      passed += ok;
      c.require(ok, "N=" + std::to_string(n) + " k=" + std::to_string(k));
    }
  }
  c.require(cases == 44, "every (N, k) with 1 <= N <= 8");
  const double s = seconds_since(t0);
  c.require(s < 30.0, "runtime < 30 s");
  c.detail << "cases=" << passed << "/" << cases << " time=" << s << "s";
  return c;
}

// 3. Expected EPR_BC yield per copy equals c1^2.
Check criterion3() {
  Check c;
  double worst_small = 0.0, worst_large = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double c0 = i / 9.0;
    const double c1 = std::sqrt(1.0 - c0 * c0);
    const auto spec = psi_spec(c0, c1);
    for (std::size_t n = 1; n <= 20; ++n) {
      const auto y = expected_yields(spec, n);
      auto it = y.epr.find({1, 2});
      const double v = it == y.epr.end() ? 0.0 : it->second;
      worst_small = std::max(worst_small, std::abs(v - c1 * c1));
    }
  }
  for (double c0sq : {0.25, 0.5, 0.7}) {
    const auto spec = psi_spec(std::sqrt(c0sq), std::sqrt(1 - c0sq));
    for (std::size_t n : {1000u, 10000u, 100000u}) {
      const auto y = expected_yields(spec, n);
      worst_large = std::max(worst_large, std::abs(y.epr.at({1, 2}) - (1 - c0sq)));
    }
  }
  c.require(worst_small <= 1e-12, "N <= 20 within 1e-12");
  c.require(worst_large <= 1e-9, "large N within 1e-9");
  c.detail << "max_err(N<=20)=" << worst_small << " max_err(N>=1e3)=" << worst_large;
  return c;
}

// 4. GHZ yield converges to S(1/2, 1/2) = 1.
Check criterion4() {
  Check c;
  const auto t0 = Clock::now();
  const double h = std::sqrt(0.5);
  const auto spec = psi_spec(h, h);
  const double g4 = expected_yields(spec, 10000).ghz;
  const double g6 = expected_yields(spec, 1000000).ghz;
  c.require(std::abs(g4 - 1.0) <= 0.005, "N=1e4 within 0.005");
  c.require(std::abs(g6 - 1.0) <= 5e-4, "N=1e6 within 5e-4");
  const double s = seconds_since(t0);
  c.require(s < 5.0, "runtime < 5 s");
  c.detail << "ghz(1e4)=" << format_double(g4) << " ghz(1e6)=" << format_double(g6) << " time=" << s << "s";
  return c;
}

// 5. Exact two-copy preparation, every sampled branch.
Check criterion5() {
  Check c;
  double worst = 0.0;
  int branches = 0;
  for (double c0sq : {0.0, 0.36, 0.5, 1.0}) {
    const double c0 = std::sqrt(c0sq), c1 = std::sqrt(1 - c0sq);
    const auto target = copies(psi(c0, c1), 2);
    for (std::uint64_t b = 0; b < 100; ++b) {
      Rng rng(Rng::derive(5, b));
      const auto r = prepare_exact_N2(c0, c1, rng);
      ++branches;
      const double dist = max_distance(r.state, target);
      worst = std::max(worst, dist);
      c.require(dist < 1e-9, "branch matches copies(psi,2)");
      c.require(r.resources.epr_bc() == 2.0 && r.resources.ghz == 2.0, "consumes 2 EPR_BC + 2 GHZ");
    }
  }
  c.detail << "branches=" << branches << " max_distance=" << worst;
  return c;
}

// 6. Truncation fidelity and its lower bound.
Check criterion6() {
  Check c;
  const auto t0 = Clock::now();
  const double alpha = 1.0, beta = 0.6;
  std::map<std::size_t, double> f;
  for (std::size_t n : {100u, 1000u, 10000u, 100000u, 1000000u}) {
    f[n] = fidelity(n, 0.5, target_window(n, 0.5, alpha, beta));
    if (n >= 10000) {
      c.require(f[n] >= fidelity_bound(n, alpha, beta) - 0.01, "F >= bound - 0.01 at N=" + std::to_string(n));
    }
  }
  c.require(f[100000] >= 0.999, "F(1e5) >= 0.999");
  c.require(f[1000000] >= 0.9999, "F(1e6) >= 0.9999");
  const double s = seconds_since(t0);
  c.require(s < 10.0, "runtime < 10 s");
  c.detail << "F(1e5)=" << format_double(f[100000]) << " F(1e6)=" << format_double(f[1000000]) << " time=" << s << "s";
  return c;
}

// 7. Resource counts per copy converge with slope beta - 1.
Check criterion7() {
  Check c;
  const double alpha = 1.0, beta = 0.6;
  const std::vector<double> ns{1e3, 1e4, 1e5, 1e6};
  for (double c0sq : {0.25, 0.5, 0.75}) {
    const double c1sq = 1.0 - c0sq;
    const double s = entropy({c0sq, c1sq});
    std::vector<double> epr_excess, ghz_excess, total_excess;
    for (double nd : ns) {
      const auto n = static_cast<std::size_t>(nd);
      const auto r = resource_count(n, target_window(n, c0sq, alpha, beta));
      epr_excess.push_back(r.epr_bc() / nd - c1sq);
      ghz_excess.push_back(r.ghz / nd - s);
      total_excess.push_back(epr_excess.back() + ghz_excess.back());
    }
    const std::string tag = "c0^2=" + format_double(c0sq);
    c.require(std::abs(epr_excess.back()) <= 0.005, tag + " EPR within 0.005 at 1e6");
    c.require(std::abs(ghz_excess.back()) <= 0.02, tag + " GHZ within 0.02 at 1e6");
    const double se = slope(ns, epr_excess), sg = slope(ns, ghz_excess), st = slope(ns, total_excess);
    c.require(std::abs(se - (beta - 1)) <= 0.1, tag + " EPR excess slope");
    c.require(std::abs(st - (beta - 1)) <= 0.1, tag + " total excess slope");
    c.detail << tag << ":excess(1e6)=(" << epr_excess.back() << "," << ghz_excess.back() << ") slopes(epr,ghz,total)=("
             << se << "," << sg << "," << st << ") ";
  }
  return c;
}

// 8. psi' rates through the CLI, and its two-copy multinomial blocks.
Check criterion8() {
  Check c;
  const auto t0 = Clock::now();
  const double c0 = 0.4, c1 = 0.5, c2 = 0.3, c3 = std::sqrt(0.5);
  const double sq[] = {c0 * c0, c1 * c1, c2 * c2, c3 * c3};
  const double full = entropy(sq);
  std::ostringstream cmd;
  cmd << MPENT_CLI << " rates --psi-prime " << format_double(c0) << ' ' << format_double(c1) << ' ' << format_double(c2)
      << ' ' << format_double(c3);
  int status = 0;
  const auto out = run_command(cmd.str(), status);
  std::map<std::string, double> rows;
  std::istringstream lines(out);
  std::string line;
  std::getline(lines, line);
  c.require(line == "subset,rate", "CSV header");
  while (std::getline(lines, line)) {
    const auto comma = line.find(',');
    if (comma != std::string::npos) rows[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
  }
  c.require(status == 0, "rates exit status");
  c.require(rows.size() == 4, "four rows");
  c.require(rows["AB"] == sq[1] && rows["AC"] == sq[2] && rows["BC"] == sq[3], "pair rates equal c_i^2");
  c.require(rows["ABC"] == full, "GHZ rate equals S");

  const auto spec = psi_prime_spec(c0, c1, c2, c3);
  const auto d = decompose(spec, 2);
  c.require(d.entries.size() == 10, "ten blocks");
  const auto proj = project_blocks(spec, copies(psi_general(spec), 2), 2);
  for (std::size_t j = 0; j < d.entries.size(); ++j) {
    const auto& e = d.entries[j];
    c.require(e.multiplicity == exact_multinomial(e.index.counts), "multinomial multiplicity");
    c.require(std::abs(proj[j].weight - e.coefficient * e.coefficient * e.multiplicity) < 1e-9, "projected weight");
    c.require(states_equal(proj[j].state, assemble_block(spec, 2, e.index), 1e-9), "projected state");
  }
  const double s = seconds_since(t0);
  c.require(s < 5.0, "runtime < 5 s");
  c.detail << "rates=(" << format_double(rows["AB"]) << "," << format_double(rows["AC"]) << "," << format_double(rows["BC"])
           << ";" << format_double(rows["ABC"]) << ") blocks=" << d.entries.size() << " time=" << s << "s";
  return c;
}

// 9. Rates reproduce the entropy of every bipartition.
Check criterion9() {
  Check c;
  std::vector<StateSpec> specs{psi_spec(0.6, 0.8), psi_prime_spec(0.4, 0.5, 0.3, std::sqrt(0.5))};
  Rng rng(9);
  for (int i = 0; i < 10; ++i) specs.push_back(random_spec(rng));
  double worst = 0.0;
  for (const auto& s : specs) worst = std::max(worst, entropy_consistency_error(s));
  c.require(worst <= 1e-9, "entropy consistency within 1e-9");
  c.detail << "specs=" << specs.size() << " max_err=" << worst;
  return c;
}

// 10. Monte-Carlo block frequencies against analytic probabilities.
Check criterion10() {
  Check c;
  const auto t0 = Clock::now();
  const std::size_t trials = 100000;
  double worst_z = 0.0;
  for (auto [n, c0sq] : {std::pair<std::size_t, double>{2, 0.36}, {5, 0.5}, {8, 0.7}}) {
    const auto spec = psi_spec(std::sqrt(c0sq), std::sqrt(1 - c0sq));
    const auto run = run_extraction(spec, n, trials, 20240601, SamplingMode::explicit_state);
    const auto d = decompose(spec, n);
    c.require(run.post_states_verified, "post-measurement states");
    for (std::size_t j = 0; j < d.entries.size(); ++j) {
      const double p = d.entries[j].probability();
      c.require(std::abs(run.probabilities[j] - p) < 1e-12, "Born probability equals analytic");
      const double freq = static_cast<double>(run.counts[j]) / static_cast<double>(trials);
      const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(trials));
      const double z = sigma > 0 ? std::abs(freq - p) / sigma : (freq == p ? 0.0 : INFINITY);
      worst_z = std::max(worst_z, z);
      c.require(z <= 4.0, "within 4 sigma");
    }
  }
  const double s = seconds_since(t0);
  c.require(s < 60.0, "runtime < 60 s");
  c.detail << "max_z=" << worst_z << " time=" << s << "s";
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria{
      {"two-copy block structure", criterion1},     {"block equivalence N<=8", criterion2},
      {"exact EPR rate", criterion3},               {"GHZ rate convergence", criterion4},
      {"two-copy preparation", criterion5},         {"truncation fidelity", criterion6},
      {"resource convergence", criterion7},         {"psi' generalization", criterion8},
      {"entropy consistency", criterion9},          {"Monte-Carlo agreement", criterion10},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check c;
    try {
      c = criteria[i].second();
    } catch (const std::exception& e) {
      c.ok = false;
      c.detail << "exception: " << e.what();
    }
    failed += !c.ok;
    std::cout << "criterion " << (i + 1) << ": " << (c.ok ? "PASS" : "FAIL") << "  " << criteria[i].first << "  "
              << c.detail.str() << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed;
}
