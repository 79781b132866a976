// mpent: tables for block extraction and preparation of tripartite states.
//
//   mpent rates    --psi 0.6 0.8
//   mpent extract  --psi 0.6 0.8 -N 2 --trials 100000 --seed 7
//   mpent prepare  --psi 0.6 0.8 -N 2 --seed 1
//   mpent fidelity --psi 0.7071 0.7071 --n-sweep 100 1e3 1e4 1e5 1e6
//   mpent blocks   --psi-prime 0.5 0.5 0.5 0.5 -N 2
//   mpent verify   --blocks-max-n 6
//
// Exit codes: 0 ok, 1 invariant failure, 2 usage or spec error.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mpent/blocks.hpp"
#include "mpent/canonical.hpp"
#include "mpent/extraction.hpp"
#include "mpent/preparation.hpp"
#include "mpent/spec_io.hpp"
#include "mpent/text.hpp"

using namespace mpent;

namespace {

constexpr int kOk = 0;
constexpr int kInvariantFailure = 1;
constexpr int kUsageError = 2;

// Inline amplitudes are accepted when their squares sum to 1 within this
// tolerance (four-digit input like 0.7071) and then renormalized.
constexpr double kInputNormTolerance = 1e-3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Cell = std::variant<std::string, double, std::int64_t>;

class Table {
 public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

  void add(std::vector<Cell> row) { rows_.push_back(std::move(row)); }

  void write_csv(std::ostream& os) const {
    for (std::size_t i = 0; i < header_.size(); ++i) os << (i ? "," : "") << header_[i];
    os << '\n';
    for (const auto& row : rows_) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) os << ',';
        std::visit(
            [&](const auto& v) {
              using T = std::decay_t<decltype(v)>;
              if constexpr (std::is_same_v<T, double>) {
                os << format_double(v);
              } else {
                os << v;
              }
            },
            row[i]);
      }
      os << '\n';
    }
  }

  nlohmann::json to_json() const {
    auto arr = nlohmann::json::array();
    for (const auto& row : rows_) {
      nlohmann::json obj = nlohmann::json::object();
      for (std::size_t i = 0; i < row.size(); ++i) {
        std::visit(
            [&](const auto& v) {
              using T = std::decay_t<decltype(v)>;
              if constexpr (std::is_same_v<T, std::string>) {
                if (v.empty()) {
                  obj[header_[i]] = nullptr;
                } else {
                  obj[header_[i]] = v;
                }
              } else if constexpr (std::is_same_v<T, double>) {
                if (std::isfinite(v)) {
                  obj[header_[i]] = v;
                } else {
                  obj[header_[i]] = format_double(v);
                }
              } else {
                obj[header_[i]] = v;
              }
            },
            row[i]);
      }
      arr.push_back(std::move(obj));
    }
    return arr;
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<Cell>> rows_;
};

struct Config {
  std::vector<double> psi;
  std::vector<double> psi_prime;
  std::string spec_file;
  std::size_t n = 0;
  std::vector<double> n_sweep;
  double alpha = kDefaultAlpha;
  double beta = kDefaultBeta;
  std::size_t trials = 0;
  std::optional<std::uint64_t> seed;
  bool analytic = false;
  std::string format = "csv";
  std::string out;
  std::string transcript;
  std::vector<std::size_t> window;
  std::size_t blocks_max_n = 8;
  bool broken_povm = false;
};

struct Source {
  StateSpec spec;
  std::vector<Subset> declared;  ///< subsets always reported, even at zero rate
  std::optional<std::pair<double, double>> psi;
};

std::vector<double> renormalized(std::vector<double> c, const char* flag) {
  double sum = 0.0;
  for (double x : c) {
    if (x < 0.0) throw UsageError(std::string(flag) + ": coefficients must be non-negative");
    sum += x * x;
  }
  if (std::abs(sum - 1.0) > kInputNormTolerance) {
    throw UsageError(std::string(flag) + ": squared coefficients sum to " + format_double(sum) + ", not 1");
  }
  if (std::abs(sum - 1.0) > kNormTolerance) {
    std::cerr << "note: " << flag << " renormalized (sum of squares " << format_double(sum) << ")\n";
    for (auto& x : c) x /= std::sqrt(sum);
  }
  return c;
}

Source load_source(const Config& cfg) {
  const int given = !cfg.psi.empty() + !cfg.psi_prime.empty() + !cfg.spec_file.empty();
  if (given != 1) throw UsageError("give exactly one of --psi, --psi-prime, --spec");
  if (!cfg.psi.empty()) {
    const auto c = renormalized(cfg.psi, "--psi");
    return {psi_spec(c[0], c[1]), {{1, 2}}, std::pair{c[0], c[1]}};
  }
  if (!cfg.psi_prime.empty()) {
    const auto c = renormalized(cfg.psi_prime, "--psi-prime");
    return {psi_prime_spec(c[0], c[1], c[2], c[3]), {{0, 1}, {0, 2}, {1, 2}}, std::nullopt};
  }
  auto spec = load_spec(cfg.spec_file);
  return {std::move(spec), {}, std::nullopt};
}

std::vector<std::size_t> sizes(const Config& cfg) {
  std::vector<std::size_t> out;
  if (cfg.n > 0) out.push_back(cfg.n);
  for (double x : cfg.n_sweep) {
    if (!(x >= 1.0) || x != std::floor(x) || x > 1e15) throw UsageError("--n-sweep: values must be positive integers");
    out.push_back(static_cast<std::size_t>(x));
  }
  if (out.empty()) throw UsageError("give -N or --n-sweep");
  return out;
}

std::vector<Subset> report_subsets(const Source& src, const Rates& r) {
  std::set<Subset> s(src.declared.begin(), src.declared.end());
  for (const auto& [subset, _] : r.per_subset) s.insert(subset);
  s.erase(full_set(src.spec.party_count()));
  return {s.begin(), s.end()};
}

double explicit_terms(const StateSpec& spec, std::size_t n) {
  return std::pow(static_cast<double>(psi_general(spec).support_size()), static_cast<double>(n));
}

Table cmd_rates(const Config& cfg) {
  const auto src = load_source(cfg);
  const auto r = asymptotic_rates(src.spec);
  Table t({"subset", "rate"});
  for (const auto& s : report_subsets(src, r)) t.add({subset_name(s), r.total(s, src.spec.party_count())});
  const auto full = full_set(src.spec.party_count());
  t.add({subset_name(full), r.total(full, src.spec.party_count())});
  return t;
}

Table cmd_extract(const Config& cfg) {
  const auto src = load_source(cfg);
  if (cfg.trials > 0 && !cfg.seed) throw UsageError("--seed is required when --trials > 0");
  const auto rates = asymptotic_rates(src.spec);
  const auto subsets = report_subsets(src, rates);
  const auto full = full_set(src.spec.party_count());
  Table t({"N", "subset", "expected", "empirical", "stderr"});
  Transcript transcript;
  for (std::size_t n : sizes(cfg)) {
    if (!cfg.analytic && explicit_terms(src.spec, n) > static_cast<double>(kExplicitBudget)) {
      throw BudgetExceeded("extract: N = " + std::to_string(n) + " exceeds the explicit budget; use --analytic");
    }
    std::optional<ExtractionRun> run;
    YieldReport expected;
    if (cfg.trials > 0) {
      run = run_extraction(src.spec, n, cfg.trials, *cfg.seed,
                           cfg.analytic ? SamplingMode::analytic : SamplingMode::explicit_state, kAlice,
                           !cfg.transcript.empty());
      if (!run->post_states_verified) throw std::logic_error("extract: post-measurement state does not match its block");
      transcript.append(run->transcript);
      expected = run->expected;
    } else {
      expected = expected_yields(src.spec, n);
    }
    const auto nn = static_cast<std::int64_t>(n);
    for (const auto& s : subsets) {
      auto it = expected.epr.find(s);
      const double e = it == expected.epr.end() ? 0.0 : it->second;
      if (run) {
        auto m = run->epr_mean.find(s);
        const bool has = m != run->epr_mean.end();
        t.add({nn, subset_name(s), e, has ? m->second : 0.0, has ? run->epr_stderr.at(s) : 0.0});
      } else {
        t.add({nn, subset_name(s), e, std::string(), std::string()});
      }
    }
    // Full-support components count toward the all-party row.
    double full_expected = expected.ghz;
    double full_mean = run ? run->ghz_mean : 0.0;
    if (auto it = expected.epr.find(full); it != expected.epr.end()) {
      full_expected += it->second;
      if (run) full_mean += run->epr_mean.at(full);
    }
    if (run) {
      t.add({nn, subset_name(full), full_expected, full_mean, run->ghz_stderr});
    } else {
      t.add({nn, subset_name(full), full_expected, std::string(), std::string()});
    }
  }
  if (!cfg.transcript.empty()) {
    std::ofstream f(cfg.transcript);
    f << transcript.to_text();
  }
  return t;
}

struct Outcome {
  Table table;
  bool ok;
};

Outcome cmd_prepare(const Config& cfg) {
  const auto src = load_source(cfg);
  if (!src.psi) throw UsageError("prepare: only --psi states are supported");
  if (cfg.trials > 0 && !cfg.seed) throw UsageError("--seed is required when --trials > 0");
  const auto [c0, c1] = *src.psi;
  const std::size_t branches = cfg.seed ? (cfg.trials > 0 ? cfg.trials : 100) : 0;
  Table t({"N", "k_minus", "k_plus", "steps", "log2_branches", "sampled_branches", "max_distance", "fidelity",
           "epr_bc", "ghz", "bound_epr_bc", "bound_ghz"});
  bool ok = true;
  Transcript transcript;
  for (std::size_t n : sizes(cfg)) {
    Window w;
    if (!cfg.window.empty()) {
      if (cfg.window.size() != 2) throw UsageError("--window takes two values: k_minus k_plus");
      w = make_window(n, cfg.window[0], cfg.window[1]);
    } else {
      w = target_window(n, c0 * c0, cfg.alpha, cfg.beta);
    }
    const PreparationPlan plan(n, c0, c1, w);
    const auto rep = verify_all_branches(plan);
    double worst = std::max(rep.distance, rep.max_branch_spread);
    for (std::size_t b = 0; b < branches; ++b) {
      Rng rng(Rng::derive(*cfg.seed, b));
      const auto r = run_preparation(plan, rng);
      worst = std::max(worst, r.distance);
      if (!cfg.transcript.empty()) {
        Transcript header;
        header.push({"N=" + std::to_string(n) + " branch " + std::to_string(b), kAlice, 0, 1.0});
        transcript.append(header);
        transcript.append(r.transcript);
      }
    }
    if (!(worst < kNormTolerance)) ok = false;
    const auto bound = resource_count(n, w);
    t.add({static_cast<std::int64_t>(n), static_cast<std::int64_t>(w.k_minus), static_cast<std::int64_t>(w.k_plus),
           static_cast<std::int64_t>(rep.steps), rep.log2_branches, static_cast<std::int64_t>(branches), worst,
           fidelity(n, c0 * c0, w), rep.resources.epr_bc(), rep.resources.ghz, bound.epr_bc(), bound.ghz});
  }
  if (!cfg.transcript.empty()) {
    std::ofstream f(cfg.transcript);
    f << transcript.to_text();
  }
  return {std::move(t), ok};
}

Table cmd_fidelity(const Config& cfg) {
  const auto src = load_source(cfg);
  if (!src.psi) throw UsageError("fidelity: only --psi states are supported");
  const double c0sq = src.psi->first * src.psi->first;
  Table t({"N", "k_minus", "k_plus", "F", "bound", "epr_per_copy", "ghz_per_copy"});
  for (std::size_t n : sizes(cfg)) {
    const auto w = target_window(n, c0sq, cfg.alpha, cfg.beta);
    const auto r = resource_count(n, w);
    const double nd = static_cast<double>(n);
    t.add({static_cast<std::int64_t>(n), static_cast<std::int64_t>(w.k_minus), static_cast<std::int64_t>(w.k_plus),
           fidelity(n, c0sq, w), fidelity_bound(n, cfg.alpha, cfg.beta), r.epr_bc() / nd, r.ghz / nd});
  }
  return t;
}

Outcome cmd_blocks(const Config& cfg) {
  const auto src = load_source(cfg);
  const auto ns = sizes(cfg);
  std::vector<std::string> header{"N"};
  for (std::size_t i = 0; i < src.spec.size(); ++i) header.push_back("k" + std::to_string(i));
  for (const char* h : {"coefficient", "multiplicity", "log2_probability"}) header.emplace_back(h);
  Table t(header);
  bool ok = true;
  for (std::size_t n : ns) {
    if (block_count(n, src.spec.size()) > kBlockEnumerationLimit) throw BudgetExceeded("blocks: too many blocks to list");
    auto d = decompose(src.spec, n);
    if (!cfg.analytic && explicit_terms(src.spec, n) <= static_cast<double>(kExplicitBudget)) {
      try {
        decompose(src.spec, copies(psi_general(src.spec), n), n);
      } catch (const std::invalid_argument& e) {
        std::cerr << "blocks: " << e.what() << '\n';
        ok = false;
      }
    }
    for (const auto& e : d.entries) {
      std::vector<Cell> row{static_cast<std::int64_t>(n)};
      for (auto k : e.index.counts) row.emplace_back(static_cast<std::int64_t>(k));
      row.emplace_back(e.coefficient);
      row.emplace_back(e.multiplicity);
      row.emplace_back(e.log2_probability);
      t.add(std::move(row));
    }
  }
  return {std::move(t), ok};
}

struct SuiteResult {
  std::string name;
  std::size_t cases = 0;
  std::size_t failures = 0;
};

Outcome cmd_verify(const Config& cfg) {
  std::vector<SuiteResult> suites;
  Rng rng(Rng::derive(cfg.seed.value_or(2024), 0));
  std::vector<StateSpec> specs{psi_spec(0.6, 0.8), psi_prime_spec(0.4, 0.5, 0.3, std::sqrt(0.5))};
  for (int i = 0; i < 10; ++i) specs.push_back(random_spec(rng));

  SuiteResult blocks{"block_equivalence"};
  for (std::size_t n = 1; n <= cfg.blocks_max_n; ++n) {
    for (std::size_t k = 0; k <= n; ++k) {
      ++blocks.cases;
      if (!verify_block_equivalence(n, k)) ++blocks.failures;
    }
  }
  suites.push_back(blocks);

  SuiteResult ortho{"local_orthogonality"};
  for (const auto& s : specs) {
    std::vector<PureState> parts;
    for (std::size_t i = 0; i < s.size(); ++i) parts.push_back(s.component_state(i));
    ++ortho.cases;
    if (!check_local_orthogonality(parts)) ++ortho.failures;
  }
  suites.push_back(ortho);

  SuiteResult complete{"povm_completeness"};
  auto check = [&](const Povm& p, Label dim) {
    ++complete.cases;
    if (!check_completeness(p, dim)) ++complete.failures;
  };
  for (std::size_t n = 1; n <= 4; ++n) {
    for (PartyId p : {kAlice, kBob, kClaire}) check(block_measurement(specs[0], n, p), detail::checked_power(specs[0].local_dims()[p.index], n));
  }
  for (std::size_t n = 1; n <= 2; ++n) {
    for (PartyId p : {kAlice, kBob, kClaire}) check(block_measurement(specs[1], n, p), detail::checked_power(6, n));
  }
  const double h = std::sqrt(0.5);
  for (std::size_t n = 1; n <= 4; ++n) {
    const PreparationPlan plan(n, h, h, make_window(n, 0, n));
    const Label dims[] = {plan.ghz_levels(), plan.ghz_levels() * plan.epr_levels()};
    for (std::size_t i = 0; i < plan.step_count(); ++i) check(plan.step(i).povm, dims[i == 0 ? 0 : 1]);
  }
  if (cfg.broken_povm) {
    auto p = block_measurement(specs[0], 2, kAlice);
    p.elements.pop_back();
    check(p, 4);
  }
  suites.push_back(complete);

  SuiteResult consistent{"entropy_consistency"};
  for (const auto& s : specs) {
    ++consistent.cases;
    if (!entropy_consistency(s)) ++consistent.failures;
  }
  suites.push_back(consistent);

  SuiteResult prep{"preparation_branches"};
  for (double c0sq : {0.0, 0.36, 0.5, 1.0}) {
    const double c0 = std::sqrt(c0sq), c1 = std::sqrt(1 - c0sq);
    const auto rep = verify_all_branches(PreparationPlan(2, c0, c1, make_window(2, 0, 2)));
    ++prep.cases;
    if (!(rep.distance < kNormTolerance && rep.max_branch_spread < kNormTolerance)) ++prep.failures;
  }
  suites.push_back(prep);

  Table t({"invariant", "cases", "failures", "status"});
  bool ok = true;
  for (const auto& s : suites) {
    ok = ok && s.failures == 0;
    t.add({s.name, static_cast<std::int64_t>(s.cases), static_cast<std::int64_t>(s.failures),
           std::string(s.failures == 0 ? "pass" : "FAIL")});
  }
  return {std::move(t), ok};
}

void emit(const Config& cfg, const std::string& command, const Table& t) {
  std::ostringstream os;
  if (cfg.format == "json") {
    os << nlohmann::json{{"command", command}, {"rows", t.to_json()}}.dump(2) << '\n';
  } else {
    t.write_csv(os);
  }
  if (cfg.out.empty()) {
    std::cout << os.str();
  } else {
    std::ofstream f(cfg.out);
    if (!f) throw UsageError("cannot write " + cfg.out);
    f << os.str();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Block extraction and preparation of multipartite states"};
  app.require_subcommand(1);
  Config cfg;

  auto spec_flags = [&](CLI::App* sub) {
    sub->add_option("--psi", cfg.psi, "c0 c1")->expected(2);
    sub->add_option("--psi-prime", cfg.psi_prime, "c0 c1 c2 c3 (product, AB, AC, BC)")->expected(4);
    sub->add_option("--spec", cfg.spec_file, "JSON spec file");
  };
  auto size_flags = [&](CLI::App* sub) {
    sub->add_option("-N", cfg.n, "number of copies")->check(CLI::PositiveNumber);
    sub->add_option("--n-sweep", cfg.n_sweep, "list of N");
  };
  auto out_flags = [&](CLI::App* sub) {
    sub->add_option("--format", cfg.format)->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--out", cfg.out, "output file (default stdout)");
  };
  auto window_flags = [&](CLI::App* sub) {
    sub->add_option("--alpha", cfg.alpha);
    sub->add_option("--beta", cfg.beta);
  };
  auto seed_flag = [&](CLI::App* sub) {
    sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& s) { cfg.seed = s; });
  };

  auto* rates = app.add_subcommand("rates", "asymptotic rates per subset");
  spec_flags(rates);
  out_flags(rates);

  auto* extract = app.add_subcommand("extract", "finite-N block extraction yields");
  spec_flags(extract);
  size_flags(extract);
  out_flags(extract);
  seed_flag(extract);
  extract->add_option("--trials", cfg.trials);
  extract->add_flag("--analytic", cfg.analytic, "sample block indices without building the state");
  extract->add_option("--transcript", cfg.transcript);

  auto* prepare = app.add_subcommand("prepare", "run and verify the preparation protocol");
  spec_flags(prepare);
  size_flags(prepare);
  out_flags(prepare);
  window_flags(prepare);
  seed_flag(prepare);
  prepare->add_option("--trials", cfg.trials, "sampled branches (default 100 when --seed is given)");
  prepare->add_option("--window", cfg.window, "k_minus k_plus")->expected(2);
  prepare->add_option("--transcript", cfg.transcript);

  auto* fid = app.add_subcommand("fidelity", "truncation fidelity and resource sweep");
  spec_flags(fid);
  size_flags(fid);
  out_flags(fid);
  window_flags(fid);

  auto* blocks = app.add_subcommand("blocks", "block decomposition of N copies");
  spec_flags(blocks);
  size_flags(blocks);
  out_flags(blocks);
  blocks->add_flag("--analytic", cfg.analytic, "skip the explicit projection check");

  auto* verify = app.add_subcommand("verify", "invariant suites");
  out_flags(verify);
  seed_flag(verify);
  verify->add_option("--blocks-max-n", cfg.blocks_max_n)->check(CLI::Range(1, 10));
  verify->add_flag("--inject-broken-povm", cfg.broken_povm, "negative control: add an incomplete POVM");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "rates") {
      emit(cfg, name, cmd_rates(cfg));
    } else if (name == "extract") {
      emit(cfg, name, cmd_extract(cfg));
    } else if (name == "fidelity") {
      emit(cfg, name, cmd_fidelity(cfg));
    } else {
      auto r = name == "prepare" ? cmd_prepare(cfg) : name == "blocks" ? cmd_blocks(cfg) : cmd_verify(cfg);
      emit(cfg, name, r.table);
      if (!r.ok) {
        std::cerr << name << ": invariant failure\n";
        return kInvariantFailure;
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const SpecError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const BudgetExceeded& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvariantFailure;
  }
  return kOk;
}
