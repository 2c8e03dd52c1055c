#include "metrosim/harness.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "metrosim/errors.hpp"
#include "metrosim/numerics.hpp"
#include "metrosim/qpe.hpp"
#include "metrosim/random.hpp"
#include "metrosim/robustness.hpp"
#include "metrosim/superradiance.hpp"
#include "metrosim/toymodels.hpp"

namespace metrosim {

namespace {

constexpr std::array<ExperimentInfo, 6> catalog{{
    {ExperimentKind::fig2a, "fig2a", "mean photon number over x^2 against gt: SSE ensemble and analytic curve"},
    {ExperimentKind::fig2b, "fig2b", "delta x against N at fixed gt from photon statistics, with the bound"},
    {ExperimentKind::figS1, "figS1", "relaxed photon escape rate against the preparation angle delta, with fits"},
    {ExperimentKind::toy_scaling, "toy_scaling", "exact pure-interaction toy model: delta x N t is constant"},
    {ExperimentKind::fluctuation_cases, "fluctuation_cases", "coupling-fluctuation noise for the three correlation cases"},
    {ExperimentKind::qpe_bounds, "qpe_bounds", "perturbative delta x_min on the cavity pair model against the closed form"},
}};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
std::optional<T> parse_number(const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
  return s;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_double(v[i]);
  return s;
}

void apply_defaults(ExperimentConfig& c) {
  c.n_atoms.clear();
  c.deltas.clear();
  switch (c.experiment) {
    case ExperimentKind::fig2a:
      c.n_atoms = {2, 4, 6, 8, 10, 12};
      c.x = 0.1;
      c.gt_max = 1.5;
      c.grid_steps = 150;
      c.n_trajectories = 100;
      break;
    case ExperimentKind::fig2b:
      c.n_atoms = {2, 4, 6, 8, 10, 12};
      c.x = 0.01;
      c.gt = 0.0485;
      c.n_trajectories = 400;
      break;
    case ExperimentKind::figS1:
      c.n_atoms = {2, 4, 6};
      c.deltas = dfs_delta_grid();
      c.n_trajectories = 1000;
      break;
    case ExperimentKind::toy_scaling:
      for (int n = 2; n <= 1024; n *= 2) c.n_atoms.push_back(n);
      c.x = 0.1;
      c.gt = 1.0;
      break;
    case ExperimentKind::fluctuation_cases:
      for (int n = 8; n <= 1024; n *= 2) c.n_atoms.push_back(n);
      c.x = 0.1;
      c.correlation = 1e-6;
      c.n_trajectories = 100000;
      break;
    case ExperimentKind::qpe_bounds:
      c.n_atoms = {2, 4, 6, 8};
      c.x = 0.1;
      c.gt = 0.0485;
      break;
  }
}

}  // namespace

std::span<const ExperimentInfo> experiment_catalog() { return catalog; }

std::optional<ExperimentKind> experiment_from_name(std::string_view name) {
  for (const auto& e : catalog)
    if (name == e.name) return e.kind;
  return std::nullopt;
}

const char* experiment_name(ExperimentKind kind) {
  for (const auto& e : catalog)
    if (e.kind == kind) return e.name;
  return "unknown";
}

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error([&] {
        std::string msg = "invalid configuration:";
        for (const auto& p : problems) msg += "\n  " + p;
        return msg;
      }()),
      problems_(std::move(problems)) {}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::echo() const {
  std::vector<std::pair<std::string, std::string>> e{
      {"experiment.name", experiment_name(experiment)},
      {"model.n_atoms", join_ints(n_atoms)},
      {"model.x", format_double(x)},
      {"model.kappa_over_g", format_double(kappa_over_g)},
      {"model.gt", format_double(gt)},
      {"model.gt_max", format_double(gt_max)},
      {"model.grid_steps", std::to_string(grid_steps)},
      {"model.gamma_over_g", format_double(gamma_over_g)},
      {"model.deltas", join_doubles(deltas)},
      {"model.correlation", format_double(correlation)},
      {"sampling.n_trajectories", std::to_string(n_trajectories)},
      {"sampling.m_repetitions", std::to_string(m_repetitions)},
      {"sampling.seed", seed ? std::to_string(*seed) : std::string()},
      {"output.directory", output_directory.string()},
  };
  return e;
}

ExperimentConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError({"line " + std::to_string(e.line()) + ": " + e.message()});
  }

  static const std::map<std::string, std::set<std::string>> allowed{
      {"experiment", {"name"}},
      {"model",
       {"n_atoms", "x", "kappa_over_g", "gt", "gt_max", "grid_steps", "gamma_over_g", "deltas", "correlation"}},
      {"sampling", {"n_trajectories", "m_repetitions", "seed"}},
      {"output", {"directory"}},
  };
  std::vector<std::string> problems;
  std::map<std::string, std::string> values;
  for (const auto& [section, body] : tree) {
    const auto it = allowed.find(section);
    if (body.empty()) {
      problems.push_back(section + ": key outside a [section]");
      continue;
    }
    if (it == allowed.end()) {
      problems.push_back("[" + section + "]: unknown section");
      continue;
    }
    for (const auto& [key, node] : body) {
      if (!it->second.count(key)) {
        problems.push_back(section + "." + key + ": unknown key");
        continue;
      }
      values[section + "." + key] = trim(node.data());
    }
  }

  // Without a known experiment there are no defaults to check values against.
  ExperimentConfig c;
  const auto name = values.find("experiment.name");
  if (name == values.end()) {
    problems.push_back("experiment.name: missing");
    throw ConfigError(problems);
  }
  if (const auto kind = experiment_from_name(name->second)) {
    c.experiment = *kind;
  } else {
    problems.push_back("experiment.name: unknown experiment '" + name->second + "'");
    throw ConfigError(problems);
  }
  apply_defaults(c);

  auto get = [&](const std::string& key) -> const std::string* {
    const auto it = values.find(key);
    return it == values.end() ? nullptr : &it->second;
  };
  auto real = [&](const std::string& key, double& out) {
    if (const auto* s = get(key)) {
      if (const auto v = parse_number<double>(*s)) {
        out = *v;
      } else {
        problems.push_back(key + ": not a number: '" + *s + "'");
      }
    }
  };
  auto count = [&](const std::string& key, auto& out) {
    if (const auto* s = get(key)) {
      if (const auto v = parse_number<std::remove_reference_t<decltype(out)>>(*s)) {
        out = *v;
      } else {
        problems.push_back(key + ": not a nonnegative integer: '" + *s + "'");
      }
    }
  };

  if (const auto* s = get("model.n_atoms")) {
    c.n_atoms.clear();
    for (const auto& item : split_list(*s)) {
      if (const auto v = parse_number<int>(item)) {
        c.n_atoms.push_back(*v);
      } else {
        problems.push_back("model.n_atoms: not an integer: '" + item + "'");
      }
    }
  }
  if (const auto* s = get("model.deltas")) {
    c.deltas.clear();
    for (const auto& item : split_list(*s)) {
      if (const auto v = parse_number<double>(item)) {
        c.deltas.push_back(*v);
      } else {
        problems.push_back("model.deltas: not a number: '" + item + "'");
      }
    }
  }
  real("model.x", c.x);
  real("model.kappa_over_g", c.kappa_over_g);
  real("model.gt", c.gt);
  real("model.gt_max", c.gt_max);
  count("model.grid_steps", c.grid_steps);
  real("model.gamma_over_g", c.gamma_over_g);
  real("model.correlation", c.correlation);
  count("sampling.n_trajectories", c.n_trajectories);
  count("sampling.m_repetitions", c.m_repetitions);
  if (const auto* s = get("sampling.seed")) {
    if (const auto v = parse_number<std::uint64_t>(*s)) {
      c.seed = *v;
    } else {
      problems.push_back("sampling.seed: not an unsigned 64-bit integer: '" + *s + "'");
    }
  }
  if (const auto* s = get("output.directory")) c.output_directory = *s;
  if (!problems.empty()) throw ConfigError(problems);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({path.string() + ": cannot read config file"});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void resolve_seed(ExperimentConfig& config, const char* env_seed) {
  if (env_seed == nullptr) return;
  if (config.seed)
    throw ConfigError({"sampling.seed: set in the config and in METROSIM_SEED; remove one of them"});
  const auto v = parse_number<std::uint64_t>(trim(env_seed));
  if (!v) throw ConfigError({std::string("METROSIM_SEED: not an unsigned 64-bit integer: '") + env_seed + "'"});
  config.seed = *v;
}

std::vector<std::string> validate_config(const ExperimentConfig& c) {
  std::vector<std::string> p;
  const auto kind = c.experiment;
  const bool trajectories = kind == ExperimentKind::fig2a || kind == ExperimentKind::fig2b;

  if (c.n_atoms.empty()) p.push_back("model.n_atoms: empty list");
  std::set<int> seen;
  for (int n : c.n_atoms) {
    if (n < 2 || n % 2 != 0) p.push_back("model.n_atoms: " + std::to_string(n) + " is not an even number >= 2");
    if (!seen.insert(n).second) p.push_back("model.n_atoms: " + std::to_string(n) + " is listed twice");
    if (trajectories && n > 14) p.push_back("model.n_atoms: " + std::to_string(n) + " exceeds the SSE limit of 14");
    if (kind == ExperimentKind::figS1 && n > 18)
      p.push_back("model.n_atoms: " + std::to_string(n) + " exceeds the relaxation limit of 18");
  }
  if (!std::isfinite(c.x)) p.push_back("model.x: must be finite");
  if ((trajectories || kind == ExperimentKind::qpe_bounds) && (c.x == 0.0 || std::abs(c.x) >= 1.0))
    p.push_back("model.x: must satisfy 0 < |x| < 1 (results are normalized by x^2)");
  if (!(c.kappa_over_g > 0.0) || !std::isfinite(c.kappa_over_g)) p.push_back("model.kappa_over_g: must be positive");
  if (!(c.gamma_over_g >= 0.0) || !std::isfinite(c.gamma_over_g))
    p.push_back("model.gamma_over_g: must be nonnegative");
  if (c.gamma_over_g > 0.0 && kind != ExperimentKind::qpe_bounds)
    p.push_back("model.gamma_over_g: spontaneous emission is only modeled by qpe_bounds");
  if ((kind == ExperimentKind::fig2b || kind == ExperimentKind::toy_scaling || kind == ExperimentKind::qpe_bounds) &&
      !(c.gt > 0.0 && std::isfinite(c.gt)))
    p.push_back("model.gt: must be positive");
  if (kind == ExperimentKind::fig2a) {
    if (!(c.gt_max > 0.0 && std::isfinite(c.gt_max))) p.push_back("model.gt_max: must be positive");
    if (c.grid_steps < 1) p.push_back("model.grid_steps: must be at least 1");
  }
  if (kind == ExperimentKind::figS1) {
    if (c.deltas.size() < 3) p.push_back("model.deltas: the fit needs at least three values");
    for (double d : c.deltas)
      if (!(d >= 0.0 && d <= std::numbers::pi / 2.0)) p.push_back("model.deltas: " + format_double(d) + " is outside [0, pi/2]");
  }
  if (!(c.correlation >= 0.0) || !std::isfinite(c.correlation)) p.push_back("model.correlation: must be nonnegative");
  if (kind != ExperimentKind::toy_scaling && kind != ExperimentKind::qpe_bounds && c.n_trajectories < 2)
    p.push_back("sampling.n_trajectories: must be at least 2");
  if (c.m_repetitions < 1) p.push_back("sampling.m_repetitions: must be at least 1");
  if (!c.seed) p.push_back("sampling.seed: missing (set it in the config or through METROSIM_SEED)");
  if (c.output_directory.empty()) p.push_back("output.directory: missing");
  return p;
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw std::runtime_error("to_chars failed");
  return std::string(buf.data(), ptr);
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 computation failed");
  std::ostringstream out;
  for (unsigned i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return out.str();
}

bool RunManifest::all_checks_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["artifact"] = "metrosim";
  j["version"] = std::string(artifact_version);
  j["experiment"] = experiment_name(config.experiment);
  nlohmann::ordered_json cfg;
  for (const auto& [k, v] : config.echo()) cfg[k] = v;
  j["config"] = cfg;
  j["seed_source"] = seed_source;
  j["status"] = status == RunStatus::ok ? "ok" : "diverged";
  j["error"] = error;
  nlohmann::ordered_json files_j = nlohmann::ordered_json::array();
  for (const auto& f : files) files_j.push_back({{"name", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  j["files"] = files_j;
  nlohmann::ordered_json checks_j = nlohmann::ordered_json::array();
  for (const auto& c : checks) checks_j.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  j["checks"] = checks_j;
  j["all_checks_passed"] = all_checks_passed();
  if (!fits.empty()) j["fits"] = fits;
  j["runtime_seconds"] = runtime_seconds;
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream ts;
  ts << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  j["generated_at"] = ts.str();
  return j.dump(2) + "\n";
}

namespace {

class Csv {
 public:
  explicit Csv(std::initializer_list<std::string_view> columns) {
    text_ += csv_units_line;
    text_ += '\n';
    bool first = true;
    for (auto c : columns) {
      if (!first) text_ += ',';
      text_ += c;
      first = false;
    }
    text_ += '\n';
  }

  Csv& cell(double v) { return put(format_double(v)); }
  Csv& cell(int v) { return put(std::to_string(v)); }
  Csv& cell(std::string_view v) { return put(std::string(v)); }
  Csv& empty() { return put({}); }
  void end_row() {
    text_ += '\n';
    row_started_ = false;
  }
  const std::string& text() const { return text_; }

 private:
  Csv& put(const std::string& s) {
    if (row_started_) text_ += ',';
    text_ += s;
    row_started_ = true;
    return *this;
  }
  std::string text_;
  bool row_started_ = false;
};

struct Runner {
  const ExperimentConfig& c;
  const RunOptions& opt;
  RunManifest& m;

  std::uint64_t seed() const { return *c.seed; }

  void write(const std::string& name, const Csv& csv) {
    const auto path = c.output_directory / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << csv.text();
    if (!out) throw std::runtime_error("cannot write " + path.string());
    m.files.push_back({name, sha256_hex(csv.text()), csv.text().size()});
  }

  void check(std::string name, bool passed, std::string detail) {
    m.checks.push_back({std::move(name), passed, std::move(detail)});
  }

  void fig2a() {
    Csv csv{"gt", "N", "nph_over_x2_numeric", "nph_over_x2_stderr", "nph_over_x2_analytic"};
    double worst_window = 0.0, worst_short = 0.0;
    std::size_t window_points = 0, short_points = 0;
    const TimeGrid grid{0.0, c.gt_max, c.grid_steps};
    for (int n : c.n_atoms) {
      const auto curve =
          photon_curve(n, c.x, c.kappa_over_g, grid, c.n_trajectories, derive_seed(seed(), n), 201, opt.jobs);
      for (std::size_t k = 0; k < curve.gt.size(); ++k) {
        csv.cell(curve.gt[k]).cell(n).cell(curve.nph_numeric[k]).cell(curve.nph_numeric_stderr[k]);
        csv.cell(curve.nph_analytic[k]).end_row();
        const double t = curve.gt[k];
        if (t >= 0.3 / c.kappa_over_g && t <= 0.5 * c.kappa_over_g / n) {
          worst_window = std::max(worst_window, std::abs(curve.nph_numeric[k] / curve.nph_analytic[k] - 1.0));
          ++window_points;
        }
        if (t > 0.0 && t <= 0.05) {
          worst_short = std::max(worst_short, std::abs(curve.nph_numeric[k] / curve.nph_short[k] - 1.0));
          ++short_points;
        }
      }
    }
    write("nph_vs_gt.csv", csv);
    check("analytic_curve_within_15pct", window_points > 0 && worst_window <= 0.15,
          "worst relative deviation " + format_double(worst_window) + " over " + std::to_string(window_points) +
              " points with 0.3/kappa <= t <= 0.5 kappa/(N g^2)");
    check("short_time_within_10pct", short_points > 0 && worst_short <= 0.10,
          "worst relative deviation " + format_double(worst_short) + " over " + std::to_string(short_points) +
              " points with 0 < gt <= 0.05");
  }

  void fig2b() {
    SensitivityOptions so;
    so.kappa_over_g = c.kappa_over_g;
    so.jobs = opt.jobs;
    const auto curve = sensitivity_curve(c.n_atoms, c.gt, c.x, c.m_repetitions, c.n_trajectories, seed(), so);
    Csv csv{"N", "deltax_numeric", "deltax_stderr", "bound_exact", "bound_largeN"};
    bool above = true, within = true;
    double worst_ratio = 0.0;
    std::vector<double> ns, dx;
    for (const auto& e : curve.entries) {
      csv.cell(e.n_atoms).cell(e.delta_x_numeric).cell(e.delta_x_stderr).cell(e.delta_x_bound);
      csv.cell(e.delta_x_large_n).end_row();
      above = above && e.delta_x_numeric >= e.delta_x_bound - 2.0 * e.delta_x_stderr;
      const double ratio = e.delta_x_numeric / e.delta_x_bound;
      within = within && ratio <= 1.25 && ratio >= 1.0 - 2.0 * e.delta_x_stderr / e.delta_x_bound;
      worst_ratio = std::max(worst_ratio, ratio);
      ns.push_back(e.n_atoms);
      dx.push_back(e.delta_x_numeric);
    }
    write("deltax_vs_N.csv", csv);
    check("not_below_bound_2stderr", above, "delta x >= bound - 2 stderr at every N");
    check("within_25pct_of_bound", within, "largest delta x / bound " + format_double(worst_ratio));
    if (ns.size() >= 2) {
      const double slope = fit_power_law_exponent(ns, dx);
      check("loglog_slope", std::abs(slope + 1.0) <= 0.15, "fitted exponent " + format_double(slope) + ", target -1 +- 0.15");
    }
  }

  void figS1() {
    Csv csv{"N", "delta", "alpha_numeric", "alpha_stderr", "alpha_exact"};
    DfsRelaxationOptions ro;
    ro.jobs = opt.jobs;
    bool ok = true;
    double worst_z = 0.0;
    bool any_reference = false;
    for (int n : c.n_atoms) {
      const auto scan = dfs_relaxation_scan(n, c.deltas, c.n_trajectories, derive_seed(seed(), n), ro);
      for (const auto& p : scan.points) {
        csv.cell(n).cell(p.delta).cell(p.mean_alpha).cell(p.alpha_stderr);
        if (const auto ref = dfs_alpha_reference(n, p.delta)) {
          csv.cell(*ref);
          any_reference = true;
          const double diff = std::abs(p.mean_alpha - *ref);
          ok = ok && diff <= std::max(3.0 * p.alpha_stderr, 1e-12);
          if (p.alpha_stderr > 0.0) worst_z = std::max(worst_z, diff / p.alpha_stderr);
        } else {
          csv.empty();
        }
        csv.end_row();
      }
      m.fits["N=" + std::to_string(n)] = {{"A", scan.fit.a},        {"B", scan.fit.b},
                                          {"C", scan.fit.c},        {"A_stderr", scan.fit.a_stderr},
                                          {"B_stderr", scan.fit.b_stderr}, {"C_stderr", scan.fit.c_stderr}};
    }
    write("alpha_vs_delta.csv", csv);
    if (any_reference)
      check("exact_values_within_3stderr", ok, "largest deviation " + format_double(worst_z) + " stderr (N = 2, 4, 6)");
  }

  void toy_scaling() {
    Csv csv{"N", "deltax", "deltax_N_t"};
    double first = 0.0, worst = 0.0;
    for (int n : c.n_atoms) {
      const auto r = pure_interaction_sensitivity({n, 1.0, 1.0, -1.0, c.x, c.gt}, c.m_repetitions);
      const double prod = r.delta_x * n * c.gt;
      if (first == 0.0) first = prod;
      worst = std::max(worst, std::abs(prod / first - 1.0));
      csv.cell(n).cell(r.delta_x).cell(prod).end_row();
    }
    write("toy_scaling.csv", csv);
    check("deltax_N_t_constant", worst <= 1e-12, "largest relative spread " + format_double(worst));
  }

  void fluctuation_cases() {
    const double gamma = 1.0 / c.kappa_over_g;  // g = 1
    Csv csv{"N", "case", "alpha_zero", "alpha_bg_mean", "alpha_fluct_std"};
    std::vector<double> ns, std1, std3, ns_large, std1_large, std3_large;
    bool case2_zero = true;
    for (int n : c.n_atoms) {
      const CorrelationMatrix mats[] = {CorrelationMatrix::uncorrelated(n, c.correlation),
                                        CorrelationMatrix::fully_correlated(n, c.correlation),
                                        CorrelationMatrix::intra_set(n, c.correlation)};
      for (int k = 0; k < 3; ++k) {
        const auto r = coupling_fluctuation_noise(mats[k], c.x, gamma);
        csv.cell(n).cell(to_string(r.case_label)).cell(r.alpha_zero).cell(r.alpha_bg_mean).cell(r.alpha_fluct_std);
        csv.end_row();
        if (k == 1) case2_zero = case2_zero && r.alpha_fluct_std == 0.0;
        if (k == 0) std1.push_back(r.alpha_fluct_std);
        if (k == 2) std3.push_back(r.alpha_fluct_std);
      }
      ns.push_back(n);
      if (n >= 128) {
        ns_large.push_back(n);
        std1_large.push_back(std1.back());
        std3_large.push_back(std3.back());
      }
    }
    write("fluctuation_cases.csv", csv);
    check("pairwise_identical_zero_noise", case2_zero, "std of delta alpha_f is exactly 0 for every N");
    const bool large = ns_large.size() >= 2;
    if (large || ns.size() >= 2) {
      const double e1 = fit_power_law_exponent(large ? ns_large : ns, large ? std1_large : std1);
      const double e3 = fit_power_law_exponent(large ? ns_large : ns, large ? std3_large : std3);
      const std::string range = large ? "N >= 128" : "all N";
      check("uncorrelated_exponent", std::abs(e1 - 1.5) <= 0.05, "exponent " + format_double(e1) + " over " + range);
      check("intra_set_exponent", std::abs(e3 - 2.0) <= 0.05, "exponent " + format_double(e3) + " over " + range);
    }

    // Monte Carlo check at the smallest N
    const int n0 = *std::min_element(c.n_atoms.begin(), c.n_atoms.end());
    Csv mc{"N", "case", "std_closed", "std_sampled", "std_sampled_stderr", "mean_closed", "mean_sampled",
           "mean_sampled_stderr"};
    bool mc_ok = true;
    for (const auto& cm : {CorrelationMatrix::uncorrelated(n0, c.correlation), CorrelationMatrix::intra_set(n0, c.correlation)}) {
      const auto closed = coupling_fluctuation_noise(cm, c.x, gamma);
      const auto s = sample_fluctuating_alpha(cm, c.x, gamma, 1.0, c.n_trajectories, derive_seed(seed(), n0));
      const double mean_closed = closed.alpha_zero + closed.alpha_bg_mean;
      mc.cell(n0).cell(to_string(closed.case_label)).cell(closed.alpha_fluct_std).cell(s.std).cell(s.std_stderr);
      mc.cell(mean_closed).cell(s.mean).cell(s.mean_stderr).end_row();
      mc_ok = mc_ok && std::abs(s.std - closed.alpha_fluct_std) <= 5.0 * s.std_stderr &&
              std::abs(s.mean - mean_closed) <= 5.0 * s.mean_stderr;
    }
    write("fluctuation_sampler.csv", mc);
    check("sampler_matches_closed_form", mc_ok, "mean and std within 5 stderr at N = " + std::to_string(n0));
  }

  void qpe_bounds() {
    Csv csv{"N", "M", "dxmin_numeric", "dxmin_closed_form", "nph_over_x2", "nph_over_x2_with_emission"};
    const Eigen::MatrixXcd a = truncated_annihilation(2);
    const Eigen::MatrixXcd number = a.adjoint() * a;
    const Eigen::Matrix2cd lower{{0.0, 1.0}, {0.0, 0.0}};
    const Eigen::Matrix2cd id2 = Eigen::Matrix2cd::Identity();
    const Channel cavity{{{c.kappa_over_g, a}}};
    Channel emission;
    if (c.gamma_over_g > 0.0)
      emission.terms = {{c.gamma_over_g / 2.0, kron(lower, id2)}, {c.gamma_over_g / 2.0, kron(id2, lower)}};
    double worst = 0.0;
    for (int n : c.n_atoms) {
      const auto at_zero = pair_product_model({n, 1.0, c.kappa_over_g, 0.0, c.gamma_over_g});
      const double dx = dxmin_perturbative(at_zero, 0.0, c.gt, c.m_repetitions).delta_x;
      const double closed = superradiance_bound(n, c.gt, c.m_repetitions);
      worst = std::max(worst, std::abs(dx / closed - 1.0));
      const auto at_x = pair_product_model({n, 1.0, c.kappa_over_g, c.x, c.gamma_over_g});
      const double x2 = c.x * c.x;
      const double plain = expectation_decoherent(at_x, {}, cavity, number, c.x, c.gt) / x2;
      const double damped = expectation_decoherent(at_x, emission, cavity, number, c.x, c.gt) / x2;
      csv.cell(n).cell(c.m_repetitions).cell(dx).cell(closed).cell(plain).cell(damped).end_row();
    }
    write("qpe_bounds.csv", csv);
    check("bound_within_1e-6", worst <= 1e-6, "largest relative error " + format_double(worst));
  }
};

}  // namespace

RunManifest run_experiment(const ExperimentConfig& config, const RunOptions& options, const std::string& seed_source) {
  if (auto problems = validate_config(config); !problems.empty()) throw ConfigError(std::move(problems));
  std::error_code ec;
  std::filesystem::create_directories(config.output_directory, ec);
  if (ec) throw std::runtime_error("cannot create " + config.output_directory.string() + ": " + ec.message());

  RunManifest m;
  m.config = config;
  m.seed_source = seed_source;
  const auto start = std::chrono::steady_clock::now();
  Runner r{config, options, m};
  try {
    switch (config.experiment) {
      case ExperimentKind::fig2a: r.fig2a(); break;
      case ExperimentKind::fig2b: r.fig2b(); break;
      case ExperimentKind::figS1: r.figS1(); break;
      case ExperimentKind::toy_scaling: r.toy_scaling(); break;
      case ExperimentKind::fluctuation_cases: r.fluctuation_cases(); break;
      case ExperimentKind::qpe_bounds: r.qpe_bounds(); break;
    }
  } catch (const IntegrationDiverged& e) {
    m.status = RunStatus::diverged;
    m.error = e.what();
  } catch (const ConvergenceError& e) {
    m.status = RunStatus::diverged;
    m.error = e.what();
  } catch (const StepSizeError& e) {
    m.status = RunStatus::diverged;
    m.error = e.what();
  }
  m.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::ofstream out(config.output_directory / "manifest.json", std::ios::binary | std::ios::trunc);
  out << m.to_json();
  if (!out) throw std::runtime_error("cannot write manifest.json");
  return m;
}

}  // namespace metrosim
