#include "scenario.hpp"

#include <toml.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <future>
#include <iomanip>
#include <limits>
#include <random>
#include <set>
#include <sstream>

namespace confgeom::scenario {

namespace {

using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

std::size_t uz(int i) { return static_cast<std::size_t>(i); }

double max_abs(const Mat& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

[[noreturn]] void parse_fail(const std::string& where, const std::string& what) {
  throw ScenarioError(ExitCode::Parse, where + ": " + what);
}

[[noreturn]] void invalid(const std::string& what) { throw ScenarioError(ExitCode::Validation, what); }

// ---------------------------------------------------------------------------
// TOML readers

Expr read_expr(const toml::node& n, const std::string& where) {
  if (auto s = n.value<std::string>()) {
    try {
      return parse(*s);
    } catch (const ParseError& e) {
      parse_fail(where, e.what());
    }
  }
  if (n.is_number()) return Expr::constant(*n.value<double>());
  parse_fail(where, "expected an expression string or a number");
}

const toml::array& read_array(const toml::node& n, const std::string& where, std::optional<std::size_t> size = {}) {
  const toml::array* a = n.as_array();
  if (!a) parse_fail(where, "expected an array");
  if (size && a->size() != *size)
    parse_fail(where, "expected " + std::to_string(*size) + " entries, got " + std::to_string(a->size()));
  return *a;
}

std::vector<Expr> read_expr_vector(const toml::node& n, const std::string& where, std::optional<std::size_t> size = {}) {
  std::vector<Expr> out;
  const auto& a = read_array(n, where, size);
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back(read_expr(a[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

ExprMatrix read_expr_matrix(const toml::node& n, const std::string& where, std::optional<std::size_t> rows = {},
                            std::optional<std::size_t> cols = {}) {
  ExprMatrix out;
  const auto& a = read_array(n, where, rows);
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.push_back(read_expr_vector(a[i], where + "[" + std::to_string(i) + "]", cols ? cols : std::optional(a.size())));
  }
  return out;
}

double read_double(const toml::node& n, const std::string& where) {
  if (auto v = n.value<double>()) return *v;
  parse_fail(where, "expected a number");
}

std::vector<double> read_doubles(const toml::node& n, const std::string& where, std::optional<std::size_t> size = {}) {
  std::vector<double> out;
  const auto& a = read_array(n, where, size);
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back(read_double(a[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<std::vector<double>> read_points(const toml::node& n, const std::string& where, int dim) {
  std::vector<std::vector<double>> out;
  const auto& a = read_array(n, where);
  if (a.empty()) parse_fail(where, "expected at least one point");
  for (std::size_t i = 0; i < a.size(); ++i)
    out.push_back(read_doubles(a[i], where + "[" + std::to_string(i) + "]", uz(dim)));
  return out;
}

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

Mat read_mat(const toml::node& n, const std::string& where, int rows, int cols) {
  Mat out(rows, cols);
  const auto& a = read_array(n, where, uz(rows));
  for (int i = 0; i < rows; ++i) {
    const auto row = read_doubles(a[uz(i)], where + "[" + std::to_string(i) + "]", uz(cols));
    for (int j = 0; j < cols; ++j) out(i, j) = row[uz(j)];
  }
  return out;
}

std::string read_string(const toml::node& n, const std::string& where) {
  if (auto s = n.value<std::string>()) return *s;
  parse_fail(where, "expected a string");
}

int read_int(const toml::node& n, const std::string& where) {
  if (auto v = n.value<std::int64_t>()) return static_cast<int>(*v);
  parse_fail(where, "expected an integer");
}

bool read_bool(const toml::node& n, const std::string& where) {
  if (auto v = n.value<bool>()) return *v;
  parse_fail(where, "expected true or false");
}

const toml::table* sub_table(const toml::table& t, std::string_view key, const std::string& where) {
  const toml::node* n = t.get(key);
  if (!n) return nullptr;
  if (!n->is_table()) parse_fail(where, "expected a table");
  return n->as_table();
}

/// Keys outside `known` are reported as typos.
void check_keys(const toml::table& t, std::initializer_list<std::string_view> known, const std::string& where) {
  for (const auto& [key, value] : t) {
    (void)value;
    if (std::find(known.begin(), known.end(), key.str()) == known.end())
      parse_fail(where, "unknown key '" + std::string(key.str()) + "'");
  }
}

// ---------------------------------------------------------------------------
// Random data

/// Sum of all monomials of total degree <= degree in x1..x_dim with
/// coefficients scale * U[-1, 1], drawn in graded lexicographic order.
Expr random_polynomial(std::mt19937_64& rng, int dim, int degree, double scale) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Expr sum = Expr::constant(0.0);
  std::vector<int> exps(uz(dim), 0);
  for (int total = 0; total <= degree; ++total) {
    // exponent vectors with the given total, lexicographically descending
    std::function<void(int, int)> rec = [&](int var, int left) {
      if (var == dim - 1) {
        exps[uz(var)] = left;
        Expr mono = Expr::constant(scale * u(rng));
        for (int i = 0; i < dim; ++i)
          if (exps[uz(i)] > 0) mono = mono * pow(Expr::variable(i), exps[uz(i)]);
        sum = sum + mono;
        return;
      }
      for (int e = left; e >= 0; --e) {
        exps[uz(var)] = e;
        rec(var + 1, left - e);
      }
    };
    if (dim > 0) rec(0, total);
  }
  return sum;
}

ConformalChart product_r3_s2() {
  ExprMatrix g(5, std::vector<Expr>(5, Expr::constant(0.0)));
  for (int i = 0; i < 3; ++i) g[uz(i)][uz(i)] = Expr::constant(1.0);
  g[3][3] = g[4][4] = parse("4/(1 + x4^2 + x5^2)^2");
  return ConformalChart(5, g);
}

std::mt19937_64 task_rng(const Scenario& s, std::string_view task) { return std::mt19937_64(s.seed ^ fnv1a(task)); }

std::vector<Expr> random_form(std::mt19937_64& rng, int dim, int degree, double scale) {
  std::vector<Expr> out;
  for (int i = 0; i < dim; ++i) out.push_back(random_polynomial(rng, dim, degree, scale));
  return out;
}

// ---------------------------------------------------------------------------
// Scenario sections

struct ManifoldCharts {
  ConformalChart reference;  // the metric as given; Möbius and Laplace data refer to its gauge
  ConformalChart working;    // the selected gauge
};

ManifoldCharts read_manifold(const toml::table& t, std::mt19937_64& rng) {
  const std::string where = "manifold";
  check_keys(t, {"model", "dim", "metric", "scale", "gauge_factors", "gauge", "points"}, where);
  std::map<std::string, Expr> factors;
  if (const toml::table* f = sub_table(t, "gauge_factors", where + ".gauge_factors"))
    for (const auto& [key, value] : *f)
      factors[std::string(key.str())] = read_expr(value, where + ".gauge_factors." + std::string(key.str()));

  ConformalChart chart;
  const toml::node* dim_node = t.get("dim");
  const int dim = dim_node ? read_int(*dim_node, where + ".dim") : 0;
  if (const toml::node* model_node = t.get("model")) {
    const std::string model = read_string(*model_node, where + ".model");
    if (t.get("metric")) parse_fail(where, "give either a model or a metric");
    if (model == "euclidean" || model == "round_sphere" || model == "random_polynomial") {
      if (!dim_node) parse_fail(where + ".dim", "required for the model '" + model + "'");
      if (dim < 1 || dim > kMaxJetDim) invalid("manifold.dim must be between 1 and " + std::to_string(kMaxJetDim));
    }
    if (model == "euclidean") {
      chart = ConformalChart::euclidean(dim);
    } else if (model == "round_sphere") {
      chart = ConformalChart::round_sphere(dim);
    } else if (model == "product_r3_s2") {
      chart = product_r3_s2();
    } else if (model == "random_polynomial") {
      // delta + scale * P with symmetric random cubic P
      const double scale = t.get("scale") ? read_double(*t.get("scale"), where + ".scale") : 0.15;
      ExprMatrix g(uz(dim), std::vector<Expr>(uz(dim)));
      for (int i = 0; i < dim; ++i)
        for (int j = i; j < dim; ++j) {
          Expr e = random_polynomial(rng, dim, 3, scale);
          if (i == j) e = 1.0 + e;
          g[uz(i)][uz(j)] = g[uz(j)][uz(i)] = e;
        }
      chart = ConformalChart(dim, g);
    } else {
      parse_fail(where + ".model", "unknown model '" + model + "' (euclidean, round_sphere, product_r3_s2, random_polynomial)");
    }
  } else if (const toml::node* metric = t.get("metric")) {
    const ExprMatrix g = read_expr_matrix(*metric, where + ".metric");
    if (dim_node && uz(dim) != g.size()) parse_fail(where + ".metric", "size does not match manifold.dim");
    chart = ConformalChart(static_cast<int>(g.size()), g);
  } else {
    parse_fail(where, "needs a model or a metric");
  }
  chart = ConformalChart(chart.dim(), chart.metric_exprs(), factors);
  ManifoldCharts out{chart, chart};
  if (const toml::node* gauge = t.get("gauge")) {
    const std::string name = read_string(*gauge, where + ".gauge");
    if (!factors.count(name)) invalid("manifold.gauge names the unknown gauge factor '" + name + "'");
    out.working = chart.rescaled(name);
  }
  return out;
}

std::optional<MobiusStructure> read_mobius(const toml::table* t, const ConformalChart& chart, const std::string& where) {
  if (!t) return std::nullopt;
  check_keys(*t, {"h0"}, where);
  const toml::node* h0 = t->get("h0");
  if (!h0) parse_fail(where + ".h0", "required");
  if (chart.dim() != 2) invalid(where + " is only meaningful in dimension 2");
  if (h0->value<std::string>() == std::optional<std::string>("flat")) return MobiusStructure::flat(chart);
  return MobiusStructure(chart, read_expr_matrix(*h0, where + ".h0", 2, 2));
}

std::optional<LaplaceStructure> read_laplace(const toml::table* t, const ConformalChart& chart, const std::string& where) {
  if (!t) return std::nullopt;
  check_keys(*t, {"sigma"}, where);
  const toml::node* sigma = t->get("sigma");
  if (!sigma) parse_fail(where + ".sigma", "required");
  if (chart.dim() != 1) invalid(where + " is only meaningful in dimension 1");
  if (sigma->value<std::string>() == std::optional<std::string>("flat")) return LaplaceStructure::flat(chart);
  return LaplaceStructure(chart, read_expr(*sigma, where + ".sigma"));
}

LowDimStructure read_low(const toml::table& parent, const ConformalChart& chart, const std::string& prefix) {
  LowDimStructure low;
  const std::string p = prefix.empty() ? "" : prefix + ".";
  low.mobius = read_mobius(sub_table(parent, "mobius", p + "mobius"), chart, p + "mobius");
  low.laplace = read_laplace(sub_table(parent, "laplace", p + "laplace"), chart, p + "laplace");
  return low;
}

std::vector<std::vector<double>> default_points(int dim) {
  std::vector<std::vector<double>> out(3, std::vector<double>(uz(dim), 0.0));
  for (int i = 0; i < dim; ++i) {
    out[1][uz(i)] = 0.1 * (i + 1);
    out[2][uz(i)] = -0.15 + 0.05 * i;
  }
  return out;
}

ImmersionSpec read_immersion(const toml::table& t, const ConformalChart& ambient, std::mt19937_64& rng) {
  const std::string where = "immersion";
  check_keys(t, {"n", "components", "random", "scale", "points", "density", "mobius", "laplace"}, where);
  const toml::node* n_node = t.get("n");
  if (!n_node) parse_fail(where + ".n", "required");
  const int n = read_int(*n_node, where + ".n");
  if (n < 1 || n >= ambient.dim()) invalid("immersion.n must be between 1 and the manifold dimension minus 1");
  std::vector<Expr> comps;
  const bool random = t.get("random") && read_bool(*t.get("random"), where + ".random");
  if (random) {
    // x -> (x + small cubic, small cubic)
    const double scale = t.get("scale") ? read_double(*t.get("scale"), where + ".scale") : 0.3;
    for (int a = 0; a < ambient.dim(); ++a) {
      const Expr poly = random_polynomial(rng, n, 3, scale);
      comps.push_back(a < n ? Expr::variable(a) + poly : poly);
    }
  } else {
    const toml::node* c = t.get("components");
    if (!c) parse_fail(where + ".components", "required unless immersion.random = true");
    comps = read_expr_vector(*c, where + ".components", uz(ambient.dim()));
  }
  ImmersionSpec spec{Immersion(ambient, n, comps), {}, {}, std::nullopt};
  spec.sub = read_low(t, spec.immersion.induced_chart(), where);
  spec.points = t.get("points") ? read_points(*t.get("points"), where + ".points", n) : default_points(n);
  if (const toml::node* d = t.get("density")) spec.density = read_expr(*d, where + ".density");
  return spec;
}

CurveSpec read_curve(const toml::table& t, int dim) {
  const std::string where = "curve";
  check_keys(t, {"x", "v", "w", "t0", "t1", "step", "sample_every"}, where);
  CurveSpec c;
  for (const char* key : {"x", "v"})
    if (!t.get(key)) parse_fail(where + "." + key, "required");
  c.init.x = to_vec(read_doubles(*t.get("x"), where + ".x", uz(dim)));
  c.init.v = to_vec(read_doubles(*t.get("v"), where + ".v", uz(dim)));
  c.init.w = t.get("w") ? to_vec(read_doubles(*t.get("w"), where + ".w", uz(dim))) : Vec::Zero(dim);
  if (auto n = t.get("t0")) c.options.t0 = read_double(*n, where + ".t0");
  if (auto n = t.get("t1")) c.options.t1 = read_double(*n, where + ".t1");
  if (auto n = t.get("step")) c.options.step = read_double(*n, where + ".step");
  if (auto n = t.get("sample_every")) c.options.sample_every = read_int(*n, where + ".sample_every");
  c.init.t = c.options.t0;
  return c;
}

RealizationSpec read_realization(const toml::table& t) {
  const std::string where = "realization";
  check_keys(t, {"n", "r", "base_metric", "fiber_metric", "connection", "B0", "mobius", "laplace", "mu", "rho", "samples",
                 "epsilon"},
             where);
  for (const char* key : {"n", "r"})
    if (!t.get(key)) parse_fail(where + "." + key, "required");
  const int n = read_int(*t.get("n"), where + ".n"), r = read_int(*t.get("r"), where + ".r");
  RealizationSpec spec;
  try {
    spec.geometry = RealizationData::trivial(n, r);
  } catch (const DimensionError& e) {
    invalid(e.what());
  }
  RealizationData& d = spec.geometry;
  if (auto m = t.get("base_metric")) d.base_metric = read_expr_matrix(*m, where + ".base_metric", uz(n), uz(n));
  if (auto m = t.get("fiber_metric")) d.fiber_metric = read_mat(*m, where + ".fiber_metric", r, r);
  if (auto c = t.get("connection")) {
    const auto& a = read_array(*c, where + ".connection", uz(n));
    for (int i = 0; i < n; ++i)
      d.connection[uz(i)] = read_expr_matrix(a[uz(i)], where + ".connection[" + std::to_string(i) + "]", uz(r), uz(r));
  }
  if (auto b = t.get("B0")) {
    const auto& a = read_array(*b, where + ".B0", uz(r));
    for (int al = 0; al < r; ++al)
      d.B0[uz(al)] = read_expr_matrix(a[uz(al)], where + ".B0[" + std::to_string(al) + "]", uz(n), uz(n));
  }
  d.base_low = read_low(t, d.base_chart(), where);
  spec.targets.mu = ExprMatrix(uz(n), std::vector<Expr>(uz(r), Expr::constant(0.0)));
  spec.targets.rho = ExprMatrix(uz(n), std::vector<Expr>(uz(n), Expr::constant(0.0)));
  if (auto m = t.get("mu")) spec.targets.mu = read_expr_matrix(*m, where + ".mu", uz(n), uz(r));
  if (auto m = t.get("rho")) spec.targets.rho = read_expr_matrix(*m, where + ".rho", uz(n), uz(n));
  spec.samples = t.get("samples") ? read_points(*t.get("samples"), where + ".samples", n)
                                  : std::vector<std::vector<double>>{std::vector<double>(uz(n), 0.0)};
  if (auto e = t.get("epsilon")) spec.epsilon = read_double(*e, where + ".epsilon");
  return spec;
}

Tolerances read_tolerances(const toml::table& t) {
  const std::string where = "tolerances";
  check_keys(t, {"residual", "algebraic", "geodesic", "roundtrip", "table", "section5", "classify"}, where);
  Tolerances tol;
  auto set = [&](const char* key, double& field) {
    if (auto n = t.get(key)) field = read_double(*n, where + "." + key);
  };
  set("residual", tol.residual);
  set("algebraic", tol.algebraic);
  set("geodesic", tol.geodesic);
  set("roundtrip", tol.roundtrip);
  set("table", tol.table);
  set("section5", tol.section5);
  set("classify", tol.classify);
  return tol;
}

Expectations read_expect(const toml::table& t) {
  const std::string where = "expect";
  check_keys(t, {"classification", "rho_coefficient", "schouten_coefficient", "circle"}, where);
  Expectations e;
  if (auto n = t.get("classification")) {
    e.classification = read_string(*n, where + ".classification");
    const std::set<std::string> known = {"none", "totally_umbilical", "weakly_geodesic", "strongly_geodesic"};
    if (!known.count(*e.classification)) parse_fail(where + ".classification", "unknown verdict '" + *e.classification + "'");
  }
  if (auto n = t.get("rho_coefficient")) e.rho_coefficient = read_double(*n, where + ".rho_coefficient");
  if (auto n = t.get("schouten_coefficient")) e.schouten_coefficient = read_double(*n, where + ".schouten_coefficient");
  if (auto n = t.get("circle")) e.circle = read_bool(*n, where + ".circle");
  return e;
}

const std::set<std::string>& known_tasks() {
  static const std::set<std::string> k = {"curvature", "geodesic", "invariants", "classify", "realize", "verify_section5"};
  return k;
}

/// Task prerequisites that the library would otherwise report mid-run.
void validate(const Scenario& s) {
  if (s.tasks.empty()) invalid("the task list is empty");
  std::set<std::string> seen;
  for (const auto& task : s.tasks) {
    if (!known_tasks().count(task)) invalid("unknown task '" + task + "'");
    if (!seen.insert(task).second) invalid("task '" + task + "' is listed twice");
  }
  const int m = s.chart.dim();
  if (!s.theta.empty() && static_cast<int>(s.theta.size()) != m) invalid("weyl.theta needs one component per dimension");
  auto needs_low = [&](const std::string& task) {
    if (m == 2 && !s.low.mobius) invalid(task + " on a surface needs a [mobius] structure");
    if (m == 1 && !s.low.laplace) invalid(task + " on a curve needs a [laplace] structure");
  };
  for (const auto& task : s.tasks) {
    if (task == "geodesic") {
      if (!s.curve) invalid("the geodesic task needs a [curve] section");
      needs_low(task);
    }
    if (task == "invariants" || task == "classify") {
      if (!s.immersion) invalid("the " + task + " task needs an [immersion] section");
      const int n = s.immersion->immersion.n();
      if (m == 2) needs_low(task);
      if (n == 2 && !s.immersion->sub.mobius) invalid(task + " of a surface needs [immersion.mobius]");
      if (n == 1 && !s.immersion->sub.laplace) invalid(task + " of a curve needs [immersion.laplace]");
    }
    if (task == "realize" && !s.realization) invalid("the realize task needs a [realization] section");
    if (task == "curvature" && s.expect.schouten_coefficient && m <= 2) needs_low(task);
  }
  if (s.expect.classification || s.expect.rho_coefficient)
    if (!std::count(s.tasks.begin(), s.tasks.end(), "classify")) invalid("[expect] classification needs the classify task");
  if (s.expect.circle && !s.curve) invalid("[expect] circle needs a [curve] section");
}

// ---------------------------------------------------------------------------
// Tasks

json mat_json(const Mat& a) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
    rows.push_back(row);
  }
  return rows;
}

json vec_json(const Vec& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

struct TaskOutput {
  std::string task;
  json results = json::object();
  json residuals = json::object();
  json checks = json::object();
  std::map<std::string, std::string> traces;
  bool passed = true;
  double seconds = 0.0;

  void residual(const std::string& name, double value, double tol) {
    json& r = residuals[name];
    const double prev = r.contains("max") ? r["max"].get<double>() : 0.0;
    const double v = std::isnan(value) ? value : std::max(prev, value);
    r["max"] = v;
    r["tolerance"] = tol;
    r["passed"] = r.value("passed", true) && value < tol;
    if (!(value < tol)) passed = false;
  }
  void check(const std::string& name, bool ok) {
    checks[name] = ok;
    if (!ok) passed = false;
  }
};

std::string csv_number(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

/// Largest distance of trace points from the circle through three of them,
/// including their distance from that circle's plane.
double circle_fit_deviation(const GeodesicTrace& trace) {
  const auto& S = trace.samples;
  if (S.size() < 3) return std::numeric_limits<double>::quiet_NaN();
  const Vec a = S.front().x, b = S[S.size() / 2].x, c = S.back().x;
  const Vec u = b - a, w = c - a;
  const double uu = u.dot(u), ww = w.dot(w), uw = u.dot(w);
  const double det = uu * ww - uw * uw;
  const double alpha = ww * (uu - uw) / (2 * det), beta = uu * (ww - uw) / (2 * det);
  const Vec center = a + alpha * u + beta * w;
  const double radius = (a - center).norm();
  double dev = 0.0;
  for (const auto& s : S) {
    const Vec d = s.x - a;
    const Vec off_plane = d - (d.dot(u) * ww - d.dot(w) * uw) / det * u - (d.dot(w) * uu - d.dot(u) * uw) / det * w;
    dev = std::max({dev, off_plane.norm(), std::abs((s.x - center).norm() - radius)});
  }
  return dev;
}

TaskOutput task_curvature(const Scenario& s) {
  TaskOutput out{"curvature"};
  const WeylStructure w = s.weyl();
  const int m = s.chart.dim();
  auto rng = task_rng(s, out.task);
  const std::vector<Expr> eta = random_form(rng, m, 1, 0.5);
  json points = json::array();
  for (const auto& p : s.points) {
    const CurvaturePackage P = curvature_package(w, p, s.low);
    json e;
    e["point"] = p;
    e["scalar_curvature"] = P.scal;
    e["sigma"] = P.sigma;
    e["faraday"] = mat_json(P.F);
    e["ricci"] = mat_json(P.ric);
    if (P.has_h) e["schouten"] = mat_json(P.h);
    points.push_back(e);
    if (m >= 3) out.residual("curvature_decomposition", P.reassembly_residual(), s.tol.residual);
    out.residual("ricci_skew_part", max_abs(skew_part(P.ric) + (m / 2.0) * P.F), s.tol.residual);
    if (m >= 3 || (m == 2 && s.low.mobius))
      out.residual("transformation_laws", transform_check(w, eta, p, s.low).max(), s.tol.residual);
    if (s.expect.schouten_coefficient) {
      // the expectation refers to the Levi-Civita connection of the gauge metric
      const CurvaturePackage L = curvature_package(WeylStructure(s.chart), p, s.low);
      out.residual("schouten_vs_expected", max_abs(L.h - *s.expect.schouten_coefficient * L.g), s.tol.residual);
    }
  }
  out.results["points"] = points;
  return out;
}

TaskOutput task_geodesic(const Scenario& s) {
  TaskOutput out{"geodesic"};
  const CurveSpec& c = *s.curve;
  const GeodesicTrace trace = integrate_conformal_geodesic(s.chart, c.init, c.options, s.low);
  out.residual("conformal_acceleration", trace.max_residual(), s.tol.geodesic);
  if (s.expect.circle) out.residual("circle_fit", circle_fit_deviation(trace), s.tol.geodesic);
  const TraceSample& end = trace.samples.back();
  out.results["samples"] = trace.samples.size();
  out.results["final"] = {{"t", end.t}, {"x", vec_json(end.x)}, {"v", vec_json(end.v)}, {"w", vec_json(end.w)}};
  std::ostringstream csv;
  csv << std::setprecision(17);
  trace.write_csv(csv);
  out.traces["trace_geodesic.csv"] = csv.str();
  return out;
}

TaskOutput task_invariants(const Scenario& s) {
  TaskOutput out{"invariants"};
  const ImmersionSpec& I = *s.immersion;
  const Immersion& imm = I.immersion;
  const int n = imm.n(), m = imm.m();
  auto rng = task_rng(s, out.task);
  const WeylStructure w = s.weyl();
  const std::vector<Expr> eta = random_form(rng, m, 2, 0.5);
  const WeylStructure ws = w.shifted(eta);
  const ConformalChart induced = imm.induced_chart();
  std::ostringstream csv;
  for (int i = 1; i <= n; ++i) csv << "x" << i << ",";
  csv << "norm_B0,norm_mu,norm_rho,norm_H\n";
  json points = json::array();
  for (const auto& p : I.points) {
    const FundamentalForm F1 = fundamental_form(imm, w, p), F2 = fundamental_form(imm, ws, p);
    const Vec y = imm.image(p);
    const auto th = evaluate(std::span<const Expr>(eta), std::span<const double>(y.data(), uz(m)));
    const Vec th_perp = F1.normal.transpose() * to_vec(th);
    const Mat gam = induced.metric_at(p);
    double dB0 = 0.0;
    for (std::size_t al = 0; al < F1.B0.size(); ++al) dB0 = std::max(dB0, max_abs(F2.B0[al] - F1.B0[al]));
    out.residual("B0_weyl_invariance", dB0, s.tol.residual);
    out.residual("mean_curvature_law", max_abs(F2.H - F1.H + th_perp), s.tol.residual);

    const Mat mu = mixed_schouten(imm, w, p, s.low), rho = relative_schouten(imm, w, p, s.low, I.sub);
    out.residual("mu_weyl_independence", max_abs(mixed_schouten(imm, ws, p, s.low) - mu), s.tol.residual);
    out.residual("rho_weyl_independence", max_abs(relative_schouten(imm, ws, p, s.low, I.sub) - rho), s.tol.residual);
    const auto k1 = normal_curvature_kappa(imm, w, p), k2 = normal_curvature_kappa(imm, ws, p);
    double dk = 0.0, kappa = 0.0;
    for (std::size_t i = 0; i < k1.size(); ++i) {
      dk = std::max(dk, max_abs(k1[i] - k2[i]));
      kappa = std::max(kappa, max_abs(k1[i]));
    }
    out.residual("kappa_weyl_independence", dk, s.tol.residual);
    if (I.density) {
      const Density l{*I.density, Weight(1)};
      if (n >= 2)
        out.residual("mobius_induced_weyl_independence",
                     max_abs(induced_mobius(imm, ws, l, p, s.low) - induced_mobius(imm, w, l, p, s.low)), s.tol.residual);
      if (n >= 3 || I.sub.mobius)
        out.residual("mobius_comparison", mobius_comparison_residual(imm, w, l, p, s.low, I.sub), s.tol.residual);
      const Density lap{*I.density, Weight(1) - Weight(n, 2)};
      out.residual("laplace_induced_weyl_independence",
                   std::abs(induced_laplace(imm, ws, lap, p, s.low) - induced_laplace(imm, w, lap, p, s.low)),
                   s.tol.residual);
    }
    const double nB0 = norm_B0(F1.B0, gam), nmu = norm_mu(mu, gam), nrho = norm_rho(rho, gam);
    json e;
    e["point"] = p;
    e["norm_B0"] = nB0;
    e["mean_curvature"] = vec_json(F1.H);
    e["mu"] = mat_json(mu);
    e["rho"] = mat_json(rho);
    e["max_kappa"] = kappa;
    e["codifferential_B0"] = mat_json(codifferential_B0(imm, w, p));
    points.push_back(e);
    for (double x : p) csv << csv_number(x) << ",";
    csv << csv_number(nB0) << "," << csv_number(nmu) << "," << csv_number(nrho) << "," << csv_number(F1.H.norm()) << "\n";
  }
  out.results["points"] = points;
  out.traces["trace_invariants.csv"] = csv.str();
  return out;
}

TaskOutput task_classify(const Scenario& s) {
  TaskOutput out{"classify"};
  const ImmersionSpec& I = *s.immersion;
  const GeodesyReport R = classify_geodesy(I.immersion, I.points, s.low, I.sub, s.tol.classify);
  const std::string verdict = to_string(R.classification);
  out.results["classification"] = verdict;
  out.results["sup_B0"] = R.sup_B0;
  out.results["sup_mu"] = R.sup_mu;
  out.results["sup_rho"] = R.sup_rho;
  out.results["threshold"] = R.tolerance;
  if (s.expect.classification) out.check("classification_is_" + *s.expect.classification, verdict == *s.expect.classification);
  const ConformalChart induced = I.immersion.induced_chart();
  std::ostringstream csv;
  for (int i = 1; i <= I.immersion.n(); ++i) csv << "x" << i << ",";
  csv << "norm_B0,norm_mu,norm_rho\n";
  for (const auto& P : R.points) {
    if (s.expect.rho_coefficient)
      out.residual("rho_vs_expected", max_abs(P.rho - *s.expect.rho_coefficient * induced.metric_at(P.point)),
                   s.tol.residual);
    for (double x : P.point) csv << csv_number(x) << ",";
    csv << csv_number(P.norm_B0) << "," << csv_number(P.norm_mu) << "," << csv_number(P.norm_rho) << "\n";
  }
  out.traces["trace_classify.csv"] = csv.str();
  return out;
}

Mat eval_matrix(const ExprMatrix& a, const std::vector<double>& x) {
  Mat out(static_cast<Eigen::Index>(a.size()), a.empty() ? 0 : static_cast<Eigen::Index>(a[0].size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = evaluate(a[i][j], x);
  return out;
}

TaskOutput task_realize(const Scenario& s) {
  TaskOutput out{"realize"};
  const RealizationSpec& R = *s.realization;
  const RealizationData d = solve_prescription(R.geometry, R.targets, R.samples);
  const TotalSpaceChart T = build_total_metric(d, R.samples, R.epsilon);
  const bool tables = !(d.n == 1 && d.r == 1);  // the n = r = 1 case realizes a Möbius structure instead
  json samples = json::array();
  for (const auto& x : R.samples) {
    const RoundTripResidual rt = round_trip_residual(d, T, R.targets, x);
    out.residual("B0_roundtrip", rt.B0, s.tol.roundtrip);
    out.residual("mu_roundtrip", rt.mu, s.tol.roundtrip);
    out.residual("rho_roundtrip", rt.rho, s.tol.roundtrip);
    if (tables) {
      const RicciTableResidual ric = ricci_table_residual(d, T, x);
      out.residual("ricci_table_tangential", ric.tangential, s.tol.table);
      out.residual("ricci_table_mixed", ric.mixed, s.tol.table);
      out.residual("ricci_table_vertical", ric.vertical, s.tol.table);
      out.residual("ricci_table_scalar", ric.scalar, s.tol.table);
      const CovariantTableResidual cov = covariant_table_residual(d, T, x);
      out.residual("covariant_table_horizontal_horizontal", cov.horizontal_horizontal, s.tol.table);
      out.residual("covariant_table_vertical_horizontal", cov.vertical_horizontal, s.tol.table);
      out.residual("covariant_table_horizontal_vertical", cov.horizontal_vertical, s.tol.table);
      out.residual("covariant_table_vertical_vertical", cov.vertical_vertical, s.tol.table);
    }
    json e;
    e["point"] = x;
    e["a"] = mat_json(eval_matrix(d.a, x));
    e["b"] = mat_json(eval_matrix(d.b, x));
    e["f"] = evaluate(d.f, x);
    samples.push_back(e);
  }
  out.results["epsilon"] = T.epsilon;
  out.results["samples"] = samples;
  if (d.total_h0) out.results["total_mobius_h0"] = mat_json(eval_matrix(*d.total_h0, T.zero_point(R.samples[0])));
  const GeodesyReport G = classify_geodesy(T.zero_section(), R.samples, T.low, T.sub_low, s.tol.classify);
  out.results["zero_section_classification"] = to_string(G.classification);
  return out;
}

TaskOutput task_section5(const Scenario& s) {
  TaskOutput out{"verify_section5"};
  const Section5Report rep = section5_scenario(s.section5_grid);
  out.residual("bracket_identities", rep.max_bracket_identity, s.tol.algebraic);
  out.residual("adapted_acceleration", rep.max_adapted_acceleration, s.tol.algebraic);
  out.residual("h_normal", rep.max_h_normal, s.tol.section5);
  out.residual("h_tangent", rep.max_h_tangent, s.tol.section5);
  out.residual("h_formula", rep.max_h_formula, s.tol.section5);
  out.check("nowhere_umbilic", rep.min_B0 > 1e-3);
  out.check("not_totally_umbilical", rep.classification.classification == Geodesy::None);
  out.results["grid"] = rep.grid;
  out.results["a"] = mat_json(rep.a);
  out.results["b"] = mat_json(rep.b);
  out.results["f"] = rep.f;
  out.results["min_norm_B0"] = rep.min_B0;
  out.results["classification"] = to_string(rep.classification.classification);
  out.results["epsilon"] = rep.total.epsilon;
  return out;
}

TaskOutput dispatch(const Scenario& s, const std::string& task) {
  if (task == "curvature") return task_curvature(s);
  if (task == "geodesic") return task_geodesic(s);
  if (task == "invariants") return task_invariants(s);
  if (task == "classify") return task_classify(s);
  if (task == "realize") return task_realize(s);
  return task_section5(s);
}

json tolerances_json(const Tolerances& t) {
  return {{"residual", t.residual}, {"algebraic", t.algebraic}, {"geodesic", t.geodesic}, {"roundtrip", t.roundtrip},
          {"table", t.table},       {"section5", t.section5},   {"classify", t.classify}};
}

}  // namespace

// ---------------------------------------------------------------------------

void Tolerances::override_all(double tol) { residual = algebraic = geodesic = roundtrip = table = section5 = tol; }

ExitCode exit_code_for(const std::exception& e) {
  if (const auto* s = dynamic_cast<const ScenarioError*>(&e)) return s->code();
  if (dynamic_cast<const ParseError*>(&e)) return ExitCode::Parse;
  if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const DimensionError*>(&e) ||
      dynamic_cast<const MissingStructureError*>(&e) || dynamic_cast<const WeightError*>(&e) ||
      dynamic_cast<const RankDeficiencyError*>(&e))
    return ExitCode::Validation;
  return ExitCode::Numerical;
}

WeylStructure Scenario::weyl() const { return theta.empty() ? WeylStructure(chart) : WeylStructure(chart, theta); }

std::string fnv1a_hex(std::string_view data) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << fnv1a(data);
  return s.str();
}

Scenario parse_scenario(std::string_view text, const ParseOptions& options, std::string fallback_name) {
  toml::table doc;
  try {
    doc = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "line " << e.source().begin.line << ", column " << e.source().begin.column << ": " << e.description();
    throw ScenarioError(ExitCode::Parse, msg.str());
  }
  check_keys(doc,
             {"name", "description", "seed", "tasks", "manifold", "weyl", "mobius", "laplace", "immersion", "curve",
              "realization", "section5", "tolerances", "expect", "output"},
             "scenario");
  Scenario s;
  s.source = std::string(text);
  s.name = doc.get("name") ? read_string(*doc.get("name"), "name") : std::move(fallback_name);
  if (auto d = doc.get("description")) s.description = read_string(*d, "description");
  if (auto seed = doc.get("seed")) {
    const auto v = seed->value<std::int64_t>();
    if (!v || *v < 0) parse_fail("seed", "expected a non-negative integer");
    s.seed = static_cast<std::uint64_t>(*v);
  }
  if (options.seed) s.seed = *options.seed;
  std::mt19937_64 rng(s.seed);

  const toml::node* tasks = doc.get("tasks");
  if (!tasks) parse_fail("tasks", "required");
  for (const auto& t : read_array(*tasks, "tasks")) s.tasks.push_back(read_string(t, "tasks"));

  try {
    const bool needs_manifold = std::any_of(s.tasks.begin(), s.tasks.end(), [](const std::string& t) {
      return t == "curvature" || t == "geodesic" || t == "invariants" || t == "classify";
    });
    if (const toml::table* m = sub_table(doc, "manifold", "manifold")) {
      const ManifoldCharts charts = read_manifold(*m, rng);
      s.chart = charts.working;
      s.points = m->get("points") ? read_points(*m->get("points"), "manifold.points", s.chart.dim())
                                  : default_points(s.chart.dim());
      if (const toml::table* w = sub_table(doc, "weyl", "weyl")) {
        check_keys(*w, {"theta", "random", "scale"}, "weyl");
        if (auto th = w->get("theta")) s.theta = read_expr_vector(*th, "weyl.theta", uz(s.chart.dim()));
        if (w->get("random") && read_bool(*w->get("random"), "weyl.random")) {
          if (!s.theta.empty()) parse_fail("weyl", "give either theta or random = true");
          const double scale = w->get("scale") ? read_double(*w->get("scale"), "weyl.scale") : 0.5;
          s.theta = random_form(rng, s.chart.dim(), 2, scale);
        }
      }
      s.low = read_low(doc, charts.reference, "");
      if (const toml::table* i = sub_table(doc, "immersion", "immersion")) s.immersion = read_immersion(*i, s.chart, rng);
      if (const toml::table* c = sub_table(doc, "curve", "curve")) s.curve = read_curve(*c, s.chart.dim());
    } else if (needs_manifold) {
      invalid("the tasks need a [manifold] section");
    } else {
      for (const char* key : {"weyl", "mobius", "laplace", "immersion", "curve"})
        if (doc.get(key)) invalid(std::string("[") + key + "] needs a [manifold] section");
    }
    if (const toml::table* r = sub_table(doc, "realization", "realization")) s.realization = read_realization(*r);
    if (const toml::table* t = sub_table(doc, "section5", "section5")) {
      check_keys(*t, {"grid"}, "section5");
      if (auto g = t->get("grid")) s.section5_grid = read_int(*g, "section5.grid");
      if (s.section5_grid < 1) invalid("section5.grid must be positive");
    }
    if (const toml::table* t = sub_table(doc, "tolerances", "tolerances")) s.tol = read_tolerances(*t);
    if (options.tolerance) s.tol.override_all(*options.tolerance);
    if (const toml::table* t = sub_table(doc, "expect", "expect")) s.expect = read_expect(*t);
    s.output_dir = "out/" + s.name;
    if (const toml::table* t = sub_table(doc, "output", "output")) {
      check_keys(*t, {"dir"}, "output");
      if (auto d = t->get("dir")) s.output_dir = read_string(*d, "output.dir");
    }
  } catch (const ScenarioError&) {
    throw;
  } catch (const std::exception& e) {
    // library constructors reject inconsistent data (shapes, symmetry, variables)
    throw ScenarioError(exit_code_for(e) == ExitCode::Parse ? ExitCode::Parse : ExitCode::Validation, e.what());
  }
  validate(s);
  return s;
}

Scenario load_scenario(const std::string& file_or_name, const ParseOptions& options) {
  const std::filesystem::path path(file_or_name);
  if (std::filesystem::is_regular_file(path)) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream text;
    text << in.rdbuf();
    if (!in) throw ScenarioError(ExitCode::Parse, "cannot read " + file_or_name);
    return parse_scenario(text.str(), options, path.stem().string());
  }
  if (path.has_extension() || file_or_name.find('/') != std::string::npos)
    throw ScenarioError(ExitCode::Parse, "no such scenario file: " + file_or_name);
  const CatalogEntry& entry = catalog_entry(file_or_name);
  return parse_scenario(entry.source, options, entry.name);
}

nlohmann::ordered_json Report::without_timings() const {
  nlohmann::ordered_json j = json;
  j.erase("timings");
  return j;
}

Report run_scenario(const Scenario& s) {
  const auto start = Clock::now();
  std::vector<std::future<TaskOutput>> futures;
  for (const auto& task : s.tasks)
    futures.push_back(std::async(std::launch::async, [&s, task] {
      const auto t0 = Clock::now();
      TaskOutput out = dispatch(s, task);
      out.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
      return out;
    }));
  std::vector<TaskOutput> outputs;
  for (auto& f : futures) outputs.push_back(f.get());

  Report report;
  report.passed = true;
  json& j = report.json;
  j["tool"] = "confgeom";
  j["version"] = kToolVersion;
  j["scenario"] = s.name;
  j["description"] = s.description;
  j["scenario_hash"] = fnv1a_hex(s.source);
  j["seed"] = s.seed;
  j["tolerances"] = tolerances_json(s.tol);
  json tasks = json::array();
  json timings = json::object();
  for (auto& out : outputs) {
    json t;
    t["task"] = out.task;
    t["passed"] = out.passed;
    t["residuals"] = out.residuals;
    if (!out.checks.empty()) t["checks"] = out.checks;
    t["results"] = out.results;
    json files = json::array();
    for (auto& [name, text] : out.traces) {
      files.push_back(name);
      report.traces[name] = std::move(text);
    }
    if (!files.empty()) t["traces"] = files;
    tasks.push_back(t);
    timings[out.task] = out.seconds;
    report.passed = report.passed && out.passed;
  }
  j["tasks"] = tasks;
  j["passed"] = report.passed;
  timings["total"] = std::chrono::duration<double>(Clock::now() - start).count();
  j["timings"] = timings;
  return report;
}

void write_artifacts(const Report& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    out << text;
    if (!out) throw ScenarioError(ExitCode::Numerical, "cannot write " + (dir / name).string());
  };
  write("report.json", report.json.dump(2) + "\n");
  for (const auto& [name, text] : report.traces) write(name, text);
}

}  // namespace confgeom::scenario
