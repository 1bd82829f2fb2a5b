#include "scenario.hpp"

namespace confgeom::scenario {

namespace {

const char* const kFlatLine = R"toml(name = "flat_line_r3"
description = "Straight line in flat R^3: strongly geodesic with vanishing residuals"
seed = 1
tasks = ["curvature", "invariants", "classify", "geodesic"]

[manifold]
model = "euclidean"
dim = 3

[immersion]
n = 1
components = ["x1", "0", "0"]
points = [[0.0], [0.5], [-1.0]]
density = "1 + 0.2*x1"

[immersion.laplace]
sigma = "flat"

[curve]
x = [0.0, 0.0, 0.0]
v = [1.0, 0.0, 0.0]
w = [0.0, 0.0, 0.0]
t1 = 1.0
step = 1e-3
sample_every = 10

[expect]
classification = "strongly_geodesic"
)toml";

const char* const kSection5 = R"toml(name = "section5_pseudogeodesic"
description = "Pseudo-geodesic surface in R^4: flat base, trivial rank-2 bundle, B0 rotating with twice the angle"
seed = 1
tasks = ["verify_section5", "realize"]

[section5]
grid = 8

# B0(dx, dx) = -B0(dy, dy) = W and B0(dx, dy) = V, with mu = 0 and rho = -g / 2
[realization]
n = 2
r = 2
B0 = [[["1", "0"], ["0", "-1"]], [["0", "1"], ["1", "0"]]]
mu = [["0", "0"], ["0", "0"]]
rho = [["-0.5", "0"], ["0", "-0.5"]]
samples = [[0.0, 0.0], [0.5, -0.3], [-0.4, 0.7]]

[realization.mobius]
h0 = "flat"
)toml";

const char* const kProduct = R"toml(name = "product_r3_s2"
description = "Slice R^3 x {x} of R^3 x S^2: weakly but not strongly geodesic, rho = -g/12"
seed = 1
tasks = ["curvature", "invariants", "classify"]

[manifold]
model = "product_r3_s2"
points = [[0.0, 0.0, 0.0, 0.1, -0.2], [0.3, -0.2, 0.1, 0.5, 0.4]]

[immersion]
n = 3
components = ["x1", "x2", "x3", "0.1", "-0.2"]
points = [[0.0, 0.0, 0.0], [0.3, -0.2, 0.1], [-0.5, 0.4, 0.2], [1.0, 0.5, -1.0]]
density = "1 + 0.2*x1 - 0.1*x2*x3"

[expect]
classification = "weakly_geodesic"
rho_coefficient = -0.08333333333333333
)toml";

const char* const kSphereS3 = R"toml(name = "sphere_s3_r4"
description = "Unit S^3 in flat R^4 through inverse stereographic projection: strongly geodesic"
seed = 1
tasks = ["invariants", "classify"]

[manifold]
model = "euclidean"
dim = 4

[immersion]
n = 3
components = [
  "2*x1/(1 + x1^2 + x2^2 + x3^2)",
  "2*x2/(1 + x1^2 + x2^2 + x3^2)",
  "2*x3/(1 + x1^2 + x2^2 + x3^2)",
  "(x1^2 + x2^2 + x3^2 - 1)/(1 + x1^2 + x2^2 + x3^2)",
]
points = [[0.0, 0.0, 0.0], [0.3, -0.2, 0.1], [-0.5, 0.4, 0.2], [1.0, 0.5, -1.0]]
density = "1 + 0.3*x1*x2"

[expect]
classification = "strongly_geodesic"
)toml";

const char* const kPlane = R"toml(name = "plane_r3"
description = "Coordinate plane in flat R^3 with the flat Möbius structure: strongly geodesic"
seed = 1
tasks = ["invariants", "classify"]

[manifold]
model = "euclidean"
dim = 3

[immersion]
n = 2
components = ["x1", "x2", "0"]
points = [[0.0, 0.0], [0.3, -0.2], [-0.5, 0.4]]
density = "1 + 0.2*x1"

[immersion.mobius]
h0 = "flat"

[expect]
classification = "strongly_geodesic"
)toml";

const char* const kFlatCircle = R"toml(name = "flat_circle"
description = "Conformal geodesic of the flat Möbius plane integrated in a curved gauge: the unit circle"
seed = 1
tasks = ["curvature", "geodesic"]

[manifold]
model = "euclidean"
dim = 2
gauge = "f"
gauge_factors = { f = "0.3*sin(x1)" }

[mobius]
h0 = "flat"

[curve]
x = [1.0, 0.0]
v = [0.0, 1.0]
w = [-1.0, 0.0]
t1 = 2.0
step = 1e-3
sample_every = 10

[tolerances]
geodesic = 1e-7

[expect]
circle = true
)toml";

const char* const kRoundSphere = R"toml(name = "round_sphere_s3"
description = "Round S^3 in the stereographic gauge: h = g/2, conformal geodesics are coordinate circles"
seed = 1
tasks = ["curvature", "geodesic"]

[manifold]
model = "round_sphere"
dim = 3
points = [[0.0, 0.0, 0.0], [0.2, -0.1, 0.3], [1.0, 0.5, -0.5]]

[weyl]
theta = ["0.2*x2", "0.1 - x1", "0.3*x3^2"]

[curve]
x = [0.1, 0.0, 0.0]
v = [0.0, 1.0, 0.0]
w = [0.3, 0.0, 0.2]
t1 = 0.5
step = 1e-3
sample_every = 10

[tolerances]
geodesic = 1e-6

[expect]
schouten_coefficient = 0.5
circle = true
)toml";

const char* const kRandom = R"toml(name = "random_polynomial"
description = "Seeded regression: random cubic metric on R^4, random Weyl structure, random surface"
seed = 20240601
tasks = ["curvature", "invariants", "geodesic"]

[manifold]
model = "random_polynomial"
dim = 4
scale = 0.1
points = [[0.0, 0.0, 0.0, 0.0], [0.1, -0.2, 0.15, 0.05], [-0.2, 0.1, 0.0, 0.2]]

[weyl]
random = true
scale = 0.5

[immersion]
n = 2
random = true
scale = 0.3
points = [[0.0, 0.0], [0.2, -0.1], [-0.15, 0.25]]
density = "1.5 + 0.2*x1 - 0.1*x2^2"

[immersion.mobius]
h0 = "flat"

[curve]
x = [0.1, 0.0, -0.1, 0.05]
v = [1.0, 0.5, 0.2, -0.3]
w = [0.2, -0.3, 0.1, 0.0]
t1 = 0.5
step = 1e-3
sample_every = 10
)toml";

}  // namespace

const std::vector<CatalogEntry>& catalog() {
  static const std::vector<CatalogEntry> entries = [] {
    std::vector<CatalogEntry> out;
    for (const char* source : {kFlatLine, kSection5, kProduct, kSphereS3, kPlane, kFlatCircle, kRoundSphere, kRandom}) {
      const Scenario s = parse_scenario(source);
      out.push_back({s.name, s.description, source});
    }
    return out;
  }();
  return entries;
}

const CatalogEntry& catalog_entry(const std::string& name) {
  for (const auto& e : catalog())
    if (e.name == name) return e;
  std::string names;
  for (const auto& e : catalog()) names += (names.empty() ? "" : ", ") + e.name;
  throw ScenarioError(ExitCode::Parse, "unknown catalog entry '" + name + "'; available: " + names);
}

}  // namespace confgeom::scenario
