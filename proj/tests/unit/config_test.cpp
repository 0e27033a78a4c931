#include <string>

#include <gtest/gtest.h>

#include "occlp/config.hpp"

using namespace occlp;

namespace {

const char* kMinimal = R"(# minimal
[system]
name = "rotation"

[program]
y0 = [1, 0]
)";

// Runs parse_config and returns the error text, or "" when it parses.
std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, MinimalRotationFillsDefaults) {
  const StudyConfig c = parse_config(kMinimal);
  StudyConfig expect;
  expect.program.y0 = {1, 0};
  EXPECT_EQ(c, expect);
  EXPECT_EQ(c.basis.max_degree, 4);
  EXPECT_EQ(c.program.variants, std::vector<ProgramVariant>{ProgramVariant::NonErgodic});
  const auto spec = make_system(c);
  const auto grid = make_grid_options(c, spec);
  EXPECT_EQ(grid.state_resolution, (std::vector<int>{5, 64}));
  EXPECT_EQ(grid.control_resolution, std::vector<int>{9});
  EXPECT_EQ(config_y0(c), Eigen::Vector2d(1, 0));
}

TEST(Config, Y0OutsideRegionNamesKeyAndLine) {
  const std::string err = error_of("[system]\nname = \"rotation\"\n[program]\ny0 = [2, 0]\n");
  EXPECT_NE(err.find("y0"), std::string::npos) << err;
  EXPECT_NE(err.find("line 4"), std::string::npos) << err;
}

TEST(Config, DegreeZeroRejected) {
  const std::string err = error_of(std::string(kMinimal) + "[basis]\nmax_degree = 0\n");
  EXPECT_NE(err.find("max_degree must be ≥ 1"), std::string::npos) << err;
  EXPECT_NE(err.find("line 8"), std::string::npos) << err;
}

TEST(Config, UnknownKeyAndSection) {
  std::string err = error_of(std::string(kMinimal) + "colour = 3\n");
  EXPECT_NE(err.find("unknown key 'colour'"), std::string::npos) << err;
  EXPECT_NE(err.find("line 7"), std::string::npos) << err;
  err = error_of(std::string(kMinimal) + "[extras]\n");
  EXPECT_NE(err.find("unknown section"), std::string::npos) << err;
}

TEST(Config, MissingRequiredKey) {
  const std::string err = error_of("[program]\nvariants = [\"nonergodic\"]\n");
  EXPECT_NE(err.find("missing required key 'y0'"), std::string::npos) << err;
  EXPECT_NE(err.find("line 1"), std::string::npos) << err;
  // The ergodic LP alone needs no y0.
  EXPECT_EQ(error_of("[program]\nvariants = [\"ergodic\"]\n"), "");
  EXPECT_NE(error_of("[program]\nvariants = [\"perturbed\"]\ny0 = [1, 0]\n").find("'epsilon'"), std::string::npos);
}

TEST(Config, TypeMismatch) {
  std::string err = error_of(std::string(kMinimal) + "[basis]\nmax_degree = \"four\"\n");
  EXPECT_NE(err.find("line 8"), std::string::npos) << err;
  EXPECT_NE(err.find("max_degree"), std::string::npos) << err;
  err = error_of(std::string(kMinimal) + "[basis]\nmax_degree = 2.5\n");
  EXPECT_NE(err.find("integer"), std::string::npos) << err;
  err = error_of("[program]\ny0 = [1, \"x\"]\n");
  EXPECT_NE(err.find("line 2"), std::string::npos) << err;
}

TEST(Config, DuplicatesAndSyntax) {
  EXPECT_NE(error_of("[program]\ny0 = [1, 0]\ny0 = [1, 0]\n").find("duplicate key"), std::string::npos);
  EXPECT_NE(error_of("[program]\ny0 = [1, 0]\n[program]\n").find("duplicate section"), std::string::npos);
  EXPECT_NE(error_of("[program\n").find("line 1"), std::string::npos);
  EXPECT_NE(error_of("[program]\ny0 [1, 0]\n").find("expected 'key = value'"), std::string::npos);
  EXPECT_NE(error_of("[program]\ny0 = [1, 0\n").find("unbalanced"), std::string::npos);
}

TEST(Config, TolerancesMustBePositive) {
  EXPECT_NE(error_of(std::string(kMinimal) + "tolerance = 0\n").find("must be positive"), std::string::npos);
  EXPECT_NE(error_of(std::string(kMinimal) + "[simulate]\ndt = -1\n").find("must be positive"), std::string::npos);
}

TEST(Config, MultiLineArraysAndComments) {
  const StudyConfig c = parse_config(R"(
seed = 42   # trailing comment
[system]
name = "frozen"
cost = "y1 + u1^2"
lower = [-1, -1]
upper = [ 1,  1]
[grid]
state_resolution = [
  8,   # x
  8,   # y
]
[program]
variants = [ergodic, "nonergodic"]
y0 = [-0.875, 0.125]
[simulate]
policy = "schedule"
schedule_times = [0, 1]
schedule_controls = [[0.5],
                     [-0.5]]
T = [2]
)");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.grid.state_resolution, (std::vector<int>{8, 8}));
  EXPECT_EQ(c.program.variants.size(), 2u);
  ASSERT_EQ(c.simulate.schedule_controls.size(), 2u);
  EXPECT_EQ(c.simulate.schedule_controls[1], std::vector<double>{-0.5});
}

TEST(Config, FormatRoundTrips) {
  StudyConfig c = parse_config(kMinimal);
  c.seed = 99;
  c.system.cost = "y1 + 0.5*u1^2";
  c.program.variants = {ProgramVariant::Ergodic, ProgramVariant::Perturbed};
  c.program.epsilon = {0.1, 0.001, 0};
  c.simulate.policy = "steer-then-hold";
  c.simulate.steer = {1};
  c.simulate.target = {-1, 0};
  c.simulate.hold = {0};
  c.simulate.T = {25, 50};
  c.simulate.residual_floor = 1e-5;
  c.periodic.enabled = true;
  c.periodic.parameters = {0.5, 0.1};
  c.periodic.value_threshold = -0.9;
  c.convergence.state_resolutions = {{5, 64}, {5, 128}};
  c.convergence.degrees = {4, 6};
  c.output.format = "csv-dir";
  c.program.tolerance = 1.0 / 3.0;
  const std::string text = format_config(c);
  EXPECT_EQ(parse_config(text), c) << text;
  EXPECT_EQ(format_config(parse_config(text)), text);
}

TEST(Config, DefaultsTextIsTheDefaultConfig) {
  std::string text = default_config_text();
  const std::string from = "y0 = []";
  const auto at = text.find(from);
  ASSERT_NE(at, std::string::npos);
  text.replace(at, from.size(), "y0 = [1, 0]");
  StudyConfig expect;
  expect.program.y0 = {1, 0};
  EXPECT_EQ(parse_config(text), expect);
}

TEST(Config, PeriodicSectionEnablesSearch) {
  const StudyConfig c =
      parse_config(std::string(kMinimal) + "[periodic]\nparameters = [0.5]\n");
  EXPECT_TRUE(c.periodic.enabled);
  const StudyConfig off =
      parse_config(std::string(kMinimal) + "[periodic]\nenabled = false\nparameters = [0.5]\n");
  EXPECT_FALSE(off.periodic.enabled);
}

TEST(Config, CustomSystem) {
  const StudyConfig c = parse_config(R"(
[system]
name = "custom"
region = "annulus"
inner = 0.5
outer = 1.5
dynamics = ["u1*y2", "-u1*y1"]
first_integrals = ["y1^2 + y2^2"]
cost = "y2"
control_points = [[-1], [0], [1]]
[program]
y0 = [0, 1]
)");
  const auto spec = make_system(c);
  EXPECT_EQ(spec.dim_state, 2);
  EXPECT_TRUE(spec.control_region.is_finite());
  EXPECT_EQ(spec.first_integrals.size(), 1u);
  EXPECT_NE(error_of("[system]\nname = \"custom\"\ndynamics = [\"y3\"]\n").find("[system]"), std::string::npos);
}

TEST(Config, JsonCarriesResolvedValues) {
  const auto j = config_to_json(parse_config(kMinimal));
  EXPECT_EQ(j["basis"]["max_degree"], 4);
  EXPECT_EQ(j["program"]["y0"], nlohmann::json::array({1.0, 0.0}));
}
