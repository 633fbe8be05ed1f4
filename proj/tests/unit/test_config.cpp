#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "hjbpod/config.hpp"
#include "hjbpod/errors.hpp"
#include "hjbpod/experiment.hpp"

namespace hjbpod {
namespace {

const char* kMinimal = R"(
[pde]
n_x = 9
u_min = -1
u_max = 1
[snapshots]
controls = -1, 0 ,1
dt = 0.1
[pod]
ell = 2
[hjb]
K = 0.2 0.1
)";

std::string with(const std::string& extra) { return std::string(kMinimal) + extra; }

TEST(ParseConfig, MinimalTextAndDefaults) {
  const ExperimentConfig c = parse_config(kMinimal);
  EXPECT_EQ(c.pde.n_x, 9);
  EXPECT_EQ(c.snapshots.controls, (std::vector<double>{-1.0, 0.0, 1.0}));
  EXPECT_EQ(c.hjb.mesh_sizes, (std::vector<double>{0.2, 0.1}));
  EXPECT_EQ(c.hjb.h_ratios, (std::vector<double>{0.1}));
  EXPECT_EQ(c.hjb.control_min, -1.0);
  EXPECT_EQ(c.hjb.control_max, 1.0);
  EXPECT_EQ(c.feedback.policy, PolicyMode::kArgminOnline);
  EXPECT_TRUE(c.feedback.noise_amplitudes.empty());
  EXPECT_EQ(c.control_set().size(), 21u);
  EXPECT_EQ(c.pde_config().w0.size(), 9);
}

TEST(ParseConfig, DxDeterminesNodeCount) {
  const ExperimentConfig c = parse_config(R"(
[pde]
a = 0
b = 2
dx = 0.01
[snapshots]
controls = 0
)");
  EXPECT_EQ(c.pde.n_x, 199);
  EXPECT_NEAR(c.pde.dx(), 0.01, 1e-15);
  EXPECT_THROW(parse_config("[pde]\nb = 1\ndx = 0.3\n"), ConfigError);
  EXPECT_THROW(parse_config("[pde]\nn_x = 9\ndx = 0.1\n"), ConfigError);
}

TEST(ParseConfig, RejectsUnknownAndMalformedEntries) {
  EXPECT_THROW(parse_config(with("[bogus]\nx = 1\n")), ConfigError);
  EXPECT_THROW(parse_config(with("[feedback]\nnoize = 0.5\n")), ConfigError);
  EXPECT_THROW(parse_config("[pde]\nepsilon = fast\n"), ConfigError);
  EXPECT_THROW(parse_config(with("[feedback]\npolicy = greedy\n")), ConfigError);
  EXPECT_THROW(parse_config(with("[output]\nplots = maybe\n")), ConfigError);
  EXPECT_THROW(parse_config("[pod]\nell = 2 x\n"), ConfigError);
  EXPECT_THROW(parse_config("[pde\n"), ConfigError);
}

TEST(ParseConfig, ValidatesInvariants) {
  EXPECT_THROW(parse_config("[pde]\nepsilon = 0\n[snapshots]\ncontrols = 0\n"), ConfigError);
  EXPECT_THROW(parse_config(with("[feedback]\nnoise = 0.5 1.0\n")), ConfigError);
  EXPECT_THROW(parse_config(with("[feedback]\ndt = 0.07\n")), ConfigError);
  EXPECT_THROW(parse_config("[pod]\nell = 11\n[snapshots]\ncontrols = 0\n"), ConfigError);
  EXPECT_THROW(parse_config("[pod]\nell = 0\n[snapshots]\ncontrols = 0\n"), ConfigError);
  EXPECT_THROW(parse_config("[hjb]\nK = 0.1\nh_ratio = 20\n[snapshots]\ncontrols = 0\n"),
               ConfigError);
  EXPECT_THROW(parse_config("[hjb]\ncontrol_max = 2\n[snapshots]\ncontrols = 0\n"), ConfigError);
  EXPECT_THROW(parse_config("[pde]\nmu = 1\n[snapshots]\ncontrols = 0\n[analysis]\n"
                            "constants = analytic\n"),
               ConfigError);
  EXPECT_THROW(parse_config(with("[analysis]\nconstants = guess\n")), ConfigError);
}

TEST(Presets, ShippedConfigurations) {
  const ExperimentConfig t1 = preset_config("test1");
  EXPECT_EQ(t1.pde.n_x, 199);
  EXPECT_EQ(t1.pde.mu, 0.0);
  EXPECT_EQ(t1.pde.u_min, -2.2);
  EXPECT_EQ(t1.pde.u_max, 0.0);
  EXPECT_EQ(t1.ells, (std::vector<int>{2, 3, 4}));
  EXPECT_EQ(t1.snapshots.controls, (std::vector<double>{-2.2, 1.1, 0.0}));

  const ExperimentConfig t2 = preset_config("test2");
  EXPECT_EQ(t2.pde.n_x, 99);
  EXPECT_EQ(t2.pde.mu, -1.0);
  EXPECT_EQ(t2.pde.gamma, 0.1);

  const ExperimentConfig t3 = preset_config("test3");
  EXPECT_EQ(t3.pde.gamma, 0.0);
  EXPECT_EQ(t3.feedback.noise_amplitudes, (std::vector<double>{0.5, 0.9}));
  EXPECT_EQ(t3.feedback.noise_runs, 20u);

  EXPECT_THROW(preset_config("test4"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.ini"), ConfigError);
}

TEST(LoadConfig, ReadsFiles) {
  const std::string path = ::testing::TempDir() + "hjbpod_config_test.ini";
  {
    std::ofstream out(path);
    out << kMinimal << "[experiment]\nname = from_file\n";
  }
  EXPECT_EQ(load_config(path).name, "from_file");
}

TEST(Study, AxisParsingAndSingleValueRejection) {
  EXPECT_EQ(parse_study_axis("ell"), StudyAxis::kEll);
  EXPECT_EQ(parse_study_axis("K"), StudyAxis::kMeshSize);
  EXPECT_EQ(parse_study_axis("h"), StudyAxis::kTimeStep);
  EXPECT_THROW(parse_study_axis("bogus"), ConfigError);
  const ExperimentConfig c = parse_config(kMinimal);
  EXPECT_THROW(convergence_study(c, StudyAxis::kEll), ConfigError);
  EXPECT_THROW(convergence_study(c, StudyAxis::kTimeStep), ConfigError);
}

}  // namespace
}  // namespace hjbpod
