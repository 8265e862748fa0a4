#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mvmm/commands.hpp"

using namespace mvmm;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / (std::string("mvmm_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& s) const { return path_ / s; }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void write(const fs::path& p, const std::string& s) {
  std::ofstream out(p);
  out << s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int line_count(const fs::path& p) {
  std::ifstream in(p);
  std::string l;
  int n = 0;
  while (std::getline(in, l)) ++n;
  return n;
}

int run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "\"" + MVMM_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

void small_config(const fs::path& p) {
  write(p, R"({"design": {"kind": "beads", "num_blocks": 2, "block_size": 2},
               "sigma_mean": [3.0, 3.0], "d": [2, 3], "n_train": [40], "reps": 2, "seed": 5})");
}

}  // namespace

TEST(FormatDouble, RoundTripsAndSpecialValues) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(-2.0), "-2");
  EXPECT_EQ(format_double(std::nan("")), "NA");
  const double v = 1.0 / 3.0;
  EXPECT_EQ(std::stod(format_double(v)), v);
}

TEST(ReadCsv, ParsesHeaderAndValues) {
  TempDir t;
  write(t / "a.csv", "x1,x2\n1,2.5\n-3, 4e-2\n");
  const CsvTable c = read_csv((t / "a.csv").string());
  EXPECT_EQ(c.header, (std::vector<std::string>{"x1", "x2"}));
  ASSERT_EQ(c.values.rows(), 2);
  EXPECT_EQ(c.values(1, 1), 0.04);
  write(t / "b.csv", "1,2\n3,4\n");
  EXPECT_EQ(read_csv((t / "b.csv").string(), {}).values.rows(), 2);
}

TEST(ReadCsv, ReportsBadInput) {
  TempDir t;
  write(t / "ragged.csv", "a,b\n1,2\n3\n");
  EXPECT_THROW(read_csv((t / "ragged.csv").string()), InputError);
  write(t / "text.csv", "a,b\n1,two\n");
  EXPECT_THROW(read_csv((t / "text.csv").string()), InputError);
  write(t / "nan.csv", "a\nnan\n");
  EXPECT_THROW(read_csv((t / "nan.csv").string()), InputError);
  write(t / "empty.csv", "");
  EXPECT_THROW(read_csv((t / "empty.csv").string()), InputError);
  EXPECT_THROW(read_csv((t / "missing.csv").string()), InputError);
  write(t / "v1.csv", "a\n1\n2\n");
  write(t / "v2.csv", "a\n1\n");
  EXPECT_THROW(read_views({(t / "v1.csv").string(), (t / "v2.csv").string()}), InputError);
}

TEST(ModelJson, RoundTrip) {
  MvmmModel m;
  m.views.resize(2);
  m.views[0].components = {{VectorXd::Constant(2, 0.5), VectorXd::Constant(2, 2.0)}};
  m.views[1].components = {{VectorXd::Constant(1, -1.0), VectorXd::Constant(1, 0.25)},
                           {VectorXd::Constant(1, 3.0), VectorXd::Constant(1, 1.0)}};
  m.pi = ProbTable::from_matrix((MatrixXd(1, 2) << 0.3, 0.7).finished());
  const MvmmModel r = model_from_json(model_json(m));
  EXPECT_EQ(model_json(r).dump(), model_json(m).dump());
  EXPECT_THROW(model_from_json(nlohmann::json{{"views", 3}}), InputError);
}

TEST(Cli, SimulateWritesFiles) {
  TempDir t;
  small_config(t / "cfg.json");
  ASSERT_EQ(run_cli("simulate --config " + q(t / "cfg.json") + " --out " + q(t.path()) + " --rep 1"), 0);
  for (const char* f : {"view1.csv", "view2.csv", "labels.csv", "pi.json", "truth.json"})
    EXPECT_TRUE(fs::exists(t / f)) << f;
  EXPECT_EQ(line_count(t / "view1.csv"), 41);
  EXPECT_EQ(line_count(t / "labels.csv"), 41);
  const auto pi = nlohmann::json::parse(slurp(t / "pi.json"));
  EXPECT_EQ(pi.at("blocks").at("num_blocks").get<int>(), 2);
  EXPECT_EQ(run_cli("simulate --config " + q(t / "cfg.json") + " --out " + q(t.path()) + " --rep 2"), 2);
}

TEST(Cli, FitTrivialModel) {
  TempDir t;
  write(t / "a.csv", "x\n1\n2\n3\n");
  write(t / "b.csv", "y,z\n0,1\n0,2\n0,3\n");
  ASSERT_EQ(run_cli("fit --views " + q(t / "a.csv") + " " + q(t / "b.csv") + " --k 1 1 --out " + q(t / "m.json")), 0);
  const auto doc = nlohmann::json::parse(slurp(t / "m.json"));
  const MvmmModel m = model_from_json(doc);
  EXPECT_NEAR(m.views[0].components[0].mean(0), 2.0, 1e-12);
  EXPECT_NEAR(m.views[1].components[0].mean(1), 2.0, 1e-12);
  EXPECT_EQ(m.pi.values()(0), 1.0);
  EXPECT_EQ(doc.at("metadata").at("method"), "mvmm");
}

TEST(Cli, BadInputExitsWithTwo) {
  TempDir t;
  write(t / "bad.csv", "x\n1\nabc\n");
  EXPECT_EQ(run_cli("fit --views " + q(t / "bad.csv") + " --k 1 --out " + q(t / "m.json")), 2);
  EXPECT_EQ(run_cli("fit --views " + q(t / "missing.csv") + " --k 1 --out " + q(t / "m.json")), 2);
  EXPECT_EQ(run_cli("nonsense"), 2);
  write(t / "a.csv", "x\n1\n2\n3\n");
  EXPECT_EQ(run_cli("fit --views " + q(t / "a.csv") + " " + q(t / "a.csv") + " --k 1 --out " + q(t / "m.json")), 2);
}

TEST(Cli, SpectrumAndBlocks) {
  TempDir t;
  write(t / "x.csv", "1,1,0,0\n1,1,0,0\n0,0,1,1\n0,0,1,1\n0,0,0,0\n");
  ASSERT_EQ(run_cli("spectrum --matrix " + q(t / "x.csv") + " --out " + q(t / "s.json")), 0);
  const auto s = nlohmann::json::parse(slurp(t / "s.json"));
  EXPECT_EQ(s.at("sym_zero_count").get<int>(), 2);
  EXPECT_EQ(s.at("un_zero_count").get<int>(), 3);
  EXPECT_EQ(s.at("blocks").at("num_blocks").get<int>(), 2);

  MvmmModel m;
  m.views.resize(2);
  for (auto& v : m.views)
    for (int k = 0; k < 2; ++k) v.components.push_back({VectorXd::Constant(1, k), VectorXd::Ones(1)});
  m.pi = ProbTable::from_matrix((MatrixXd(2, 2) << 0.5, 0, 0, 0.5).finished());
  cli::write_json(t / "m.json", model_json(m));
  ASSERT_EQ(run_cli("blocks --model " + q(t / "m.json") + " --out " + q(t / "b.json")), 0);
  const auto b = nlohmann::json::parse(slurp(t / "b.json"));
  EXPECT_EQ(b.at("num_blocks").get<int>(), 2);
  EXPECT_EQ(b.at("table"), "pi");
}

TEST(Cli, SelectWithOneGridPoint) {
  TempDir t;
  small_config(t / "cfg.json");
  ASSERT_EQ(run_cli("simulate --config " + q(t / "cfg.json") + " --out " + q(t.path()) + " --n 80"), 0);
  ASSERT_EQ(run_cli("select --method log --views " + q(t / "view1.csv") + " " + q(t / "view2.csv") +
                " --k 2 2 --n-init 2 --grid 0.01 --out " + q(t / "r.csv") + " --json " + q(t / "r.json")),
            0);
  EXPECT_EQ(line_count(t / "r.csv"), 2);
  const auto r = nlohmann::json::parse(slurp(t / "r.json"));
  EXPECT_EQ(r.at("chosen").get<int>(), 0);
}

TEST(Cli, SeedEnvironmentOverride) {
  TempDir t;
  small_config(t / "cfg.json");
  ASSERT_EQ(run_cli("simulate --config " + q(t / "cfg.json") + " --out " + q(t / "a")), 0);
  ASSERT_EQ(run_cli("simulate --config " + q(t / "cfg.json") + " --out " + q(t / "b") + " --seed 5"), 0);
  EXPECT_EQ(slurp(t / "a" / "view1.csv"), slurp(t / "b" / "view1.csv"));
  ASSERT_EQ(run_cli("simulate --config " + q(t / "cfg.json") + " --out " + q(t / "c") + " --seed 6"), 0);
  EXPECT_NE(slurp(t / "a" / "view1.csv"), slurp(t / "c" / "view1.csv"));
  ASSERT_EQ(run_cli("simulate --config " + q(t / "cfg.json") + " --out " + q(t / "d") + " --seed 6", "MVMM_SEED=5"), 0);
  EXPECT_EQ(slurp(t / "a" / "view1.csv"), slurp(t / "d" / "view1.csv"));
  EXPECT_EQ(run_cli("simulate --config " + q(t / "cfg.json") + " --out " + q(t / "e"), "MVMM_SEED=x"), 2);
}
