#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "dlqg/cli.hpp"
#include "fixtures.hpp"

using namespace dlqg;
namespace fs = std::filesystem;

namespace {

const std::string kData = DLQG_TEST_DATA_DIR;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("dlqg_" + std::string(info->test_suite_name()) + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }

  fs::path dir_;
};

struct Run {
  int code;
  std::string out, err;
};

Run run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "dlqg");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string problem_text_without(const std::string& field) {
  Json j = problem_to_json(fixtures::small_valid());
  j.erase(field);
  return j.dump();
}

}  // namespace

using ProblemFile = TempDir;

TEST_F(ProblemFile, RoundTripIsExact) {
  const auto inst = fixtures::seed7();
  save_problem(inst, path("p.json"));
  EXPECT_TRUE(load_problem(path("p.json")) == inst);
  const auto small = load_problem(kData + "/example_valid.json");
  EXPECT_TRUE(small == fixtures::small_valid());
}

TEST_F(ProblemFile, MissingDimsNamesTheField) {
  write("p.json", problem_text_without("dims"));
  try {
    load_problem(path("p.json"));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("\"dims\""), std::string::npos) << e.what();
  }
}

TEST_F(ProblemFile, MissingMatrixNamesTheField) {
  write("p.json", problem_text_without("S"));
  EXPECT_THROW(load_problem(path("p.json")), ParseError);
}

TEST_F(ProblemFile, ZeroBlockDimension) {
  Json j = problem_to_json(fixtures::small_valid());
  j["dims"]["p1"] = 0;
  write("p.json", j.dump());
  try {
    load_problem(path("p.json"));
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("dims must be >= 1"), std::string::npos) << e.what();
  }
}

TEST_F(ProblemFile, MalformedMatrices) {
  Json j = problem_to_json(fixtures::small_valid());
  j["A"] = Json::array({Json::array({1.0, 0.0}), Json::array({1.0})});
  write("ragged.json", j.dump());
  EXPECT_THROW(load_problem(path("ragged.json")), ParseError);
  j["A"] = Json::array({Json::array({1.0, "x"}), Json::array({1.0, 0.0})});
  write("string.json", j.dump());
  EXPECT_THROW(load_problem(path("string.json")), ParseError);
  write("broken.json", "{\"dims\": ");
  EXPECT_THROW(load_problem(path("broken.json")), ParseError);
  EXPECT_THROW(load_problem(path("absent.json")), IoError);
}

TEST_F(ProblemFile, WrongShapeIsDimensionError) {
  Json j = problem_to_json(fixtures::small_valid());
  j["Q"] = Json::array({Json::array({1.0})});
  write("p.json", j.dump());
  EXPECT_THROW(load_problem(path("p.json")), DimensionError);
}

TEST_F(ProblemFile, ControllerRoundTrip) {
  const auto inst = fixtures::sweep_instance(6);
  const auto syn = synthesize(inst);
  save_controller(path("c.json"), syn.realization, syn.gains, Json{{"note", "test"}});
  const auto c = load_controller(path("c.json"));
  EXPECT_EQ(c.realization.F, syn.realization.F);
  EXPECT_EQ(c.realization.G, syn.realization.G);
  EXPECT_EQ(c.realization.H, syn.realization.H);
  EXPECT_EQ(c.realization.structure, syn.realization.structure);
  EXPECT_EQ(c.gains.L2, syn.gains.L2);
  EXPECT_EQ(c.gains.Pi2, syn.gains.Pi2);
  EXPECT_EQ(c.provenance["note"], "test");
  EXPECT_TRUE(check_information_pattern(c.realization, 50));

  Json j = controller_to_json(syn.realization, syn.gains);
  j["format"] = "other";
  EXPECT_THROW(controller_from_json(j), ParseError);
  j = controller_to_json(syn.realization, syn.gains);
  j["q"] = 3;
  EXPECT_THROW(controller_from_json(j), ParseError);
}

using Cli = TempDir;

TEST_F(Cli, ValidateShippedExample) {
  const auto r = run_cli({"validate", kData + "/example_valid.json", "--json"});
  EXPECT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_TRUE(j["violations"].empty());
  EXPECT_EQ(run_cli({"validate", kData + "/example_valid.json"}).code, 0);
}

TEST_F(Cli, ValidateReportsViolations) {
  const auto r = run_cli({"validate", kData + "/invalid_sparsity.json"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("sparsity: A block (1,2) nonzero"), std::string::npos) << r.out;
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run_cli({"validate", path("absent.json")}).code, 3);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 3);
  EXPECT_EQ(run_cli({"synth", kData + "/invalid_sparsity.json", "-o", path("c.json")}).code, 1);
  write("bad.json", problem_text_without("dims"));
  const auto parse = run_cli({"synth", path("bad.json"), "-o", path("c.json")});
  EXPECT_EQ(parse.code, 3);
  EXPECT_NE(parse.err.find("dims"), std::string::npos);
  ASSERT_EQ(run_cli({"rand", "--seed", "42", "--dims", "2,2,1,1,1,1", "--spectral-target", "0.8", "-o", path("p.json")}).code, 0);
  EXPECT_EQ(run_cli({"synth", path("p.json"), "-o", path("c.json"), "--max-iter", "1"}).code, 2);
  EXPECT_EQ(run_cli({"rand", "--dims", "0,1,1,1,1,1", "-o", path("q.json")}).code, 1);
}

TEST_F(Cli, SynthThenAnalyzeMatchesLibrary) {
  ASSERT_EQ(run_cli({"rand", "--seed", "7", "--dims", "1,1,1,1,1,1", "--spectral-target", "0.9", "-o", path("p.json")}).code, 0);
  const auto inst = load_problem(path("p.json"));
  EXPECT_TRUE(inst == fixtures::seed7());

  const auto synth = run_cli({"synth", path("p.json"), "-o", path("c.json"), "--json"});
  ASSERT_EQ(synth.code, 0) << synth.err;
  const auto analyze = run_cli({"analyze", path("p.json"), path("c.json"), "--json"});
  ASSERT_EQ(analyze.code, 0) << analyze.err;
  const Json j = Json::parse(analyze.out);
  const double J_lib = analytic_cost(closed_loop(inst, synthesize(inst).realization));
  EXPECT_NEAR(j["J"].get<double>(), J_lib, 1e-9);
  EXPECT_TRUE(j["information_pattern_ok"].get<bool>());
  EXPECT_LT(j["radii"]["closed_loop"].get<double>(), 1.0);
  EXPECT_EQ(j["provenance"]["subcommand"], "analyze");

  const auto text = run_cli({"analyze", path("p.json"), path("c.json")});
  EXPECT_NE(text.out.find("information pattern: ok"), std::string::npos);

  const Json c = Json::parse(std::ifstream(path("c.json")));
  EXPECT_EQ(c["provenance"]["tolerances"]["dare_tol"].get<double>(), 1e-10);
}

TEST_F(Cli, SimulateIsReproducible) {
  ASSERT_EQ(run_cli({"rand", "--seed", "7", "-o", path("p.json")}).code, 0);
  ASSERT_EQ(run_cli({"synth", path("p.json"), "-o", path("c.json")}).code, 0);
  const auto a = run_cli({"simulate", path("p.json"), path("c.json"), "--steps", "5000", "--seed", "3", "--json"});
  const auto b = run_cli({"simulate", path("p.json"), path("c.json"), "--steps", "5000", "--seed", "3", "--json"});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(Json::parse(a.out)["empirical_cost"].get<double>(), Json::parse(b.out)["empirical_cost"].get<double>());
  EXPECT_EQ(Json::parse(a.out)["provenance"]["seed"], 3);
}

TEST_F(Cli, CompareScalarBlocks) {
  ASSERT_EQ(run_cli({"rand", "--seed", "7", "--dims", "1,1,1,1,1,1", "--spectral-target", "0.9", "-o", path("p.json")}).code, 0);
  const auto r = run_cli({"compare", path("p.json"), "--horizon", "200", "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_TRUE(j["sandwich_ok"].get<bool>());
  EXPECT_EQ(j["horizon"], 200);
}

TEST_F(Cli, CompareUnstabilizableIsValidationFailure) {
  auto inst = fixtures::small_valid();
  inst.system.A = (Matrix(2, 2) << 1.5, 0.0, 0.0, 0.5).finished();
  inst.system.B = (Matrix(2, 2) << 0.0, 0.0, 0.0, 1.0).finished();
  save_problem(inst, path("p.json"));
  const auto r = run_cli({"compare", path("p.json"), "--horizon", "20"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("validate"), std::string::npos) << r.err;
}

TEST_F(Cli, RandDecoupled) {
  ASSERT_EQ(run_cli({"rand", "--seed", "11", "--dims", "2,2,1,1,1,1", "--spectral-target", "0.8", "--decoupled", "-o",
                 path("p.json")})
                .code,
            0);
  EXPECT_TRUE(load_problem(path("p.json")) == fixtures::seed11_decoupled());
}
