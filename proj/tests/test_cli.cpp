#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "eec/cli.hpp"

using namespace eec;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "eec");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  cli::RunConfig cfg;
  if (const auto code = cli::parse(static_cast<int>(argv.size()), argv.data(), cfg, out, err))
    return {*code, out.str(), err.str()};
  const int code = cli::run(cfg, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> v;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

std::vector<std::string> cells(const std::string& line) {
  std::vector<std::string> v;
  std::istringstream in(line);
  for (std::string c; std::getline(in, c, ',');) v.push_back(c);
  return v;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("eec_cli_test_" + name);
}

}  // namespace

TEST(Cli, Classify) {
  const Outcome o = invoke({"classify", "--model", "interior-point"});
  ASSERT_EQ(o.code, cli::kOk) << o.err;
  const auto l = lines(o.out);
  ASSERT_EQ(l.size(), 2u);
  EXPECT_EQ(l[0], "model,tag,t_star,s_star,R,maximizer_count,roles_swapped,lambda1,lambda2,r1,r2,r11,r22,r12");
  const auto c = cells(l[1]);
  EXPECT_EQ(c[0], "interior-point");
  EXPECT_EQ(c[1], "UniqueInterior");
  EXPECT_DOUBLE_EQ(std::stod(c[4]), 0.5);
}

TEST(Cli, Validate) {
  const Outcome o = invoke({"validate", "--model", "diagonal", "--grid", "64"});
  ASSERT_EQ(o.code, cli::kOk) << o.err;
  const auto l = lines(o.out);
  EXPECT_EQ(l[0],
            "model,grid_n,psd_ok,min_pivot,unit_variance_max_err,h3_ok,h3_worst_eigenvalue,maximizer_count,notes");
  EXPECT_EQ(cells(l[1])[2], "true");
}

TEST(Cli, ValidateModelFile) {
  const auto path = temp_file("shift.model");
  std::ofstream(path) << "kernel_x = sqexp\nscale_x = 0.7071067811865476\nkernel_y = sqexp\n"
                         "scale_y = 0.7071067811865476\ncross_form = shift-mixture\nc = 0.99\n";
  const Outcome ok = invoke({"validate", "--model-file", path.string(), "--grid", "32"});
  EXPECT_EQ(ok.code, cli::kOk) << ok.err;
  EXPECT_EQ(cells(lines(ok.out)[1])[1], "32");
  std::filesystem::remove(path);
}

TEST(Cli, EecColumnsAndSigns) {
  const Outcome o = invoke({"eec", "--model", "interior-point", "--u", "3,3.5"});
  ASSERT_EQ(o.code, cli::kOk) << o.err;
  const auto l = lines(o.out);
  ASSERT_EQ(l.size(), 3u);
  const auto h = cells(l[0]);
  ASSERT_EQ(h.size(), 13u);
  EXPECT_EQ(h[1], "eec");
  EXPECT_EQ(h[4], "x_left_y_left");
  EXPECT_EQ(h[12], "x_interior_y_interior");
  const auto r = cells(l[1]);
  double sum = 0.0;
  for (std::size_t i = 4; i < r.size(); ++i) sum += std::stod(r[i]);
  EXPECT_NEAR(sum, std::stod(r[1]), 1e-12 * std::abs(sum));
  EXPECT_GT(std::stod(r[1]), std::stod(cells(l[2])[1]));
}

TEST(Cli, ClosedForm) {
  const Outcome o = invoke({"closed-form", "--model", "diagonal", "--u", "4"});
  ASSERT_EQ(o.code, cli::kOk) << o.err;
  const auto l = lines(o.out);
  EXPECT_EQ(l[0], "u,tag,coefficient,power,rate,value");
  const auto c = cells(l[1]);
  EXPECT_EQ(c[1], "DiagonalLine");
  EXPECT_EQ(c[3], "1");

  const Outcome v = invoke({"closed-form", "--model", "corner-degenerate", "--u", "4", "--variant", "corrected"});
  ASSERT_EQ(v.code, cli::kOk);
  const Outcome p = invoke({"closed-form", "--model", "corner-degenerate", "--u", "4"});
  EXPECT_LT(std::stod(cells(lines(v.out)[1])[2]), std::stod(cells(lines(p.out)[1])[2]));
}

TEST(Cli, ClosedFormUnavailableIsNumericalError) {
  const Outcome o = invoke({"closed-form", "--model", "independent", "--u", "4"});
  EXPECT_EQ(o.code, cli::kNumericalError);
  EXPECT_NE(o.err.find("numerical error"), std::string::npos);
}

TEST(Cli, SimulateIsReproducibleAcrossThreadCounts) {
  const std::vector<std::string> args = {"simulate", "--model", "interior-point", "--u", "2.5",
                                         "--grid",   "64",     "--reps",           "2000", "--seed", "17"};
  const Outcome a = invoke(args);
  ASSERT_EQ(a.code, cli::kOk) << a.err;
  EXPECT_EQ(lines(a.out)[0],
            "u,grid_n,reps,seed,eec_mc,eec_mc_stderr,joint_plain,joint_plain_stderr,joint_is,joint_is_stderr,"
            "is_effective_sample_size,is_low_confidence");
  ::setenv("EEC_THREADS", "1", 1);
  const Outcome b = invoke(args);
  ::unsetenv("EEC_THREADS");
  EXPECT_EQ(a.out, b.out);
}

TEST(Cli, OutputFileAndConfigFile) {
  const auto out = temp_file("out.csv"), conf = temp_file("run.conf");
  std::ofstream(conf) << "model = \"interior-point\"\nu = 3\n";
  const Outcome o = invoke({"closed-form", "--config", conf.string(), "--out", out.string()});
  ASSERT_EQ(o.code, cli::kOk) << o.err;
  EXPECT_TRUE(o.out.empty());
  std::ifstream in(out);
  const std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_NE(body.find("UniqueInterior"), std::string::npos);

  const Outcome overridden = invoke({"closed-form", "--config", conf.string(), "--model", "diagonal"});
  EXPECT_NE(overridden.out.find("DiagonalLine"), std::string::npos);
  std::filesystem::remove(out);
  std::filesystem::remove(conf);
}

TEST(Cli, ArgumentErrors) {
  EXPECT_EQ(invoke({}).code, cli::kArgumentError);
  EXPECT_EQ(invoke({"frobnicate"}).code, cli::kArgumentError);
  EXPECT_EQ(invoke({"classify", "--model", "no-such-model"}).code, cli::kArgumentError);
  EXPECT_EQ(invoke({"classify"}).code, cli::kArgumentError);
  EXPECT_EQ(invoke({"classify", "--model", "diagonal", "--model-file", "x"}).code, cli::kArgumentError);
  EXPECT_EQ(invoke({"eec", "--model", "diagonal"}).code, cli::kArgumentError);
  EXPECT_EQ(invoke({"simulate", "--model", "diagonal", "--u", "3"}).code, cli::kArgumentError);
  EXPECT_EQ(invoke({"eec", "--model", "diagonal", "--u", "abc"}).code, cli::kArgumentError);
  EXPECT_EQ(invoke({"eec", "--model", "diagonal", "--u", "3", "--theorem", "other"}).code, cli::kArgumentError);
  EXPECT_EQ(invoke({"eec", "--model", "diagonal", "--u", "3", "--tol-quad", "0"}).code, cli::kArgumentError);
  EXPECT_EQ(invoke({"classify", "--model-file", "/nonexistent/model"}).code, cli::kArgumentError);
  EXPECT_EQ(invoke({"--help"}).code, cli::kOk);
}

TEST(Cli, TheoremNames) {
  const Outcome a = invoke({"eec", "--model", "interior-point", "--u", "3", "--theorem", "restricted"});
  const Outcome b = invoke({"eec", "--model", "interior-point", "--u", "3", "--theorem", "3.3-restricted"});
  const Outcome f = invoke({"eec", "--model", "interior-point", "--u", "3", "--theorem", "3.1"});
  const Outcome g = invoke({"eec", "--model", "interior-point", "--u", "3"});
  ASSERT_EQ(a.code, cli::kOk);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(f.out, g.out);
  EXPECT_NE(a.out, g.out);
}

TEST(Cli, CompareWithinBands) {
  const Outcome o = invoke({"compare", "--model", "corner-nondegenerate", "--u", "4.5,4", "--grid", "128", "--reps",
                            "4000", "--seed", "3"});
  EXPECT_EQ(o.code, cli::kOk) << o.err;
  const auto l = lines(o.out);
  ASSERT_EQ(l.size(), 3u);
  EXPECT_EQ(l[0], "u,closed_form,eec_numeric,mc_estimate,mc_stderr,ratio_cf_eec,ratio_eec_mc");
  EXPECT_EQ(cells(l[1])[0], "4");
  EXPECT_EQ(cells(l[2])[0], "4.5");
}

TEST(Cli, CompareReportsBandViolations) {
  const Outcome o = invoke({"compare", "--model", "diagonal", "--u", "3,4.5", "--grid", "128", "--reps", "4000",
                            "--seed", "3"});
  EXPECT_EQ(o.code, cli::kBandViolation);
  EXPECT_NE(o.err.find("band violation"), std::string::npos);
}
