#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "commands.hpp"
#include "splat/codec.hpp"
#include "splat/image_io.hpp"
#include "splat/metrics.hpp"
#include "splat/renderer.hpp"
#include "test_util.hpp"
#include <json.hpp>

using namespace splat;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "splat");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("splat_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Small crop so encode tests stay quick.
  std::string crop(int side) {
    const ImageBuffer src = read_image(splat::testing::data_path("coffee_256.png"));
    ImageBuffer out(side, side);
    for (int r = 0; r < side; ++r)
      for (int c = 0; c < side; ++c)
        for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = src.at(r + 40, c + 40, ch);
    const std::string p = path("crop" + std::to_string(side) + ".png");
    write_png(p, out);
    return p;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, HelpAndUsageErrors) {
  EXPECT_EQ(run_cli({"--help"}).code, 0);
  EXPECT_EQ(run_cli({}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"encode"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"encode", "x.png", "-o", "y", "--cr", "-3"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"encode", "x.png", "-o", "y", "--init", "clever"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"ablate", "x.png", "--variants", "full,bogus"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kExitUsage);
  // Parses, but the lambda is out of range.
  EXPECT_EQ(run_cli({"encode", crop(32), "-o", path("a.ssplat"), "--lambda-m", "2"}).code,
            cli::kExitUsage);
}

TEST_F(CliTest, MissingInputIsInputError) {
  const auto r = run_cli({"encode", path("nope.png"), "-o", path("a.ssplat")});
  EXPECT_EQ(r.code, cli::kExitInput);
  EXPECT_NE(r.err.find("unreadable-image"), std::string::npos);
}

TEST_F(CliTest, InfeasibleRatioReportsMaximum) {
  const auto r = run_cli({"encode", splat::testing::data_path("coffee_256.png"), "-o",
                          path("a.ssplat"), "--cr", "10000000"});
  EXPECT_EQ(r.code, cli::kExitInput);
  EXPECT_NE(r.err.find("budget-too-small"), std::string::npos);
  EXPECT_NE(r.err.find("28086"), std::string::npos) << r.err;
}

TEST_F(CliTest, EncodeWritesFileAndManifest) {
  const std::string in = crop(96);
  const auto r = run_cli({"encode", in, "-o", path("a.ssplat"), "--cr", "40", "--iters", "30",
                          "--loss-csv", path("loss.csv"), "--dump-weights", path("w.png"),
                          "--dump-samples", path("s.png"), "-v"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("step,loss,psnr\n", 0), 0u);
  EXPECT_NE(r.out.find("primitives:"), std::string::npos);

  std::ifstream mf(path("a.ssplat.json"));
  ASSERT_TRUE(mf);
  const auto j = nlohmann::json::parse(mf);
  const double nominal = j["nominal_ratio"].get<double>();
  const double achieved = j["achieved_ratio"].get<double>();
  const auto n_g = j["budget"]["n_g"].get<std::int64_t>();
  EXPECT_NEAR(nominal, 3.0 * 96 * 96 / (7.0 * n_g), 1e-9);
  EXPECT_GE(nominal, 40.0);
  EXPECT_LE(achieved, 2 * nominal);
  EXPECT_GE(achieved, nominal / 2);
  EXPECT_EQ(j["file_bytes"].get<std::size_t>(), fs::file_size(path("a.ssplat")));
  EXPECT_EQ(j["config"]["init"], "full");
  EXPECT_EQ(j["config"]["mode"], "quant");
  EXPECT_TRUE(j["quality"]["ms_ssim"].is_null());  // 96 px is below the MS-SSIM minimum
  EXPECT_LT(j["loss"]["final"].get<double>(), j["loss"]["initial"].get<double>());
  EXPECT_TRUE(j.contains("timings_seconds"));

  std::ifstream csv(path("loss.csv"));
  const std::string text((std::istreambuf_iterator<char>(csv)), {});
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 32);  // header + 31 losses
  EXPECT_EQ(read_image(path("s.png")).height(), 96);
  EXPECT_TRUE(fs::exists(path("w.png")));
}

TEST_F(CliTest, DecodeHalfScaleMatchesDownsampledRender) {
  const std::string in = crop(128);
  ASSERT_EQ(run_cli({"encode", in, "-o", path("a.ssplat"), "--cr", "30", "--iters", "40"}).code, 0);
  ASSERT_EQ(run_cli({"decode", path("a.ssplat"), "-o", path("full.png")}).code, 0);
  const auto r = run_cli({"decode", path("a.ssplat"), "-o", path("half.png"), "--scale", "0.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("64x64"), std::string::npos);

  const ImageBuffer full = read_image(path("full.png"));
  const ImageBuffer half = read_image(path("half.png"));
  ASSERT_EQ(half.height(), 64);
  ImageBuffer down(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      for (int ch = 0; ch < 3; ++ch)
        down.at(y, x, ch) = 0.25 * (full.at(2 * y, 2 * x, ch) + full.at(2 * y + 1, 2 * x, ch) +
                                    full.at(2 * y, 2 * x + 1, ch) + full.at(2 * y + 1, 2 * x + 1, ch));
  EXPECT_GE(psnr(down, half), 25.0);
}

TEST_F(CliTest, DecodeRejectsCorruptFile) {
  std::ofstream(path("bad.ssplat"), std::ios::binary) << "SSPL\x01\x00garbage";
  const auto r = run_cli({"decode", path("bad.ssplat"), "-o", path("x.png")});
  EXPECT_EQ(r.code, cli::kExitInput);
  EXPECT_EQ(run_cli({"decode", path("missing.ssplat"), "-o", path("x.png")}).code, cli::kExitInput);
}

TEST_F(CliTest, EvalCsvAndFallback) {
  const std::string big = splat::testing::data_path("coffee_256.png");
  auto r = run_cli({"eval", big, big, "--csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "psnr,ssim,ms_ssim\n99,1,1\n");

  r = run_cli({"eval", big, splat::testing::data_path("chelsea_256.png")});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("MS-SSIM: 0."), std::string::npos);

  const std::string small = crop(64);
  r = run_cli({"eval", small, small, "--csv"});
  EXPECT_EQ(r.out, "psnr,ssim,ms_ssim\n99,1,ssim_fallback\n");
  r = run_cli({"eval", small, small});
  EXPECT_NE(r.out.find("MS-SSIM: n/a"), std::string::npos);

  r = run_cli({"eval", small, big});
  EXPECT_EQ(r.code, cli::kExitInput);
  EXPECT_NE(r.err.find("shape-mismatch"), std::string::npos);
}

TEST_F(CliTest, AblateSubset) {
  const auto r = run_cli({"ablate", crop(64), "--cr", "30", "--iters", "10", "--variants",
                          "full,random", "--csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], "variant,psnr,ssim,ms_ssim,train_seconds");
  EXPECT_EQ(rows[1].rfind("full,", 0), 0u);
  EXPECT_EQ(rows[2].rfind("random,", 0), 0u);
}

TEST(CliNames, VariantRoundtrip) {
  for (auto v : {InitVariant::kRandom, InitVariant::kMeans, InitVariant::kMeansScales, InitVariant::kFull}) {
    EXPECT_EQ(cli::parse_variant(cli::variant_name(v)), v);
  }
  EXPECT_FALSE(cli::parse_variant("smart").has_value());
}
