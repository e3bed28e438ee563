#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "aff/image_io.hpp"
#include "aff/token_csv.hpp"

using namespace aff;
namespace fs = std::filesystem;

namespace {

const fs::path kTmp = fs::temp_directory_path() / "aff_io_tests";

struct TmpDir {
  TmpDir() { fs::create_directories(kTmp); }
} tmp_dir_guard;

std::string path_of(const std::string& name) { return (kTmp / name).string(); }

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Image gradient_image(int h, int w, int channels) {
  Image img;
  img.height = h;
  img.width = w;
  img.channels = channels;
  img.pixels.resize(std::size_t(h) * w * channels);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    img.pixels[i] = std::uint8_t((i * 7) % 256);
  return img;
}

// Runs the installed CLI binary; stdout goes to out_file if given.
int run_cli_binary(const std::string& args, const std::string& out_file = "") {
  std::string cmd = std::string(AFF_CLI_PATH) + " " + args;
  if (!out_file.empty()) cmd += " > " + out_file + " 2>&1";
  else cmd += " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("pgm round trips byte for byte") {
  const Image img = gradient_image(5, 7, 1);
  const std::string p = path_of("gray.pgm");
  write_image(img, p);
  const Image back = read_image(p);
  CHECK(back.height == 5);
  CHECK(back.width == 7);
  CHECK(back.channels == 1);
  CHECK(back.pixels == img.pixels);
  write_image(back, path_of("gray2.pgm"));
  CHECK(slurp(p) == slurp(path_of("gray2.pgm")));
}

TEST_CASE("ppm round trips byte for byte") {
  const Image img = gradient_image(4, 3, 3);
  const std::string p = path_of("color.ppm");
  write_image(img, p);
  const Image back = read_image(p);
  CHECK(back.channels == 3);
  CHECK(back.pixels == img.pixels);
}

TEST_CASE("header comments are skipped") {
  std::istringstream in("P5\n# a comment\n2 2\n# another\n255\nABCD");
  const Image img = read_image(in);
  CHECK(img.height == 2);
  CHECK(img.width == 2);
  CHECK(img.pixels == std::vector<std::uint8_t>{'A', 'B', 'C', 'D'});
}

TEST_CASE("parse errors name the byte offset") {
  std::istringstream bad_magic("P4\n2 2\n255\nABCD");
  CHECK_THROWS_WITH_AS(read_image(bad_magic), doctest::Contains("byte offset"), std::runtime_error);

  std::istringstream bad_maxval("P5\n2 2\n65535\nABCD");
  CHECK_THROWS_WITH_AS(read_image(bad_maxval), doctest::Contains("maxval"), std::runtime_error);

  std::istringstream truncated("P5\n2 2\n255\nAB");
  CHECK_THROWS(read_image(truncated));

  CHECK_THROWS(read_image(path_of("missing.pgm")));
}

TEST_CASE("unit float conversion is linear in 255ths") {
  Image img = gradient_image(1, 3, 1);
  img.pixels = {0, 51, 255};
  const auto f = to_unit_floats(img);
  CHECK(f[0] == doctest::Approx(0.0));
  CHECK(f[1] == doctest::Approx(0.2));
  CHECK(f[2] == doctest::Approx(1.0));
  const Image back = from_unit_floats(f, 1, 3);
  CHECK(back.pixels == img.pixels);
}

TEST_CASE("overlay paints red at four times the token coordinates") {
  const Image base = gradient_image(16, 16, 1);
  const Image over = render_overlay(base, {{1.0, 2.0}, {0.0, 0.0}});
  CHECK(over.channels == 3);
  CHECK(over.at(8, 4, 0) == 255);  // token (1,2) lands at pixel row 8, col 4
  CHECK(over.at(8, 4, 1) == 0);
  CHECK(over.at(8, 4, 2) == 0);
  CHECK(over.at(0, 0, 0) == 255);
  // An untouched pixel keeps the promoted gray value.
  CHECK(over.at(3, 3, 0) == over.at(3, 3, 1));
  CHECK(over.at(3, 3, 0) == base.at(3, 3, 0));
  CHECK_THROWS(render_overlay(base, {{5.0, 5.0}}));  // 4*5 is off the raster
}

TEST_CASE("token csv round trips with fixed header and six decimals") {
  std::vector<TokenRecord> recs(2);
  recs[0] = {1, 1.5, 2.25, 1, 0.123456789, 0, 1};
  recs[1] = {2, -0.5, 0.0, 0, 0.5, 1, 0};
  const std::string p = path_of("tokens.csv");
  write_token_csv(p, recs);

  const std::string text = slurp(p);
  CHECK(text.rfind("stage,x,y,g,s,reserved,selected\n", 0) == 0);
  CHECK(text.find("1,1.500000,2.250000,1,0.123457,0,1") != std::string::npos);

  const auto back = read_token_csv(p);
  REQUIRE(back.size() == 2);
  CHECK(back[0].stage == 1);
  CHECK(back[0].s == doctest::Approx(0.123457));
  CHECK(back[1].reserved == 1);
  CHECK(back[1].x == doctest::Approx(-0.5));
}

TEST_CASE("token csv rejects a wrong header") {
  const std::string p = path_of("bad_tokens.csv");
  std::ofstream(p) << "stage,x,y\n1,0,0\n";
  CHECK_THROWS(read_token_csv(p));
}

TEST_CASE("cluster csv lists one row per token") {
  ClusterAssignment a;
  a.cluster_count = 2;
  a.cluster_of = {0, 0, 1};
  a.sorted_order = {0, 1, 2};
  a.cluster_sizes = {2, 1};
  a.starts = {0, 2, 3};
  const std::string p = path_of("clusters.csv");
  write_cluster_csv(p, {{0, 0}, {1, 0}, {5, 5}}, a);
  const std::string text = slurp(p);
  CHECK(text.rfind("token_index,x,y,cluster_id\n", 0) == 0);
  CHECK(text.find("2,5.000000,5.000000,1") != std::string::npos);
}

TEST_CASE("positions csv accepts extra columns") {
  const std::string p = path_of("pos.csv");
  std::ofstream(p) << "x,y,weight\n0.5,1.5,9\n2.0,3.0,1\n";
  const auto pos = read_positions_csv(p);
  REQUIRE(pos.size() == 2);
  CHECK(pos[0].x == doctest::Approx(0.5));
  CHECK(pos[1].y == doctest::Approx(3.0));

  std::ofstream(path_of("pos_bad.csv")) << "a,b\n1,2\n";
  CHECK_THROWS(read_positions_csv(path_of("pos_bad.csv")));
}

TEST_CASE("metrics csv uses the fixed schema") {
  const std::string p = path_of("metrics.csv");
  write_metrics_csv(p, {{1, 0.693147, 0.5, 1.0}});
  const std::string text = slurp(p);
  CHECK(text == "epoch,loss,acc,focus_ratio\n1,0.693147,0.500000,1.000000\n");
}

TEST_CASE("format_real pins six decimals") {
  CHECK(format_real(0.0) == "0.000000");
  CHECK(format_real(1.23456789) == "1.234568");
  CHECK(format_real(-2.5) == "-2.500000");
}

TEST_CASE("cli cluster output is byte identical across runs") {
  const std::string out1 = path_of("cli_c1.csv"), out2 = path_of("cli_c2.csv");
  CHECK(run_cli_binary("cluster --grid 24x24 --cluster-size 8 --curve hilbert --out " + out1) == 0);
  CHECK(run_cli_binary("cluster --grid 24x24 --cluster-size 8 --curve hilbert --out " + out2) == 0);
  CHECK(slurp(out1) == slurp(out2));
  CHECK(!slurp(out1).empty());
}

TEST_CASE("cli cluster writes the anchor ordering json") {
  const std::string oj = path_of("ordering.json");
  CHECK(run_cli_binary("cluster --grid 16x16 --cluster-size 8 --curve peano --out " +
                       path_of("cli_c3.csv") + " --ordering-out " + oj) == 0);
  // A JSON array of anchor indices, one entry per grid cell.
  const std::string text = slurp(oj);
  REQUIRE(!text.empty());
  CHECK(text.front() == '[');
  CHECK(text.find(']') != std::string::npos);
  CHECK(std::count(text.begin(), text.end(), ',') >= 16 / 8);
}

TEST_CASE("cli exit codes distinguish usage and validation errors") {
  CHECK(run_cli_binary("") == 1);                      // no subcommand
  CHECK(run_cli_binary("cluster --bogus-flag") == 1);  // unknown flag
  CHECK(run_cli_binary("cluster --grid 8x8 --cluster-size 8 --curve hilbert --out " +
                       path_of("x.csv") + " --input nope.csv") == 2);  // both sources
  CHECK(run_cli_binary("render --image missing.pgm --tokens missing.csv --out " +
                       path_of("r.ppm")) == 2);
}

TEST_CASE("cli render overlays a token dump onto an image") {
  write_image(gradient_image(16, 16, 1), path_of("base.pgm"));
  write_token_csv(path_of("rtokens.csv"), {{1, 1.0, 1.0, 0, 0.5, 0, 1},
                                           {1, 3.0, 2.0, 0, 0.5, 0, 0}});
  const std::string out = path_of("overlay.ppm");
  CHECK(run_cli_binary("render --image " + path_of("base.pgm") + " --tokens " +
                       path_of("rtokens.csv") + " --out " + out) == 0);
  const Image over = read_image(out);
  CHECK(over.channels == 3);
  CHECK(over.at(4, 4, 0) == 255);  // the selected token
  CHECK(over.at(8, 12, 0) != 255); // the unselected one stays untouched
}

TEST_CASE("cli train-toy at zero learning rate stays near chance") {
  const std::string dir = path_of("lr0");
  CHECK(run_cli_binary("train-toy --seed 0 --epochs 1 --lr 0 --train-size 16 --test-size 100 "
                       "--image-size 16 --threads 1 --out " + dir) == 0);
  std::ifstream f(dir + "/metrics.csv");
  std::string header, row;
  REQUIRE(std::getline(f, header));
  REQUIRE(std::getline(f, row));
  // epoch,loss,acc,focus_ratio
  const auto c1 = row.find(','), c2 = row.find(',', c1 + 1), c3 = row.find(',', c2 + 1);
  const double acc = std::stod(row.substr(c2 + 1, c3 - c2 - 1));
  CHECK(acc > 0.30);
  CHECK(acc < 0.70);
  CHECK(fs::exists(dir + "/checkpoint.bin"));
}

}  // TEST_SUITE
