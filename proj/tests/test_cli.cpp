#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "crowdsr/image_io.hpp"
#include "crowdsr/render.hpp"
#include "support/dataset_fixture.hpp"

using namespace crowdsr;
using namespace crowdsr::testing;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string(CROWDSR_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

// Source images, their annotation list, and a built dataset.
struct Fixture {
  fs::path dir = scratch_dir("cli");
  fs::path src = dir / "src";
  fs::path ann = dir / "annotations.json";
  fs::path data = dir / "data";

  Fixture() {
    fs::create_directories(src);
    const auto anns = write_sources(src, three_image_specs(), 91);
    nlohmann::json list = nlohmann::json::array();
    for (const AnnotationSet& a : anns) {
      nlohmann::json pts = nlohmann::json::array();
      for (const Point& p : a.points) pts.push_back({p.x, p.y});
      list.push_back({{"image", a.image}, {"height", a.height}, {"width", a.width}, {"points", pts}});
    }
    std::ofstream(ann) << list.dump();
  }

  std::string build_args(const fs::path& out) const {
    return "build-dataset " + src.string() + " " + ann.string() + " " + out.string() +
           " --long-side 128 --min-side 128 --short-side-multiple 32 --test-fraction 0.34 --seed 4";
  }
};

}  // namespace

TEST_CASE("build-dataset") {
  Fixture f;
  SUBCASE("missing annotation file") {
    const fs::path missing = f.dir / "nope.json";
    Run r = cli("build-dataset " + f.src.string() + " " + missing.string() + " " + f.data.string(), f.dir);
    CHECK(r.code == 2);
    CHECK(r.err.find(missing.string()) != std::string::npos);
  }
  SUBCASE("three-image fixture") {
    Run r = cli(f.build_args(f.data), f.dir);
    REQUIRE(r.code == 0);
    DatasetManifest m = load_manifest(f.data / kManifestFile);
    CHECK(m.entries.size() == 3);
    CHECK(validate_manifest(m, f.data).ok());
    CHECK(r.err.find("\"long_side\":128") != std::string::npos);
  }
  SUBCASE("method is recorded") {
    Run r = cli(f.build_args(f.data) + " --method lanczos4", f.dir);
    REQUIRE(r.code == 0);
    CHECK(slurp(f.data / kManifestFile).find("\"lanczos4\"") != std::string::npos);
    CHECK(r.err.find("\"method\":\"lanczos4\"") != std::string::npos);
  }
  SUBCASE("deterministic under the seed") {
    REQUIRE(cli(f.build_args(f.dir / "a"), f.dir).code == 0);
    REQUIRE(cli(f.build_args(f.dir / "b"), f.dir).code == 0);
    CHECK(slurp(f.dir / "a" / kManifestFile) == slurp(f.dir / "b" / kManifestFile));
  }
}

TEST_CASE("configuration layering") {
  Fixture f;
  const fs::path cfg = f.dir / "cfg.json";
  SUBCASE("unknown keys are usage errors") {
    std::ofstream(cfg) << R"({"long_sid": 64})";
    CHECK(cli(f.build_args(f.data) + " --config " + cfg.string(), f.dir).code == 1);
    CHECK(cli(f.build_args(f.data) + " --set bogus=1", f.dir).code == 1);
    CHECK(cli(f.build_args(f.data) + " --set seed=abc", f.dir).code == 1);
    CHECK(cli("frobnicate", f.dir).code == 1);
  }
  SUBCASE("flags win over --set, which wins over the file") {
    std::ofstream(cfg) << R"({"method": "cubic", "seed": 9, "test_fraction": 0.5})";
    Run r = cli(f.build_args(f.data) + " --config " + cfg.string() + " --set method=lanczos4 --set seed=11",
                f.dir);
    REQUIRE(r.code == 0);
    CHECK(r.err.find("\"method\":\"lanczos4\"") != std::string::npos);
    CHECK(r.err.find("\"seed\":4") != std::string::npos);
    CHECK(r.err.find("\"test_fraction\":0.34") != std::string::npos);
  }
  SUBCASE("quiet verbosity silences the echo") {
    const fs::path err = f.dir / "quiet.txt";
    const std::string cmd = "CROWDSR_VERBOSITY=quiet " + std::string(CROWDSR_CLI) + " " +
                            f.build_args(f.data) + " 2>" + err.string();
    CHECK(std::system(cmd.c_str()) == 0);
    CHECK(slurp(err).empty());
  }
}

TEST_CASE("end to end: train, eval, infer, render") {
  Fixture f;
  REQUIRE(cli(f.build_args(f.data), f.dir).code == 0);
  const std::string manifest = (f.data / kManifestFile).string();
  const fs::path ckpt = f.dir / "model.ckpt", detached = f.dir / "detached.ckpt";
  Run tr = cli("train " + manifest + " --out " + ckpt.string() + " --detached-out " + detached.string() +
                   " --epochs 5 --lr 1e-3 --seed 2 --checkpoint-every 2",
               f.dir);
  REQUIRE(tr.code == 0);
  CHECK(fs::file_size(detached) < fs::file_size(ckpt));
  std::ifstream log(ckpt.string() + ".log.jsonl");
  int lines = 0;
  for (std::string line; std::getline(log, line); ++lines) {
    auto j = nlohmann::json::parse(line);
    CHECK(j.at("epoch") == lines + 1);
    CHECK(j.contains("wall_ms"));
  }
  CHECK(lines == 5);

  SUBCASE("training is reproducible") {
    const fs::path again = f.dir / "again.ckpt";
    REQUIRE(cli("train " + manifest + " --out " + again.string() + " --epochs 5 --lr 1e-3 --seed 2", f.dir)
                .code == 0);
    CHECK(slurp(again) == slurp(ckpt));
  }
  SUBCASE("eval") {
    const fs::path report = f.dir / "report.json";
    Run r = cli("eval " + ckpt.string() + " " + manifest + " --split all --out " + report.string(), f.dir);
    REQUIRE(r.code == 0);
    auto j = nlohmann::json::parse(slurp(report));
    CHECK(j.at("m") == 3);
    CHECK(j.at("mae").get<double>() <= j.at("rmse").get<double>());
  }
  SUBCASE("infer is unchanged by detaching the head") {
    DatasetManifest m = load_manifest(f.data / kManifestFile);
    const std::string image = (f.data / m.entries[2].lr.at(4).image).string();
    const fs::path dump = f.dir / "density.json";
    Run a = cli("infer " + ckpt.string() + " " + image + " --density-out " + dump.string(), f.dir);
    Run d = cli("infer " + detached.string() + " " + image, f.dir);
    REQUIRE(a.code == 0);
    REQUIRE(d.code == 0);
    CHECK(a.out == d.out);
    char expected[64];
    std::snprintf(expected, sizeof expected, "%.3f\n", integrate(read_density(dump)));
    CHECK(a.out == expected);

    const fs::path png = f.dir / "heat.png";
    CHECK(cli("render " + png.string() + " --density " + dump.string(), f.dir).code == 0);
    const fs::path png2 = f.dir / "heat2.png";
    CHECK(cli("render " + png2.string() + " --checkpoint " + detached.string() + " --image " + image, f.dir)
              .code == 0);
    CHECK(slurp(png) == slurp(png2));
  }
  SUBCASE("shape mismatch on resume") {
    Run r = cli("train " + manifest + " --out " + (f.dir / "x.ckpt").string() + " --epochs 1 --resume " +
                    ckpt.string() + " --sr-scale 4",
                f.dir);
    CHECK(r.code == 3);
    CHECK(r.err.find("mssrm.conv.weight") != std::string::npos);
  }
  SUBCASE("missing checkpoint") {
    CHECK(cli("infer " + (f.dir / "none.ckpt").string() + " x.png", f.dir).code == 2);
  }
}

TEST_CASE("render of an all-zero map") {
  const fs::path dir = scratch_dir("cli_render");
  write_density(dir / "zero.json", DensityMap::Zero(5, 7));
  Run r = cli("render " + (dir / "zero.png").string() + " --density " + (dir / "zero.json").string() +
                  " --cell-size 4",
              dir);
  REQUIRE(r.code == 0);
  Image<double> img = read_png(dir / "zero.png");
  const Rgb lo = ramp_color(0.0);
  bool uniform = true;
  for (Index y = 0; y < 20; ++y)
    for (Index x = 0; x < 28; ++x)
      for (Index c = 0; c < 3; ++c)
        uniform = uniform && std::abs(img(y, x, c) - std::round(lo[c] * 255) / 255) < 1e-12;
  CHECK(uniform);
  CHECK(cli("render " + (dir / "x.png").string(), dir).code == 1);
}
