#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include <hsr/data.hpp>
#include <hsr/io.hpp>
#include <hsr/spectral.hpp>

using namespace hsr;

namespace {

std::string scratch(const std::string& name) {
  std::filesystem::create_directories("cli_scratch");
  return "cli_scratch/" + name;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(HSR_CLI_PATH) + " " + args +
                          " > cli_scratch/stdout.txt 2> cli_scratch/stderr.txt";
  std::filesystem::create_directories("cli_scratch");
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

void spew(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  REQUIRE(out.good());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

// Scene and SRF shared by the pipeline tests below.
const char* kScene = "cli_scratch/scene.hsrc";
const char* kSrf = "cli_scratch/srf.csv";
const char* kMsi = "cli_scratch/msi.hsrc";

void make_inputs() {
  REQUIRE(run_cli("synth --seed 5 --width 12 --height 10 --channels 6 --endmembers 3"
                  " --out cli_scratch/scene.hsrc --srf-out cli_scratch/srf.csv"
                  " --ms-bands 3") == 0);
  REQUIRE(run_cli("simulate --hsi cli_scratch/scene.hsrc --srf cli_scratch/srf.csv"
                  " --out cli_scratch/msi.hsrc") == 0);
}

}  // namespace

TEST_CASE("synth is deterministic and matches the library") {
  make_inputs();
  SpectralCube scene = read_cube(kScene);
  SpectralCube expect = synth_scene(5, 12, 10, 6, 3);
  REQUIRE(scene.data.size() == expect.data.size());
  CHECK(std::memcmp(scene.data.data(), expect.data.data(),
                    expect.data.size() * sizeof(float)) == 0);
  CHECK(scene.wavelengths_nm == expect.wavelengths_nm);

  Srf srf = read_srf(kSrf);
  Srf expect_srf = synth_srf(3);
  CHECK(srf.num_bands == 3);
  CHECK(srf.responses == expect_srf.responses);

  REQUIRE(run_cli("synth --seed 5 --width 12 --height 10 --channels 6 --endmembers 3"
                  " --out cli_scratch/scene2.hsrc") == 0);
  CHECK(slurp(kScene) == slurp(scratch("scene2.hsrc")));
}

TEST_CASE("simulate applies the degradation operator") {
  make_inputs();
  SpectralCube scene = read_cube(kScene);
  SpectralCube msi = read_cube(kMsi);
  CHECK(msi.channels == 3);
  CHECK(msi.width == scene.width);

  DegradationOperator phi = build_phi(synth_srf(3), scene.wavelengths_nm);
  SpectralCube expect = apply_degradation(phi, scene);
  REQUIRE(msi.data.size() == expect.data.size());
  CHECK(std::memcmp(msi.data.data(), expect.data.data(),
                    expect.data.size() * sizeof(float)) == 0);
}

TEST_CASE("eval scores an identical pair as perfect") {
  make_inputs();
  const std::string report = scratch("report.json");
  REQUIRE(run_cli("eval --ref cli_scratch/scene.hsrc --test cli_scratch/scene.hsrc"
                  " --json " + report) == 0);
  nlohmann::json j = nlohmann::json::parse(slurp(report));
  CHECK(j.at("psnr_db").get<double>() == 100.0);
  CHECK(j.at("ssim").get<double>() == 1.0);
  CHECK(j.at("cc").get<double>() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(j.at("sam_degrees").get<double>() < 1e-5);
  // The same report goes to stdout.
  CHECK(slurp("cli_scratch/stdout.txt").find("\"psnr_db\"") != std::string::npos);
}

TEST_CASE("train produces a checkpoint that infer can apply") {
  make_inputs();
  REQUIRE(run_cli("synth --seed 6 --width 12 --height 10 --channels 6 --endmembers 3"
                  " --out cli_scratch/scene_b.hsrc") == 0);
  spew(scratch("run.json"), R"({
    "hsrnet": {"stages": 1, "irn_features": 6, "ssn_features_wide": 6,
               "ssn_features_narrow": 4, "cam_reduction": 2},
    "train": {"lr": 0.001, "batch_size": 2, "max_steps": 4, "patch_size": 8,
              "seed": 1, "eval_every": 2},
    "data": {"hsi_paths": ["cli_scratch/scene.hsrc", "cli_scratch/scene_b.hsrc"],
             "split": 0.5},
    "srf": {"path": "cli_scratch/srf.csv"}
  })");
  REQUIRE(run_cli("train --config cli_scratch/run.json --out cli_scratch/model.hsrk") == 0);

  Checkpoint ckpt = read_checkpoint(scratch("model.hsrk"));
  CHECK(ckpt.config.hs_channels == 6);
  CHECK(ckpt.config.ms_channels == 3);
  CHECK(ckpt.config.stages == 1);

  const std::string history = slurp(scratch("model_history.csv"));
  CHECK(history.rfind("step,train_loss,", 0) == 0);
  CHECK(history.find("\n0,") != std::string::npos);

  REQUIRE(run_cli("infer --model cli_scratch/model.hsrk --msi cli_scratch/msi.hsrc"
                  " --srf cli_scratch/srf.csv --out cli_scratch/rec.hsrc") == 0);
  SpectralCube rec = read_cube(scratch("rec.hsrc"));
  CHECK(rec.channels == 6);
  CHECK(rec.width == 12);
  for (float v : rec.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  CHECK(run_cli("eval --ref cli_scratch/scene.hsrc --test cli_scratch/rec.hsrc") == 0);
}

TEST_CASE("hqs writes a reconstruction and a trace") {
  make_inputs();
  REQUIRE(run_cli("hqs --msi cli_scratch/msi.hsrc --srf cli_scratch/srf.csv"
                  " --channels 6 --iters 5 --epsilon 0.05 --mu 0.1 --lambda 0.1"
                  " --out cli_scratch/hqs.hsrc") == 0);
  SpectralCube x = read_cube(scratch("hqs.hsrc"));
  CHECK(x.channels == 6);
  const std::string trace = slurp(scratch("hqs_trace.csv"));
  CHECK(trace.rfind("iter,fidelity,update_norm\n", 0) == 0);
  CHECK(trace.find("\n0,") != std::string::npos);

  // A step size that violates the contraction bound is a config error.
  CHECK(run_cli("hqs --msi cli_scratch/msi.hsrc --srf cli_scratch/srf.csv"
                " --channels 6 --iters 5 --epsilon 50 --mu 1"
                " --out cli_scratch/hqs_bad.hsrc") == 2);
}

TEST_CASE("gradient check command passes") {
  CHECK(run_cli("gradcheck --seed 7") == 0);
}

TEST_CASE("usage errors exit with status 2") {
  CHECK(run_cli("") == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("synth --seed 1") == 2);             // missing --out
  CHECK(run_cli("synth --seed 1 --bogus x --out y") == 2);
}

TEST_CASE("file format errors exit with status 3") {
  make_inputs();
  CHECK(run_cli("simulate --hsi cli_scratch/no_such.hsrc --srf cli_scratch/srf.csv"
                " --out cli_scratch/x.hsrc") == 3);
  spew(scratch("junk.hsrc"), "this is not a cube");
  CHECK(run_cli("eval --ref cli_scratch/junk.hsrc --test cli_scratch/junk.hsrc") == 3);
  spew(scratch("bad.json"), "{nope");
  CHECK(run_cli("train --config cli_scratch/bad.json --out cli_scratch/m.hsrk") == 3);
}

TEST_CASE("config errors exit with status 2") {
  make_inputs();
  spew(scratch("no_srf.json"), R"({"data": {"hsi_paths": ["cli_scratch/scene.hsrc"]}})");
  CHECK(run_cli("train --config cli_scratch/no_srf.json --out cli_scratch/m.hsrk") == 2);

  // SRF band count disagrees with the MSI.
  REQUIRE(run_cli("synth --seed 1 --width 8 --height 8 --channels 6"
                  " --out cli_scratch/tmp.hsrc --srf-out cli_scratch/srf2.csv"
                  " --ms-bands 2") == 0);
  CHECK(run_cli("hqs --msi cli_scratch/msi.hsrc --srf cli_scratch/srf2.csv"
                " --channels 6 --out cli_scratch/x.hsrc") == 2);
}

TEST_CASE("training divergence exits with status 4 and keeps the last good state") {
  make_inputs();
  spew(scratch("diverge.json"), R"({
    "hsrnet": {"stages": 1, "irn_features": 6, "ssn_features_wide": 6,
               "ssn_features_narrow": 4, "cam_reduction": 2},
    "train": {"lr": 1e8, "batch_size": 2, "max_steps": 10, "patch_size": 8,
              "seed": 1, "eval_every": 2},
    "data": {"hsi_paths": ["cli_scratch/scene.hsrc"], "split": 0.0},
    "srf": {"path": "cli_scratch/srf.csv"}
  })");
  CHECK(run_cli("train --config cli_scratch/diverge.json --out cli_scratch/div.hsrk") == 4);
  Checkpoint ckpt = read_checkpoint(scratch("div.hsrk"));  // still valid on disk
  CHECK(ckpt.config.hs_channels == 6);
  CHECK(slurp(scratch("div_history.csv")).rfind("step,", 0) == 0);
}
