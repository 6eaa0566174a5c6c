#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include <hsr/data.hpp>
#include <hsr/errors.hpp>
#include <hsr/hsrnet.hpp>
#include <hsr/io.hpp>
#include <hsr/spectral.hpp>

using namespace hsr;

namespace {

std::string scratch(const std::string& name) {
  std::filesystem::create_directories("io_scratch");
  return "io_scratch/" + name;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

void spew(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  REQUIRE(out.good());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

SpectralCube sample_cube(bool with_wavelengths) {
  SpectralCube cube = SpectralCube::zeros(5, 4, 3);
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> dist(0.0f, 1.0f);
  for (float& v : cube.data) v = dist(rng);
  if (with_wavelengths) cube.wavelengths_nm = {450.0f, 550.0f, 650.0f};
  return cube;
}

HsrnetConfig sample_net_config() {
  HsrnetConfig cfg;
  cfg.stages = 1;
  cfg.hs_channels = 4;
  cfg.ms_channels = 2;
  cfg.irn_features = 3;
  cfg.ssn_features_wide = 3;
  cfg.ssn_features_narrow = 2;
  cfg.cam_reduction = 2;
  cfg.grouping.groups.push_back({{0, 1}, {0}});
  cfg.grouping.groups.push_back({{2, 3}, {1}});
  cfg.hs_wavelengths_nm = {400.0f, 450.0f, 500.0f, 550.0f};
  cfg.seed = 9;
  return cfg;
}

const char* kMinimalRunConfig = R"({
  "data": {"hsi_paths": ["a.hsrc"]},
  "srf": {"path": "srf.csv"}
})";

}  // namespace

TEST_CASE("cube files round-trip bitwise") {
  for (bool wl : {true, false}) {
    SpectralCube cube = sample_cube(wl);
    const std::string path = scratch(wl ? "cube_wl.hsrc" : "cube_plain.hsrc");
    write_cube(path, cube);
    SpectralCube back = read_cube(path);
    CHECK(back.width == cube.width);
    CHECK(back.height == cube.height);
    CHECK(back.channels == cube.channels);
    CHECK(back.wavelengths_nm == cube.wavelengths_nm);
    REQUIRE(back.data.size() == cube.data.size());
    CHECK(std::memcmp(back.data.data(), cube.data.data(),
                      cube.data.size() * sizeof(float)) == 0);
  }
}

TEST_CASE("corrupted cube files fail cleanly") {
  const std::string path = scratch("cube_good.hsrc");
  write_cube(path, sample_cube(true));
  const std::string good = slurp(path);
  const std::string bad = scratch("cube_bad.hsrc");

  // Wrong magic.
  std::string mutated = good;
  mutated[0] = 'X';
  spew(bad, mutated);
  CHECK_THROWS_AS(read_cube(bad), FormatError);

  // Unsupported version.
  mutated = good;
  mutated[4] = 9;
  spew(bad, mutated);
  CHECK_THROWS_AS(read_cube(bad), FormatError);

  // Truncated payload.
  spew(bad, good.substr(0, good.size() - 5));
  CHECK_THROWS_AS(read_cube(bad), FormatError);

  // Trailing bytes.
  spew(bad, good + "zz");
  CHECK_THROWS_AS(read_cube(bad), FormatError);

  // Non-finite payload value (quiet NaN in the first payload slot, which
  // sits after the 21-byte header and the three wavelength floats).
  mutated = good;
  const size_t payload = 21 + 3 * 4;
  mutated[payload + 0] = '\x00';
  mutated[payload + 1] = '\x00';
  mutated[payload + 2] = '\xc0';
  mutated[payload + 3] = '\x7f';
  spew(bad, mutated);
  CHECK_THROWS_AS(read_cube(bad), FormatError);

  // Zero extent.
  mutated = good;
  mutated[8] = mutated[9] = mutated[10] = mutated[11] = '\x00';
  spew(bad, mutated);
  CHECK_THROWS_AS(read_cube(bad), FormatError);

  CHECK_THROWS_AS(read_cube(scratch("does_not_exist.hsrc")), FormatError);
}

TEST_CASE("srf tables round-trip exactly through their decimal form") {
  Srf srf = synth_srf(4);
  const std::string path = scratch("srf.csv");
  write_srf(path, srf);
  Srf back = read_srf(path);
  CHECK(back.num_bands == srf.num_bands);
  CHECK(back.sample_wavelengths_nm == srf.sample_wavelengths_nm);
  CHECK(back.responses == srf.responses);
}

TEST_CASE("malformed srf tables fail cleanly") {
  const std::string path = scratch("srf_bad.csv");

  spew(path, "");
  CHECK_THROWS_AS(read_srf(path), FormatError);

  spew(path, "nm,band_1\n500,1\n");  // wrong header tag
  CHECK_THROWS_AS(read_srf(path), FormatError);

  spew(path, "wavelength_nm,band_1\n500,1\n490,1\n");  // descending
  CHECK_THROWS_AS(read_srf(path), FormatError);

  spew(path, "wavelength_nm,band_1\n500,oops\n510,1\n");  // unparsable cell
  CHECK_THROWS_AS(read_srf(path), FormatError);

  spew(path, "wavelength_nm,band_1\n500,1,2\n");  // field count mismatch
  CHECK_THROWS_AS(read_srf(path), FormatError);

  spew(path, "wavelength_nm,band_1\n500,-1\n510,1\n");  // negative response
  CHECK_THROWS_AS(read_srf(path), FormatError);

  // Structurally fine but with an all-zero band.
  spew(path, "wavelength_nm,band_1,band_2\n500,1,0\n510,1,0\n");
  CHECK_THROWS_AS(read_srf(path), DegenerateInputError);
}

TEST_CASE("srf reader tolerates CRLF and blank lines") {
  const std::string path = scratch("srf_crlf.csv");
  spew(path, "wavelength_nm,band_1\r\n500,0.5\r\n\r\n510,1\r\n");
  Srf srf = read_srf(path);
  CHECK(srf.num_samples() == 2);
  CHECK(srf.response(0, 0) == 0.5f);
}

TEST_CASE("checkpoints round-trip config and parameters bitwise") {
  HsrnetConfig cfg = sample_net_config();
  ParamStore params = init_params(cfg);
  const std::string path = scratch("model.hsrk");
  write_checkpoint(path, cfg, params);

  Checkpoint ckpt = read_checkpoint(path);
  CHECK(ckpt.config.stages == cfg.stages);
  CHECK(ckpt.config.hs_channels == cfg.hs_channels);
  CHECK(ckpt.config.ms_channels == cfg.ms_channels);
  CHECK(ckpt.config.use_cam == cfg.use_cam);
  CHECK(ckpt.config.use_srf_grouping == cfg.use_srf_grouping);
  CHECK(ckpt.config.seed == cfg.seed);
  CHECK(ckpt.config.hs_wavelengths_nm == cfg.hs_wavelengths_nm);
  REQUIRE(ckpt.config.grouping.groups.size() == 2);
  CHECK(ckpt.config.grouping.groups[1].hs_band_indices == std::vector<int>{2, 3});
  CHECK(ckpt.config.grouping.groups[1].coverage_signature == std::vector<int>{1});

  REQUIRE(ckpt.params.names() == params.names());
  for (const auto& [name, t] : params) {
    const Tensor& u = ckpt.params.at(name);
    REQUIRE(u.shape() == t.shape());
    CHECK(u.requires_grad());
    CHECK(std::memcmp(u.data(), t.data(), static_cast<size_t>(t.size()) * sizeof(float)) == 0);
  }
}

TEST_CASE("checkpoints reject tampering and table mismatches") {
  HsrnetConfig cfg = sample_net_config();
  ParamStore params = init_params(cfg);
  const std::string path = scratch("model_good.hsrk");
  write_checkpoint(path, cfg, params);
  const std::string good = slurp(path);
  const std::string bad = scratch("model_bad.hsrk");

  std::string mutated = good;
  mutated[0] = 'Z';
  spew(bad, mutated);
  CHECK_THROWS_AS(read_checkpoint(bad), FormatError);

  spew(bad, good.substr(0, good.size() / 2));
  CHECK_THROWS_AS(read_checkpoint(bad), FormatError);

  spew(bad, good + "x");
  CHECK_THROWS_AS(read_checkpoint(bad), FormatError);

  // A parameter table that does not match what the config implies.
  ParamStore partial;
  for (const auto& [name, t] : params) {
    if (name != "stage1.T.bias") partial.insert(name, t);
  }
  write_checkpoint(bad, cfg, partial);
  CHECK_THROWS_AS(read_checkpoint(bad), FormatError);
}

TEST_CASE("net config JSON survives a round trip and rejects junk") {
  HsrnetConfig cfg = sample_net_config();
  cfg.use_cam = false;
  HsrnetConfig back = hsrnet_config_from_json(hsrnet_config_to_json(cfg));
  CHECK(back.stages == cfg.stages);
  CHECK(back.use_cam == false);
  CHECK(back.grouping.groups.size() == 2);
  CHECK(back.hs_wavelengths_nm == cfg.hs_wavelengths_nm);

  CHECK_THROWS_AS(hsrnet_config_from_json("not json"), FormatError);
  CHECK_THROWS_AS(hsrnet_config_from_json("{}"), FormatError);  // missing fields

  // Parses but violates the config contract.
  HsrnetConfig zero = sample_net_config();
  zero.stages = 0;
  std::string text = hsrnet_config_to_json(zero);
  CHECK_THROWS_AS(hsrnet_config_from_json(text), FormatError);
}

TEST_CASE("run config defaults, overrides and warnings") {
  std::vector<std::string> warnings;
  RunConfig cfg = parse_run_config(kMinimalRunConfig, &warnings);
  CHECK(warnings.empty());
  CHECK(cfg.stages == 3);
  CHECK(cfg.train.learning_rate == 1e-3);
  CHECK(cfg.split == 0.25);
  CHECK(cfg.tau == 0.01);
  CHECK(cfg.ablation_cam);
  CHECK(cfg.hsi_paths == std::vector<std::string>{"a.hsrc"});
  CHECK(cfg.srf_path == "srf.csv");

  const char* full = R"({
    "hsrnet": {"stages": 2, "irn_features": 16, "ssn_features_wide": 12,
               "ssn_features_narrow": 6, "cam_reduction": 2},
    "train": {"lr": 0.01, "batch_size": 4, "max_steps": 100, "patch_size": 16,
              "seed": 5, "eval_every": 10},
    "loss": {"alpha": 0.2},
    "data": {"hsi_paths": ["x.hsrc", "y.hsrc"], "split": 0.5},
    "srf": {"path": "cam.csv", "tau": 0.05},
    "ablation": {"cam": false, "srf_grouping": false, "fast_loss": false}
  })";
  cfg = parse_run_config(full, &warnings);
  CHECK(cfg.stages == 2);
  CHECK(cfg.irn_features == 16);
  CHECK(cfg.train.learning_rate == 0.01);
  CHECK(cfg.train.batch_size == 4);
  CHECK(cfg.train.seed == 5);
  CHECK(cfg.loss.alpha == 0.2);
  CHECK(cfg.hsi_paths.size() == 2);
  CHECK(cfg.split == 0.5);
  CHECK(cfg.tau == 0.05);
  CHECK(!cfg.ablation_cam);
  CHECK(!cfg.ablation_srf_grouping);
  CHECK(!cfg.ablation_fast_loss);

  const char* noisy = R"({
    "data": {"hsi_paths": ["a.hsrc"], "spilt": 0.5},
    "srf": {"path": "srf.csv"},
    "extra": 1
  })";
  warnings.clear();
  parse_run_config(noisy, &warnings);
  REQUIRE(warnings.size() == 2);
  CHECK(warnings[0] == "unknown config key: extra");
  CHECK(warnings[1] == "unknown config key: data.spilt");

  // A null warning sink is allowed.
  parse_run_config(kMinimalRunConfig, nullptr);
}

TEST_CASE("run config validation failures") {
  CHECK_THROWS_AS(parse_run_config("{nope", nullptr), FormatError);
  CHECK_THROWS_AS(parse_run_config("[1, 2]", nullptr), FormatError);
  CHECK_THROWS_AS(parse_run_config(R"({"data": {"hsi_paths": ["a"]}})", nullptr),
                  ConfigError);  // missing srf.path
  CHECK_THROWS_AS(parse_run_config(R"({"srf": {"path": "s"}})", nullptr),
                  ConfigError);  // missing hsi_paths
  CHECK_THROWS_AS(
      parse_run_config(
          R"({"data": {"hsi_paths": ["a"]}, "srf": {"path": "s"}, "train": {"lr": "fast"}})",
          nullptr),
      ConfigError);  // wrong type
  CHECK_THROWS_AS(
      parse_run_config(
          R"({"data": {"hsi_paths": ["a"], "split": 1.0}, "srf": {"path": "s"}})",
          nullptr),
      ConfigError);  // split out of range
  CHECK_THROWS_AS(
      parse_run_config(
          R"({"data": {"hsi_paths": ["a"]}, "srf": {"path": "s", "tau": 0.0}})",
          nullptr),
      ConfigError);  // tau out of range
  CHECK_THROWS_AS(
      parse_run_config(
          R"({"data": {"hsi_paths": ["a"]}, "srf": {"path": "s"}, "train": {"batch_size": 0}})",
          nullptr),
      ConfigError);
  CHECK_THROWS_AS(
      parse_run_config(
          R"({"data": {"hsi_paths": ["a"]}, "srf": {"path": "s"}, "loss": {"alpha": -0.1}})",
          nullptr),
      ConfigError);
}

TEST_CASE("metrics reports serialize to parseable JSON") {
  MetricsReport rep;
  rep.cc = 0.5;
  rep.psnr_db = 30.25;
  rep.ssim = 0.75;
  rep.sam_degrees = 4.5;
  rep.degenerate_cc_bands = {1, 3};
  nlohmann::json j = nlohmann::json::parse(metrics_report_to_json(rep));
  CHECK(j.at("cc").get<double>() == 0.5);
  CHECK(j.at("psnr_db").get<double>() == 30.25);
  CHECK(j.at("ssim").get<double>() == 0.75);
  CHECK(j.at("sam_degrees").get<double>() == 4.5);
  CHECK(j.at("degenerate_cc_bands").get<std::vector<int>>() == std::vector<int>{1, 3});
}

TEST_CASE("atomic text writes leave no temporary behind") {
  const std::string path = scratch("note.txt");
  write_text_atomic(path, "hello\n");
  CHECK(slurp(path) == "hello\n");
  CHECK(!std::filesystem::exists(path + ".tmp"));
  write_text_atomic(path, "replaced");
  CHECK(slurp(path) == "replaced");
}
