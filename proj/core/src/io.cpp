#include "hsr/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hsr/errors.hpp"

namespace hsr {

namespace {

using nlohmann::json;

// ---- little-endian primitives ----------------------------------------------

void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

class Reader {
 public:
  Reader(std::string bytes, std::string what)
      : bytes_(std::move(bytes)), what_(std::move(what)) {}

  std::uint8_t u8(const char* field) {
    need(1, field);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint16_t u16(const char* field) {
    need(2, field);
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) {
      v |= static_cast<std::uint16_t>(static_cast<std::uint8_t>(bytes_[pos_++])) << (8 * i);
    }
    return v;
  }
  std::uint32_t u32(const char* field) {
    need(4, field);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes_[pos_++])) << (8 * i);
    }
    return v;
  }
  float f32(const char* field) { return std::bit_cast<float>(u32(field)); }
  std::string raw(size_t n, const char* field) {
    need(n, field);
    std::string out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  void read_f32_block(float* dst, size_t count, const char* field) {
    need(4 * count, field);
    for (size_t i = 0; i < count; ++i) {
      std::uint32_t v = 0;
      for (int b = 0; b < 4; ++b) {
        v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes_[pos_++])) << (8 * b);
      }
      dst[i] = std::bit_cast<float>(v);
    }
  }
  void expect_end() {
    if (pos_ != bytes_.size()) {
      throw FormatError(what_ + ": trailing bytes after payload");
    }
  }

 private:
  void need(size_t n, const char* field) {
    if (pos_ + n > bytes_.size()) {
      throw FormatError(what_ + ": truncated while reading " + field);
    }
  }
  std::string bytes_;
  std::string what_;
  size_t pos_ = 0;
};

std::string read_file_bytes(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(std::string(what) + ": cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  if (!in.good() && !in.eof()) {
    throw FormatError(std::string(what) + ": read failure on " + path);
  }
  return std::move(os).str();
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + tmp + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out.good()) throw FormatError("write failure on " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw FormatError("cannot move " + tmp + " to " + path + ": " + ec.message());
}

// Shortest decimal form that parses back to the identical float32.
std::string format_f32(float v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
  return buf;
}

constexpr std::uint32_t kCubeVersion = 1;
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::int64_t kMaxCubeElements = std::int64_t{1} << 28;

}  // namespace

SpectralCube read_cube(const std::string& path) {
  Reader r(read_file_bytes(path, "cube"), "cube");
  if (r.raw(4, "magic") != "HSRC") throw FormatError("cube: bad magic, expected HSRC");
  const std::uint32_t version = r.u32("version");
  if (version != kCubeVersion) {
    throw FormatError("cube: unsupported version " + std::to_string(version));
  }
  SpectralCube cube;
  cube.width = static_cast<int>(r.u32("width"));
  cube.height = static_cast<int>(r.u32("height"));
  cube.channels = static_cast<int>(r.u32("channels"));
  if (cube.width <= 0 || cube.height <= 0 || cube.channels <= 0) {
    throw FormatError("cube: extents must be positive");
  }
  if (cube.size() > kMaxCubeElements) {
    throw FormatError("cube: extents exceed the supported size");
  }
  const std::uint8_t has_wl = r.u8("has_wavelengths");
  if (has_wl > 1) throw FormatError("cube: has_wavelengths must be 0 or 1");
  if (has_wl == 1) {
    cube.wavelengths_nm.resize(static_cast<size_t>(cube.channels));
    r.read_f32_block(cube.wavelengths_nm.data(), cube.wavelengths_nm.size(),
                     "wavelengths");
    for (size_t i = 0; i < cube.wavelengths_nm.size(); ++i) {
      if (!std::isfinite(cube.wavelengths_nm[i]) ||
          (i > 0 && !(cube.wavelengths_nm[i] > cube.wavelengths_nm[i - 1]))) {
        throw FormatError("cube: wavelengths must be finite and strictly ascending");
      }
    }
  }
  cube.data.resize(static_cast<size_t>(cube.size()));
  r.read_f32_block(cube.data.data(), cube.data.size(), "payload");
  r.expect_end();
  for (float v : cube.data) {
    if (!std::isfinite(v)) throw FormatError("cube: payload contains non-finite values");
  }
  return cube;
}

void write_cube(const std::string& path, const SpectralCube& cube) {
  cube.validate();
  std::string out;
  out.reserve(17 + 4 * cube.data.size() + 4 * cube.wavelengths_nm.size());
  out += "HSRC";
  put_u32(out, kCubeVersion);
  put_u32(out, static_cast<std::uint32_t>(cube.width));
  put_u32(out, static_cast<std::uint32_t>(cube.height));
  put_u32(out, static_cast<std::uint32_t>(cube.channels));
  put_u8(out, cube.wavelengths_nm.empty() ? 0 : 1);
  for (float w : cube.wavelengths_nm) put_f32(out, w);
  for (float v : cube.data) put_f32(out, v);
  write_file_atomic(path, out);
}

Srf read_srf(const std::string& path) {
  std::string bytes = read_file_bytes(path, "srf");
  std::istringstream in(bytes);
  std::string line;
  int line_no = 0;

  auto split = [](const std::string& s) {
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
      const size_t comma = s.find(',', start);
      if (comma == std::string::npos) {
        fields.push_back(s.substr(start));
        break;
      }
      fields.push_back(s.substr(start, comma - start));
      start = comma + 1;
    }
    return fields;
  };
  auto parse_float = [&](const std::string& field, int line_number) {
    float v = 0.0f;
    const char* begin = field.data();
    const char* end = begin + field.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc{} || ptr != end) {
      throw FormatError("srf: line " + std::to_string(line_number) +
                        ": cannot parse number '" + field + "'");
    }
    return v;
  };

  if (!std::getline(in, line)) throw FormatError("srf: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  ++line_no;
  const auto header = split(line);
  if (header.size() < 2 || header[0] != "wavelength_nm") {
    throw FormatError("srf: line 1: header must be wavelength_nm,band_1,...");
  }
  Srf srf;
  srf.num_bands = static_cast<int>(header.size()) - 1;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != header.size()) {
      throw FormatError("srf: line " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " fields, got " +
                        std::to_string(fields.size()));
    }
    const float wl = parse_float(fields[0], line_no);
    if (!srf.sample_wavelengths_nm.empty() && !(wl > srf.sample_wavelengths_nm.back())) {
      throw FormatError("srf: line " + std::to_string(line_no) +
                        ": wavelengths must strictly ascend");
    }
    srf.sample_wavelengths_nm.push_back(wl);
    for (size_t i = 1; i < fields.size(); ++i) {
      const float v = parse_float(fields[i], line_no);
      if (!(v >= 0.0f) || !std::isfinite(v)) {
        throw FormatError("srf: line " + std::to_string(line_no) +
                          ": responses must be finite and non-negative");
      }
      srf.responses.push_back(v);
    }
  }
  srf.validate();
  return srf;
}

void write_srf(const std::string& path, const Srf& srf) {
  srf.validate();
  std::string out = "wavelength_nm";
  for (int b = 1; b <= srf.num_bands; ++b) out += ",band_" + std::to_string(b);
  out += "\n";
  for (int s = 0; s < srf.num_samples(); ++s) {
    out += format_f32(srf.sample_wavelengths_nm[static_cast<size_t>(s)]);
    for (int b = 0; b < srf.num_bands; ++b) {
      out += ",";
      out += format_f32(srf.response(s, b));
    }
    out += "\n";
  }
  write_file_atomic(path, out);
}

// ---- config JSON ------------------------------------------------------------

namespace {

json grouping_to_json(const BandGrouping& grouping) {
  json groups = json::array();
  for (const auto& g : grouping.groups) {
    groups.push_back({{"bands", g.hs_band_indices}, {"signature", g.coverage_signature}});
  }
  return {{"groups", groups}};
}

BandGrouping grouping_from_json(const json& j) {
  BandGrouping grouping;
  if (!j.is_object() || !j.contains("groups") || !j["groups"].is_array()) {
    throw FormatError("checkpoint: config grouping must hold a groups array");
  }
  for (const auto& g : j["groups"]) {
    BandGrouping::Group group;
    group.hs_band_indices = g.at("bands").get<std::vector<int>>();
    group.coverage_signature = g.at("signature").get<std::vector<int>>();
    grouping.groups.push_back(std::move(group));
  }
  return grouping;
}

}  // namespace

std::string hsrnet_config_to_json(const HsrnetConfig& cfg) {
  json j{{"stages", cfg.stages},
         {"hs_channels", cfg.hs_channels},
         {"ms_channels", cfg.ms_channels},
         {"irn_features", cfg.irn_features},
         {"ssn_features_wide", cfg.ssn_features_wide},
         {"ssn_features_narrow", cfg.ssn_features_narrow},
         {"cam_reduction", cfg.cam_reduction},
         {"use_cam", cfg.use_cam},
         {"use_srf_grouping", cfg.use_srf_grouping},
         {"grouping", grouping_to_json(cfg.grouping)},
         {"hs_wavelengths_nm", cfg.hs_wavelengths_nm},
         {"seed", cfg.seed}};
  return j.dump();
}

HsrnetConfig hsrnet_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: config JSON does not parse: ") + e.what());
  }
  HsrnetConfig cfg;
  try {
    cfg.stages = j.at("stages").get<int>();
    cfg.hs_channels = j.at("hs_channels").get<int>();
    cfg.ms_channels = j.at("ms_channels").get<int>();
    cfg.irn_features = j.at("irn_features").get<int>();
    cfg.ssn_features_wide = j.at("ssn_features_wide").get<int>();
    cfg.ssn_features_narrow = j.at("ssn_features_narrow").get<int>();
    cfg.cam_reduction = j.at("cam_reduction").get<int>();
    cfg.use_cam = j.at("use_cam").get<bool>();
    cfg.use_srf_grouping = j.at("use_srf_grouping").get<bool>();
    cfg.grouping = grouping_from_json(j.at("grouping"));
    cfg.hs_wavelengths_nm = j.at("hs_wavelengths_nm").get<std::vector<float>>();
    cfg.seed = j.at("seed").get<std::uint32_t>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: config JSON is missing fields: ") + e.what());
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("checkpoint: invalid config: ") + e.what());
  }
  return cfg;
}

Checkpoint read_checkpoint(const std::string& path) {
  Reader r(read_file_bytes(path, "checkpoint"), "checkpoint");
  if (r.raw(4, "magic") != "HSRK") {
    throw FormatError("checkpoint: bad magic, expected HSRK");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint32_t config_len = r.u32("config length");
  if (config_len > (1u << 20)) {
    throw FormatError("checkpoint: config block unreasonably large");
  }
  Checkpoint ckpt;
  ckpt.config = hsrnet_config_from_json(r.raw(config_len, "config JSON"));

  const std::uint32_t count = r.u32("tensor count");
  if (count > (1u << 20)) throw FormatError("checkpoint: tensor count unreasonably large");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t name_len = r.u16("tensor name length");
    const std::string name = r.raw(name_len, "tensor name");
    const std::uint8_t ndim = r.u8("tensor rank");
    if (ndim == 0 || ndim > 8) throw FormatError("checkpoint: tensor rank out of range");
    std::vector<int> shape;
    std::int64_t numel = 1;
    for (std::uint8_t d = 0; d < ndim; ++d) {
      const std::uint32_t extent = r.u32("tensor extent");
      if (extent == 0 || numel * extent > kMaxCubeElements) {
        throw FormatError("checkpoint: tensor extents out of range");
      }
      shape.push_back(static_cast<int>(extent));
      numel *= extent;
    }
    std::vector<float> data(static_cast<size_t>(numel));
    r.read_f32_block(data.data(), data.size(), "tensor payload");
    try {
      ckpt.params.insert(name, Tensor::from_values(std::move(shape), std::move(data), true));
    } catch (const ContractError&) {
      throw FormatError("checkpoint: duplicate tensor name " + name);
    }
  }
  r.expect_end();

  // The tensor table must be exactly the parameter set the config implies.
  ParamStore expected = init_params(ckpt.config);
  if (expected.size() != ckpt.params.size()) {
    throw FormatError("checkpoint: tensor table does not match the config");
  }
  for (const auto& [name, t] : expected) {
    if (!ckpt.params.contains(name) || ckpt.params.at(name).shape() != t.shape()) {
      throw FormatError("checkpoint: tensor " + name + " missing or misshapen");
    }
  }
  return ckpt;
}

void write_checkpoint(const std::string& path, const HsrnetConfig& cfg,
                      const ParamStore& params) {
  const std::string config_json = hsrnet_config_to_json(cfg);
  std::string out;
  out += "HSRK";
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(config_json.size()));
  out += config_json;
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    if (name.size() > 0xffff) throw ContractError("parameter name too long: " + name);
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    put_u8(out, static_cast<std::uint8_t>(t.rank()));
    for (int d = 0; d < t.rank(); ++d) {
      put_u32(out, static_cast<std::uint32_t>(t.dim(d)));
    }
    for (float v : t.values()) put_f32(out, v);
  }
  write_file_atomic(path, out);
}

// ---- run config --------------------------------------------------------------

namespace {

void collect_unknown_keys(const json& j, const std::string& prefix,
                          const std::set<std::string>& known,
                          std::vector<std::string>* warnings) {
  if (!warnings || !j.is_object()) return;
  for (const auto& [key, value] : j.items()) {
    if (!known.count(prefix + key)) {
      warnings->push_back("unknown config key: " + prefix + key);
    }
  }
}

template <typename T>
void load(const json& j, const char* key, T& out) {
  if (!j.is_object() || !j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key ") + key + " has the wrong type");
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text,
                           std::vector<std::string>* warnings) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("config: JSON does not parse: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("config: top level must be a JSON object");

  collect_unknown_keys(j, "", {"hsrnet", "train", "loss", "data", "srf", "ablation"},
                       warnings);
  const json hsrnet = j.value("hsrnet", json::object());
  const json train = j.value("train", json::object());
  const json loss = j.value("loss", json::object());
  const json data = j.value("data", json::object());
  const json srf = j.value("srf", json::object());
  const json ablation = j.value("ablation", json::object());
  collect_unknown_keys(hsrnet, "hsrnet.",
                       {"hsrnet.stages", "hsrnet.irn_features", "hsrnet.ssn_features_wide",
                        "hsrnet.ssn_features_narrow", "hsrnet.cam_reduction"},
                       warnings);
  collect_unknown_keys(train, "train.",
                       {"train.lr", "train.batch_size", "train.max_steps",
                        "train.patch_size", "train.seed", "train.eval_every"},
                       warnings);
  collect_unknown_keys(loss, "loss.", {"loss.alpha"}, warnings);
  collect_unknown_keys(data, "data.", {"data.hsi_paths", "data.split"}, warnings);
  collect_unknown_keys(srf, "srf.", {"srf.path", "srf.tau"}, warnings);
  collect_unknown_keys(ablation, "ablation.",
                       {"ablation.cam", "ablation.srf_grouping", "ablation.fast_loss"},
                       warnings);

  RunConfig cfg;
  load(hsrnet, "stages", cfg.stages);
  load(hsrnet, "irn_features", cfg.irn_features);
  load(hsrnet, "ssn_features_wide", cfg.ssn_features_wide);
  load(hsrnet, "ssn_features_narrow", cfg.ssn_features_narrow);
  load(hsrnet, "cam_reduction", cfg.cam_reduction);
  load(train, "lr", cfg.train.learning_rate);
  load(train, "batch_size", cfg.train.batch_size);
  load(train, "max_steps", cfg.train.max_steps);
  load(train, "patch_size", cfg.train.patch_size);
  load(train, "seed", cfg.train.seed);
  load(train, "eval_every", cfg.train.eval_every);
  load(loss, "alpha", cfg.loss.alpha);
  load(data, "hsi_paths", cfg.hsi_paths);
  load(data, "split", cfg.split);
  load(srf, "path", cfg.srf_path);
  load(srf, "tau", cfg.tau);
  load(ablation, "cam", cfg.ablation_cam);
  load(ablation, "srf_grouping", cfg.ablation_srf_grouping);
  load(ablation, "fast_loss", cfg.ablation_fast_loss);

  if (cfg.srf_path.empty()) throw ConfigError("config: srf.path is required");
  if (cfg.hsi_paths.empty()) throw ConfigError("config: data.hsi_paths is required");
  if (!(cfg.split >= 0.0 && cfg.split < 1.0)) {
    throw ConfigError("config: data.split must lie in [0, 1)");
  }
  if (!(cfg.tau > 0.0 && cfg.tau < 1.0)) {
    throw ConfigError("config: srf.tau must lie in (0, 1)");
  }
  if (cfg.loss.alpha < 0.0) throw ConfigError("config: loss.alpha must be non-negative");
  if (cfg.train.learning_rate <= 0.0) {
    throw ConfigError("config: train.lr must be positive");
  }
  if (cfg.train.batch_size < 1) throw ConfigError("config: train.batch_size must be >= 1");
  if (cfg.train.max_steps < 0) throw ConfigError("config: train.max_steps must be >= 0");
  if (cfg.train.patch_size < 1) throw ConfigError("config: train.patch_size must be >= 1");
  if (cfg.train.eval_every < 1) throw ConfigError("config: train.eval_every must be >= 1");
  return cfg;
}

RunConfig read_run_config(const std::string& path, std::vector<std::string>* warnings) {
  return parse_run_config(read_file_bytes(path, "config"), warnings);
}

std::string metrics_report_to_json(const MetricsReport& report) {
  json j{{"cc", report.cc},
         {"psnr_db", report.psnr_db},
         {"ssim", report.ssim},
         {"sam_degrees", report.sam_degrees},
         {"degenerate_cc_bands", report.degenerate_cc_bands}};
  return j.dump();
}

void write_text_atomic(const std::string& path, const std::string& content) {
  write_file_atomic(path, content);
}

}  // namespace hsr
