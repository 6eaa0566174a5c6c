#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hsr/data.hpp"
#include "hsr/errors.hpp"
#include "hsr/gradcheck.hpp"
#include "hsr/hqs.hpp"
#include "hsr/hsrnet.hpp"
#include "hsr/io.hpp"
#include "hsr/loss.hpp"
#include "hsr/metrics.hpp"
#include "hsr/spectral.hpp"
#include "hsr/train.hpp"

namespace {

std::string g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void clamp_unit(hsr::SpectralCube& cube) {
  for (float& v : cube.data) v = std::clamp(v, 0.0f, 1.0f);
}

std::string sibling_csv(const std::string& out_path, const char* suffix) {
  std::filesystem::path p(out_path);
  std::filesystem::path name = p.stem();
  name += suffix;
  return (p.parent_path() / name).string();
}

std::string history_csv(const std::vector<hsr::EvalPoint>& history) {
  std::string text = "step,train_loss,eval_cc,eval_psnr,eval_ssim,eval_sam\n";
  for (const auto& p : history) {
    text += std::to_string(p.step) + "," + g9(p.train_loss) + "," + g9(p.metrics.cc) +
            "," + g9(p.metrics.psnr_db) + "," + g9(p.metrics.ssim) + "," +
            g9(p.metrics.sam_degrees) + "\n";
  }
  return text;
}

std::vector<float> linspace(double lo, double hi, int n) {
  std::vector<float> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double t = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
    out[static_cast<size_t>(i)] = static_cast<float>(lo + t * (hi - lo));
  }
  return out;
}

bool same_grouping(const hsr::BandGrouping& a, const hsr::BandGrouping& b) {
  if (a.groups.size() != b.groups.size()) return false;
  for (size_t i = 0; i < a.groups.size(); ++i) {
    if (a.groups[i].hs_band_indices != b.groups[i].hs_band_indices ||
        a.groups[i].coverage_signature != b.groups[i].coverage_signature) {
      return false;
    }
  }
  return true;
}

struct SimulateArgs {
  std::string hsi, srf, out;
};

void run_simulate(const SimulateArgs& a) {
  hsr::SpectralCube hsi = hsr::read_cube(a.hsi);
  if (hsi.wavelengths_nm.empty()) {
    throw hsr::FormatError(
        "cube: " + a.hsi + " carries no wavelength table, cannot place the SRF");
  }
  hsr::Srf srf = hsr::read_srf(a.srf);
  hsr::DegradationOperator phi = hsr::build_phi(srf, hsi.wavelengths_nm);
  hsr::write_cube(a.out, hsr::apply_degradation(phi, hsi));
}

struct SynthArgs {
  std::uint32_t seed = 0;
  int width = 64, height = 64, channels = 16, endmembers = 4, ms_bands = 3;
  std::string out, srf_out;
};

void run_synth(const SynthArgs& a) {
  hsr::write_cube(a.out,
                  hsr::synth_scene(a.seed, a.width, a.height, a.channels, a.endmembers));
  if (!a.srf_out.empty()) hsr::write_srf(a.srf_out, hsr::synth_srf(a.ms_bands));
}

struct TrainArgs {
  std::string config, out;
};

void run_train(const TrainArgs& a) {
  std::vector<std::string> warnings;
  hsr::RunConfig cfg = hsr::read_run_config(a.config, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

  hsr::Srf srf = hsr::read_srf(cfg.srf_path);
  std::vector<hsr::SpectralCube> scenes;
  for (const auto& path : cfg.hsi_paths) scenes.push_back(hsr::read_cube(path));
  const hsr::SpectralCube& first = scenes.front();
  if (first.wavelengths_nm.empty()) {
    throw hsr::FormatError("cube: " + cfg.hsi_paths.front() +
                           " carries no wavelength table, cannot place the SRF");
  }
  for (size_t i = 1; i < scenes.size(); ++i) {
    if (scenes[i].channels != first.channels ||
        scenes[i].wavelengths_nm != first.wavelengths_nm) {
      throw hsr::ConfigError("config: scene " + cfg.hsi_paths[i] +
                             " disagrees with the first scene's band layout");
    }
  }

  hsr::DegradationOperator phi = hsr::build_phi(srf, first.wavelengths_nm);

  hsr::HsrnetConfig net;
  net.stages = cfg.stages;
  net.hs_channels = first.channels;
  net.ms_channels = srf.num_bands;
  net.irn_features = cfg.irn_features;
  net.ssn_features_wide = cfg.ssn_features_wide;
  net.ssn_features_narrow = cfg.ssn_features_narrow;
  net.cam_reduction = cfg.cam_reduction;
  net.use_cam = cfg.ablation_cam;
  net.use_srf_grouping = cfg.ablation_srf_grouping;
  net.grouping = hsr::group_bands(phi, cfg.tau);
  net.hs_wavelengths_nm = first.wavelengths_nm;
  net.seed = cfg.train.seed;
  net.validate();

  hsr::LossConfig loss_cfg = cfg.loss;
  if (!cfg.ablation_fast_loss) loss_cfg.alpha = 0.0;

  std::vector<hsr::CubePair> pairs;
  for (auto& scene : scenes) {
    hsr::CubePair p;
    p.msi = hsr::apply_degradation(phi, scene);
    p.hsi = std::move(scene);
    pairs.push_back(std::move(p));
  }
  const int total = static_cast<int>(pairs.size());
  int n_eval = static_cast<int>(std::llround(cfg.split * total));
  n_eval = std::clamp(n_eval, 0, total - 1);
  std::vector<hsr::CubePair> train_pairs(pairs.begin(), pairs.end() - n_eval);
  std::vector<hsr::CubePair> eval_pairs(pairs.end() - n_eval, pairs.end());

  try {
    hsr::TrainResult result =
        hsr::train(train_pairs, eval_pairs, net, cfg.train, loss_cfg);
    hsr::write_checkpoint(a.out, net, result.params);
    hsr::write_text_atomic(sibling_csv(a.out, "_history.csv"),
                           history_csv(result.history));
  } catch (const hsr::TrainDivergence& e) {
    // Preserve the most recent healthy state before reporting the failure.
    hsr::write_checkpoint(a.out, net, e.last_good.params);
    hsr::write_text_atomic(sibling_csv(a.out, "_history.csv"),
                           history_csv(e.last_good.history));
    throw;
  }
}

struct InferArgs {
  std::string model, msi, srf, out;
};

void run_infer(const InferArgs& a) {
  hsr::Checkpoint ckpt = hsr::read_checkpoint(a.model);
  hsr::SpectralCube msi = hsr::read_cube(a.msi);
  hsr::Srf srf = hsr::read_srf(a.srf);
  if (srf.num_bands != ckpt.config.ms_channels) {
    throw hsr::ConfigError("config: SRF has " + std::to_string(srf.num_bands) +
                           " bands but the model expects " +
                           std::to_string(ckpt.config.ms_channels));
  }
  if (msi.channels != ckpt.config.ms_channels) {
    throw hsr::ConfigError("config: MSI has " + std::to_string(msi.channels) +
                           " bands but the model expects " +
                           std::to_string(ckpt.config.ms_channels));
  }
  hsr::DegradationOperator phi;
  try {
    phi = hsr::build_phi(srf, ckpt.config.hs_wavelengths_nm);
  } catch (const hsr::DegenerateInputError& e) {
    throw hsr::ConfigError(std::string("config: SRF does not cover the model's "
                                       "wavelength grid: ") +
                           e.what());
  }
  if (!same_grouping(hsr::group_bands(phi), ckpt.config.grouping)) {
    std::cerr << "warning: SRF band grouping differs from the one the model was "
                 "trained with\n";
  }
  hsr::SpectralCube out = hsr::hsrnet_forward(msi, ckpt.config, ckpt.params);
  clamp_unit(out);
  hsr::write_cube(a.out, out);
}

struct EvalArgs {
  std::string ref, test, json;
};

void run_eval(const EvalArgs& a) {
  hsr::SpectralCube ref = hsr::read_cube(a.ref);
  hsr::SpectralCube test = hsr::read_cube(a.test);
  const std::string json = hsr::metrics_report_to_json(hsr::compute_metrics(test, ref));
  if (!a.json.empty()) hsr::write_text_atomic(a.json, json + "\n");
  std::cout << json << "\n";
}

struct HqsArgs {
  std::string msi, srf, out;
  double epsilon = 0.1, mu = 0.1, lambda = 0.1, tol = 0.0;
  int iters = 100, channels = 31;
  double wl_min = 0.0, wl_max = 0.0;
  std::string prior = "smoothing";
};

void run_hqs(const HqsArgs& a) {
  hsr::SpectralCube msi = hsr::read_cube(a.msi);
  hsr::Srf srf = hsr::read_srf(a.srf);
  if (srf.num_bands != msi.channels) {
    throw hsr::ConfigError("config: SRF has " + std::to_string(srf.num_bands) +
                           " bands but the MSI has " + std::to_string(msi.channels));
  }
  const double lo = a.wl_min > 0.0 ? a.wl_min : srf.sample_wavelengths_nm.front();
  const double hi = a.wl_max > 0.0 ? a.wl_max : srf.sample_wavelengths_nm.back();
  if (!(hi > lo)) throw hsr::ConfigError("config: wavelength range is empty");
  hsr::DegradationOperator phi = hsr::build_phi(srf, linspace(lo, hi, a.channels));

  hsr::HqsConfig cfg;
  cfg.epsilon = a.epsilon;
  cfg.mu = a.mu;
  cfg.lambda = a.lambda;
  cfg.max_iters = a.iters;
  cfg.tol = a.tol;
  cfg.prior = a.prior == "identity" ? hsr::HqsPrior::kIdentity
                                    : hsr::HqsPrior::kSpatialSpectralSmoothing;

  hsr::HqsResult result = hsr::solve_hqs(msi, phi, cfg);
  hsr::write_cube(a.out, result.x);
  std::string trace = "iter,fidelity,update_norm\n";
  for (const auto& p : result.trace) {
    trace += std::to_string(p.iter) + "," + g9(p.fidelity) + "," + g9(p.update_norm) +
             "\n";
  }
  hsr::write_text_atomic(sibling_csv(a.out, "_trace.csv"), trace);
}

void run_gradcheck_cmd(std::uint32_t seed) {
  const hsr::GradCheckReport report = hsr::run_gradcheck(seed);
  for (const auto& c : report.cases) {
    std::printf("%-4s %-28s max_rel_err=%.3e tol=%.0e coords=%d rejected=%d\n",
                c.passed ? "ok" : "FAIL", c.name.c_str(), c.max_rel_err, c.tolerance,
                c.coords_checked, c.coords_rejected);
  }
  std::printf("%zu checks, %s, %.2f s\n", report.cases.size(),
              report.all_passed() ? "all passed" : "FAILURES", report.seconds);
  if (!report.all_passed()) throw hsr::Error("gradient check failed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral super-resolution toolkit"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Degrade an HSI to an MSI through an SRF");
  c_sim->add_option("--hsi", sim.hsi, "Input HSI cube")->required();
  c_sim->add_option("--srf", sim.srf, "SRF table (CSV)")->required();
  c_sim->add_option("--out", sim.out, "Output MSI cube")->required();
  c_sim->callback([&] { run_simulate(sim); });

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic HSI scene");
  c_synth->add_option("--seed", synth.seed, "RNG seed")->required();
  c_synth->add_option("--width", synth.width, "Scene width");
  c_synth->add_option("--height", synth.height, "Scene height");
  c_synth->add_option("--channels", synth.channels, "Band count");
  c_synth->add_option("--endmembers", synth.endmembers, "Endmember count (>= 2)");
  c_synth->add_option("--out", synth.out, "Output HSI cube")->required();
  c_synth->add_option("--srf-out", synth.srf_out, "Also write a Gaussian SRF here");
  c_synth->add_option("--ms-bands", synth.ms_bands, "Band count for --srf-out");
  c_synth->callback([&] { run_synth(synth); });

  TrainArgs train_args;
  auto* c_train = app.add_subcommand("train", "Train a reconstruction network");
  c_train->add_option("--config", train_args.config, "Run configuration JSON")
      ->required();
  c_train->add_option("--out", train_args.out, "Output checkpoint")->required();
  c_train->callback([&] { run_train(train_args); });

  InferArgs infer;
  auto* c_infer = app.add_subcommand("infer", "Reconstruct an HSI from an MSI");
  c_infer->add_option("--model", infer.model, "Checkpoint")->required();
  c_infer->add_option("--msi", infer.msi, "Input MSI cube")->required();
  c_infer->add_option("--srf", infer.srf, "SRF table (CSV)")->required();
  c_infer->add_option("--out", infer.out, "Output HSI cube")->required();
  c_infer->callback([&] { run_infer(infer); });

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Score a reconstruction against truth");
  c_eval->add_option("--ref", eval.ref, "Ground-truth cube")->required();
  c_eval->add_option("--test", eval.test, "Reconstructed cube")->required();
  c_eval->add_option("--json", eval.json, "Write the report here");
  c_eval->callback([&] { run_eval(eval); });

  HqsArgs hqs;
  auto* c_hqs = app.add_subcommand("hqs", "Classical splitting baseline");
  c_hqs->add_option("--msi", hqs.msi, "Input MSI cube")->required();
  c_hqs->add_option("--srf", hqs.srf, "SRF table (CSV)")->required();
  c_hqs->add_option("--epsilon", hqs.epsilon, "Gradient step size");
  c_hqs->add_option("--mu", hqs.mu, "Coupling weight");
  c_hqs->add_option("--lambda", hqs.lambda, "Smoothing strength");
  c_hqs->add_option("--iters", hqs.iters, "Iteration count");
  c_hqs->add_option("--tol", hqs.tol, "Early stop on relative update norm");
  c_hqs->add_option("--channels", hqs.channels, "Bands in the reconstruction");
  c_hqs->add_option("--wl-min", hqs.wl_min, "Grid start (nm, default: SRF start)");
  c_hqs->add_option("--wl-max", hqs.wl_max, "Grid end (nm, default: SRF end)");
  c_hqs->add_option("--prior", hqs.prior, "identity | smoothing")
      ->check(CLI::IsMember({"identity", "smoothing"}));
  c_hqs->add_option("--out", hqs.out, "Output HSI cube")->required();
  c_hqs->callback([&] { run_hqs(hqs); });

  std::uint32_t gc_seed = 7;
  auto* c_gc = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  c_gc->add_option("--seed", gc_seed, "RNG seed");
  c_gc->callback([&] { run_gradcheck_cmd(gc_seed); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  } catch (const hsr::FormatError& e) {
    std::cerr << "error: format: " << e.what() << "\n";
    return 3;
  } catch (const hsr::ConfigError& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 2;
  } catch (const hsr::DivergenceError& e) {
    std::cerr << "error: divergence: " << e.what() << "\n";
    return 4;
  } catch (const hsr::Error& e) {
    std::cerr << "error: runtime: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
