// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

#include "atdc/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <optional>
#include <sstream>

#include "atdc/dataset.hpp"
#include "atdc/error.hpp"
#include "atdc/gradcheck.hpp"
#include "atdc/metrics.hpp"
#include "atdc/physics.hpp"
#include "atdc/train.hpp"
#include "fileio.hpp"

namespace atdc {
namespace {

namespace fs = std::filesystem;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound:
    case ErrorCode::kUnsupportedFormat:
    case ErrorCode::kCorruptData:
    case ErrorCode::kIoFailure:
    case ErrorCode::kChecksumMismatch:
    case ErrorCode::kVersionUnsupported:
    case ErrorCode::kDatasetEmpty:
      return kExitIo;
    case ErrorCode::kNonFiniteLoss:
    case ErrorCode::kNotScalar:
    case ErrorCode::kDetachedGraph:
      return kExitNumeric;
    default:
      return kExitUsage;
  }
}

std::array<double, 3> triple(const std::vector<double>& v, const char* flag) {
  require(v.size() == 3, ErrorCode::kInvalidArgument, std::string(flag) + " needs three values r,g,b");
  return {v[0], v[1], v[2]};
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::kIoFailure, "cannot create " + dir.string() + ": " + ec.message());
}

std::string with_png(const std::string& name) { return fs::path(name).replace_extension(".png").string(); }

struct SimulateArgs {
  std::string input, out, depth;
  int procedural = 0, size = 64;
  std::vector<double> beta, airlight;
  std::uint64_t seed = 0;
};

void cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  std::optional<DepthKind> kind;
  if (!a.depth.empty()) kind = parse_depth_kind(a.depth);
  std::optional<std::array<double, 3>> beta, airlight;
  if (!a.beta.empty()) beta = triple(a.beta, "--beta");
  if (!a.airlight.empty()) airlight = triple(a.airlight, "--airlight");
  const WaterRange range;

  std::vector<ScenePair> scenes;
  if (a.procedural > 0) {
    scenes = make_synthetic_dataset(a.seed, a.procedural, a.size, range, kind).pairs;
  } else {
    const std::vector<NamedImage> inputs = load_image_dir(a.input);
    require(!inputs.empty(), ErrorCode::kDatasetEmpty, "no images in " + a.input);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      Rng rng({a.seed, static_cast<std::uint64_t>(i)});
      ScenePair p;
      p.name = fs::path(inputs[i].name).stem().string();
      p.clean = inputs[i].image;
      p.scene = sample_scene(rng, p.name, range, kind);
      scenes.push_back(std::move(p));
    }
  }

  nlohmann::ordered_json manifest;
  manifest["seed"] = a.seed;
  manifest["images"] = nlohmann::ordered_json::array();
  for (auto& p : scenes) {
    SceneRecord& s = *p.scene;
    if (beta) s.water.beta = *beta;
    if (airlight) s.water.airlight = *airlight;
    s.water.validate();
    p.degraded = render_degraded(p.clean, s);
    nlohmann::ordered_json e;
    e["name"] = with_png(p.name);
    e["beta"] = s.water.beta;
    e["airlight"] = s.water.airlight;
    e["depth"] = std::string(depth_kind_name(s.depth_kind));
    e["d_max"] = s.d_max;
    e["depth_seed"] = s.depth_seed;
    manifest["images"].push_back(std::move(e));
  }

  const fs::path root(a.out);
  make_dir(root / "degraded");
  make_dir(root / "clean");
  for (const auto& p : scenes) {
    save_image(p.degraded, root / "degraded" / with_png(p.name));
    save_image(p.clean, root / "clean" / with_png(p.name));
  }
  io::write_text(root / "manifest.json", manifest.dump(2) + "\n");
  out << "wrote " << scenes.size() << " scenes to " << root.string() << "\n";
}

struct RmtArgs {
  std::string input, out;
  int patch = kDefaultRmtPatch;
};

void cmd_rmt(const RmtArgs& a, std::ostream& out) {
  require(a.patch >= 1 && a.patch % 2 == 1, ErrorCode::kInvalidArgument, "--patch must be a positive odd number");
  save_gray(estimate_rmt(load_image(a.input), a.patch), a.out);
  out << "wrote " << a.out << "\n";
}

struct TrainArgs {
  std::string data, out, resume, log;
  int synthetic = 0, size = 64;
  std::uint64_t data_seed = 0;
  bool keep_epochs = false, no_ca = false, no_fusion = false, no_atm = false, no_dcm = false, no_flips = false;
  TrainConfig cfg;
};

void cmd_train(TrainArgs a, std::ostream& out) {
  a.cfg.model.use_ca = !a.no_ca;
  a.cfg.model.use_fusion = !a.no_fusion;
  a.cfg.model.use_atm = !a.no_atm;
  a.cfg.model.use_dcm = !a.no_dcm;
  a.cfg.flips = !a.no_flips;
  a.cfg.validate();
  out << "# model\n" << a.cfg.model.descriptor();

  const PairedDataset data =
      a.synthetic > 0 ? make_synthetic_dataset(a.data_seed, a.synthetic, a.size) : load_paired_dir(a.data);
  TrainOptions opts;
  if (!a.resume.empty()) opts.resume_from = a.resume;
  if (!a.log.empty()) opts.log_path = a.log;
  opts.keep_epoch_checkpoints = a.keep_epochs;
  opts.on_epoch = [&](const EpochRecord& r) { out << r.to_json() << "\n" << std::flush; };
  train(a.cfg, data, a.out, opts);
  out << "wrote " << a.out << "\n";
}

struct EnhanceArgs {
  std::string input, ckpt, out;
  int patch = kDefaultRmtPatch;
};

void cmd_enhance(const EnhanceArgs& a, std::ostream& out) {
  ModelParams<float> params = load_checkpoint(a.ckpt).params;
  const std::vector<NamedImage> inputs = load_image_dir(a.input);
  require(!inputs.empty(), ErrorCode::kDatasetEmpty, "no images in " + a.input);
  make_dir(a.out);
  for (const auto& img : inputs) save_image(enhance(img.image, params, a.patch), fs::path(a.out) / img.name);
  out << "enhanced " << inputs.size() << " images into " << a.out << "\n";
}

struct EvaluateArgs {
  std::string pred, ref, metrics, report;
};

void cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const MetricSet set = a.metrics.empty() ? (a.ref.empty() ? MetricSet::parse("uiqm,uciqe") : MetricSet{})
                                          : MetricSet::parse(a.metrics);
  require(a.ref.empty() ? !set.needs_reference() : true, ErrorCode::kInvalidArgument,
          "metrics " + set.str() + " need --ref; only uiqm and uciqe are reference-free");
  std::vector<std::string> names;
  std::vector<Image> preds, refs;
  for (auto& img : load_image_dir(a.pred)) {
    names.push_back(img.name);
    preds.push_back(std::move(img.image));
    if (!a.ref.empty()) refs.push_back(load_image(fs::path(a.ref) / names.back()));
  }
  require(!preds.empty(), ErrorCode::kDatasetEmpty, "no images in " + a.pred);
  const std::string json = score_images(names, preds, a.ref.empty() ? nullptr : &refs, set).to_json() + "\n";
  if (!a.report.empty()) {
    io::write_text(a.report, json);
    out << "wrote " << a.report << "\n";
  } else {
    out << json;
  }
}

struct GradcheckArgs {
  std::uint64_t seed = 0;
  std::string precision = "double";
  int samples = GradcheckOptions{}.samples;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  GradcheckOptions opts;
  opts.seed = a.seed;
  opts.samples = a.samples;
  opts.precision = a.precision == "single" ? Precision::kSingle : Precision::kDouble;
  const GradcheckReport report = run_gradcheck(opts);
  out << report.str() << "threshold " << report.threshold << ": " << (report.passed() ? "PASS" : "FAIL") << "\n";
  return report.passed() ? kExitOk : kExitCheckFailed;
}

std::string trim(std::string_view v) {
  const auto b = v.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  return std::string(v.substr(b, v.find_last_not_of(" \t\r") - b + 1));
}

bool given(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) { return a == flag || a.starts_with(flag + "="); });
}

// Splices the subcommand's --config file into the argument list as flags,
// skipping keys already set on the command line. Accepts its own resolved
// config printout: quoted strings, [a, b, c] lists and # comments.
std::vector<std::string> expand_config(const CLI::App& app, std::vector<std::string> args) {
  if (args.empty()) return args;
  const CLI::App* sub = app.get_subcommand_no_throw(args.front());
  if (sub == nullptr) return args;
  std::string file;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) file = args[i + 1];
    if (args[i].starts_with("--config=")) file = args[i].substr(9);
  }
  if (file.empty()) return args;

  const std::vector<std::uint8_t> bytes = io::read_file(file);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::vector<std::string> extra;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::kInvalidArgument,
            file + ":" + std::to_string(line_no) + ": expected key=value");
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    std::replace(key.begin(), key.end(), '_', '-');
    // Nested config files are not followed.
    if (key == "config") continue;
    const std::string flag = "--" + key;
    const CLI::Option* opt = sub->get_option_no_throw(flag);
    require(opt != nullptr, ErrorCode::kInvalidArgument,
            file + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (value.size() >= 2 && ((value.front() == '"' && value.back() == '"') ||
                              (value.front() == '[' && value.back() == ']'))) {
      value = value.substr(1, value.size() - 2);
    }
    value.erase(std::remove(value.begin(), value.end(), ' '), value.end());
    if (value.empty() || given(args, flag)) continue;
    if (opt->get_expected_min() == 0) {
      if (CLI::detail::to_flag_value(value) > 0) extra.push_back(flag);
    } else {
      extra.push_back(flag);
      extra.push_back(value);
    }
  }
  args.insert(args.begin() + 1, extra.begin(), extra.end());
  return args;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Underwater image enhancement: simulation, training and evaluation"};
  app.require_subcommand(1);
  const auto subcommand = [&](const char* name, const char* help) {
    CLI::App* s = app.add_subcommand(name, help);
    s->add_option("--config", "Flat key=value file; flags on the command line take precedence");
    return s;
  };

  SimulateArgs sim;
  CLI::App* simulate = subcommand("simulate", "Degrade clean images with seeded water and depth");
  auto* sim_input = simulate->add_option("--input", sim.input, "Directory of clean images");
  auto* sim_proc = simulate->add_option("--procedural", sim.procedural, "Generate this many clean scenes")
                       ->check(CLI::PositiveNumber);
  sim_input->excludes(sim_proc);
  simulate->add_option("--size", sim.size, "Procedural scene size")->capture_default_str()->check(CLI::Range(16, 4096));
  simulate->add_option("--out", sim.out, "Output directory")->required();
  simulate->add_option("--beta", sim.beta, "Attenuation r,g,b (sampled per scene when omitted)")->delimiter(',');
  simulate->add_option("--airlight", sim.airlight, "Background light r,g,b (sampled when omitted)")->delimiter(',');
  simulate->add_option("--depth", sim.depth, "ramp, radial or noise (sampled when omitted)")
      ->check(CLI::IsMember({"ramp", "radial", "noise"}));
  simulate->add_option("--seed", sim.seed)->capture_default_str();

  RmtArgs rmt;
  CLI::App* rmt_cmd = subcommand("rmt", "Write the dark-channel RMT map of one image");
  rmt_cmd->add_option("--input", rmt.input)->required();
  rmt_cmd->add_option("--out", rmt.out)->required();
  rmt_cmd->add_option("--patch", rmt.patch)->capture_default_str();

  TrainArgs tr;
  CLI::App* train_cmd = subcommand("train", "Train a model and write a checkpoint");
  auto* tr_data = train_cmd->add_option("--data", tr.data, "Directory with degraded/ and clean/");
  auto* tr_syn = train_cmd->add_option("--synthetic", tr.synthetic, "Train on this many synthetic pairs")
                     ->check(CLI::PositiveNumber);
  tr_data->excludes(tr_syn);
  train_cmd->add_option("--size", tr.size, "Synthetic image size")->capture_default_str();
  train_cmd->add_option("--data-seed", tr.data_seed, "Synthetic dataset seed")->capture_default_str();
  train_cmd->add_option("--out", tr.out, "Checkpoint path")->required();
  train_cmd->add_option("--epochs", tr.cfg.epochs)->capture_default_str();
  train_cmd->add_option("--lr", tr.cfg.learning_rate)->capture_default_str();
  train_cmd->add_option("--batch-size", tr.cfg.batch_size)->capture_default_str();
  train_cmd->add_option("--crop", tr.cfg.crop_size)->capture_default_str();
  train_cmd->add_option("--seed", tr.cfg.seed)->capture_default_str();
  train_cmd->add_option("--patch", tr.cfg.rmt_patch, "RMT patch size")->capture_default_str();
  train_cmd->add_option("--loss-alpha", tr.cfg.weights.alpha)->capture_default_str();
  train_cmd->add_option("--loss-beta", tr.cfg.weights.beta)->capture_default_str();
  train_cmd->add_option("--loss-gamma", tr.cfg.weights.gamma)->capture_default_str();
  train_cmd->add_option("--base-channels", tr.cfg.model.base_channels)->capture_default_str();
  train_cmd->add_option("--atm-channels", tr.cfg.model.atm_channels)->capture_default_str();
  train_cmd->add_option("--ca-reduction", tr.cfg.model.ca_reduction)->capture_default_str();
  train_cmd->add_option("--dcm-hidden", tr.cfg.model.dcm_hidden)->capture_default_str();
  train_cmd->add_option("--encoder-blocks", tr.cfg.model.encoder_blocks)->capture_default_str();
  train_cmd->add_option("--decoder-blocks", tr.cfg.model.decoder_blocks)->capture_default_str();
  train_cmd->add_flag("--no-ca", tr.no_ca, "Drop channel attention");
  train_cmd->add_flag("--no-fusion", tr.no_fusion, "Drop the fused skip path");
  train_cmd->add_flag("--no-atm", tr.no_atm, "Drop the transmission branch");
  train_cmd->add_flag("--no-dcm", tr.no_dcm, "Drop the colour-correction branch");
  train_cmd->add_flag("--no-flips", tr.no_flips, "Disable horizontal flip augmentation");
  train_cmd->add_option("--resume", tr.resume, "Continue from this checkpoint");
  train_cmd->add_option("--log", tr.log, "JSONL epoch log");
  train_cmd->add_flag("--keep-epochs", tr.keep_epochs, "Keep one checkpoint per epoch");

  EnhanceArgs en;
  CLI::App* enhance_cmd = subcommand("enhance", "Enhance every image in a directory");
  enhance_cmd->add_option("--input", en.input)->required();
  enhance_cmd->add_option("--ckpt", en.ckpt)->required();
  enhance_cmd->add_option("--out", en.out)->required();
  enhance_cmd->add_option("--patch", en.patch, "RMT patch size")->capture_default_str();

  EvaluateArgs ev;
  CLI::App* evaluate_cmd = subcommand("evaluate", "Score images, optionally against references");
  evaluate_cmd->add_option("--pred", ev.pred)->required();
  evaluate_cmd->add_option("--ref", ev.ref, "References with matching file names");
  evaluate_cmd->add_option("--metrics", ev.metrics, "Subset of mse,psnr,ssim,uiqm,uciqe");
  evaluate_cmd->add_option("--report", ev.report, "Write the JSON report here instead of stdout");

  GradcheckArgs gc;
  CLI::App* gradcheck_cmd = subcommand("gradcheck", "Compare analytic gradients with central differences");
  gradcheck_cmd->add_option("--seed", gc.seed)->capture_default_str();
  gradcheck_cmd->add_option("--precision", gc.precision)->capture_default_str()->check(
      CLI::IsMember({"double", "single"}));
  gradcheck_cmd->add_option("--samples", gc.samples)->capture_default_str()->check(CLI::PositiveNumber);

  std::vector<std::string> rest;
  try {
    rest = expand_config(app, std::vector<std::string>(args.begin() + (args.empty() ? 0 : 1), args.end()));
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.code());
  }
  // CLI11 consumes the argument vector back to front.
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    out << "# " << sub->get_name() << " resolved config\n" << sub->config_to_str(true, false) << std::flush;
    if (sub == simulate) {
      require(!sim.input.empty() || sim.procedural > 0, ErrorCode::kInvalidArgument,
              "simulate needs --input or --procedural");
      cmd_simulate(sim, out);
    } else if (sub == rmt_cmd) {
      cmd_rmt(rmt, out);
    } else if (sub == train_cmd) {
      require(!tr.data.empty() || tr.synthetic > 0, ErrorCode::kInvalidArgument, "train needs --data or --synthetic");
      cmd_train(tr, out);
    } else if (sub == enhance_cmd) {
      cmd_enhance(en, out);
    } else if (sub == evaluate_cmd) {
      cmd_evaluate(ev, out);
    } else {
      return cmd_gradcheck(gc, out);
    }
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace atdc
