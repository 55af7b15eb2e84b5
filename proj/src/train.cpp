// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

#include "atdc/train.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "atdc/error.hpp"
#include "atdc/optim.hpp"

namespace atdc {
namespace {

Image flipped(const Image& img) {
  const int h = img.height(), w = img.width();
  std::vector<float> out(img.data().size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        out[(static_cast<std::size_t>(y) * w + x) * 3 + c] = img.at(y, w - 1 - x, c);
      }
    }
  }
  return Image(h, w, std::move(out));
}

struct Batch {
  std::vector<Image> degraded, clean;
  std::vector<std::string> names;
};

Batch draw_batch(const PairedDataset& data, std::span<const std::size_t> indices, const TrainConfig& cfg, Rng& rng) {
  Batch b;
  for (std::size_t idx : indices) {
    const ScenePair& p = data.pairs[idx];
    const int h = p.degraded.height(), w = p.degraded.width();
    require(h >= cfg.crop_size && w >= cfg.crop_size, ErrorCode::kInvalidArgument,
            "image " + p.name + " is smaller than the crop size " + std::to_string(cfg.crop_size));
    const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(h - cfg.crop_size + 1)));
    const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(w - cfg.crop_size + 1)));
    const bool flip = cfg.flips && rng.below(2) == 1;
    Image d = p.degraded.crop(y0, x0, cfg.crop_size, cfg.crop_size);
    Image c = p.clean.crop(y0, x0, cfg.crop_size, cfg.crop_size);
    if (flip) {
      d = flipped(d);
      c = flipped(c);
    }
    b.degraded.push_back(std::move(d));
    b.clean.push_back(std::move(c));
    b.names.push_back(p.name);
  }
  return b;
}

std::filesystem::path epoch_path(const std::filesystem::path& out, int epoch) {
  char tag[32];
  std::snprintf(tag, sizeof tag, ".epoch%04d", epoch);
  return out.parent_path() / (out.stem().string() + tag + out.extension().string());
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
  return s;
}

ModelParams<float> load_model(const std::filesystem::path& checkpoint, const EvalOptions& options) {
  Checkpoint ck = load_checkpoint(checkpoint);
  if (options.expected_model) {
    require(ck.params.config == *options.expected_model, ErrorCode::kConfigMismatch,
            "checkpoint model differs from the requested configuration:\n" + ck.params.config.descriptor());
  }
  return std::move(ck.params);
}

}  // namespace

void TrainConfig::validate() const {
  require(epochs >= 0, ErrorCode::kInvalidArgument, "epochs must be >= 0");
  require(batch_size >= 1, ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  require(crop_size >= 16 && crop_size >= kSsimWindow, ErrorCode::kInvalidArgument, "crop_size must be >= 16");
  require(std::isfinite(learning_rate) && learning_rate > 0.0, ErrorCode::kInvalidArgument,
          "learning_rate must be > 0");
  require(rmt_patch >= 1 && rmt_patch % 2 == 1, ErrorCode::kInvalidArgument, "rmt_patch must be odd");
  weights.validate();
  model.validate();
}

std::string TrainConfig::descriptor() const {
  std::ostringstream os;
  os.precision(17);
  os << "seed=" << seed << "\n"
     << "epochs=" << epochs << "\n"
     << "batch_size=" << batch_size << "\n"
     << "learning_rate=" << learning_rate << "\n"
     << "crop_size=" << crop_size << "\n"
     << "flips=" << flips << "\n"
     << "rmt_patch=" << rmt_patch << "\n"
     << "loss_alpha=" << weights.alpha << "\n"
     << "loss_beta=" << weights.beta << "\n"
     << "loss_gamma=" << weights.gamma << "\n"
     << "extractor=" << extractor.descriptor() << "\n";
  std::istringstream model_lines(model.descriptor());
  for (std::string line; std::getline(model_lines, line);) os << "model." << line << "\n";
  return os.str();
}

std::string EpochRecord::to_json() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["batches"] = batches;
  j["loss"] = loss;
  j["l2"] = l2;
  j["perceptual"] = perceptual;
  j["ssim"] = ssim;
  return j.dump();
}

std::string TrainLog::to_jsonl() const {
  std::string s;
  for (const auto& e : epochs) s += e.to_json() + "\n";
  return s;
}

TrainLog train(const TrainConfig& config, const PairedDataset& data, const std::filesystem::path& out,
               const TrainOptions& options) {
  config.validate();
  require(!data.empty(), ErrorCode::kDatasetEmpty, "training dataset is empty");

  ModelParams<float> params;
  AdamState<float> adam;
  Rng rng({config.seed, 0x747261696eull});
  int start_epoch = 0;
  if (options.resume_from) {
    Checkpoint ck = load_checkpoint(*options.resume_from);
    require(ck.params.config == config.model, ErrorCode::kConfigMismatch,
            "resume checkpoint was trained with a different model configuration");
    params = std::move(ck.params);
    adam = std::move(ck.optimizer);
    rng.restore(ck.meta.rng_state);
    start_epoch = static_cast<int>(ck.meta.epoch);
  } else {
    params = init_params<float>(config.seed, config.model);
  }

  const FeatureExtractor<float> phi(config.extractor);
  const AdamOptions opts{.lr = config.learning_rate};
  const std::string train_desc = config.descriptor();
  const auto save = [&](int epoch) {
    const CheckpointMeta meta{static_cast<std::uint64_t>(epoch), rng.state(), train_desc};
    save_checkpoint(params, adam, meta, out);
    if (options.keep_epoch_checkpoints && epoch > 0) save_checkpoint(params, adam, meta, epoch_path(out, epoch));
  };

  std::ofstream log;
  if (options.log_path) {
    log.open(*options.log_path, options.resume_from ? std::ios::app : std::ios::trunc);
    require(static_cast<bool>(log), ErrorCode::kIoFailure, "cannot open log " + options.log_path->string());
  }

  std::vector<Tensor<float>> tensors;
  for (auto& nt : params.parameters()) tensors.push_back(nt.tensor);

  TrainLog result;
  if (start_epoch >= config.epochs) save(start_epoch);
  for (int epoch = start_epoch + 1; epoch <= config.epochs; ++epoch) {
    const std::vector<std::size_t> order = shuffled_indices(data.size(), rng);
    EpochRecord rec;
    rec.epoch = epoch;
    for (std::size_t first = 0; first < order.size(); first += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), order.size() - first);
      const Batch batch = draw_batch(data, std::span(order).subspan(first, count), config, rng);

      Tape<float> tape;
      const Tensor<float> x = images_to_tensor<float>(batch.degraded);
      const Tensor<float> y = images_to_tensor<float>(batch.clean);
      Tensor<float> rmt, means;
      if (config.model.use_atm) {
        std::vector<GrayMap> maps;
        for (const auto& img : batch.degraded) maps.push_back(estimate_rmt(img, config.rmt_patch));
        rmt = graymaps_to_tensor<float>(maps);
      }
      if (config.model.use_dcm) means = means_to_tensor<float>(batch.degraded);
      const ForwardTrace<float> tr = network_forward(tape, params, x, rmt, means, NormMode::kTrain);
      const LossTerms<float> terms = total_loss(tape, tr.output, y, phi, config.weights);
      const float total = terms.total.item();
      require(std::isfinite(total), ErrorCode::kNonFiniteLoss,
              "epoch " + std::to_string(epoch) + ": non-finite loss on batch [" + join(batch.names) + "] (l2 " +
                  std::to_string(terms.l2.item()) + ", perceptual " + std::to_string(terms.perceptual.item()) +
                  ", ssim " + std::to_string(terms.ssim.item()) + ")");

      for (auto& t : tensors) t.zero_grad();
      tape.backward(terms.total);
      adam_step(std::span(tensors), adam, opts);

      rec.loss += total;
      rec.l2 += terms.l2.item();
      rec.perceptual += terms.perceptual.item();
      rec.ssim += terms.ssim.item();
      ++rec.batches;
    }
    rec.loss /= rec.batches;
    rec.l2 /= rec.batches;
    rec.perceptual /= rec.batches;
    rec.ssim /= rec.batches;
    result.epochs.push_back(rec);
    save(epoch);
    if (log.is_open()) log << rec.to_json() << "\n" << std::flush;
    if (options.on_epoch) options.on_epoch(rec);
  }
  return result;
}

Image enhance(const Image& img, ModelParams<float>& params, int rmt_patch) {
  return model_forward(img, params, rmt_patch).first;
}

MetricReport evaluate(const std::filesystem::path& checkpoint, const PairedDataset& data, const EvalOptions& options) {
  ModelParams<float> params = load_model(checkpoint, options);
  std::vector<std::string> names;
  std::vector<Image> preds, refs;
  for (const auto& p : data.pairs) {
    names.push_back(p.name);
    preds.push_back(enhance(p.degraded, params, options.rmt_patch));
    refs.push_back(p.clean);
  }
  MetricReport report = score_images(names, preds, &refs, options.metrics);
  report.config["checkpoint"] = checkpoint.filename().string();
  return report;
}

MetricReport evaluate(const std::filesystem::path& checkpoint, const std::vector<NamedImage>& images,
                      const EvalOptions& options) {
  ModelParams<float> params = load_model(checkpoint, options);
  std::vector<std::string> names;
  std::vector<Image> preds;
  for (const auto& img : images) {
    names.push_back(img.name);
    preds.push_back(enhance(img.image, params, options.rmt_patch));
  }
  MetricReport report = score_images(names, preds, nullptr, options.metrics);
  report.config["checkpoint"] = checkpoint.filename().string();
  return report;
}

}  // namespace atdc
