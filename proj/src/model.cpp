// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

#include "atdc/model.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "atdc/error.hpp"
#include "atdc/physics.hpp"
#include "atdc/rng.hpp"

namespace atdc {
namespace {

template <typename T>
class ParamBuilder {
 public:
  ParamBuilder(std::uint64_t seed, double slope) : rng_(seed), gain_(std::sqrt(6.0 / (1.0 + slope * slope))) {}

  Tensor<T> uniform(Shape shape, std::int64_t fan_in) {
    const double bound = gain_ / std::sqrt(static_cast<double>(fan_in));
    Tensor<T> t(std::move(shape), true);
    for (auto& v : t.data()) v = static_cast<T>(rng_.uniform(-bound, bound));
    return t;
  }

  ConvParams<T> conv(std::int64_t cin, std::int64_t cout, std::int64_t k) {
    return {uniform(Shape{cout, cin, k, k}, cin * k * k), Tensor<T>(Shape{cout}, true)};
  }

  LinearParams<T> linear(std::int64_t din, std::int64_t dout) {
    return {uniform(Shape{dout, din}, din), Tensor<T>(Shape{dout}, true)};
  }

  NormParams<T> norm(std::int64_t c) {
    return {Tensor<T>::filled(Shape{c}, T(1), true), Tensor<T>(Shape{c}, true), BatchNormState<T>(c)};
  }

  ResidualBlockParams<T> block(std::int64_t cin, std::int64_t cout) {
    ResidualBlockParams<T> p{conv(cin, cout, 3), norm(cout), conv(cout, cout, 3), norm(cout), std::nullopt};
    if (cin != cout) p.proj = conv(cin, cout, 1);
    return p;
  }

  ChannelAttentionParams<T> attention(std::int64_t c, std::int64_t reduction) {
    const std::int64_t hidden = std::max<std::int64_t>(1, c / reduction);
    return {linear(c, hidden), linear(hidden, c)};
  }

 private:
  Rng rng_;
  double gain_;
};

template <typename T>
void push_conv(std::vector<NamedTensor<T>>& out, const std::string& name, const ConvParams<T>& p) {
  out.push_back({name + ".weight", p.weight});
  out.push_back({name + ".bias", p.bias});
}

template <typename T>
void push_linear(std::vector<NamedTensor<T>>& out, const std::string& name, const LinearParams<T>& p) {
  out.push_back({name + ".weight", p.weight});
  out.push_back({name + ".bias", p.bias});
}

template <typename T>
void push_block(std::vector<NamedTensor<T>>& out, const std::string& name, const ResidualBlockParams<T>& p) {
  push_conv(out, name + ".conv1", p.conv1);
  out.push_back({name + ".bn1.gamma", p.bn1.gamma});
  out.push_back({name + ".bn1.beta", p.bn1.beta});
  push_conv(out, name + ".conv2", p.conv2);
  out.push_back({name + ".bn2.gamma", p.bn2.gamma});
  out.push_back({name + ".bn2.beta", p.bn2.beta});
  if (p.proj) push_conv(out, name + ".proj", *p.proj);
}

template <typename T>
void push_block_stats(std::vector<NamedTensor<T>>& out, const std::string& name, const ResidualBlockParams<T>& p) {
  out.push_back({name + ".bn1.running_mean", p.bn1.stats.running_mean});
  out.push_back({name + ".bn1.running_var", p.bn1.stats.running_var});
  out.push_back({name + ".bn2.running_mean", p.bn2.stats.running_mean});
  out.push_back({name + ".bn2.running_var", p.bn2.stats.running_var});
}

template <typename T>
void check_channels(const Tensor<T>& x, std::int64_t c, const char* what) {
  require(x.defined() && x.rank() == 4 && x.dim(1) == c, ErrorCode::kShapeMismatch,
          std::string(what) + ": expected " + std::to_string(c) + " channels, got " +
              (x.defined() ? shape_str(x.shape()) : std::string("<undefined>")));
}

}  // namespace

void ModelConfig::validate() const {
  require(base_channels >= 1 && encoder_blocks >= 1 && decoder_blocks >= 1 && atm_channels >= 1 && dcm_hidden >= 1,
          ErrorCode::kInvalidArgument, "model widths and depths must be positive");
  require(ca_reduction >= 1 && base_channels >= ca_reduction, ErrorCode::kInvalidArgument,
          "base_channels must be >= ca_reduction");
  require(!use_ca || base_channels % ca_reduction == 0, ErrorCode::kInvalidArgument,
          "base_channels must be divisible by ca_reduction");
  require(!use_fusion || encoder_blocks == 3, ErrorCode::kInvalidArgument,
          "multi-stage fusion taps three encoder stages; encoder_blocks must be 3");
  require(leaky_slope > 0.0 && leaky_slope < 1.0, ErrorCode::kInvalidArgument, "leaky_slope must lie in (0,1)");
}

std::string ModelConfig::descriptor() const {
  std::ostringstream os;
  os.precision(17);
  os << "base_channels=" << base_channels << "\n"
     << "encoder_blocks=" << encoder_blocks << "\n"
     << "decoder_blocks=" << decoder_blocks << "\n"
     << "use_ca=" << use_ca << "\n"
     << "use_fusion=" << use_fusion << "\n"
     << "use_atm=" << use_atm << "\n"
     << "use_dcm=" << use_dcm << "\n"
     << "leaky_slope=" << leaky_slope << "\n"
     << "ca_reduction=" << ca_reduction << "\n"
     << "atm_channels=" << atm_channels << "\n"
     << "dcm_hidden=" << dcm_hidden << "\n";
  return os.str();
}

ModelConfig ModelConfig::from_descriptor(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::istringstream is{std::string(text)};
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::kCorruptData, "model descriptor line without '=': " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const auto get = [&](const char* key) -> const std::string& {
    const auto it = kv.find(key);
    require(it != kv.end(), ErrorCode::kCorruptData, std::string("model descriptor missing ") + key);
    return it->second;
  };
  ModelConfig c;
  try {
    c.base_channels = std::stoi(get("base_channels"));
    c.encoder_blocks = std::stoi(get("encoder_blocks"));
    c.decoder_blocks = std::stoi(get("decoder_blocks"));
    c.use_ca = std::stoi(get("use_ca")) != 0;
    c.use_fusion = std::stoi(get("use_fusion")) != 0;
    c.use_atm = std::stoi(get("use_atm")) != 0;
    c.use_dcm = std::stoi(get("use_dcm")) != 0;
    c.leaky_slope = std::stod(get("leaky_slope"));
    c.ca_reduction = std::stoi(get("ca_reduction"));
    c.atm_channels = std::stoi(get("atm_channels"));
    c.dcm_hidden = std::stoi(get("dcm_hidden"));
  } catch (const std::logic_error&) {
    fail(ErrorCode::kCorruptData, "model descriptor has a malformed value");
  }
  c.validate();
  return c;
}

template <typename T>
std::vector<NamedTensor<T>> ModelParams<T>::parameters() const {
  std::vector<NamedTensor<T>> out;
  push_conv(out, "edc.stem", edc.stem);
  for (std::size_t i = 0; i < edc.enc.size(); ++i) push_block(out, "edc.enc" + std::to_string(i), edc.enc[i]);
  for (std::size_t i = 0; i < edc.ca.size(); ++i) {
    push_linear(out, "edc.ca" + std::to_string(i) + ".fc1", edc.ca[i].fc1);
    push_linear(out, "edc.ca" + std::to_string(i) + ".fc2", edc.ca[i].fc2);
  }
  if (edc.fuse) push_conv(out, "edc.fuse", *edc.fuse);
  for (std::size_t i = 0; i < edc.dec.size(); ++i) push_block(out, "edc.dec" + std::to_string(i), edc.dec[i]);
  push_conv(out, "edc.head", edc.head);
  if (atm) {
    for (std::size_t i = 0; i < atm->rb.size(); ++i) push_block(out, "atm.rb" + std::to_string(i), atm->rb[i]);
  }
  if (dcm) {
    for (std::size_t i = 0; i < dcm->fc.size(); ++i) push_linear(out, "dcm.fc" + std::to_string(i), dcm->fc[i]);
  }
  return out;
}

template <typename T>
std::vector<NamedTensor<T>> ModelParams<T>::buffers() const {
  std::vector<NamedTensor<T>> out;
  for (std::size_t i = 0; i < edc.enc.size(); ++i) push_block_stats(out, "edc.enc" + std::to_string(i), edc.enc[i]);
  for (std::size_t i = 0; i < edc.dec.size(); ++i) push_block_stats(out, "edc.dec" + std::to_string(i), edc.dec[i]);
  if (atm) {
    for (std::size_t i = 0; i < atm->rb.size(); ++i) push_block_stats(out, "atm.rb" + std::to_string(i), atm->rb[i]);
  }
  return out;
}

template <typename T>
ModelParams<T> ModelParams<T>::clone() const {
  ModelParams<T> copy = init_params<T>(0, config);
  auto src_p = parameters();
  auto dst_p = copy.parameters();
  for (std::size_t i = 0; i < src_p.size(); ++i) {
    std::copy(src_p[i].tensor.data().begin(), src_p[i].tensor.data().end(), dst_p[i].tensor.data().begin());
  }
  auto src_b = buffers();
  auto dst_b = copy.buffers();
  for (std::size_t i = 0; i < src_b.size(); ++i) {
    std::copy(src_b[i].tensor.data().begin(), src_b[i].tensor.data().end(), dst_b[i].tensor.data().begin());
  }
  return copy;
}

template <typename T>
ModelParams<T> init_params(std::uint64_t seed, const ModelConfig& config) {
  config.validate();
  ParamBuilder<T> b(seed, config.leaky_slope);
  ModelParams<T> p;
  p.config = config;
  const std::int64_t c = config.base_channels;

  p.edc.stem = b.conv(3, c, 3);
  for (int i = 0; i < config.encoder_blocks; ++i) p.edc.enc.push_back(b.block(c, c));
  if (config.use_ca) {
    const int count = config.use_fusion ? 2 : 1;
    for (int i = 0; i < count; ++i) p.edc.ca.push_back(b.attention(c, config.ca_reduction));
  }
  if (config.use_fusion) p.edc.fuse = b.conv(3 * c, c, 3);
  for (int i = 0; i < config.decoder_blocks; ++i) p.edc.dec.push_back(b.block(c, c));
  p.edc.head = b.conv(c, 3, 3);

  if (config.use_atm) {
    const std::int64_t a = config.atm_channels;
    AtmParams<T> atm;
    atm.rb.push_back(b.block(1, a));
    atm.rb.push_back(b.block(a, a));
    atm.rb.push_back(b.block(a, 1));
    p.atm = std::move(atm);
  }
  if (config.use_dcm) {
    const std::int64_t h = config.dcm_hidden;
    DcmParams<T> dcm;
    dcm.fc.push_back(b.linear(3, h));
    dcm.fc.push_back(b.linear(3 + h, h));
    dcm.fc.push_back(b.linear(3 + 2 * h, 3));
    // Zero output layer: gains start at exactly 1.
    for (auto& v : dcm.fc[2].weight.data()) v = T(0);
    p.dcm = std::move(dcm);
  }
  return p;
}

template <typename T>
Tensor<T> residual_block(Tape<T>& tape, const Tensor<T>& x, ResidualBlockParams<T>& p, NormMode mode, T slope) {
  check_channels(x, p.conv1.weight.dim(1), "residual_block");
  Tensor<T> h = conv2d(tape, x, p.conv1.weight, p.conv1.bias);
  h = leaky_relu(tape, batch_norm(tape, h, p.bn1.gamma, p.bn1.beta, p.bn1.stats, mode), slope);
  h = conv2d(tape, h, p.conv2.weight, p.conv2.bias);
  h = leaky_relu(tape, batch_norm(tape, h, p.bn2.gamma, p.bn2.beta, p.bn2.stats, mode), slope);
  const Tensor<T> skip = p.proj ? conv2d(tape, x, p.proj->weight, p.proj->bias) : x;
  return add(tape, h, skip);
}

template <typename T>
Tensor<T> channel_attention(Tape<T>& tape, const Tensor<T>& f, const ChannelAttentionParams<T>& p, T slope) {
  check_channels(f, p.fc1.weight.dim(1), "channel_attention");
  Tensor<T> s = global_avg_pool(tape, f);
  s = leaky_relu(tape, fully_connected(tape, s, p.fc1.weight, p.fc1.bias), slope);
  s = sigmoid(tape, fully_connected(tape, s, p.fc2.weight, p.fc2.bias));
  return mul(tape, f, s);
}

template <typename T>
Tensor<T> dcm_forward(Tape<T>& tape, const Tensor<T>& means, const DcmParams<T>& p, T slope) {
  require(means.defined() && means.rank() == 2 && means.dim(1) == 3, ErrorCode::kShapeMismatch,
          "dcm_forward: means must be [N,3]");
  require(p.fc.size() == 3, ErrorCode::kShapeMismatch, "dcm_forward: expected three layers");
  const Tensor<T> h0 = leaky_relu(tape, fully_connected(tape, means, p.fc[0].weight, p.fc[0].bias), slope);
  const Tensor<T> h1 =
      leaky_relu(tape, fully_connected(tape, concat_channels(tape, {means, h0}), p.fc[1].weight, p.fc[1].bias), slope);
  const Tensor<T> z = fully_connected(tape, concat_channels(tape, {means, h0, h1}), p.fc[2].weight, p.fc[2].bias);
  return scale(tape, sigmoid(tape, z), T(2));
}

template <typename T>
Tensor<T> atm_forward(Tape<T>& tape, const Tensor<T>& rmt, AtmParams<T>& p, NormMode mode, T slope) {
  check_channels(rmt, 1, "atm_forward");
  Tensor<T> h = rmt;
  for (auto& block : p.rb) h = residual_block(tape, h, block, mode, slope);
  check_channels(h, 1, "atm_forward output");
  return sigmoid(tape, h);
}

template <typename T>
ForwardTrace<T> edc_forward(Tape<T>& tape, const Tensor<T>& image, const Tensor<T>& rmt_refined,
                            const Tensor<T>& coeffs, EdcParams<T>& p, const ModelConfig& config, NormMode mode) {
  check_channels(image, 3, "edc_forward image");
  const T slope = static_cast<T>(config.leaky_slope);
  if (config.use_atm) {
    require(rmt_refined.defined(), ErrorCode::kMissingBranchInput, "edc_forward: transmission branch enabled but no map");
    require(rmt_refined.rank() == 4 && rmt_refined.dim(0) == image.dim(0) && rmt_refined.dim(1) == 1 &&
                rmt_refined.dim(2) == image.dim(2) && rmt_refined.dim(3) == image.dim(3),
            ErrorCode::kShapeMismatch, "edc_forward: transmission map must be [N,1,H,W]");
  }
  if (config.use_dcm) {
    require(coeffs.defined(), ErrorCode::kMissingBranchInput, "edc_forward: colour branch enabled but no gains");
    require(coeffs.rank() == 2 && coeffs.dim(0) == image.dim(0) && coeffs.dim(1) == 3, ErrorCode::kShapeMismatch,
            "edc_forward: colour gains must be [N,3]");
  }

  ForwardTrace<T> tr;
  Tensor<T> h = conv2d(tape, image, p.stem.weight, p.stem.bias);
  std::vector<Tensor<T>> stages;
  for (auto& block : p.enc) {
    h = residual_block(tape, h, block, mode, slope);
    stages.push_back(h);
  }
  if (stages.size() >= 1) tr.f1 = stages[0];
  if (stages.size() >= 2) tr.f2 = stages[1];
  if (stages.size() >= 3) tr.f3 = stages[2];

  Tensor<T> d;
  if (config.use_fusion) {
    Tensor<T> a = tr.f1, c = tr.f3;
    if (config.use_ca) {
      tr.f_hat1 = a = channel_attention(tape, tr.f1, p.ca[0], slope);
      tr.f_hat3 = c = channel_attention(tape, tr.f3, p.ca[1], slope);
    }
    d = conv2d(tape, concat_channels(tape, {a, tr.f2, c}), p.fuse->weight, p.fuse->bias);
  } else if (config.use_ca) {
    d = channel_attention(tape, stages.back(), p.ca[0], slope);
    if (stages.size() >= 3) tr.f_hat3 = d;
  } else {
    d = stages.back();
  }

  if (config.use_atm) {
    tr.rmt_refined = rmt_refined;
    d = mul(tape, d, add_scalar(tape, rmt_refined, T(1)));
  }
  tr.decoder_input = d;

  for (auto& block : p.dec) d = residual_block(tape, d, block, mode, slope);
  tr.output0 = sigmoid(tape, conv2d(tape, d, p.head.weight, p.head.bias));
  if (config.use_dcm) {
    tr.coeffs = coeffs;
    tr.output = clamp(tape, mul(tape, tr.output0, coeffs), T(0), T(1));
  } else {
    tr.output = tr.output0;
  }
  return tr;
}

template <typename T>
ForwardTrace<T> network_forward(Tape<T>& tape, ModelParams<T>& params, const Tensor<T>& image,
                                const Tensor<T>& rmt, const Tensor<T>& means, NormMode mode) {
  const ModelConfig& cfg = params.config;
  const T slope = static_cast<T>(cfg.leaky_slope);
  Tensor<T> rmt_refined, coeffs;
  if (cfg.use_atm) {
    require(rmt.defined(), ErrorCode::kMissingBranchInput, "network_forward: RMT prior required");
    rmt_refined = atm_forward(tape, rmt, *params.atm, mode, slope);
  }
  if (cfg.use_dcm) {
    require(means.defined(), ErrorCode::kMissingBranchInput, "network_forward: channel means required");
    coeffs = dcm_forward(tape, means, *params.dcm, slope);
  }
  return edc_forward(tape, image, rmt_refined, coeffs, params.edc, cfg, mode);
}

std::pair<Image, ForwardTrace<float>> model_forward(const Image& img, ModelParams<float>& params, int rmt_patch) {
  Tape<float> tape(TapeMode::kInference);
  const std::vector<Image> batch{img};
  const Tensor<float> x = images_to_tensor<float>(batch);
  Tensor<float> rmt, means;
  if (params.config.use_atm) rmt = graymaps_to_tensor<float>({estimate_rmt(img, rmt_patch)});
  if (params.config.use_dcm) means = means_to_tensor<float>(batch);
  ForwardTrace<float> tr = network_forward(tape, params, x, rmt, means, NormMode::kEval);
  return {tensor_to_image(tr.output), std::move(tr)};
}

template <typename T>
Tensor<T> images_to_tensor(const std::vector<Image>& images) {
  require(!images.empty(), ErrorCode::kShapeMismatch, "images_to_tensor: empty batch");
  const int h = images.front().height(), w = images.front().width();
  const std::int64_t n = static_cast<std::int64_t>(images.size());
  Tensor<T> t(Shape{n, 3, h, w});
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  for (std::int64_t b = 0; b < n; ++b) {
    const Image& img = images[static_cast<std::size_t>(b)];
    require(img.height() == h && img.width() == w, ErrorCode::kShapeMismatch, "images_to_tensor: mixed sizes");
    for (std::int64_t p = 0; p < hw; ++p) {
      for (int c = 0; c < 3; ++c) t.data()[(b * 3 + c) * hw + p] = static_cast<T>(img.data()[p * 3 + c]);
    }
  }
  return t;
}

template <typename T>
Tensor<T> graymaps_to_tensor(const std::vector<GrayMap>& maps) {
  require(!maps.empty(), ErrorCode::kShapeMismatch, "graymaps_to_tensor: empty batch");
  const int h = maps.front().height(), w = maps.front().width();
  const std::int64_t n = static_cast<std::int64_t>(maps.size());
  Tensor<T> t(Shape{n, 1, h, w});
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  for (std::int64_t b = 0; b < n; ++b) {
    const GrayMap& m = maps[static_cast<std::size_t>(b)];
    require(m.height() == h && m.width() == w, ErrorCode::kShapeMismatch, "graymaps_to_tensor: mixed sizes");
    std::copy(m.data().begin(), m.data().end(), t.data().begin() + b * hw);
  }
  return t;
}

template <typename T>
Tensor<T> means_to_tensor(const std::vector<Image>& images) {
  const std::int64_t n = static_cast<std::int64_t>(images.size());
  Tensor<T> t(Shape{n, 3});
  for (std::int64_t b = 0; b < n; ++b) {
    const ColorStats s = channel_means(images[static_cast<std::size_t>(b)]);
    for (int c = 0; c < 3; ++c) t.data()[b * 3 + c] = static_cast<T>(s.mu[c]);
  }
  return t;
}

template <typename T>
Image tensor_to_image(const Tensor<T>& t, std::int64_t n) {
  require(t.rank() == 4 && t.dim(1) == 3 && n >= 0 && n < t.dim(0), ErrorCode::kShapeMismatch,
          "tensor_to_image: expected [N,3,H,W]");
  const std::int64_t h = t.dim(2), w = t.dim(3), hw = h * w;
  std::vector<float> data(static_cast<std::size_t>(hw * 3));
  for (std::int64_t p = 0; p < hw; ++p) {
    for (int c = 0; c < 3; ++c) data[p * 3 + c] = static_cast<float>(t.data()[(n * 3 + c) * hw + p]);
  }
  return Image::clamped(static_cast<int>(h), static_cast<int>(w), std::move(data));
}

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& src) {
  ModelParams<To> dst = init_params<To>(0, src.config);
  auto sp = src.parameters();
  auto dp = dst.parameters();
  for (std::size_t i = 0; i < sp.size(); ++i) {
    std::copy(sp[i].tensor.data().begin(), sp[i].tensor.data().end(), dp[i].tensor.data().begin());
  }
  auto sb = src.buffers();
  auto db = dst.buffers();
  for (std::size_t i = 0; i < sb.size(); ++i) {
    std::copy(sb[i].tensor.data().begin(), sb[i].tensor.data().end(), db[i].tensor.data().begin());
  }
  return dst;
}

#define ATDC_INSTANTIATE_MODEL(T)                                                                               \
  template struct ModelParams<T>;                                                                               \
  template ModelParams<T> init_params<T>(std::uint64_t, const ModelConfig&);                                   \
  template Tensor<T> residual_block(Tape<T>&, const Tensor<T>&, ResidualBlockParams<T>&, NormMode, T);          \
  template Tensor<T> channel_attention(Tape<T>&, const Tensor<T>&, const ChannelAttentionParams<T>&, T);        \
  template Tensor<T> dcm_forward(Tape<T>&, const Tensor<T>&, const DcmParams<T>&, T);                           \
  template Tensor<T> atm_forward(Tape<T>&, const Tensor<T>&, AtmParams<T>&, NormMode, T);                       \
  template ForwardTrace<T> edc_forward(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,          \
                                       EdcParams<T>&, const ModelConfig&, NormMode);                            \
  template ForwardTrace<T> network_forward(Tape<T>&, ModelParams<T>&, const Tensor<T>&, const Tensor<T>&,       \
                                           const Tensor<T>&, NormMode);                                         \
  template Tensor<T> images_to_tensor<T>(const std::vector<Image>&);                                            \
  template Tensor<T> graymaps_to_tensor<T>(const std::vector<GrayMap>&);                                        \
  template Tensor<T> means_to_tensor<T>(const std::vector<Image>&);                                             \
  template Image tensor_to_image(const Tensor<T>&, std::int64_t);

ATDC_INSTANTIATE_MODEL(float)
ATDC_INSTANTIATE_MODEL(double)

template ModelParams<double> cast_params<double, float>(const ModelParams<float>&);
template ModelParams<float> cast_params<float, double>(const ModelParams<double>&);

}  // namespace atdc
