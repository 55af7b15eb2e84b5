// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <json.hpp>

#include <fstream>
#include <map>
#include <sstream>

#include "atdc/checkpoint.hpp"
#include "atdc/cli.hpp"
#include "atdc/dataset.hpp"
#include "atdc/metrics.hpp"
#include "atdc/ops.hpp"
#include "fileio.hpp"
#include "test_util.hpp"

using namespace atdc;
using atdc::io::read_file;
using atdc::test::TempDir;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "atdc");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string p(const std::filesystem::path& path) { return path.string(); }

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

// Relative path -> contents for every file below root.
std::map<std::string, std::vector<std::uint8_t>> snapshot(const std::filesystem::path& root) {
  std::map<std::string, std::vector<std::uint8_t>> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[std::filesystem::relative(e.path(), root).string()] = read_file(e.path());
  return files;
}

const std::vector<std::string> kTinyModel = {"--base-channels", "8",  "--atm-channels", "4", "--ca-reduction",
                                             "4",               "--dcm-hidden", "4", "--crop",  "16",
                                             "--patch",         "5"};

std::vector<std::string> tiny_train(const std::filesystem::path& data, const std::filesystem::path& out,
                                    int epochs) {
  std::vector<std::string> a{"train", "--data", p(data), "--out", p(out), "--epochs", std::to_string(epochs)};
  a.insert(a.end(), kTinyModel.begin(), kTinyModel.end());
  return a;
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"rmt", "--input", "x.png"}).code == kExitUsage);
  CHECK(cli({"gradcheck", "--precision", "half"}).code == kExitUsage);
  CHECK(cli({"simulate", "--out", "/tmp/x"}).code == kExitUsage);
  CHECK(cli({"simulate", "--procedural", "2", "--input", "a", "--out", "b"}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("simulate is reproducible and validates water") {
  TempDir dir("cli_sim");
  const Run a = cli({"simulate", "--procedural", "5", "--seed", "7", "--size", "32", "--out", p(dir / "a")});
  REQUIRE(a.code == kExitOk);
  CHECK(a.out.find("# simulate resolved config") == 0);
  CHECK(a.out.find("seed=7") != std::string::npos);
  REQUIRE(cli({"simulate", "--procedural", "5", "--seed", "7", "--size", "32", "--out", p(dir / "b")}).code == 0);
  const auto sa = snapshot(dir / "a");
  CHECK(sa.size() == 11);
  CHECK(sa == snapshot(dir / "b"));
  REQUIRE(cli({"simulate", "--procedural", "5", "--seed", "8", "--size", "32", "--out", p(dir / "c")}).code == 0);
  CHECK(sa.at("manifest.json") != snapshot(dir / "c").at("manifest.json"));

  CHECK(cli({"simulate", "--procedural", "2", "--beta", "0,0,0", "--out", p(dir / "d")}).code == kExitUsage);
  CHECK(cli({"simulate", "--procedural", "2", "--beta", "0.5,0.5", "--out", p(dir / "d")}).code == kExitUsage);
  CHECK(cli({"simulate", "--procedural", "2", "--depth", "spiral", "--out", p(dir / "d")}).code == kExitUsage);
  CHECK(cli({"simulate", "--input", p(dir / "missing"), "--out", p(dir / "d")}).code == kExitIo);
}

TEST_CASE("simulate manifest reproduces the degradation and inverts") {
  TempDir dir("cli_manifest");
  REQUIRE(cli({"simulate", "--procedural", "4", "--size", "24", "--out", p(dir.path())}).code == 0);
  const auto manifest = nlohmann::json::parse(read_text(dir / "manifest.json"));
  REQUIRE(manifest["images"].size() == 4);
  for (const auto& e : manifest["images"]) {
    SceneRecord s;
    s.name = e["name"];
    s.water.beta = e["beta"];
    s.water.airlight = e["airlight"];
    s.depth_kind = parse_depth_kind(e["depth"].get<std::string>());
    s.d_max = e["d_max"];
    s.depth_seed = e["depth_seed"];
    const Image clean = load_image(dir.path() / "clean" / s.name);
    const Image degraded = load_image(dir.path() / "degraded" / s.name);
    const TransmissionMap t = s.transmission(24, 24);
    const Image redone = degrade(clean, s.water, t);
    const Image back = invert(redone, s.water, t);
    double render_err = 0, invert_err = 0;
    for (std::size_t i = 0; i < clean.data().size(); ++i) {
      render_err = std::max(render_err, std::abs(double(redone.data()[i]) - degraded.data()[i]));
      if (t.data()[i] >= 0.1f) invert_err = std::max(invert_err, std::abs(double(back.data()[i]) - clean.data()[i]));
    }
    // The written clean image is quantized, so re-rendering may move one level.
    CHECK(render_err <= 1.0 / 255 + 1e-6);
    CHECK(invert_err < 1e-5);
  }
}

TEST_CASE("simulate from a directory with fixed water") {
  TempDir dir("cli_sim_dir");
  std::filesystem::create_directories(dir / "in");
  Rng rng(3);
  save_image(test::random_image(rng, 20, 18), dir.path() / "in" / "photo.ppm");
  REQUIRE(cli({"simulate", "--input", p(dir / "in"), "--out", p(dir / "out"), "--beta", "0.5,0.4,0.2", "--airlight",
               "0.1,0.6,0.7", "--depth", "radial"})
              .code == 0);
  const auto manifest = nlohmann::json::parse(read_text(dir / "out" / "manifest.json"));
  CHECK(manifest["images"][0]["name"] == "photo.png");
  CHECK(manifest["images"][0]["depth"] == "radial");
  CHECK(manifest["images"][0]["beta"][1] == 0.4);
  CHECK(load_image(dir.path() / "out" / "degraded" / "photo.png").width() == 18);
}

TEST_CASE("rmt writes the transmission estimate") {
  TempDir dir("cli_rmt");
  save_image(Image(20, 20, std::array<float, 3>{0.5f, 0.6f, 0.7f}), dir / "flat.png");
  REQUIRE(cli({"rmt", "--input", p(dir / "flat.png"), "--out", p(dir / "flat_rmt.png")}).code == 0);
  const Image flat = load_image(dir / "flat_rmt.png");
  CHECK(flat.at(10, 10, 0) >= 250.f / 255);

  std::vector<float> d(16 * 16 * 3, 0.8f);
  d[(5 * 16 + 7) * 3 + 0] = d[(5 * 16 + 7) * 3 + 1] = d[(5 * 16 + 7) * 3 + 2] = 0.f;
  save_image(Image(16, 16, d), dir / "dot.png");
  REQUIRE(cli({"rmt", "--input", p(dir / "dot.png"), "--out", p(dir / "dot_rmt.png"), "--patch", "1"}).code == 0);
  const Image dot = load_image(dir / "dot_rmt.png");
  CHECK(dot.at(5, 7, 0) == 0.f);
  CHECK(dot.at(6, 7, 0) > 0.5f);

  const PairedDataset ramp = make_synthetic_dataset(2, 1, 48, {}, DepthKind::kRamp);
  save_image(ramp.pairs[0].degraded, dir / "ramp.png");
  REQUIRE(cli({"rmt", "--input", p(dir / "ramp.png"), "--out", p(dir / "ramp_rmt.png")}).code == 0);
  const Image rmt = load_image(dir / "ramp_rmt.png");
  // The ramp deepens along the columns; compare the two halves.
  const TransmissionMap t = ramp.pairs[0].scene->transmission(48, 48);
  const bool far_right = t.at(24, 47, 0) < t.at(24, 0, 0);
  double left = 0, right = 0;
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 48; ++x) (x < 24 ? left : right) += rmt.at(y, x, 0);
  CHECK((far_right ? right > left : left > right));

  CHECK(cli({"rmt", "--input", p(dir / "flat.png"), "--out", p(dir / "x.png"), "--patch", "4"}).code == kExitUsage);
  CHECK(cli({"rmt", "--input", p(dir / "none.png"), "--out", p(dir / "x.png")}).code == kExitIo);
  CHECK(cli({"rmt", "--input", p(dir / "flat.png"), "--out", p(dir / "x.gif")}).code == kExitIo);
}

TEST_CASE("train, enhance and evaluate pipeline") {
  TempDir dir("cli_pipeline");
  REQUIRE(cli({"simulate", "--procedural", "6", "--size", "20", "--out", p(dir / "data")}).code == 0);

  const Run init = cli(tiny_train(dir / "data", dir / "init.ckpt", 0));
  REQUIRE(init.code == 0);
  CHECK(load_checkpoint(dir / "init.ckpt").meta.epoch == 0);

  const Run a = cli(tiny_train(dir / "data", dir / "a.ckpt", 2));
  REQUIRE(a.code == 0);
  CHECK(a.out.find("\"epoch\":2") != std::string::npos);
  REQUIRE(cli(tiny_train(dir / "data", dir / "b.ckpt", 2)).code == 0);
  CHECK(read_file(dir / "a.ckpt") == read_file(dir / "b.ckpt"));

  auto ablated = tiny_train(dir / "data", dir / "edc.ckpt", 1);
  ablated.insert(ablated.end(), {"--no-atm", "--no-dcm"});
  const Run edc = cli(ablated);
  REQUIRE(edc.code == 0);
  CHECK(edc.out.find("use_atm=0") != std::string::npos);
  CHECK(edc.out.find("use_dcm=0") != std::string::npos);
  CHECK(edc.out.find("use_ca=1") != std::string::npos);
  const Checkpoint ck = load_checkpoint(dir / "edc.ckpt");
  CHECK_FALSE(ck.params.atm.has_value());
  CHECK_FALSE(ck.params.dcm.has_value());

  const Run en = cli({"enhance", "--input", p(dir / "data" / "degraded"), "--ckpt", p(dir / "a.ckpt"), "--out",
                      p(dir / "enh1"), "--patch", "5"});
  REQUIRE(en.code == 0);
  REQUIRE(cli({"enhance", "--input", p(dir / "data" / "degraded"), "--ckpt", p(dir / "a.ckpt"), "--out",
               p(dir / "enh2"), "--patch", "5"})
              .code == 0);
  const auto e1 = snapshot(dir / "enh1");
  CHECK(e1.size() == 6);
  CHECK(e1 == snapshot(dir / "enh2"));
  for (const auto& [name, bytes] : e1) {
    const Image img = decode_image(bytes);
    CHECK(img.height() == 20);
    CHECK(img.width() == 20);
    CHECK(std::filesystem::exists(dir / "data" / "degraded" / name));
  }

  const std::string ref = p(dir / "data" / "clean");
  REQUIRE(cli({"evaluate", "--pred", ref, "--ref", ref, "--report", p(dir / "self.json")}).code == 0);
  const auto self = nlohmann::json::parse(read_text(dir / "self.json"));
  CHECK(self["aggregate"]["ssim"] == 1.0);
  CHECK(self["aggregate"]["mse"] == 0.0);
  CHECK(self["aggregate"]["psnr"] == 100.0);

  REQUIRE(cli({"evaluate", "--pred", p(dir / "enh1"), "--ref", ref, "--report", p(dir / "r1.json")}).code == 0);
  REQUIRE(cli({"evaluate", "--pred", p(dir / "enh1"), "--ref", ref, "--report", p(dir / "r2.json")}).code == 0);
  CHECK(read_file(dir / "r1.json") == read_file(dir / "r2.json"));

  const Run noref = cli({"evaluate", "--pred", p(dir / "enh1")});
  REQUIRE(noref.code == 0);
  const auto j = nlohmann::json::parse(noref.out.substr(noref.out.find("\n{") + 1));
  CHECK(j["aggregate"].contains("uiqm"));
  CHECK_FALSE(j["aggregate"].contains("psnr"));
  CHECK(cli({"evaluate", "--pred", p(dir / "enh1"), "--metrics", "psnr"}).code == kExitUsage);
  CHECK(cli({"evaluate", "--pred", p(dir / "enh1"), "--metrics", "bogus"}).code == kExitUsage);

  auto bad = read_file(dir / "a.ckpt");
  bad[bad.size() / 2] ^= 1;
  io::write_file_atomic(dir / "bad.ckpt", bad);
  CHECK(cli({"enhance", "--input", p(dir / "data" / "degraded"), "--ckpt", p(dir / "bad.ckpt"), "--out",
             p(dir / "enh3")})
            .code == kExitIo);
}

TEST_CASE("train failure exit codes") {
  TempDir dir("cli_train_fail");
  REQUIRE(cli({"simulate", "--procedural", "3", "--size", "20", "--out", p(dir / "data")}).code == 0);
  auto blowup = tiny_train(dir / "data", dir / "x.ckpt", 1);
  blowup.insert(blowup.end(), {"--lr", "1e30", "--batch-size", "1"});
  CHECK(cli(blowup).code == kExitNumeric);
  CHECK(cli(tiny_train(dir / "nowhere", dir / "x.ckpt", 1)).code == kExitIo);
  auto bad_crop = tiny_train(dir / "data", dir / "x.ckpt", 1);
  bad_crop.insert(bad_crop.end(), {"--crop", "8"});
  CHECK(cli(bad_crop).code == kExitUsage);
  auto resume = tiny_train(dir / "data", dir / "y.ckpt", 1);
  resume.insert(resume.end(), {"--resume", p(dir / "absent.ckpt")});
  CHECK(cli(resume).code == kExitIo);
}

TEST_CASE("config files sit between flags and defaults") {
  TempDir dir("cli_config");
  REQUIRE(cli({"simulate", "--procedural", "3", "--size", "20", "--out", p(dir / "data")}).code == 0);
  std::ofstream(dir / "train.cfg") << "# tiny run\nepochs = 1\nbase_channels=8\natm-channels=4\nca_reduction=4\n"
                                      "dcm_hidden=4\ncrop=16\npatch=5\nseed=11\nno_dcm=true\n";
  const Run a = cli({"train", "--config", p(dir / "train.cfg"), "--data", p(dir / "data"), "--out", p(dir / "a.ckpt"),
                     "--seed", "12"});
  REQUIRE(a.code == 0);
  CHECK(a.out.find("seed=12") != std::string::npos);
  CHECK(a.out.find("base-channels=8") != std::string::npos);
  CHECK(a.out.find("use_dcm=0") != std::string::npos);
  const Checkpoint ck = load_checkpoint(dir / "a.ckpt");
  CHECK(ck.meta.epoch == 1);
  CHECK(ck.meta.train_descriptor.find("seed=12\n") == 0);

  // A printed resolved config can be fed back in.
  std::string printed = a.out.substr(a.out.find('\n') + 1);
  printed = printed.substr(0, printed.find("# model"));
  std::ofstream(dir / "printed.cfg") << printed;
  const Run b = cli({"train", "--config", p(dir / "printed.cfg"), "--out", p(dir / "b.ckpt")});
  REQUIRE(b.code == 0);
  CHECK(read_file(dir / "a.ckpt") == read_file(dir / "b.ckpt"));

  std::ofstream(dir / "bad.cfg") << "epochz=3\n";
  CHECK(cli({"train", "--config", p(dir / "bad.cfg"), "--synthetic", "2", "--out", p(dir / "c.ckpt")}).code ==
        kExitUsage);
  std::ofstream(dir / "noeq.cfg") << "epochs\n";
  CHECK(cli({"train", "--config", p(dir / "noeq.cfg"), "--synthetic", "2", "--out", p(dir / "c.ckpt")}).code ==
        kExitUsage);
  CHECK(cli({"train", "--config", p(dir / "absent.cfg"), "--synthetic", "2", "--out", p(dir / "c.ckpt")}).code ==
        kExitIo);
}

TEST_CASE("gradcheck exit status") {
  const Run ok = cli({"gradcheck", "--samples", "3"});
  CHECK(ok.code == kExitOk);
  CHECK(ok.out.find("conv2d") != std::string::npos);
  CHECK(ok.out.find("PASS\n") != std::string::npos);
  testing::set_conv_grad_corruption(true);
  const Run bad = cli({"gradcheck", "--samples", "3"});
  testing::set_conv_grad_corruption(false);
  CHECK(bad.code == kExitCheckFailed);
  CHECK(bad.out.find("FAIL") != std::string::npos);
}
