#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "lightsout/metrics.hpp"
#include "lightsout/sifr.hpp"
#include "lightsout/synth.hpp"

using namespace lightsout;
namespace fs = std::filesystem;

namespace {

SifrConfig tiny_cfg() {
  SifrConfig cfg;
  cfg.channels = 8;
  return cfg;
}

std::vector<SifrSample> scene_pairs(std::uint64_t first_seed, int count, int hw) {
  std::vector<SifrSample> out;
  for (int i = 0; i < count; ++i) {
    const ScenePair pair = generate_scene(random_scene_spec(first_seed + i, hw, hw));
    out.push_back({to_float(image_to_tensor(pair.flared)), to_float(image_to_tensor(pair.clean))});
  }
  return out;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Image checker_image(int h, int w) {
  Image img(h, w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) img.at(c, y, x) = ((x + y + c) % 7) / 7.0;
  return img;
}

}  // namespace

TEST_CASE("untrained net is the identity map but refuses to run as a backend") {
  ToySifr net;
  net.init(tiny_cfg(), 3);
  const ScenePair pair = generate_scene(random_scene_spec(50, 24, 24));
  const Tensor x = to_float(image_to_tensor(pair.flared));
  const Tensor y = net.forward_train(x);
  REQUIRE(y.same_shape(x));
  for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(y.v[i] == x.v[i]);

  CHECK_THROWS_WITH(toy_sifr_apply(net, pair.flared), Catch::Matchers::ContainsSubstring("trained"));
}

TEST_CASE("overfitting a single pair drives the L1 loss under 0.01") {
  auto data = scene_pairs(60, 1, 24);
  ToySifr net;
  net.init(tiny_cfg(), 4);
  SifrTrainConfig tc;
  tc.lr = 3e-3;
  tc.batch = 2;
  tc.steps = 800;
  tc.seed = 9;
  const auto curve = train_toy_sifr(data, net, tc);
  CAPTURE(curve.front(), curve.back());
  CHECK(curve.back() < 0.01);
  CHECK(net.trained);
}

TEST_CASE("training is reproducible under a fixed seed") {
  auto data = scene_pairs(70, 3, 24);
  auto run = [&] {
    ToySifr net;
    net.init(tiny_cfg(), 5);
    SifrTrainConfig tc;
    tc.steps = 60;
    tc.batch = 2;
    tc.seed = 17;
    const auto curve = train_toy_sifr(data, net, tc);
    return std::make_pair(curve.back(), weights_checksum(net.params()));
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.first == b.first);
  REQUIRE(a.second == b.second);

  ToySifr empty_target;
  empty_target.init(tiny_cfg(), 1);
  CHECK_THROWS_AS(train_toy_sifr({}, empty_target, SifrTrainConfig{}), std::invalid_argument);
}

TEST_CASE("trained net removes flare and does no harm to flare-free frames") {
  auto train = scene_pairs(100, 24, 32);
  ToySifr net;
  net.init(tiny_cfg(), 6);
  SifrTrainConfig tc;
  tc.lr = 2e-3;
  tc.batch = 4;
  tc.steps = 600;
  tc.seed = 21;
  train_toy_sifr(train, net, tc);

  double flared_vs_clean = 0, out_vs_clean = 0, clean_roundtrip = 0;
  const int held = 8;
  for (int i = 0; i < held; ++i) {
    const ScenePair pair = generate_scene(random_scene_spec(5000 + i, 32, 32));
    flared_vs_clean += psnr(pair.flared, pair.clean) / held;
    out_vs_clean += psnr(toy_sifr_apply(net, pair.flared), pair.clean) / held;
    clean_roundtrip += psnr(toy_sifr_apply(net, pair.clean), pair.clean) / held;
  }
  CAPTURE(flared_vs_clean, out_vs_clean, clean_roundtrip);
  CHECK(out_vs_clean > flared_vs_clean);       // it actually removes flare
  CHECK(clean_roundtrip >= flared_vs_clean);   // and a clean frame stays clean
}

TEST_CASE("odd crop dimensions survive the pad-and-crop path") {
  auto data = scene_pairs(130, 1, 24);
  ToySifr net;
  net.init(tiny_cfg(), 7);
  SifrTrainConfig tc;
  tc.steps = 20;
  tc.batch = 1;
  train_toy_sifr(data, net, tc);

  const Image crop = checker_image(19, 27);
  const Image out = toy_sifr_apply(net, crop);
  REQUIRE(out.height() == 19);
  REQUIRE(out.width() == 27);
  for (std::size_t i = 0; i < out.size(); ++i) REQUIRE(std::isfinite(out.data()[i]));

  CHECK_THROWS_AS(net.forward_train(Tensor(3, 2, 2, 0.0f)), std::invalid_argument);
  CHECK_THROWS_AS(net.forward_train(Tensor(1, 16, 16, 0.0f)), std::invalid_argument);
}

TEST_CASE("saved weights reload to bit-identical outputs") {
  auto data = scene_pairs(140, 2, 24);
  ToySifr net;
  net.init(tiny_cfg(), 8);
  SifrTrainConfig tc;
  tc.steps = 40;
  tc.batch = 2;
  train_toy_sifr(data, net, tc);

  const auto dir = fresh_dir("lightsout_sifr_weights");
  const std::string path = (dir / "sifr.weights").string();
  net.save(path, 8);

  ToySifr loaded;
  loaded.load(path);
  REQUIRE(loaded.trained);
  const Image probe = checker_image(24, 24);
  const Image a = toy_sifr_apply(net, probe);
  const Image b = toy_sifr_apply(loaded, probe);
  for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a.data()[i] == b.data()[i]);
}

TEST_CASE("backend descriptors parse and reject garbage") {
  CHECK(parse_sifr_backend("identity").kind == SifrBackend::Kind::identity);
  CHECK(parse_sifr_backend("toy-unet").kind == SifrBackend::Kind::toy_unet);
  const auto cmd = parse_sifr_backend("cmd:cp {in} {out}");
  CHECK(cmd.kind == SifrBackend::Kind::command);
  CHECK(cmd.command_template == "cp {in} {out}");
  CHECK(sifr_backend_name(cmd) == "cmd:cp {in} {out}");

  CHECK_THROWS_AS(parse_sifr_backend("unet"), std::invalid_argument);
  CHECK_THROWS_WITH(parse_sifr_backend("cmd:cp {in} /tmp/fixed.png"),
                    Catch::Matchers::ContainsSubstring("{out}"));
}

TEST_CASE("identity and cp-command backends reproduce the input byte for byte") {
  const auto dir = fresh_dir("lightsout_sifr_invoke");
  const std::string in_path = (dir / "in.png").string();
  write_image_png(in_path, checker_image(16, 16));

  SifrRunner identity(parse_sifr_backend("identity"));
  identity.invoke(in_path, (dir / "out_id.png").string());
  CHECK(slurp(dir / "out_id.png") == slurp(in_path));

  SifrRunner cp(parse_sifr_backend("cmd:cp {in} {out}"));
  cp.invoke(in_path, (dir / "out_cp.png").string());
  CHECK(slurp(dir / "out_cp.png") == slurp(in_path));
}

TEST_CASE("command backend failures carry diagnostics") {
  const auto dir = fresh_dir("lightsout_sifr_fail");
  const std::string in_path = (dir / "in.png").string();
  write_image_png(in_path, checker_image(16, 16));
  const std::string out_path = (dir / "out.png").string();

  SECTION("nonzero exit") {
    SifrRunner r(parse_sifr_backend("cmd:echo boom >&2; false # {in} {out}"));
    CHECK_THROWS_WITH(r.invoke(in_path, out_path),
                      Catch::Matchers::ContainsSubstring("exited with code 1") &&
                          Catch::Matchers::ContainsSubstring("boom"));
  }
  SECTION("timeout") {
    auto b = parse_sifr_backend("cmd:sleep 3 # {in} {out}");
    b.timeout_sec = 0.3;
    SifrRunner r(b);
    CHECK_THROWS_WITH(r.invoke(in_path, out_path),
                      Catch::Matchers::ContainsSubstring("timed out"));
  }
  SECTION("no output written") {
    SifrRunner r(parse_sifr_backend("cmd:true # {in} {out}"));
    CHECK_THROWS_WITH(r.invoke(in_path, out_path),
                      Catch::Matchers::ContainsSubstring("unreadable"));
  }
  SECTION("malformed output") {
    SifrRunner r(parse_sifr_backend("cmd:echo notapng > {out} # {in}"));
    CHECK_THROWS_WITH(r.invoke(in_path, out_path),
                      Catch::Matchers::ContainsSubstring("unreadable"));
  }
  SECTION("dimension change is rejected") {
    const std::string small = (dir / "small.png").string();
    write_image_png(small, checker_image(8, 8));
    SifrRunner r(parse_sifr_backend("cmd:cp " + small + " {out} # {in}"));
    CHECK_THROWS_WITH(r.invoke(in_path, out_path),
                      Catch::Matchers::ContainsSubstring("dimensions"));
  }
  SECTION("a stale output file does not mask a failure") {
    write_image_png(out_path, checker_image(16, 16));
    SifrRunner r(parse_sifr_backend("cmd:false # {in} {out}"));
    CHECK_THROWS_WITH(r.invoke(in_path, out_path),
                      Catch::Matchers::ContainsSubstring("exited"));
  }
}

TEST_CASE("toy-unet backend matches in-process application") {
  auto data = scene_pairs(150, 2, 24);
  ToySifr net;
  net.init(tiny_cfg(), 11);
  SifrTrainConfig tc;
  tc.steps = 40;
  tc.batch = 2;
  train_toy_sifr(data, net, tc);

  const auto dir = fresh_dir("lightsout_sifr_unet");
  const std::string weights = (dir / "sifr.weights").string();
  net.save(weights, 11);

  const std::string in_path = (dir / "in.png").string();
  write_image_png(in_path, checker_image(24, 24));

  SifrBackend b = parse_sifr_backend("toy-unet");
  b.weights = weights;
  SifrRunner runner(b);
  runner.invoke(in_path, (dir / "out.png").string());

  const std::string direct = (dir / "direct.png").string();
  write_image_png(direct, toy_sifr_apply(net, read_image_png(in_path)));
  CHECK(slurp(dir / "out.png") == slurp(direct));

  SifrBackend missing = parse_sifr_backend("toy-unet");
  CHECK_THROWS_WITH(SifrRunner(missing), Catch::Matchers::ContainsSubstring("weights"));
}
