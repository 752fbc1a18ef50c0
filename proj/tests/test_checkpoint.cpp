#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "checkpoint.hpp"
#include "errors.hpp"

using namespace ipanerf;
namespace fs = std::filesystem;

namespace {

ModelArchitecture arch() {
  ModelArchitecture a;
  a.depth = 3;
  a.width = 16;
  a.skip_layer = 1;
  a.encoding.n_freq_position = 4;
  a.encoding.n_freq_direction = 2;
  return a;
}

}  // namespace

TEST_CASE("checkpoint round trip is bitwise") {
  NerfModel model(arch());
  model.init_parameters(99);
  AdamState opt;
  opt.reset(model.parameter_count());
  opt.m.setRandom();
  opt.v = opt.v.setRandom().cwiseAbs();
  opt.step = 1234;

  fs::path path = fs::temp_directory_path() / "ipanerf_test_ckpt" / "model.ckpt";
  save_checkpoint(Checkpoint::from_model(model, opt, 5000, 99), path);

  Checkpoint loaded = load_checkpoint(path);
  CHECK(loaded.parameters == model.parameters());
  CHECK(loaded.optimizer.m == opt.m);
  CHECK(loaded.optimizer.v == opt.v);
  CHECK(loaded.optimizer.step == 1234);
  CHECK(loaded.iteration == 5000);
  CHECK(loaded.seed == 99);
  CHECK(loaded.arch.width == 16);

  NerfModel restored = loaded.to_model();
  CHECK(restored.parameters() == model.parameters());
  fs::remove_all(path.parent_path());
}

TEST_CASE("corrupt checkpoints are rejected") {
  fs::path dir = fs::temp_directory_path() / "ipanerf_test_ckpt_bad";
  fs::create_directories(dir);

  SUBCASE("wrong magic") {
    std::ofstream(dir / "bad.ckpt") << "not a checkpoint";
    CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), Error);
  }

  SUBCASE("truncation never loads") {
    NerfModel model(arch());
    model.init_parameters(1);
    AdamState opt;
    opt.reset(model.parameter_count());
    save_checkpoint(Checkpoint::from_model(model, opt, 1, 1), dir / "full.ckpt");
    std::string bytes;
    {
      std::ifstream in(dir / "full.ckpt", std::ios::binary);
      bytes.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    }
    for (size_t cut : {bytes.size() / 4, bytes.size() / 2, bytes.size() - 3}) {
      std::ofstream out(dir / "cut.ckpt", std::ios::binary | std::ios::trunc);
      out.write(bytes.data(), std::streamsize(cut));
      out.close();
      CHECK_THROWS_AS(load_checkpoint(dir / "cut.ckpt"), Error);
    }
  }

  SUBCASE("missing file") { CHECK_THROWS_AS(load_checkpoint(dir / "nope.ckpt"), Error); }
  fs::remove_all(dir);
}
