#include "checkpoint.hpp"

#include <cstring>
#include <string>

#include "errors.hpp"
#include "fsio.hpp"

namespace fs = std::filesystem;

namespace ipanerf {

static const char kMagic[] = "IPANERF-CKPT-1\n";
constexpr size_t kMagicLen = sizeof(kMagic) - 1;

Checkpoint Checkpoint::from_model(const NerfModel& model, const AdamState& opt, long iteration,
                                  uint64_t seed) {
  Checkpoint c;
  c.arch = model.architecture();
  c.parameters = model.parameters();
  c.optimizer = opt;
  c.iteration = iteration;
  c.seed = seed;
  return c;
}

NerfModel Checkpoint::to_model() const {
  NerfModel model(arch);
  require(model.parameter_count() == parameters.size(), ErrorKind::format,
          "checkpoint: parameter count does not match architecture");
  model.parameters() = parameters;
  return model;
}

namespace {

struct Writer {
  std::string buf;
  void raw(const void* p, size_t n) { buf.append(static_cast<const char*>(p), n); }
  void u64(uint64_t v) { raw(&v, 8); }
  void i64(int64_t v) { raw(&v, 8); }
  void i32(int32_t v) { raw(&v, 4); }
  void vec(const Eigen::VectorXd& v) {
    u64(uint64_t(v.size()));
    raw(v.data(), size_t(v.size()) * sizeof(double));
  }
};

struct Reader {
  const std::string& buf;
  size_t pos = 0;
  void raw(void* p, size_t n) {
    if (pos + n > buf.size()) fail_format("checkpoint truncated");
    std::memcpy(p, buf.data() + pos, n);
    pos += n;
  }
  uint64_t u64() { uint64_t v; raw(&v, 8); return v; }
  int64_t i64() { int64_t v; raw(&v, 8); return v; }
  int32_t i32() { int32_t v; raw(&v, 4); return v; }
  Eigen::VectorXd vec() {
    uint64_t n = u64();
    if (n > (1ull << 32)) fail_format("checkpoint: implausible vector length");
    Eigen::VectorXd v = Eigen::VectorXd::Zero(Eigen::Index(n));
    raw(v.data(), size_t(n) * sizeof(double));
    return v;
  }
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  Writer w;
  w.raw(kMagic, kMagicLen);
  w.i32(ckpt.arch.depth);
  w.i32(ckpt.arch.width);
  w.i32(ckpt.arch.skip_layer);
  w.i32(ckpt.arch.encoding.n_freq_position);
  w.i32(ckpt.arch.encoding.n_freq_direction);
  w.i32(ckpt.arch.encoding.include_input ? 1 : 0);
  w.u64(ckpt.seed);
  w.i64(ckpt.iteration);
  w.vec(ckpt.parameters);
  w.i64(ckpt.optimizer.step);
  w.vec(ckpt.optimizer.m);
  w.vec(ckpt.optimizer.v);
  atomic_write(path, w.buf);
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::string buf = read_file(path);
  if (buf.size() < kMagicLen || std::memcmp(buf.data(), kMagic, kMagicLen) != 0)
    fail_format("not an IPANERF-CKPT-1 checkpoint: " + path.string());

  Reader r{buf, kMagicLen};
  Checkpoint c;
  c.arch.depth = r.i32();
  c.arch.width = r.i32();
  c.arch.skip_layer = r.i32();
  c.arch.encoding.n_freq_position = r.i32();
  c.arch.encoding.n_freq_direction = r.i32();
  c.arch.encoding.include_input = r.i32() != 0;
  c.seed = r.u64();
  c.iteration = r.i64();
  c.parameters = r.vec();
  c.optimizer.step = r.i64();
  c.optimizer.m = r.vec();
  c.optimizer.v = r.vec();
  if (r.pos != buf.size()) fail_format("checkpoint has trailing bytes: " + path.string());
  c.arch.validate();
  return c;
}

}  // namespace ipanerf
