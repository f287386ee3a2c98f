#include "lrnet/app/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "lrnet/core/error.hpp"

namespace lrnet::app {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out_.insert(out_.end(), p, p + sizeof(T));
  }
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  void tensors(const std::vector<NamedTensor>& table) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(table.size()));
    for (const auto& t : table) {
      pod<std::uint32_t>(static_cast<std::uint32_t>(t.name.size()));
      bytes(t.name.data(), t.name.size());
      pod<std::uint32_t>(static_cast<std::uint32_t>(t.value.rank()));
      for (auto d : t.value.shape()) pod<std::uint64_t>(d);
      bytes(t.value.raw(), t.value.size() * sizeof(float));
    }
  }
  data::Bytes take() { return std::move(out_); }

 private:
  data::Bytes out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  template <typename T>
  T pod() {
    T v;
    std::memcpy(&v, need(sizeof(T)), sizeof(T));
    return v;
  }
  std::string str(std::size_t n) {
    const auto* p = need(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  std::vector<NamedTensor> tensors() {
    const auto count = pod<std::uint32_t>();
    std::vector<NamedTensor> table;
    for (std::uint32_t i = 0; i < count; ++i) {
      NamedTensor t;
      t.name = str(pod<std::uint32_t>());
      const auto rank = pod<std::uint32_t>();
      if (rank == 0 || rank > 8) throw FormatError("checkpoint tensor " + t.name + " has rank " + std::to_string(rank));
      Shape shape(rank);
      std::size_t n = 1;
      for (auto& d : shape) {
        d = static_cast<std::size_t>(pod<std::uint64_t>());
        if (d == 0 || n > (std::size_t{1} << 40) / d) throw FormatError("checkpoint tensor " + t.name + " is malformed");
        n *= d;
      }
      std::vector<float> values(n);
      std::memcpy(values.data(), need(n * sizeof(float)), n * sizeof(float));
      t.value = Tensor(std::move(shape), std::move(values));
      table.push_back(std::move(t));
    }
    return table;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  const std::uint8_t* need(std::size_t n) {
    if (in_.size() - pos_ < n) throw FormatError("checkpoint is truncated");
    const auto* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::vector<NamedTensor> moments(const std::map<std::string, Tensor>& m) {
  std::vector<NamedTensor> out;
  for (const auto& [name, t] : m) out.push_back({name, t});
  return out;
}

}  // namespace

data::Bytes encode_checkpoint(const Checkpoint& c) {
  Writer w;
  w.bytes(kCheckpointMagic, 4);
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.pod<std::uint64_t>(c.config_json.size());
  w.bytes(c.config_json.data(), c.config_json.size());
  w.tensors(c.parameters);

  const auto& o = c.optimizer;
  w.pod<std::uint32_t>(o.kind == nn::OptimizerKind::sgd ? 0 : 1);
  w.pod<double>(o.lr);
  w.pod<double>(o.beta1);
  w.pod<double>(o.beta2);
  w.pod<double>(o.eps);
  w.pod<std::uint64_t>(o.step);
  w.tensors(moments(o.m));
  w.tensors(moments(o.v));

  w.pod<std::uint64_t>(c.epochs_completed);
  const auto& e = c.early_stop;
  w.pod<std::uint64_t>(e.patience);
  w.pod<double>(e.best_val_loss);
  w.pod<std::uint64_t>(e.epochs_since_improve);
  w.pod<std::int64_t>(e.best_epoch);
  w.pod<std::uint64_t>(e.epochs_seen);

  w.pod<std::uint64_t>(c.rng_state.size());
  w.bytes(c.rng_state.data(), c.rng_state.size());
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.str(4) != std::string(kCheckpointMagic, 4)) throw FormatError("not a checkpoint (bad magic)");
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint c;
  c.config_json = r.str(static_cast<std::size_t>(r.pod<std::uint64_t>()));
  c.parameters = r.tensors();

  auto& o = c.optimizer;
  const auto kind = r.pod<std::uint32_t>();
  if (kind > 1) throw FormatError("checkpoint optimizer kind " + std::to_string(kind) + " is unknown");
  o.kind = kind == 0 ? nn::OptimizerKind::sgd : nn::OptimizerKind::adam;
  o.lr = r.pod<double>();
  o.beta1 = r.pod<double>();
  o.beta2 = r.pod<double>();
  o.eps = r.pod<double>();
  o.step = r.pod<std::uint64_t>();
  for (auto& t : r.tensors()) o.m.emplace(t.name, std::move(t.value));
  for (auto& t : r.tensors()) o.v.emplace(t.name, std::move(t.value));

  c.epochs_completed = r.pod<std::uint64_t>();
  auto& e = c.early_stop;
  e.patience = static_cast<std::size_t>(r.pod<std::uint64_t>());
  e.best_val_loss = r.pod<double>();
  e.epochs_since_improve = static_cast<std::size_t>(r.pod<std::uint64_t>());
  e.best_epoch = r.pod<std::int64_t>();
  e.epochs_seen = static_cast<std::size_t>(r.pod<std::uint64_t>());

  c.rng_state = r.str(static_cast<std::size_t>(r.pod<std::uint64_t>()));
  if (!r.done()) throw FormatError("checkpoint has trailing bytes");
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  data::write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(data::read_file(path)); }

void restore_parameters(model::Model<float>& model, const std::vector<NamedTensor>& params) {
  auto live = model.parameters();
  if (live.size() != params.size()) {
    throw FormatError("checkpoint holds " + std::to_string(params.size()) + " tensors, model has " +
                      std::to_string(live.size()));
  }
  for (std::size_t i = 0; i < live.size(); ++i) {
    if (live[i].name != params[i].name || live[i].value.shape() != params[i].value.shape()) {
      throw FormatError("checkpoint tensor " + params[i].name + " " + shape_to_string(params[i].value.shape()) +
                        " does not match model parameter " + live[i].name + " " +
                        shape_to_string(live[i].value.shape()));
    }
    live[i].value = params[i].value;
  }
}

std::vector<NamedTensor> snapshot_parameters(const model::Model<float>& model) {
  std::vector<NamedTensor> out;
  for (const auto& p : model.parameters()) out.push_back({p.name, p.value});
  return out;
}

}  // namespace lrnet::app
