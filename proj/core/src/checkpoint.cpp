#include "dwt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dwt/errors.hpp"

namespace dwt {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'D', 'W', 'T', 'C'};

class Writer {
 public:
  template <typename V>
  void pod(V value) {
    const auto* p = reinterpret_cast<const char*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(V));
  }
  void raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const char*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  void text(const std::string& s) {
    pod<std::uint64_t>(s.size());
    raw(s.data(), s.size());
  }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class Reader {
 public:
  Reader(std::vector<char> bytes, std::string source) : bytes_(std::move(bytes)), source_(std::move(source)) {}

  template <typename V>
  V pod() {
    V value;
    std::memcpy(&value, take(sizeof(V)), sizeof(V));
    return value;
  }
  void raw(void* out, std::size_t n) { std::memcpy(out, take(n), n); }
  std::string text() {
    const auto n = pod<std::uint64_t>();
    const char* p = take(n);
    return std::string(p, p + n);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const char* take(std::size_t n) {
    if (n > bytes_.size() - pos_) throw InputError(source_ + ": truncated checkpoint");
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::vector<char> bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

void require_same_schema(const Checkpoint& a, const Checkpoint& b) {
  if (!(a.config == b.config)) throw InputError("checkpoint configs differ");
  if (a.entries.size() != b.entries.size()) throw InputError("checkpoint entry counts differ");
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    if (a.entries[i].name != b.entries[i].name || a.entries[i].shape != b.entries[i].shape) {
      throw InputError("checkpoint schemas differ at " + a.entries[i].name);
    }
  }
}

}  // namespace

template <typename T>
Checkpoint make_checkpoint(const Model<T>& model, std::uint64_t step, std::string metrics) {
  Checkpoint c;
  c.config = model.config;
  c.step = step;
  c.metrics = std::move(metrics);
  for (const auto& p : model.params.entries()) {
    const auto values = p.tensor.values();
    c.entries.push_back({p.name, p.tensor.shape(), std::vector<float>(values.begin(), values.end())});
  }
  return c;
}

template <typename T>
void apply_checkpoint(const Checkpoint& checkpoint, Model<T>& model) {
  if (!(checkpoint.config == model.config)) throw InputError("checkpoint config does not match the model");
  const auto& entries = model.params.entries();
  if (entries.size() != checkpoint.entries.size()) {
    throw InputError("checkpoint has " + std::to_string(checkpoint.entries.size()) + " tensors, model has " +
                     std::to_string(entries.size()));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& src = checkpoint.entries[i];
    if (src.name != entries[i].name || src.shape != entries[i].tensor.shape()) {
      throw InputError("checkpoint entry " + src.name + " " + shape_to_string(src.shape) +
                       " does not match model parameter " + entries[i].name);
    }
    Tensor<T> dst = entries[i].tensor;
    auto out = dst.mutable_values();
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = static_cast<T>(src.values[k]);
  }
}

template <typename T>
Model<T> model_from_checkpoint(const Checkpoint& checkpoint) {
  Model<T> model = build_model<T>(checkpoint.config, 0);
  apply_checkpoint(checkpoint, model);
  return model;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.pod<std::uint32_t>(Checkpoint::kVersion);
  w.text(format_key_values(checkpoint.config.to_key_values()));
  w.pod<std::uint64_t>(checkpoint.step);
  w.text(checkpoint.metrics);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(checkpoint.entries.size()));
  for (const auto& e : checkpoint.entries) {
    if (e.values.size() != shape_numel(e.shape)) throw InputError("entry " + e.name + " size mismatch");
    w.text(e.name);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(e.shape.size()));
    for (std::size_t extent : e.shape) w.pod<std::uint64_t>(extent);
    w.raw(e.values.data(), e.values.size() * sizeof(float));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw InputError("cannot write checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(std::move(bytes), path.string());

  char magic[4];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw InputError(path.string() + ": not a checkpoint");
  const auto version = r.pod<std::uint32_t>();
  if (version != Checkpoint::kVersion) {
    throw InputError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  c.config = ModelConfig::from_key_values(parse_key_values(r.text()));
  c.step = r.pod<std::uint64_t>();
  c.metrics = r.text();
  const auto count = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    e.name = r.text();
    const auto rank = r.pod<std::uint32_t>();
    for (std::uint32_t a = 0; a < rank; ++a) e.shape.push_back(static_cast<std::size_t>(r.pod<std::uint64_t>()));
    e.values.resize(shape_numel(e.shape));
    r.raw(e.values.data(), e.values.size() * sizeof(float));
    c.entries.push_back(std::move(e));
  }
  if (!r.done()) throw InputError(path.string() + ": trailing bytes after checkpoint");
  return c;
}

Checkpoint average_checkpoints(const std::vector<Checkpoint>& checkpoints) {
  if (checkpoints.empty()) throw InputError("no checkpoints to average");
  for (const auto& c : checkpoints) require_same_schema(checkpoints.front(), c);
  Checkpoint avg = checkpoints.back();
  const double k = static_cast<double>(checkpoints.size());
  for (std::size_t i = 0; i < avg.entries.size(); ++i) {
    auto& out = avg.entries[i].values;
    for (std::size_t j = 0; j < out.size(); ++j) {
      double total = 0.0;
      for (const auto& c : checkpoints) total += static_cast<double>(c.entries[i].values[j]);
      out[j] = static_cast<float>(total / k);
    }
  }
  return avg;
}

Checkpoint average_checkpoints(const std::vector<std::filesystem::path>& paths) {
  std::vector<Checkpoint> loaded;
  loaded.reserve(paths.size());
  for (const auto& p : paths) loaded.push_back(load_checkpoint(p));
  return average_checkpoints(loaded);
}

#define DWT_INSTANTIATE_CHECKPOINT(T)                                                       \
  template Checkpoint make_checkpoint(const Model<T>&, std::uint64_t, std::string);         \
  template void apply_checkpoint(const Checkpoint&, Model<T>&);                             \
  template Model<T> model_from_checkpoint(const Checkpoint&);

DWT_INSTANTIATE_CHECKPOINT(float)
DWT_INSTANTIATE_CHECKPOINT(double)

}  // namespace dwt
