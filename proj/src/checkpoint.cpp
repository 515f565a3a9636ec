#include "deltagan/checkpoint.hpp"

#include <cstring>
#include <iomanip>
#include <sstream>

#include "deltagan/error.hpp"
#include "deltagan/image_io.hpp"

namespace deltagan {

namespace {

constexpr char kMagic[8] = {'D', 'G', 'A', 'N', 'A', 'R', 'C', 'H'};

enum class DType : std::uint8_t { Float32 = 0, Float64 = 1, Int64 = 2 };

DType dtype_of(const torch::Tensor& t) {
  switch (t.scalar_type()) {
    case torch::kFloat32: return DType::Float32;
    case torch::kFloat64: return DType::Float64;
    case torch::kInt64: return DType::Int64;
    default: throw Error(ErrorKind::InvalidCheckpoint, "unsupported tensor dtype");
  }
}

torch::ScalarType scalar_type_of(DType d) {
  switch (d) {
    case DType::Float32: return torch::kFloat32;
    case DType::Float64: return torch::kFloat64;
    case DType::Int64: return torch::kInt64;
  }
  throw Error(ErrorKind::InvalidCheckpoint, "unknown dtype tag");
}

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    const auto* p = reinterpret_cast<const unsigned char*>(&v);
    out_.insert(out_.end(), p, p + sizeof(T));
  }
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  std::vector<unsigned char> take() { return std::move(out_); }

 private:
  std::vector<unsigned char> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& in) : in_(in) {}

  template <typename T>
  T pod() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  const unsigned char* take(std::size_t n) {
    if (n > in_.size() - pos_) throw Error(ErrorKind::InvalidCheckpoint, "truncated archive");
    const auto* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  const std::vector<unsigned char>& in_;
  std::size_t pos_ = 0;
};

template <std::size_t N>
nlohmann::ordered_json array_json(const std::array<int, N>& a) {
  auto j = nlohmann::ordered_json::array();
  for (int v : a) j.push_back(v);
  return j;
}

template <std::size_t N>
std::array<int, N> array_from(const nlohmann::ordered_json& j) {
  if (!j.is_array() || j.size() != N) {
    throw Error(ErrorKind::InvalidCheckpoint, "width list has the wrong length");
  }
  std::array<int, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = j[i].get<int>();
  return out;
}

void copy_into(const Archive& archive, const std::string& name, torch::Tensor& target) {
  auto it = archive.arrays.find(name);
  if (it == archive.arrays.end()) {
    throw Error(ErrorKind::InvalidCheckpoint, "missing array " + name);
  }
  if (it->second.sizes() != target.sizes()) {
    throw Error(ErrorKind::InvalidCheckpoint, "shape mismatch for " + name);
  }
  torch::NoGradGuard no_grad;
  target.copy_(it->second);
}

}  // namespace

std::vector<unsigned char> encode_archive(const Archive& archive) {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.pod<std::uint32_t>(archive.version);
  const std::string meta = archive.meta.dump();
  w.pod<std::uint64_t>(meta.size());
  w.bytes(meta.data(), meta.size());
  w.pod<std::uint64_t>(archive.arrays.size());
  for (const auto& [name, tensor] : archive.arrays) {
    auto t = tensor.detach().to(torch::kCPU).contiguous();
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.pod<std::uint8_t>(static_cast<std::uint8_t>(dtype_of(t)));
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(t.dim()));
    for (auto d : t.sizes()) w.pod<std::int64_t>(d);
    w.bytes(t.data_ptr(), t.numel() * t.element_size());
  }
  return w.take();
}

Archive decode_archive(const std::vector<unsigned char>& bytes) {
  Reader r(bytes);
  if (std::memcmp(r.take(sizeof(kMagic)), kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorKind::InvalidCheckpoint, "not a model archive");
  }
  Archive a;
  a.version = r.pod<std::uint32_t>();
  if (a.version != kArchiveVersion) {
    throw Error(ErrorKind::InvalidCheckpoint,
                "unsupported archive version " + std::to_string(a.version));
  }
  const auto meta_len = r.pod<std::uint64_t>();
  const auto* meta = r.take(meta_len);
  try {
    a.meta = nlohmann::ordered_json::parse(meta, meta + meta_len);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidCheckpoint, std::string("bad meta block: ") + e.what());
  }
  const auto count = r.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = r.pod<std::uint32_t>();
    const auto* name = r.take(name_len);
    const auto dtype = scalar_type_of(static_cast<DType>(r.pod<std::uint8_t>()));
    const auto rank = r.pod<std::uint32_t>();
    if (rank > 8) throw Error(ErrorKind::InvalidCheckpoint, "implausible tensor rank");
    std::vector<std::int64_t> dims(rank);
    for (auto& d : dims) {
      d = r.pod<std::int64_t>();
      if (d < 0) throw Error(ErrorKind::InvalidCheckpoint, "negative dimension");
    }
    auto t = torch::empty(dims, torch::TensorOptions().dtype(dtype));
    const auto n = static_cast<std::size_t>(t.numel() * t.element_size());
    std::memcpy(t.data_ptr(), r.take(n), n);
    a.arrays.emplace(std::string(reinterpret_cast<const char*>(name), name_len), std::move(t));
  }
  if (!r.done()) throw Error(ErrorKind::InvalidCheckpoint, "trailing bytes after archive");
  return a;
}

void save_archive(const std::filesystem::path& path, const Archive& archive) {
  write_file(path, encode_archive(archive));
}

Archive load_archive(const std::filesystem::path& path) { return decode_archive(read_file(path)); }

void store_module(Archive& archive, const std::string& prefix, const torch::nn::Module& module) {
  for (const auto& item : module.named_parameters(true)) {
    archive.arrays[prefix + "/" + item.key()] = item.value().detach().clone();
  }
  for (const auto& item : module.named_buffers(true)) {
    archive.arrays[prefix + "/" + item.key()] = item.value().detach().clone();
  }
}

void restore_module(const Archive& archive, const std::string& prefix, torch::nn::Module& module) {
  for (auto& item : module.named_parameters(true)) {
    copy_into(archive, prefix + "/" + item.key(), item.value());
  }
  for (auto& item : module.named_buffers(true)) {
    copy_into(archive, prefix + "/" + item.key(), item.value());
  }
}

nlohmann::ordered_json to_json(const GeneratorConfig& c) {
  nlohmann::ordered_json j;
  j["height"] = c.height;
  j["width"] = c.width;
  j["category_count"] = c.category_count;
  j["source_widths"] = array_json(c.source_widths);
  j["condition_widths"] = array_json(c.condition_widths);
  j["trunk_width"] = c.trunk_width;
  j["residual_blocks"] = c.residual_blocks;
  j["decoder_widths"] = array_json(c.decoder_widths);
  return j;
}

GeneratorConfig generator_config_from_json(const nlohmann::ordered_json& j) {
  try {
    GeneratorConfig c;
    c.height = j.at("height").get<int>();
    c.width = j.at("width").get<int>();
    c.category_count = j.at("category_count").get<int>();
    c.source_widths = array_from<3>(j.at("source_widths"));
    c.condition_widths = array_from<3>(j.at("condition_widths"));
    c.trunk_width = j.at("trunk_width").get<int>();
    c.residual_blocks = j.at("residual_blocks").get<int>();
    c.decoder_widths = array_from<2>(j.at("decoder_widths"));
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidCheckpoint, std::string("generator config: ") + e.what());
  }
}

nlohmann::ordered_json to_json(const DiscriminatorConfig& c) {
  nlohmann::ordered_json j;
  j["height"] = c.height;
  j["width"] = c.width;
  j["category_count"] = c.category_count;
  j["map_channels"] = c.map_channels;
  j["widths"] = array_json(c.widths);
  j["leaky_slope"] = c.leaky_slope;
  return j;
}

DiscriminatorConfig discriminator_config_from_json(const nlohmann::ordered_json& j) {
  try {
    DiscriminatorConfig c;
    c.height = j.at("height").get<int>();
    c.width = j.at("width").get<int>();
    c.category_count = j.at("category_count").get<int>();
    c.map_channels = j.at("map_channels").get<int>();
    c.widths = array_from<6>(j.at("widths"));
    c.leaky_slope = j.at("leaky_slope").get<double>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidCheckpoint, std::string("discriminator config: ") + e.what());
  }
}

Generator load_generator(const Archive& archive) {
  if (!archive.meta.contains("generator")) {
    throw Error(ErrorKind::InvalidCheckpoint, "archive holds no generator");
  }
  Generator g(generator_config_from_json(archive.meta.at("generator")));
  restore_module(archive, "generator", *g);
  g->eval();
  return g;
}

std::vector<std::string> category_names(const Archive& archive) {
  int count = 0;
  if (archive.meta.contains("generator")) {
    count = archive.meta.at("generator").value("category_count", 0);
  }
  std::vector<std::string> names;
  if (archive.meta.contains("category_names")) {
    for (const auto& n : archive.meta.at("category_names")) names.push_back(n.get<std::string>());
  }
  for (int i = static_cast<int>(names.size()); i < count; ++i) {
    names.push_back("gesture_" + std::to_string(i));
  }
  names.resize(static_cast<std::size_t>(count));
  return names;
}

std::string content_id(const std::vector<unsigned char>& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace deltagan
