#include "gazeworld/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace gazeworld {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'G', 'Z', 'W', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>(v >> (8 * i) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>(v >> (8 * i) & 0xff));
}

template <typename T>
void put_scalar(std::string& out, T v) {
  if constexpr (sizeof(T) == 8) {
    put_u64(out, std::bit_cast<std::uint64_t>(v));
  } else {
    put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
}

struct Reader {
  std::istream& in;

  void bytes(char* dst, std::size_t n) {
    in.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
      throw CheckpointError(CheckpointError::Kind::kTruncated, "checkpoint: truncated file");
    }
  }
  std::uint32_t u32() {
    char b[4];
    bytes(b, 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = v << 8 | static_cast<unsigned char>(b[i]);
    return v;
  }
  std::uint64_t u64() {
    char b[8];
    bytes(b, 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = v << 8 | static_cast<unsigned char>(b[i]);
    return v;
  }
  template <typename T>
  T scalar() {
    if constexpr (sizeof(T) == 8) {
      return std::bit_cast<T>(u64());
    } else {
      return std::bit_cast<T>(u32());
    }
  }
  std::string str(std::size_t n) {
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
};

template <typename T>
void put_blob(std::string& out, const std::string& name, const Shape& shape,
              std::span<const T> data) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.append(name);
  out.push_back(static_cast<char>(sizeof(T)));
  put_u32(out, static_cast<std::uint32_t>(shape.size()));
  for (std::size_t d : shape) put_u64(out, d);
  for (T v : data) put_scalar(out, v);
}

json header_json(const ModelConfig& config, const char* precision, std::int64_t step,
                 std::int64_t opt_step, std::uint64_t dataset_seed, const json& train_config) {
  return json{{"config", config.to_json()},
              {"precision", precision},
              {"step", step},
              {"opt_step", opt_step},
              {"dataset_seed", dataset_seed},
              {"train_config", train_config}};
}

json read_header(Reader& r) {
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) {
    throw CheckpointError(CheckpointError::Kind::kMagic, "checkpoint: wrong magic bytes");
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw CheckpointError(CheckpointError::Kind::kVersion,
                          "checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint64_t len = r.u64();
  json header;
  try {
    header = json::parse(r.str(len));
  } catch (const json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::kCorrupt,
                          std::string("checkpoint: bad header JSON: ") + e.what());
  }
  return header;
}

}  // namespace

template <typename T>
void save_checkpoint(const Checkpoint<T>& ckpt, const std::filesystem::path& path) {
  const std::string header =
      header_json(ckpt.config, precision_name<T>(), ckpt.step, ckpt.opt_step,
                  ckpt.dataset_seed, ckpt.train_config)
          .dump();

  std::string out;
  out.append(kMagic, 8);
  put_u32(out, kVersion);
  put_u64(out, header.size());
  out.append(header);

  const bool with_opt = !ckpt.opt_m.empty();
  if (with_opt && (ckpt.opt_m.size() != ckpt.model.online.items.size() ||
                   ckpt.opt_v.size() != ckpt.model.online.items.size())) {
    throw std::invalid_argument("save_checkpoint: optimizer moments misaligned with parameters");
  }
  const std::size_t n_params = ckpt.model.online.items.size();
  put_u64(out, n_params + ckpt.model.target.items.size() + (with_opt ? 2 * n_params : 0));

  for (const auto& [name, t] : ckpt.model.online.items) {
    put_blob<T>(out, name, t.shape(), t.data());
  }
  for (const auto& [name, t] : ckpt.model.target.items) {
    put_blob<T>(out, "target." + name, t.shape(), t.data());
  }
  if (with_opt) {
    for (std::size_t i = 0; i < n_params; ++i) {
      const auto& [name, t] = ckpt.model.online.items[i];
      put_blob<T>(out, "opt.m." + name, t.shape(),
                  std::span<const T>(ckpt.opt_m[i].data(), ckpt.opt_m[i].size()));
      put_blob<T>(out, "opt.v." + name, t.shape(),
                  std::span<const T>(ckpt.opt_v[i].data(), ckpt.opt_v[i].size()));
    }
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("I/O error writing checkpoint: " + path.string());
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path.string());
  Reader r{f};
  const json header = read_header(r);

  Checkpoint<T> ckpt;
  try {
    ckpt.config = ModelConfig::from_json(header.at("config"));
    ckpt.step = header.at("step").get<std::int64_t>();
    ckpt.opt_step = header.at("opt_step").get<std::int64_t>();
    ckpt.dataset_seed = header.at("dataset_seed").get<std::uint64_t>();
    ckpt.train_config = header.at("train_config");
    if (header.at("precision").get<std::string>() != precision_name<T>()) {
      throw CheckpointError(CheckpointError::Kind::kCorrupt,
                            "checkpoint: precision mismatch (file stores " +
                                header.at("precision").get<std::string>() + ")");
    }
  } catch (const json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::kCorrupt,
                          std::string("checkpoint: invalid header fields: ") + e.what());
  }

  // Rebuild the parameter structure, then overwrite every buffer from blobs.
  ckpt.model = ModelState<T>::init(ckpt.config, 0);
  ckpt.opt_m.clear();
  ckpt.opt_v.clear();

  const std::uint64_t blob_count = r.u64();
  std::size_t filled = 0;
  std::vector<std::vector<T>> opt_m(ckpt.model.online.items.size());
  std::vector<std::vector<T>> opt_v(ckpt.model.online.items.size());
  bool any_opt = false;

  auto param_index = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < ckpt.model.online.items.size(); ++i) {
      if (ckpt.model.online.items[i].first == name) return i;
    }
    throw CheckpointError(CheckpointError::Kind::kCorrupt,
                          "checkpoint: unknown parameter blob '" + name + "'");
  };

  for (std::uint64_t b = 0; b < blob_count; ++b) {
    const std::uint32_t name_len = r.u32();
    const std::string name = r.str(name_len);
    const auto dtype = static_cast<std::size_t>(static_cast<unsigned char>(r.str(1)[0]));
    if (dtype != sizeof(T)) {
      throw CheckpointError(CheckpointError::Kind::kCorrupt,
                            "checkpoint: blob dtype mismatch for '" + name + "'");
    }
    Shape shape(r.u32());
    for (auto& d : shape) d = r.u64();
    std::vector<T> data(shape_size(shape));
    for (auto& v : data) v = r.template scalar<T>();

    auto fill_param = [&](Tensor<T>& t) {
      if (t.shape() != shape) {
        throw CheckpointError(CheckpointError::Kind::kCorrupt,
                              "checkpoint: shape mismatch for blob '" + name + "'");
      }
      std::copy(data.begin(), data.end(), t.raw_data().begin());
      ++filled;
    };

    if (name.starts_with("opt.m.")) {
      opt_m[param_index(name.substr(6))] = std::move(data);
      any_opt = true;
    } else if (name.starts_with("opt.v.")) {
      opt_v[param_index(name.substr(6))] = std::move(data);
      any_opt = true;
    } else if (name.starts_with("target.")) {
      fill_param(ckpt.model.target.at(name.substr(7)));
    } else {
      fill_param(ckpt.model.online.at(name));
    }
  }

  if (filled != ckpt.model.online.items.size() + ckpt.model.target.items.size()) {
    throw CheckpointError(CheckpointError::Kind::kCorrupt,
                          "checkpoint: missing parameter blobs");
  }
  if (any_opt) {
    for (std::size_t i = 0; i < opt_m.size(); ++i) {
      if (opt_m[i].empty() || opt_v[i].empty()) {
        throw CheckpointError(CheckpointError::Kind::kCorrupt,
                              "checkpoint: incomplete optimizer state");
      }
    }
    ckpt.opt_m = std::move(opt_m);
    ckpt.opt_v = std::move(opt_v);
  }
  if (f.peek() != EOF) {
    throw CheckpointError(CheckpointError::Kind::kCorrupt,
                          "checkpoint: trailing bytes after blobs");
  }
  return ckpt;
}

std::string checkpoint_precision(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path.string());
  Reader r{f};
  const json header = read_header(r);
  return header.at("precision").get<std::string>();
}

template void save_checkpoint<float>(const Checkpoint<float>&, const std::filesystem::path&);
template void save_checkpoint<double>(const Checkpoint<double>&, const std::filesystem::path&);
template Checkpoint<float> load_checkpoint<float>(const std::filesystem::path&);
template Checkpoint<double> load_checkpoint<double>(const std::filesystem::path&);

}  // namespace gazeworld
