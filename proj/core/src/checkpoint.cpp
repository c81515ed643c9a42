#include "heloc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "heloc/error.hpp"

namespace heloc {
namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'H', 'E', 'L', 'C'};

template <typename T>
void put_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw FormatError("truncated checkpoint");
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
  return value;
}

std::string get_bytes(std::istream& in, std::size_t n) {
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), static_cast<std::streamsize>(n)))
    throw FormatError("truncated checkpoint");
  return s;
}

json config_to_json(const TrainConfig& cfg) {
  json j = json::object();
  for (const auto& [key, value] : describe(cfg)) j[key] = value;
  return j;
}

TrainConfig config_from_json(const json& j) {
  TrainConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (!value.is_string()) throw FormatError("checkpoint config field '" + key + "' is not a string");
    apply_setting(cfg, key, value.get<std::string>());
  }
  return cfg;
}

}  // namespace

const Tensor2* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : arrays)
    if (n == name) return &t;
  return nullptr;
}

Checkpoint make_checkpoint(const TrainConfig& cfg, const HclParams& params,
                           const std::string& rng_state) {
  Checkpoint c{cfg, cfg.embedder(), rng_state, {}};
  for (const auto& [name, p] : params.named()) c.arrays.emplace_back(name, p->value);
  return c;
}

Checkpoint make_checkpoint(const PretrainResult& result) {
  return make_checkpoint(result.config, result.params, result.rng_state);
}

HclParams params_from_checkpoint(const Checkpoint& ckpt) {
  if (!(ckpt.embedder == ckpt.config.embedder()))
    throw ShapeError("checkpoint embedder does not match its training configuration");
  Rng scratch(0);
  HclParams params = HclParams::init(ckpt.config, scratch);
  for (auto& [name, p] : params.named()) {
    const Tensor2* stored = ckpt.find(name);
    if (stored == nullptr) throw ShapeError("checkpoint lacks array '" + name + "'");
    if (!stored->same_shape(p->value))
      throw ShapeError("array '" + name + "' is " + std::to_string(stored->rows()) + "x" +
                       std::to_string(stored->cols()) + ", configuration expects " +
                       std::to_string(p->value.rows()) + "x" + std::to_string(p->value.cols()));
    *p = Param(*stored);
  }
  return params;
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out.write(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, Checkpoint::kVersion);
  json header = {{"config", config_to_json(ckpt.config)},
                 {"embedder",
                  {{"dim", ckpt.embedder.dim},
                   {"ngram_sizes", ckpt.embedder.ngram_sizes},
                   {"hash_seed", ckpt.embedder.hash_seed}}},
                 {"rng_state", ckpt.rng_state}};
  const std::string text = header.dump();
  put_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.arrays.size()));
  for (const auto& [name, t] : ckpt.arrays) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rows()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.cols()));
    for (double v : t.data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw FormatError("failed to write checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[4];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw FormatError("not a checkpoint (bad magic)");
  const auto version = get_le<std::uint32_t>(in);
  if (version != Checkpoint::kVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = get_le<std::uint64_t>(in);
  if (header_len > (std::uint64_t{1} << 32)) throw FormatError("implausible checkpoint header");
  json header;
  try {
    header = json::parse(get_bytes(in, static_cast<std::size_t>(header_len)));
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }

  Checkpoint c;
  try {
    c.config = config_from_json(header.at("config"));
    const json& e = header.at("embedder");
    c.embedder.dim = e.at("dim").get<std::size_t>();
    c.embedder.ngram_sizes = e.at("ngram_sizes").get<std::vector<std::size_t>>();
    c.embedder.hash_seed = e.at("hash_seed").get<std::uint64_t>();
    c.rng_state = header.at("rng_state").get<std::string>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  } catch (const DomainError& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  if (!(c.embedder == c.config.embedder()))
    throw ShapeError("checkpoint embedder does not match its training configuration");

  const auto count = get_le<std::uint32_t>(in);
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto name_len = get_le<std::uint32_t>(in);
    std::string name = get_bytes(in, name_len);
    const auto rows = get_le<std::uint32_t>(in);
    const auto cols = get_le<std::uint32_t>(in);
    const std::uint64_t n = std::uint64_t{rows} * cols;
    if (n > (std::uint64_t{1} << 31)) throw FormatError("implausible array size for '" + name + "'");
    std::vector<double> data(static_cast<std::size_t>(n));
    for (double& v : data) v = std::bit_cast<double>(get_le<std::uint64_t>(in));
    c.arrays.emplace_back(std::move(name), Tensor2(rows, cols, std::move(data)));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after checkpoint");
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + tmp.string() + " for writing");
    write_checkpoint(out, ckpt);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace heloc
