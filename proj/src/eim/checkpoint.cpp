#include "eim/checkpoint.hpp"

#include "eim/error.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>

namespace eim {
namespace {

constexpr std::array<char, 8> kMagic = {'E', 'I', 'M', 'C', 'K', 'P', 'T', '\0'};

template <class U>
void put_le(std::ostream& out, U v) {
  std::array<char, sizeof(U)> buf;
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = char((v >> (8 * i)) & 0xff);
  out.write(buf.data(), buf.size());
}

template <class U>
U get_le(std::istream& in) {
  std::array<unsigned char, sizeof(U)> buf;
  in.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (!in) throw IoError("truncated checkpoint");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= U(buf[i]) << (8 * i);
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put_le<std::uint32_t>(out, std::uint32_t(s.size()));
  out.write(s.data(), std::streamsize(s.size()));
}

std::string get_string(std::istream& in) {
  const auto n = get_le<std::uint32_t>(in);
  if (n > (1u << 20)) throw IoError("checkpoint string too long");
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw IoError("truncated checkpoint");
  return s;
}

std::string format_double(double v) {
  std::array<char, 32> buf;
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

const std::string& need(const Metadata& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw IoError("checkpoint metadata lacks '" + key + "'");
  return it->second;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw IoError("bad number '" + s + "'");
  return v;
}

long long parse_int(const std::string& s) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw IoError("bad integer '" + s + "'");
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Metadata& metadata, const ParamStore& params) {
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, std::uint32_t(metadata.size()));
  for (const auto& [k, v] : metadata) {
    put_string(out, k);
    put_string(out, v);
  }
  put_le<std::uint32_t>(out, std::uint32_t(params.size()));
  for (const auto& e : params) {
    put_string(out, e.name);
    put_le<std::uint8_t>(out, e.trainable ? 1 : 0);
    put_le<std::uint32_t>(out, std::uint32_t(e.value.rank()));
    for (auto extent : e.value.shape()) put_le<std::uint64_t>(out, extent);
    for (double v : e.value.data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw IoError("failed writing checkpoint");
}

CheckpointData read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw IoError("not a checkpoint file (bad magic)");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  CheckpointData data;
  const auto n_meta = get_le<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = get_string(in);
    data.metadata[k] = get_string(in);
  }
  const auto n_tensors = get_le<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = get_string(in);
    const bool trainable = get_le<std::uint8_t>(in) != 0;
    const auto rank = get_le<std::uint32_t>(in);
    if (rank > 8) throw IoError("implausible tensor rank in checkpoint");
    std::vector<std::size_t> shape(rank);
    std::size_t numel = 1;
    for (auto& e : shape) {
      e = std::size_t(get_le<std::uint64_t>(in));
      numel *= e;
    }
    if (numel > (std::size_t(1) << 28)) throw IoError("implausible tensor size in checkpoint");
    std::vector<double> values(numel);
    for (auto& v : values) v = std::bit_cast<double>(get_le<std::uint64_t>(in));
    data.params.add(std::move(name), Tensor(std::move(shape), std::move(values)), trainable);
  }
  return data;
}

Metadata model_metadata(const ModelSpec& spec) {
  return {
      {"model", std::string(model_name(spec.kind))},
      {"dim", std::to_string(spec.dim)},
      {"k", std::to_string(spec.k)},
      {"t", std::to_string(spec.t)},
      {"trs_inner_samples", std::to_string(spec.trs_inner_samples)},
      {"proposal_mean", format_double(spec.proposal_mean)},
      {"proposal_std", format_double(spec.proposal_std)},
      {"train_proposal", spec.train_proposal ? "1" : "0"},
  };
}

ModelSpec spec_from_metadata(const Metadata& m) {
  ModelSpec spec;
  spec.kind = parse_model_kind(need(m, "model"));
  spec.dim = std::size_t(parse_int(need(m, "dim")));
  spec.k = int(parse_int(need(m, "k")));
  spec.t = int(parse_int(need(m, "t")));
  spec.trs_inner_samples = int(parse_int(need(m, "trs_inner_samples")));
  spec.proposal_mean = parse_double(need(m, "proposal_mean"));
  spec.proposal_std = parse_double(need(m, "proposal_std"));
  spec.train_proposal = need(m, "train_proposal") == "1";
  return spec;
}

void save_model(const EimModel& model, const std::string& path, const Metadata& extra) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    Metadata meta = extra;
    for (auto& [k, v] : model_metadata(model.spec())) meta[k] = v;
    write_checkpoint(out, meta, model.params());
    if (!out.flush()) throw IoError("failed writing '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at '" + path + "': " + ec.message());
}

std::unique_ptr<EimModel> load_model(const std::string& path, Metadata* metadata) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  CheckpointData data = read_checkpoint(in);
  if (metadata) *metadata = data.metadata;
  return make_model(spec_from_metadata(data.metadata), std::move(data.params));
}

}  // namespace eim
