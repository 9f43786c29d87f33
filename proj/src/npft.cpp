#include "afe/npft.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace afe::npft {
namespace {

constexpr char kMagic[4] = {'N', 'P', 'F', 'T'};
constexpr std::size_t kFixedHeader = 12;

template <typename U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
}

template <typename U>
U get_le(std::string_view in, std::size_t offset) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    v |= static_cast<U>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  }
  return v;
}

}  // namespace

std::string serialize(const Tensor& t) {
  if (t.empty()) throw InvalidArgument("cannot serialize an empty tensor");
  std::string out;
  out.reserve(kFixedHeader + 8 * t.rank() + 4 * t.size());
  out.append(kMagic, 4);
  out.push_back(static_cast<char>(kVersion));
  out.push_back(static_cast<char>(kDtypeF32));
  out.push_back('\0');
  out.push_back('\0');
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.dims()) put_le<std::uint64_t>(out, d);
  for (float v : t.values()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Tensor deserialize(std::string_view bytes) {
  if (bytes.size() < 4) throw FormatError("magic", "file shorter than magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("magic", "expected \"NPFT\"");
  }
  if (bytes.size() < kFixedHeader) throw FormatError("header", "truncated header");
  const auto version = static_cast<std::uint8_t>(bytes[4]);
  if (version != kVersion) {
    throw FormatError("version", "unsupported version " + std::to_string(version));
  }
  const auto dtype = static_cast<std::uint8_t>(bytes[5]);
  if (dtype != kDtypeF32) {
    throw FormatError("dtype", "unsupported dtype " + std::to_string(dtype));
  }
  if (bytes[6] != 0 || bytes[7] != 0) throw FormatError("reserved", "must be zero");
  const auto ndim = get_le<std::uint32_t>(bytes, 8);
  if (ndim == 0) throw FormatError("ndim", "must be >= 1");
  if (bytes.size() < kFixedHeader + 8ull * ndim) {
    throw FormatError("extents", "truncated extent list");
  }
  Dims dims(ndim);
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    const auto d = get_le<std::uint64_t>(bytes, kFixedHeader + 8ull * i);
    if (d == 0) throw FormatError("extents", "extent " + std::to_string(i) + " is zero");
    if (count > std::numeric_limits<std::uint64_t>::max() / d) {
      throw FormatError("extents", "element count overflows");
    }
    count *= d;
    dims[i] = static_cast<std::size_t>(d);
  }
  const std::size_t payload_at = kFixedHeader + 8ull * ndim;
  const std::size_t have = bytes.size() - payload_at;
  if (count > have / 4 || have != 4 * count) {
    throw FormatError("payload", "expected " + std::to_string(4 * count) +
                                     " payload bytes, found " + std::to_string(have));
  }
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, payload_at + 4 * i));
  }
  return Tensor(std::move(dims), std::move(data));
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  const std::string bytes = serialize(t);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open tensor file " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  try {
    return deserialize(ss.str());
  } catch (const FormatError& e) {
    throw FormatError(e.field(), e.detail() + " in " + path.string());
  }
}

}  // namespace afe::npft
