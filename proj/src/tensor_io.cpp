#include "rme/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"

#include "rme/errors.hpp"

namespace rme::io {

namespace {

static_assert(std::endian::native == std::endian::little, "RMT1 codec assumes a little-endian host");

constexpr char kMagic[4] = {'R', 'M', 'T', '1'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

template <typename T>
T take(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw FormatError("RMT1: truncated file");
  T value;
  std::memcpy(&value, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

}  // namespace

std::vector<std::uint8_t> encode_rmt1(const RadioMap& x) {
  std::vector<std::uint8_t> out;
  out.reserve(4 + 1 + 3 * 8 + static_cast<std::size_t>(x.size()) * 8);
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(3);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(x.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(x.cols()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(x.bins()));
  // Column-major K x MN storage is already k fastest, then m, then n.
  const double* data = x.matricized().data();
  const auto* raw = reinterpret_cast<const std::uint8_t*>(data);
  out.insert(out.end(), raw, raw + x.size() * 8);
  return out;
}

RadioMap decode_rmt1(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 5 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("RMT1: bad magic");
  }
  std::size_t pos = 4;
  const auto ndim = take<std::uint8_t>(bytes, pos);
  if (ndim < 1 || ndim > 3) throw FormatError("RMT1: unsupported ndim " + std::to_string(ndim));
  std::uint64_t dims[3] = {1, 1, 1};
  for (int d = 0; d < ndim; ++d) dims[d] = take<std::uint64_t>(bytes, pos);
  for (auto d : dims) {
    if (d == 0 || d > (1ULL << 31)) throw FormatError("RMT1: invalid dimension");
  }
  const std::uint64_t count = dims[0] * dims[1] * dims[2];
  if (bytes.size() - pos != count * 8) {
    throw FormatError("RMT1: payload size " + std::to_string(bytes.size() - pos) +
                      " does not match dims");
  }
  Eigen::MatrixXd mat(static_cast<Index>(dims[2]), static_cast<Index>(dims[0] * dims[1]));
  std::memcpy(mat.data(), bytes.data() + pos, count * 8);
  return RadioMap(static_cast<Index>(dims[0]), static_cast<Index>(dims[1]), std::move(mat));
}

void write_rmt1(const std::filesystem::path& path, const RadioMap& x) {
  write_file_atomic(path, encode_rmt1(x));
}

RadioMap read_rmt1(const std::filesystem::path& path) { return decode_rmt1(read_bytes(path)); }

std::string encode_mask(const SamplingMask& mask) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : mask.cells()) arr.push_back({c.m, c.n});
  return arr.dump();
}

SamplingMask decode_mask(const std::string& text, GridDims dims) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("mask: malformed JSON: ") + e.what());
  }
  if (!doc.is_array()) throw FormatError("mask: expected a JSON array of [m, n] pairs");
  std::vector<Cell> cells;
  cells.reserve(doc.size());
  for (const auto& pair : doc) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_integer() ||
        !pair[1].is_number_integer()) {
      throw FormatError("mask: every entry must be an [m, n] integer pair");
    }
    cells.push_back({pair[0].get<Index>(), pair[1].get<Index>()});
  }
  return SamplingMask(dims, cells);
}

void write_mask(const std::filesystem::path& path, const SamplingMask& mask) {
  write_file_atomic(path, encode_mask(mask) + "\n");
}

SamplingMask read_mask(const std::filesystem::path& path, GridDims dims) {
  return decode_mask(read_text(path), dims);
}

void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  write_file_atomic(path, std::vector<std::uint8_t>(contents.begin(), contents.end()));
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text(const std::filesystem::path& path) {
  auto bytes = read_bytes(path);
  return {bytes.begin(), bytes.end()};
}

std::vector<Field> slices_as_fields(const RadioMap& stack) {
  std::vector<Field> out;
  out.reserve(static_cast<std::size_t>(stack.bins()));
  for (Index k = 0; k < stack.bins(); ++k) out.push_back(stack.band(k));
  return out;
}

RadioMap fields_as_slices(const std::vector<Field>& fields) {
  if (fields.empty()) throw ShapeError("no fields to stack");
  const GridDims g{fields.front().rows(), fields.front().cols()};
  Eigen::MatrixXd mat(static_cast<Index>(fields.size()), g.cells());
  for (std::size_t r = 0; r < fields.size(); ++r) {
    if (fields[r].rows() != g.m || fields[r].cols() != g.n) throw ShapeError("field dims differ");
    mat.row(static_cast<Index>(r)) = vec(fields[r]).transpose();
  }
  return RadioMap(g.m, g.n, std::move(mat));
}

}  // namespace rme::io
