#include "dynnet/ad/param_vector.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "dynnet/binary_io.hpp"
#include "dynnet/errors.hpp"

namespace dynnet::ad {

namespace {
constexpr std::uint16_t kParamVersion = 1;
}

std::size_t ParamVector::add_block(std::string name, std::size_t rows, std::size_t cols) {
  for (const auto& b : layout_) {
    if (b.name == name) throw DomainError("ParamVector: duplicate block '" + name + "'");
  }
  const std::size_t offset = values_.size();
  layout_.push_back({std::move(name), offset, rows, cols});
  values_.resize(offset + rows * cols, 0.0);
  return offset;
}

const ParamBlock& ParamVector::block(std::string_view name) const {
  for (const auto& b : layout_) {
    if (b.name == name) return b;
  }
  throw DomainError("ParamVector: no block named '" + std::string(name) + "'");
}

std::span<double> ParamVector::block_values(std::string_view name) {
  const auto& b = block(name);
  return std::span(values_).subspan(b.offset, b.size());
}

std::span<const double> ParamVector::block_values(std::string_view name) const {
  const auto& b = block(name);
  return std::span(values_).subspan(b.offset, b.size());
}

void ParamVector::validate() const {
  std::size_t expected = 0;
  for (const auto& b : layout_) {
    if (b.offset != expected) throw FormatError("ParamVector: layout not contiguous at " + b.name);
    expected += b.size();
  }
  if (expected != values_.size()) throw FormatError("ParamVector: layout does not cover values");
  for (double v : values_) {
    if (!std::isfinite(v)) throw FormatError("ParamVector: non-finite value");
  }
}

void write_params(std::ostream& os, const ParamVector& p) {
  os.write("DYNP", 4);
  io::put<std::uint16_t>(os, kParamVersion);
  io::put<std::uint64_t>(os, p.size());
  os.write(reinterpret_cast<const char*>(p.values().data()),
           static_cast<std::streamsize>(p.size() * sizeof(double)));
  io::put<std::uint32_t>(os, static_cast<std::uint32_t>(p.layout().size()));
  for (const auto& b : p.layout()) {
    io::put<std::uint16_t>(os, static_cast<std::uint16_t>(b.name.size()));
    os.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
    io::put<std::uint64_t>(os, b.offset);
    io::put<std::uint64_t>(os, b.rows);
    io::put<std::uint64_t>(os, b.cols);
  }
  if (!os) throw FormatError("write_params: stream error");
}

ParamVector read_params(std::istream& is) {
  io::expect_magic(is, "DYNP");
  if (io::get<std::uint16_t>(is) != kParamVersion) throw FormatError("unsupported DYNP version");
  const auto count = io::get<std::uint64_t>(is);
  std::vector<double> values(count);
  if (!is.read(reinterpret_cast<char*>(values.data()),
               static_cast<std::streamsize>(count * sizeof(double)))) {
    throw FormatError("read_params: truncated values");
  }
  ParamVector p;
  const auto blocks = io::get<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < blocks; ++i) {
    const auto len = io::get<std::uint16_t>(is);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw FormatError("read_params: truncated name");
    const auto offset = io::get<std::uint64_t>(is);
    const auto rows = io::get<std::uint64_t>(is);
    const auto cols = io::get<std::uint64_t>(is);
    if (p.add_block(std::move(name), rows, cols) != offset) {
      throw FormatError("read_params: layout offsets not contiguous");
    }
  }
  if (p.size() != count) throw FormatError("read_params: layout/count mismatch");
  std::copy(values.begin(), values.end(), p.values().begin());
  p.validate();
  return p;
}

void save_params(const std::filesystem::path& path, const ParamVector& p) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  write_params(os, p);
}

ParamVector load_params(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  return read_params(is);
}

std::string layout_manifest(const ParamVector& p) {
  std::ostringstream os;
  for (const auto& b : p.layout()) {
    os << b.name << ' ' << b.rows << " x " << b.cols << " @ " << b.offset << '\n';
  }
  os << "total " << p.size() << '\n';
  return os.str();
}

}  // namespace dynnet::ad
