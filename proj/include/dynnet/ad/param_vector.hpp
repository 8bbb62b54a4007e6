#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dynnet::ad {

struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 1;
  std::size_t size() const { return rows * cols; }
  bool operator==(const ParamBlock&) const = default;
};

// Flat trainable vector with a named, contiguous layout.
class ParamVector {
 public:
  // Appends a zero-initialized rows x cols block and returns its offset.
  std::size_t add_block(std::string name, std::size_t rows, std::size_t cols = 1);

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> block_values(std::string_view name);
  std::span<const double> block_values(std::string_view name) const;

  const std::vector<ParamBlock>& layout() const { return layout_; }
  const ParamBlock& block(std::string_view name) const;
  std::size_t size() const { return values_.size(); }

  // Offsets contiguous and non-overlapping, total == size(), values finite.
  void validate() const;

  bool operator==(const ParamVector&) const = default;

 private:
  std::vector<double> values_;
  std::vector<ParamBlock> layout_;
};

// Binary container "DYNP" (little-endian):
//   char[4] magic, u16 version, u64 count, f64[count] values,
//   u32 blocks, then per block: u16 name length, name bytes, u64 offset,
//   u64 rows, u64 cols.
void write_params(std::ostream& os, const ParamVector& p);
ParamVector read_params(std::istream& is);
void save_params(const std::filesystem::path& path, const ParamVector& p);
ParamVector load_params(const std::filesystem::path& path);

// "name rows x cols @ offset" lines plus the total.
std::string layout_manifest(const ParamVector& p);

}  // namespace dynnet::ad
