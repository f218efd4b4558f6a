#pragma once

// Plain-text named-tensor files.
//
//   # comment to end of line
//   tensor <name> <rank> <d1> ... <dk>
//   <d1*...*dk whitespace-separated decimals, row-major>
//
// Records may span any number of lines. Names are unique within a file.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ceg/core.hpp"

namespace ceg {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  std::size_t rank() const { return shape.size(); }
  std::size_t element_count() const;
};

using TensorMap = std::map<std::string, Tensor>;

TensorMap read_tensor_file(std::istream& in, const std::string& source = "<stream>");
TensorMap load_tensor_file(const std::filesystem::path& path);

/// Writes with 17 significant digits so values read back bit-identical.
void write_tensor_file(std::ostream& out, const TensorMap& tensors);
void save_tensor_file(const std::filesystem::path& path, const TensorMap& tensors);

}  // namespace ceg
