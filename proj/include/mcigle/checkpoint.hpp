#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mcigle/numeric_core.hpp"

namespace mcigle {

// Ordered named-tensor container; order is part of the on-disk byte layout.
using NamedMatrices = std::vector<std::pair<std::string, Matrix>>;

// Binary tensor file, little-endian. Layout (see docs/formats.md):
//   magic "MCGLTNSR" | u32 version | u32 count |
//   repeated: u32 name_len | name bytes | u64 rows | u64 cols | rows*cols f64
// Round-trips are bitwise exact.
void save_tensor_file(const std::filesystem::path& path, const NamedMatrices& tensors);
NamedMatrices load_tensor_file(const std::filesystem::path& path);

// Lookup by name; throws InputError when absent.
const Matrix& find_tensor(const NamedMatrices& tensors, const std::string& name);

// Scalar convenience wrappers (stored as 1x1 tensors).
Matrix scalar_tensor(double value);
double tensor_scalar(const NamedMatrices& tensors, const std::string& name);

}  // namespace mcigle
