#ifndef SPECTRON_CHECKPOINT_HPP
#define SPECTRON_CHECKPOINT_HPP

#include <string>
#include <utility>
#include <vector>

#include "spectron/matrix.hpp"

namespace spectron {

/// Named tensors in serialization order.
using TensorList = std::vector<std::pair<std::string, DenseMatrix>>;

/// Binary tensor snapshot. Layout: 4-byte magic "SPCK", little-endian u32
/// format version (1), then one record per tensor: little-endian u16 name
/// length, the UTF-8 name, little-endian u32 rows and cols, and rows*cols
/// little-endian IEEE-754 doubles in row-major order. Reload is bit-exact.
/// Throws std::runtime_error on I/O failure or a name longer than 65535
/// bytes.
void write_checkpoint(const std::string& path, const TensorList& tensors);

/// Reads a checkpoint back, preserving tensor order. Throws
/// std::runtime_error on a missing file, bad magic, unsupported version, or
/// truncated payload.
TensorList read_checkpoint(const std::string& path);

} // namespace spectron

#endif // SPECTRON_CHECKPOINT_HPP
