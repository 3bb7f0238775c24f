#ifndef BSS_TENSOR_IO_HPP
#define BSS_TENSOR_IO_HPP

#include <string>

#include "bss/tensor.hpp"

namespace bss {

// Little-endian binary tensor container used for intermediate artifacts:
//   magic "BSST" | dtype u8 (0 = float64, 1 = complex128) | rank u8 |
//   dims u64[rank] | row-major payload.
void save_tensor(const std::string& path, const Tensor3<double>& t);
void save_tensor(const std::string& path, const Tensor3<cdouble>& t);

Tensor3<double> load_real_tensor(const std::string& path);
Tensor3<cdouble> load_complex_tensor(const std::string& path);

}  // namespace bss

#endif  // BSS_TENSOR_IO_HPP
