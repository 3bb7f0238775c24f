#include "bss/tensor_io.hpp"

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "bss/errors.hpp"

namespace bss {

namespace {

constexpr char kMagic[4] = {'B', 'S', 'S', 'T'};
constexpr std::uint8_t kDtypeFloat64 = 0;
constexpr std::uint8_t kDtypeComplex128 = 1;

void write_header(std::ofstream& os, std::uint8_t dtype,
                  const std::array<std::uint64_t, 3>& dims) {
  os.write(kMagic, 4);
  os.put(static_cast<char>(dtype));
  os.put(static_cast<char>(3));  // rank
  for (std::uint64_t d : dims)
    os.write(reinterpret_cast<const char*>(&d), sizeof(d));
}

std::array<std::uint64_t, 3> read_header(std::ifstream& is,
                                         const std::string& path,
                                         std::uint8_t expected_dtype) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw CorruptHeader(path + ": not a BSST tensor file");
  const int dtype = is.get();
  const int rank = is.get();
  if (dtype != expected_dtype)
    throw UnsupportedFormat(path + ": unexpected tensor dtype");
  if (rank != 3) throw UnsupportedFormat(path + ": only rank-3 supported");
  std::array<std::uint64_t, 3> dims{};
  for (auto& d : dims) is.read(reinterpret_cast<char*>(&d), sizeof(d));
  if (!is) throw CorruptHeader(path + ": truncated header");
  return dims;
}

template <typename T>
void write_payload(std::ofstream& os, const Tensor3<T>& t) {
  os.write(reinterpret_cast<const char*>(t.data()),
           static_cast<std::streamsize>(t.size() * sizeof(T)));
}

}  // namespace

void save_tensor(const std::string& path, const Tensor3<double>& t) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoFailure("cannot open " + path + " for writing");
  write_header(os, kDtypeFloat64, {t.dim0(), t.dim1(), t.dim2()});
  write_payload(os, t);
  if (!os) throw IoFailure("write failed on " + path);
}

void save_tensor(const std::string& path, const Tensor3<cdouble>& t) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoFailure("cannot open " + path + " for writing");
  write_header(os, kDtypeComplex128, {t.dim0(), t.dim1(), t.dim2()});
  write_payload(os, t);
  if (!os) throw IoFailure("write failed on " + path);
}

Tensor3<double> load_real_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoFailure("cannot open " + path);
  const auto dims = read_header(is, path, kDtypeFloat64);
  Tensor3<double> t(dims[0], dims[1], dims[2]);
  is.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!is) throw CorruptHeader(path + ": truncated payload");
  return t;
}

Tensor3<cdouble> load_complex_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoFailure("cannot open " + path);
  const auto dims = read_header(is, path, kDtypeComplex128);
  Tensor3<cdouble> t(dims[0], dims[1], dims[2]);
  is.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.size() * sizeof(cdouble)));
  if (!is) throw CorruptHeader(path + ": truncated payload");
  return t;
}

}  // namespace bss
