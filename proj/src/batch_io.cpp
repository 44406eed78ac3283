#include "loggas/batch_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "loggas/errors.hpp"

namespace loggas {

namespace {

static_assert(std::endian::native == std::endian::little, "BELS I/O assumes a little-endian host");

Error io_error(const std::string& msg)
{
  return Error(ErrorKind::io, "io", msg);
}

template <typename T>
void put(std::ofstream& out, T v)
{
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::string& path)
{
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw io_error("truncated BELS header in " + path);
  }
  return v;
}

} // namespace

void write_bels(const std::string& path, const SampleBatch& batch)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw io_error("cannot open " + path + " for writing");
  }
  out.write("BELS", 4);
  put<std::uint32_t>(out, kBelsVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(batch.n));
  put<double>(out, batch.beta);
  put<std::uint64_t>(out, batch.master_seed);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(batch.reps()));
  out.write(reinterpret_cast<const char*>(batch.data.data()),
            static_cast<std::streamsize>(batch.data.size() * sizeof(double)));
  if (!out) {
    throw io_error("write failed for " + path);
  }
}

SampleBatch read_bels(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw io_error("cannot open " + path);
  }
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "BELS", 4) != 0) {
    throw io_error(path + " is not a BELS file");
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kBelsVersion) {
    throw io_error("unsupported BELS version " + std::to_string(version));
  }
  SampleBatch b;
  b.n = get<std::uint32_t>(in, path);
  b.beta = get<double>(in, path);
  b.master_seed = get<std::uint64_t>(in, path);
  const std::size_t reps = get<std::uint32_t>(in, path);
  b.data.resize(reps * b.n);
  if (!in.read(reinterpret_cast<char*>(b.data.data()), static_cast<std::streamsize>(b.data.size() * sizeof(double)))) {
    throw io_error("truncated BELS payload in " + path);
  }
  b.seeds.resize(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    b.seeds[r] = derive_seed(b.master_seed, r);
  }
  return b;
}

} // namespace loggas
