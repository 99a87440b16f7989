#include "fvv/hull.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace fvv::hull {

static_assert(std::endian::native == std::endian::little, "grid dump assumes little-endian host");

namespace {

constexpr char kMagic[8] = {'F', 'V', 'V', 'G', 'R', 'I', 'D', '1'};

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::ifstream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw Error("grid dump: truncated file");
  return v;
}

}  // namespace

void write_grid(const std::filesystem::path& path, const VoxelGrid& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write grid dump: " + path.string());
  const GridSpec& s = grid.spec();

  // Alternating run lengths, starting with an OFF run (possibly empty).
  std::vector<std::uint32_t> runs;
  bool state = false;
  std::uint32_t run = 0;
  for (std::size_t v = 0; v < grid.size(); ++v) {
    if (grid.get(v) != state) {
      runs.push_back(run);
      state = !state;
      run = 0;
    }
    ++run;
  }
  runs.push_back(run);

  out.write(kMagic, sizeof kMagic);
  for (int d : s.dims) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  put<double>(out, s.spacing);
  for (int a = 0; a < 3; ++a) put<double>(out, s.origin[a]);
  put<std::uint64_t>(out, runs.size());
  for (auto r : runs) put<std::uint32_t>(out, r);
}

VoxelGrid read_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open grid dump: " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw Error("grid dump: bad magic");
  GridSpec s;
  for (int& d : s.dims) d = static_cast<int>(take<std::uint32_t>(in));
  s.spacing = take<double>(in);
  for (int a = 0; a < 3; ++a) s.origin[a] = take<double>(in);
  s.validate();
  VoxelGrid grid(s);
  const auto n_runs = take<std::uint64_t>(in);
  std::size_t v = 0;
  bool state = false;
  for (std::uint64_t r = 0; r < n_runs; ++r) {
    const auto len = take<std::uint32_t>(in);
    if (v + len > grid.size()) throw Error("grid dump: runs exceed grid size");
    if (state)
      for (std::uint32_t t = 0; t < len; ++t) grid.set(v + t, true);
    v += len;
    state = !state;
  }
  if (v != grid.size()) throw Error("grid dump: runs do not cover grid");
  return grid;
}

}  // namespace fvv::hull
