#include "fvv/mesh.hpp"

#include <bit>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace fvv::mesh {

static_assert(std::endian::native == std::endian::little, "PLY writer assumes little-endian host");

namespace {

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw Error("ply: truncated file");
  return v;
}

}  // namespace

void write_ply(const std::filesystem::path& path, const TriangleMesh& mesh) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write mesh: " + path.string());
  out << "ply\nformat binary_little_endian 1.0\n"
      << "comment units mm\n"
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "element face " << mesh.triangles.size() << "\n"
      << "property list uchar int vertex_indices\n"
      << "property int object_id\n"
      << "end_header\n";
  for (const auto& v : mesh.vertices) {
    put<double>(out, v.x());
    put<double>(out, v.y());
    put<double>(out, v.z());
  }
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    put<std::uint8_t>(out, 3);
    for (auto idx : mesh.triangles[t]) put<std::int32_t>(out, static_cast<std::int32_t>(idx));
    put<std::int32_t>(out, static_cast<std::int32_t>(mesh.object_ids[t]));
  }
}

// Reads exactly the layout write_ply produces.
TriangleMesh read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open mesh: " + path.string());
  std::string line;
  std::size_t n_vertices = 0, n_faces = 0;
  bool binary_le = false;
  if (!std::getline(in, line) || line != "ply") throw Error("ply: bad magic in " + path.string());
  while (std::getline(in, line)) {
    if (line == "end_header") break;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      binary_le = fmt == "binary_little_endian";
    } else if (word == "element") {
      std::string name;
      std::size_t count = 0;
      ls >> name >> count;
      if (name == "vertex") n_vertices = count;
      if (name == "face") n_faces = count;
    }
  }
  if (!binary_le) throw Error("ply: only binary_little_endian is supported");
  TriangleMesh mesh;
  mesh.vertices.resize(n_vertices);
  for (auto& v : mesh.vertices) {
    v.x() = take<double>(in);
    v.y() = take<double>(in);
    v.z() = take<double>(in);
  }
  mesh.triangles.resize(n_faces);
  mesh.object_ids.resize(n_faces);
  for (std::size_t t = 0; t < n_faces; ++t) {
    if (take<std::uint8_t>(in) != 3) throw Error("ply: only triangles are supported");
    for (auto& idx : mesh.triangles[t]) {
      const auto i = take<std::int32_t>(in);
      if (i < 0 || static_cast<std::size_t>(i) >= n_vertices) throw Error("ply: index out of range");
      idx = static_cast<std::uint32_t>(i);
    }
    mesh.object_ids[t] = static_cast<std::uint32_t>(take<std::int32_t>(in));
  }
  return mesh;
}

void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write mesh: " + path.string());
  out.precision(17);
  out << "# units mm\n";
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  std::map<std::uint32_t, std::vector<std::size_t>> groups;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) groups[mesh.object_ids[t]].push_back(t);
  for (const auto& [id, tris] : groups) {
    out << "g object_" << id << '\n';
    for (auto t : tris) {
      const auto& tri = mesh.triangles[t];
      out << "f " << tri[0] + 1 << ' ' << tri[1] + 1 << ' ' << tri[2] + 1 << '\n';
    }
  }
}

}  // namespace fvv::mesh
