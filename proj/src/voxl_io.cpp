#include "shapeprior/voxl_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace shapeprior {

static_assert(std::endian::native == std::endian::little,
              "serialization code assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'V', 'O', 'X', 'L'};

void put_u8(std::ostream& os, std::uint8_t v) {
  os.put(static_cast<char>(v));
}
void put_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}
void put_f32(std::ostream& os, float v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint8_t get_u8(std::istream& is) {
  char c;
  if (!is.get(c)) throw std::runtime_error("voxl: truncated file");
  return static_cast<std::uint8_t>(c);
}
std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v;
  if (!is.read(reinterpret_cast<char*>(&v), 4))
    throw std::runtime_error("voxl: truncated file");
  return v;
}
float get_f32(std::istream& is) {
  float v;
  if (!is.read(reinterpret_cast<char*>(&v), 4))
    throw std::runtime_error("voxl: truncated file");
  return v;
}

struct Header {
  VoxlKind kind;
  std::array<int, 3> dims;
  std::array<double, 3> spacing;
  Group group;
  std::string subject_id;
  std::size_t voxels;
};

void write_header(std::ostream& os, VoxlKind kind, const std::array<int, 3>& dims,
                  const std::array<double, 3>& spacing, Group group,
                  const std::string& subject_id) {
  os.write(kMagic, 4);
  put_u8(os, 1);
  put_u8(os, static_cast<std::uint8_t>(kind));
  for (int d : dims) put_u32(os, static_cast<std::uint32_t>(d));
  for (double s : spacing) put_f32(os, static_cast<float>(s));
  put_u8(os, static_cast<std::uint8_t>(group));
  put_u32(os, static_cast<std::uint32_t>(subject_id.size()));
  os.write(subject_id.data(), static_cast<std::streamsize>(subject_id.size()));
}

Header read_header(std::istream& is, const std::filesystem::path& path) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("voxl: bad magic in " + path.string());
  if (get_u8(is) != 1) throw std::runtime_error("voxl: unsupported version");
  const std::uint8_t kind = get_u8(is);
  if (kind > 1) throw std::runtime_error("voxl: unknown grid kind");
  Header h;
  h.kind = static_cast<VoxlKind>(kind);
  for (int a = 0; a < 3; ++a) {
    const std::uint32_t d = get_u32(is);
    if (d < 1 || d > (1u << 24)) throw std::runtime_error("voxl: bad dimension");
    h.dims[a] = static_cast<int>(d);
  }
  for (int a = 0; a < 3; ++a) {
    const float s = get_f32(is);
    if (!(s > 0.0f)) throw std::runtime_error("voxl: spacing must be positive");
    h.spacing[a] = static_cast<double>(s);
  }
  const std::uint8_t grp = get_u8(is);
  if (grp > 4) throw std::runtime_error("voxl: unknown group label");
  h.group = static_cast<Group>(grp);
  const std::uint32_t idlen = get_u32(is);
  if (idlen > (1u << 16)) throw std::runtime_error("voxl: subject_id too long");
  h.subject_id.resize(idlen);
  if (idlen > 0 && !is.read(h.subject_id.data(), idlen))
    throw std::runtime_error("voxl: truncated subject_id");
  h.voxels = static_cast<std::size_t>(h.dims[0]) * h.dims[1] * h.dims[2];
  return h;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("voxl: cannot open for writing: " + path.string());
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("voxl: cannot open: " + path.string());
  return is;
}

} // namespace

void write_voxl(const std::filesystem::path& path, const VoxelGrid& g) {
  if (g.occ.size() != g.voxel_count())
    throw std::invalid_argument("write_voxl: occupancy length mismatch");
  auto os = open_out(path);
  write_header(os, VoxlKind::kBinary, g.dims, g.spacing_mm, g.group, g.subject_id);
  for (const std::uint8_t b : g.occ) {
    if (b > 1) throw std::invalid_argument("write_voxl: occupancy bytes must be 0/1");
    put_u8(os, b);
  }
  if (!os) throw std::runtime_error("write_voxl: write failed: " + path.string());
}

void write_voxl(const std::filesystem::path& path, const ProbGrid& p,
                const std::string& subject_id, Group group) {
  if (p.probs.size() != p.voxel_count())
    throw std::invalid_argument("write_voxl: probs length mismatch");
  auto os = open_out(path);
  write_header(os, VoxlKind::kProb32, p.dims, p.spacing_mm, group, subject_id);
  for (const double v : p.probs) {
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument("write_voxl: probabilities must be in [0,1]");
    put_f32(os, static_cast<float>(v));
  }
  if (!os) throw std::runtime_error("write_voxl: write failed: " + path.string());
}

VoxlKind peek_voxl_kind(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_header(is, path).kind;
}

VoxelGrid read_voxl_binary(const std::filesystem::path& path) {
  auto is = open_in(path);
  const Header h = read_header(is, path);
  if (h.kind != VoxlKind::kBinary)
    throw std::runtime_error("voxl: expected binary grid in " + path.string());
  VoxelGrid g;
  g.dims = h.dims;
  g.spacing_mm = h.spacing;
  g.group = h.group;
  g.subject_id = h.subject_id;
  g.occ.resize(h.voxels);
  if (!is.read(reinterpret_cast<char*>(g.occ.data()),
               static_cast<std::streamsize>(h.voxels)))
    throw std::runtime_error("voxl: truncated payload in " + path.string());
  for (const std::uint8_t b : g.occ)
    if (b > 1) throw std::runtime_error("voxl: non-0/1 occupancy byte");
  return g;
}

ProbVolume read_voxl_prob(const std::filesystem::path& path) {
  auto is = open_in(path);
  const Header h = read_header(is, path);
  if (h.kind != VoxlKind::kProb32)
    throw std::runtime_error("voxl: expected prob32 grid in " + path.string());
  ProbVolume out;
  out.grid.dims = h.dims;
  out.grid.spacing_mm = h.spacing;
  out.subject_id = h.subject_id;
  out.group = h.group;
  out.grid.probs.resize(h.voxels);
  std::vector<float> buf(h.voxels);
  if (!is.read(reinterpret_cast<char*>(buf.data()),
               static_cast<std::streamsize>(h.voxels * 4)))
    throw std::runtime_error("voxl: truncated payload in " + path.string());
  for (std::size_t i = 0; i < h.voxels; ++i) {
    const double v = buf[i];
    if (!(v >= 0.0 && v <= 1.0))
      throw std::runtime_error("voxl: probability out of [0,1]");
    out.grid.probs[i] = v;
  }
  return out;
}

} // namespace shapeprior
