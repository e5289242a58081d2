#include "shapeprior/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace shapeprior {

namespace {

using nlohmann::json;

void put_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v;
  if (!is.read(reinterpret_cast<char*>(&v), 4))
    throw std::runtime_error("checkpoint: truncated file");
  return v;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode extra = {}) {
  std::ofstream os(path, std::ios::binary | extra);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  return is;
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const ShapePriorModel& m) {
  json tensors = json::array();
  for (const TensorView& t : m.tensors)
    tensors.push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}});
  json hdr = {
      {"version", 1},
      {"d", m.d},
      {"hidden", m.hidden},
      {"layers", m.layers},
      {"skip_index", m.skip_index},
      {"activations", {"relu_hidden", "sigmoid_output"}},
      {"ce_weight", m.ce_weight},
      {"lambda", m.lambda},
      {"seed", m.seed},
      {"tensors", tensors},
      {"param_count", m.param_count()},
  };

  auto os = open_out(path, std::ios::trunc);
  os << "INRC1\n" << hdr.dump() << "\n";
  std::vector<float> payload(m.params.size());
  for (std::size_t i = 0; i < m.params.size(); ++i)
    payload[i] = static_cast<float>(m.params[i]);
  os.write(reinterpret_cast<const char*>(payload.data()),
           static_cast<std::streamsize>(payload.size() * 4));
  if (!os) throw std::runtime_error("checkpoint write failed: " + path.string());
}

ShapePriorModel load_checkpoint(const std::filesystem::path& path) {
  auto is = open_in(path);
  std::string magic, header;
  if (!std::getline(is, magic) || magic != "INRC1")
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  if (!std::getline(is, header)) throw std::runtime_error("checkpoint: missing header");

  json hdr = json::parse(header);
  if (hdr.at("version").get<int>() != 1)
    throw std::runtime_error("checkpoint: unsupported version");

  ShapePriorModel m;
  m.d = hdr.at("d").get<int>();
  m.hidden = hdr.at("hidden").get<int>();
  m.layers = hdr.at("layers").get<int>();
  m.skip_index = hdr.at("skip_index").get<int>();
  m.ce_weight = hdr.at("ce_weight").get<double>();
  m.lambda = hdr.at("lambda").get<double>();
  m.seed = hdr.at("seed").get<std::uint64_t>();

  std::size_t offset = 0;
  for (const auto& jt : hdr.at("tensors")) {
    TensorView t;
    t.name = jt.at("name").get<std::string>();
    t.rows = jt.at("rows").get<int>();
    t.cols = jt.at("cols").get<int>();
    t.offset = offset;
    if (t.rows < 1 || t.cols < 1)
      throw std::runtime_error("checkpoint: bad tensor shape for " + t.name);
    offset += t.size();
    m.tensors.push_back(std::move(t));
  }
  if (offset != hdr.at("param_count").get<std::size_t>())
    throw std::runtime_error("checkpoint: param_count disagrees with tensor table");

  std::vector<float> payload(offset);
  if (!is.read(reinterpret_cast<char*>(payload.data()),
               static_cast<std::streamsize>(offset * 4)))
    throw std::runtime_error("checkpoint: truncated payload");
  m.params.resize(offset);
  for (std::size_t i = 0; i < offset; ++i) {
    m.params[i] = static_cast<double>(payload[i]);
    if (!std::isfinite(m.params[i]))
      throw std::runtime_error("checkpoint: non-finite parameter");
  }
  return m;
}

const std::vector<double>& LatentTable::find(const std::string& subject_id) const {
  for (const auto& [id, z] : entries)
    if (id == subject_id) return z;
  throw std::out_of_range("latent table: no entry for " + subject_id);
}

namespace {

void write_latent_record(std::ostream& os, const std::string& id,
                         std::span<const double> z) {
  put_u32(os, static_cast<std::uint32_t>(id.size()));
  os.write(id.data(), static_cast<std::streamsize>(id.size()));
  for (const double v : z) {
    const float f = static_cast<float>(v);
    os.write(reinterpret_cast<const char*>(&f), 4);
  }
}

} // namespace

void save_latents(const std::filesystem::path& path, const LatentTable& t) {
  if (t.d < 1) throw std::invalid_argument("latent table: d must be >= 1");
  auto os = open_out(path, std::ios::trunc);
  os << "LTAB1\n";
  put_u32(os, static_cast<std::uint32_t>(t.d));
  for (const auto& [id, z] : t.entries) {
    if (static_cast<int>(z.size()) != t.d)
      throw std::invalid_argument("latent table: entry dimension mismatch for " + id);
    write_latent_record(os, id, z);
  }
  if (!os) throw std::runtime_error("latent table write failed: " + path.string());
}

void append_latent(const std::filesystem::path& path, int d,
                   const std::string& subject_id, std::span<const double> z) {
  if (static_cast<int>(z.size()) != d)
    throw std::invalid_argument("append_latent: dimension mismatch");
  if (!std::filesystem::exists(path)) {
    LatentTable t;
    t.d = d;
    t.entries.emplace_back(subject_id, std::vector<double>(z.begin(), z.end()));
    save_latents(path, t);
    return;
  }
  auto os = open_out(path, std::ios::app);
  write_latent_record(os, subject_id, z);
  if (!os) throw std::runtime_error("latent table append failed: " + path.string());
}

LatentTable load_latents(const std::filesystem::path& path) {
  auto is = open_in(path);
  std::string magic;
  if (!std::getline(is, magic) || magic != "LTAB1")
    throw std::runtime_error("latent table: bad magic in " + path.string());
  LatentTable t;
  t.d = static_cast<int>(get_u32(is));
  if (t.d < 1 || t.d > (1 << 20)) throw std::runtime_error("latent table: bad dimension");
  while (is.peek() != EOF) {
    const std::uint32_t len = get_u32(is);
    if (len > (1u << 16)) throw std::runtime_error("latent table: id too long");
    std::string id(len, '\0');
    if (len > 0 && !is.read(id.data(), len))
      throw std::runtime_error("latent table: truncated id");
    std::vector<float> buf(t.d);
    if (!is.read(reinterpret_cast<char*>(buf.data()),
                 static_cast<std::streamsize>(buf.size() * 4)))
      throw std::runtime_error("latent table: truncated record");
    std::vector<double> z(t.d);
    for (int i = 0; i < t.d; ++i) z[i] = static_cast<double>(buf[i]);
    t.entries.emplace_back(std::move(id), std::move(z));
  }
  return t;
}

} // namespace shapeprior
