#include "paco/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace paco {

namespace {

void write_f64_le(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

double read_f64_le(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  if (!is) throw DataError("checkpoint: truncated value section");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamSet& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("checkpoint: cannot open " + path + " for writing");
  nlohmann::json header;
  header["format"] = "paco-ckpt";
  header["version"] = 1;
  auto& tensors = header["tensors"] = nlohmann::json::array();
  for (std::size_t i = 0; i < params.size(); ++i)
    tensors.push_back({{"name", params.names[i]}, {"shape", params[i].shape}});
  os << header.dump() << "\n";
  for (const auto& t : params.tensors)
    for (double v : t.values) write_f64_le(os, v);
}

ParamSet load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw DataError("checkpoint: missing header");
  nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
  if (header.is_discarded() || header.value("format", "") != "paco-ckpt" ||
      header.value("version", 0) != 1)
    throw DataError("checkpoint: bad header in " + path);
  ParamSet params;
  for (const auto& entry : header.at("tensors")) {
    std::vector<std::size_t> shape =
        entry.at("shape").get<std::vector<std::size_t>>();
    Tensor t = Tensor::zeros(shape);
    for (auto& v : t.values) v = read_f64_le(is);
    params.add(entry.at("name").get<std::string>(), std::move(t));
  }
  return params;
}

}  // namespace paco
