#include "cfel/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace cfel {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

void write_checkpoint(const std::string& path, const ParamVec& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open checkpoint for writing: " + path);
  out.write(kCheckpointMagic, 4);
  std::uint32_t version = kCheckpointVersion;
  out.write(reinterpret_cast<const char*>(&version), 4);
  std::uint64_t dim = params.size();
  out.write(reinterpret_cast<const char*>(&dim), 8);
  out.write(reinterpret_cast<const char*>(params.data()),
            static_cast<std::streamsize>(params.size() * sizeof(double)));
  if (!out) throw FormatError("checkpoint write failed: " + path);
}

ParamVec read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw FormatError("bad checkpoint magic in " + path);
  }
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  if (!in || version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version in " + path);
  }
  std::uint64_t dim = 0;
  in.read(reinterpret_cast<char*>(&dim), 8);
  if (!in) throw FormatError("truncated checkpoint header: " + path);
  ParamVec params(dim);
  in.read(reinterpret_cast<char*>(params.data()),
          static_cast<std::streamsize>(dim * sizeof(double)));
  if (!in) throw FormatError("truncated checkpoint payload: " + path);
  return params;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for writing: " + path);
  out << content;
  if (!out) throw FormatError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace cfel
