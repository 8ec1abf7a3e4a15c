#include "gtid/serialization.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "gtid/error.hpp"

namespace gtid {

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw InputError("cannot open " + tmp.string() + " for writing");
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
      throw InputError("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw InputError("cannot move " + tmp.string() + " into place: " + ec.message());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json values = nlohmann::json::array();
  const double* data = m.data();
  for (Index i = 0; i < m.size(); ++i) {
    values.push_back(data[i]);
  }
  return {{"shape", {m.rows(), m.cols()}}, {"values", std::move(values)}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const auto& shape = j.at("shape");
  const auto& values = j.at("values");
  if (!shape.is_array() || shape.size() != 2) {
    throw InputError("matrix json: shape must be [rows, cols]");
  }
  const Index rows = shape[0].get<Index>();
  const Index cols = shape[1].get<Index>();
  if (rows < 0 || cols < 0 || static_cast<Index>(values.size()) != rows * cols) {
    throw InputError("matrix json: " + std::to_string(values.size()) +
                     " values do not fill shape [" + std::to_string(rows) + ", " +
                     std::to_string(cols) + "]");
  }
  Matrix m(rows, cols);
  double* data = m.data();
  for (Index i = 0; i < m.size(); ++i) {
    data[i] = values[static_cast<std::size_t>(i)].get<double>();
  }
  return m;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string json_hash(const nlohmann::json& j) { return fnv1a_hex(j.dump()); }

} // namespace gtid
