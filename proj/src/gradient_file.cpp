#include "boba/gradient_file.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "boba/error.hpp"

namespace boba {
namespace {

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
}

template <typename T>
void put(std::ostream& out, T v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(in.gcount() == static_cast<std::streamsize>(sizeof(T)), ErrorCode::kInvalidInput,
          "gradient file truncated in " + what);
  return to_little(v);
}

void put_columns(std::ostream& out, const Matrix& m) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  } else {
    for (Eigen::Index i = 0; i < m.size(); ++i) put(out, m.data()[i]);
  }
}

void get_columns(std::istream& in, Matrix& m) {
  const auto bytes = static_cast<std::streamsize>(m.size() * sizeof(double));
  in.read(reinterpret_cast<char*>(m.data()), bytes);
  require(in.gcount() == bytes, ErrorCode::kInvalidInput, "gradient file payload truncated");
  if constexpr (std::endian::native != std::endian::little) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = to_little(m.data()[i]);
  }
}

}  // namespace

void write_gradient_file(const std::string& path, const GradientFile& file) {
  require(!file.server || file.server->rows() == file.clients.rows(), ErrorCode::kDimensionMismatch,
          "server gradients differ in dimension from client gradients");
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::kIo, "cannot write gradient file '" + path + "'");
  out.write(kGradientMagic, sizeof kGradientMagic);
  put<std::uint32_t>(out, kGradientFileVersion);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(file.clients.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(file.clients.cols()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(file.num_classes));
  put<std::uint8_t>(out, file.server ? 1 : 0);
  put_columns(out, file.clients);
  if (file.server) put_columns(out, *file.server);
  require(out.good(), ErrorCode::kIo, "failed writing gradient file '" + path + "'");
}

GradientFile read_gradient_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kIo, "cannot open gradient file '" + path + "'");
  char magic[sizeof kGradientMagic] = {};
  in.read(magic, sizeof magic);
  require(in.gcount() == static_cast<std::streamsize>(sizeof magic) &&
              std::memcmp(magic, kGradientMagic, sizeof magic) == 0,
          ErrorCode::kInvalidInput, "'" + path + "' is not a gradient file (bad magic bytes)");
  const auto version = get<std::uint32_t>(in, "version");
  require(version == kGradientFileVersion, ErrorCode::kInvalidInput,
          "unsupported gradient file version " + std::to_string(version));
  const auto d = get<std::uint64_t>(in, "header");
  const auto n = get<std::uint64_t>(in, "header");
  const auto c = get<std::uint64_t>(in, "header");
  const auto has_server = get<std::uint8_t>(in, "header");
  constexpr std::uint64_t kLimit = std::uint64_t{1} << 40;
  require(d >= 1 && n >= 1 && d < kLimit && n < kLimit && c < (1u << 20) && d * (n + c) < kLimit,
          ErrorCode::kInvalidInput, "implausible gradient file header");
  require(has_server <= 1, ErrorCode::kInvalidInput, "bad server flag in gradient file");

  GradientFile file;
  file.num_classes = static_cast<int>(c);
  file.clients.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
  get_columns(in, file.clients);
  if (has_server == 1) {
    file.server = Matrix(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(c));
    get_columns(in, *file.server);
  }
  in.peek();
  require(in.eof(), ErrorCode::kInvalidInput, "trailing bytes after gradient payload");
  require(all_finite(file.clients) && (!file.server || all_finite(*file.server)), ErrorCode::kInvalidInput,
          "non-finite values in gradient file");
  return file;
}

void write_gradient_text(std::ostream& out, const GradientFile& file) {
  out << "kind,index";
  for (Eigen::Index r = 0; r < file.clients.rows(); ++r) out << ",v" << r;
  out << '\n';
  char buf[40];
  auto emit = [&](const char* kind, const Matrix& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      out << kind << ',' << j;
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        std::snprintf(buf, sizeof buf, "%.17g", m(r, j));
        out << ',' << buf;
      }
      out << '\n';
    }
  };
  emit("client", file.clients);
  if (file.server) emit("server", *file.server);
}

}  // namespace boba
