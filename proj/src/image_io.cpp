#include "planeforge/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "planeforge/errors.hpp"

namespace planeforge {
namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

std::uint8_t to_byte(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

}  // namespace

void write_ppm(const std::filesystem::path& path, int width, int height,
               const Eigen::Matrix3Xd& rgb) {
  if (rgb.cols() != Eigen::Index(width) * height) throw ShapeError("ppm buffer size mismatch");
  auto out = open_out(path);
  out << "P6\n" << width << ' ' << height << "\n255\n";
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(rgb.size()));
  for (Eigen::Index i = 0; i < rgb.cols(); ++i)
    for (int c = 0; c < 3; ++c) bytes[static_cast<std::size_t>(3 * i + c)] = to_byte(rgb(c, i));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Eigen::Matrix3Xd read_ppm(const std::filesystem::path& path, int& width, int& height) {
  auto in = open_in(path);
  if (header_token(in) != "P6") throw IoError("not a binary PPM: " + path.string());
  width = std::stoi(header_token(in));
  height = std::stoi(header_token(in));
  const int maxval = std::stoi(header_token(in));
  if (maxval != 255) throw IoError("only 8-bit PPM supported: " + path.string());
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(width) * height * 3);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw IoError("truncated PPM: " + path.string());
  Eigen::Matrix3Xd rgb(3, Eigen::Index(width) * height);
  for (Eigen::Index i = 0; i < rgb.cols(); ++i)
    for (int c = 0; c < 3; ++c) rgb(c, i) = bytes[static_cast<std::size_t>(3 * i + c)] / 255.0;
  return rgb;
}

void write_pgm(const std::filesystem::path& path, int width, int height,
               const std::vector<std::uint8_t>& values) {
  if (values.size() != static_cast<std::size_t>(width) * height)
    throw ShapeError("pgm buffer size mismatch");
  auto out = open_out(path);
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size()));
}

std::vector<std::uint8_t> read_pgm(const std::filesystem::path& path, int& width, int& height) {
  auto in = open_in(path);
  if (header_token(in) != "P5") throw IoError("not a binary PGM: " + path.string());
  width = std::stoi(header_token(in));
  height = std::stoi(header_token(in));
  if (std::stoi(header_token(in)) != 255) throw IoError("only 8-bit PGM supported");
  std::vector<std::uint8_t> values(static_cast<std::size_t>(width) * height);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size()));
  if (!in) throw IoError("truncated PGM: " + path.string());
  return values;
}

void write_pfm(const std::filesystem::path& path, int width, int height,
               const Eigen::VectorXd& values) {
  if (values.size() != Eigen::Index(width) * height) throw ShapeError("pfm buffer size mismatch");
  static_assert(std::endian::native == std::endian::little, "PFM writer assumes little-endian host");
  auto out = open_out(path);
  out << "Pf\n" << width << ' ' << height << "\n-1.0\n";
  std::vector<float> row(static_cast<std::size_t>(width));
  for (int y = height - 1; y >= 0; --y) {
    for (int x = 0; x < width; ++x)
      row[static_cast<std::size_t>(x)] = static_cast<float>(values[Eigen::Index(y) * width + x]);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
}

Eigen::VectorXd read_pfm(const std::filesystem::path& path, int& width, int& height) {
  auto in = open_in(path);
  if (header_token(in) != "Pf") throw IoError("not a single-channel PFM: " + path.string());
  width = std::stoi(header_token(in));
  height = std::stoi(header_token(in));
  const double scale = std::stod(header_token(in));
  if (scale >= 0) throw IoError("big-endian PFM not supported: " + path.string());
  Eigen::VectorXd values(Eigen::Index(width) * height);
  std::vector<float> row(static_cast<std::size_t>(width));
  for (int y = height - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) throw IoError("truncated PFM: " + path.string());
    for (int x = 0; x < width; ++x) values[Eigen::Index(y) * width + x] = row[static_cast<std::size_t>(x)];
  }
  return values;
}

}  // namespace planeforge
