#include "planeforge/plane_io.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "planeforge/errors.hpp"

namespace planeforge {

namespace {

using json = nlohmann::json;

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

json vec(const Vec3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3d vec(const json& j) {
  if (!j.is_array() || j.size() != 3) throw InputError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

}  // namespace

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  for (std::size_t i = 0; i < bytes.size(); i += 3) {
    const std::size_t n = std::min<std::size_t>(3, bytes.size() - i);
    std::uint32_t block = std::uint32_t(bytes[i]) << 16;
    if (n > 1) block |= std::uint32_t(bytes[i + 1]) << 8;
    if (n > 2) block |= bytes[i + 2];
    for (std::size_t k = 0; k < 4; ++k) out += k <= n ? kAlphabet[(block >> (18 - 6 * k)) & 63] : '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw InputError("base64 length is not a multiple of 4");
  std::array<int, 256> lut;
  lut.fill(-1);
  for (int i = 0; i < 64; ++i) lut[static_cast<unsigned char>(kAlphabet[i])] = i;
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int pad = 0;
    std::uint32_t block = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      const char c = text[i + k];
      int v = 0;
      if (c == '=') {
        if (i + 4 != text.size() || k < 2) throw InputError("misplaced base64 padding");
        ++pad;
      } else {
        if (pad > 0) throw InputError("misplaced base64 padding");
        v = lut[static_cast<unsigned char>(c)];
        if (v < 0) throw InputError("invalid base64 character");
      }
      block = (block << 6) | std::uint32_t(v);
    }
    out.push_back(std::uint8_t(block >> 16));
    if (pad < 2) out.push_back(std::uint8_t(block >> 8));
    if (pad < 1) out.push_back(std::uint8_t(block));
  }
  return out;
}

std::string planes_to_json(const std::vector<BoundedPlane>& planes) {
  json arr = json::array();
  for (const auto& p : planes) {
    arr.push_back({{"id", p.id},
                   {"normal", vec(p.params.normal)},
                   {"offset", p.params.offset},
                   {"center", vec(p.params.center)},
                   {"axis", vec(p.params.axis)},
                   {"boundary", base64_encode(serialize_mlp(p.boundary))},
                   {"color", base64_encode(serialize_mlp(p.color))}});
  }
  return json{{"planes", arr}}.dump(2);
}

std::vector<BoundedPlane> planes_from_json(const std::string& text) {
  std::vector<BoundedPlane> out;
  try {
    const json j = json::parse(text);
    for (const auto& e : j.at("planes")) {
      BoundedPlane p;
      p.id = e.at("id").get<int>();
      p.params.normal = vec(e.at("normal"));
      p.params.offset = e.at("offset").get<double>();
      p.params.center = vec(e.at("center"));
      p.params.axis = vec(e.at("axis"));
      p.boundary = deserialize_mlp(base64_decode(e.at("boundary").get<std::string>()));
      p.color = deserialize_mlp(base64_decode(e.at("color").get<std::string>()));
      p.validate();
      out.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed planes document: ") + e.what());
  }
  return out;
}

void save_planes(const std::filesystem::path& path, const std::vector<BoundedPlane>& planes) {
  auto out = open_out(path);
  out << planes_to_json(planes) << '\n';
}

std::vector<BoundedPlane> load_planes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return planes_from_json(ss.str());
}

void write_obj(const std::filesystem::path& path, const std::vector<BoundedPlane>& planes) {
  auto out = open_out(path);
  Eigen::MatrixXd theta(1, kObjBoundarySamples);
  for (int k = 0; k < kObjBoundarySamples; ++k) theta(0, k) = 2 * std::numbers::pi * k / kObjBoundarySamples;
  long base = 1;
  for (const auto& p : planes) {
    const Plane& P = p.params;
    const Vec3d b = P.second_axis();
    const Eigen::MatrixXd r = p.boundary.forward(theta);
    out << "g instance_" << p.id << '\n';
    out << "v " << P.center.x() << ' ' << P.center.y() << ' ' << P.center.z() << '\n';
    for (int k = 0; k < kObjBoundarySamples; ++k) {
      const Vec3d v = P.center + r(0, k) * (std::cos(theta(0, k)) * P.axis + std::sin(theta(0, k)) * b);
      out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    }
    for (int k = 0; k < kObjBoundarySamples; ++k)
      out << "f " << base << ' ' << base + 1 + k << ' ' << base + 1 + (k + 1) % kObjBoundarySamples << '\n';
    base += 1 + kObjBoundarySamples;
  }
}

void write_plane_params(const std::filesystem::path& path, const std::vector<BoundedPlane>& planes) {
  auto out = open_out(path);
  for (const auto& p : planes) {
    const Plane& P = p.params;
    out << p.id << ' ' << P.normal.x() << ' ' << P.normal.y() << ' ' << P.normal.z() << ' ' << P.offset << ' '
        << P.center.x() << ' ' << P.center.y() << ' ' << P.center.z() << ' ' << P.axis.x() << ' ' << P.axis.y()
        << ' ' << P.axis.z() << '\n';
  }
}

}  // namespace planeforge
