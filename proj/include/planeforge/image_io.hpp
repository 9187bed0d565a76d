#pragma once

// Raster I/O: binary PPM (P6, 8-bit RGB), PGM (P5, 8-bit) for instance-id maps
// and little-endian PFM ("Pf", single channel, bottom-to-top rows) for depth.

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace planeforge {

/// 8-bit PGM value marking "no instance".
inline constexpr std::uint8_t kNoIdPgm = 255;

/// Writes a 3 x (w*h) RGB buffer in [0, 1]; values are clamped and rounded.
void write_ppm(const std::filesystem::path& path, int width, int height,
               const Eigen::Matrix3Xd& rgb);
/// Returns pixels in [0, 1]; width/height are outputs.
Eigen::Matrix3Xd read_ppm(const std::filesystem::path& path, int& width, int& height);

void write_pgm(const std::filesystem::path& path, int width, int height,
               const std::vector<std::uint8_t>& values);
std::vector<std::uint8_t> read_pgm(const std::filesystem::path& path, int& width, int& height);

void write_pfm(const std::filesystem::path& path, int width, int height,
               const Eigen::VectorXd& values);
Eigen::VectorXd read_pfm(const std::filesystem::path& path, int& width, int& height);

}  // namespace planeforge
