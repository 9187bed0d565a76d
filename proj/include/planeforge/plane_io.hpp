#pragma once

// Persistence of reconstructed bounded planes: a JSON document with the MLPs
// as base64 blobs, an OBJ mesh export and a plain-text parameter sidecar.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "planeforge/renderer.hpp"

namespace planeforge {

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
/// Throws InputError on characters outside the alphabet or bad padding.
std::vector<std::uint8_t> base64_decode(const std::string& text);

std::string planes_to_json(const std::vector<BoundedPlane>& planes);
std::vector<BoundedPlane> planes_from_json(const std::string& text);
void save_planes(const std::filesystem::path& path, const std::vector<BoundedPlane>& planes);
std::vector<BoundedPlane> load_planes(const std::filesystem::path& path);

inline constexpr int kObjBoundarySamples = 64;

/// One group per plane: the center plus f_boundary at 64 evenly spaced angles,
/// triangulated as a fan around the center.
void write_obj(const std::filesystem::path& path, const std::vector<BoundedPlane>& planes);

/// One line per plane: "id nx ny nz d cx cy cz ax ay az".
void write_plane_params(const std::filesystem::path& path, const std::vector<BoundedPlane>& planes);

}  // namespace planeforge
