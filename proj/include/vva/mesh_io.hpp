#pragma once

#include "vva/mesh.hpp"

#include <filesystem>

namespace vva {

enum class MeshFormat { Auto, Obj, Ply };

/// Picks the format from the file extension (.obj / .ply).
MeshFormat format_from_path(const std::filesystem::path& path);

/// Loads an ASCII OBJ (v / vt / f records; polygons are fan-triangulated) or
/// a PLY file (binary little-endian; ASCII is accepted as well). Parse
/// failures raise ParseError carrying the line number (OBJ, PLY header) or
/// byte offset (PLY body). The result is validated: bad indices and
/// degenerate faces raise ValidationError naming the faces.
TriMesh load_mesh(const std::filesystem::path& path, MeshFormat format = MeshFormat::Auto);

/// Same as load_mesh, then attaches the `.imp` sidecar with the same basename
/// when `importance` is empty and such a file exists, or the given file.
TriMesh load_mesh_with_importance(const std::filesystem::path& path,
                                  const std::filesystem::path& importance = {});

/// OBJ is written with round-trip precision; PLY is binary little-endian
/// with double-precision coordinates, so save/load is lossless.
void save_mesh(const TriMesh& mesh, const std::filesystem::path& path, MeshFormat format = MeshFormat::Auto);

/// Importance sidecar: one float per line, one line per vertex, values in [0,1].
std::vector<double> load_importance(const std::filesystem::path& path, std::size_t vertex_count);
void save_importance(const std::vector<double>& importance, const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& mesh_path);

}  // namespace vva
