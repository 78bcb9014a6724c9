#include "vva/mesh_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace vva {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "PLY writer assumes a little-endian host");

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

double parse_double(std::string_view tok, std::size_t line) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError("line " + std::to_string(line) + ": invalid number '" + std::string(tok) + "'", line);
    return v;
}

long long parse_int(std::string_view tok, std::size_t line) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError("line " + std::to_string(line) + ": invalid index '" + std::string(tok) + "'", line);
    return v;
}

void finalize(TriMesh& mesh, const fs::path& path) {
    const MeshValidation report = check_mesh(mesh);
    if (!report.ok()) throw ValidationError(path.string() + ": " + report.describe());
}

// ---------------------------------------------------------------- OBJ

TriMesh read_obj(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    TriMesh mesh;
    std::vector<Vec2> texcoords;
    std::vector<int> vertex_tex;  // per vertex: index into texcoords or -1
    std::string line;
    std::size_t lineno = 0;
    auto resolve = [&](long long idx, std::size_t count) -> long long {
        // OBJ indices are 1-based; negative values are relative to the end.
        if (idx > 0) return idx - 1;
        if (idx < 0) return static_cast<long long>(count) + idx;
        throw ParseError("line " + std::to_string(lineno) + ": index 0 is not valid in OBJ", lineno);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        std::string_view body(line.data(), hash == std::string::npos ? line.size() : hash);
        const auto tok = split_ws(body);
        if (tok.empty()) continue;
        if (tok[0] == "v") {
            if (tok.size() < 4) throw ParseError("line " + std::to_string(lineno) + ": vertex needs 3 coordinates", lineno);
            mesh.vertices.emplace_back(parse_double(tok[1], lineno), parse_double(tok[2], lineno), parse_double(tok[3], lineno));
            vertex_tex.push_back(-1);
        } else if (tok[0] == "vt") {
            if (tok.size() < 3) throw ParseError("line " + std::to_string(lineno) + ": texcoord needs 2 values", lineno);
            texcoords.emplace_back(parse_double(tok[1], lineno), parse_double(tok[2], lineno));
        } else if (tok[0] == "f") {
            if (tok.size() < 4) throw ParseError("line " + std::to_string(lineno) + ": face needs at least 3 corners", lineno);
            std::vector<int> corners;
            for (std::size_t k = 1; k < tok.size(); ++k) {
                const std::string_view c = tok[k];
                const auto s1 = c.find('/');
                const long long vi = resolve(parse_int(c.substr(0, s1), lineno), mesh.vertices.size());
                if (vi < 0 || vi > std::numeric_limits<int>::max())
                    throw ParseError("line " + std::to_string(lineno) + ": vertex index out of range", lineno);
                if (s1 != std::string_view::npos) {
                    const auto rest = c.substr(s1 + 1);
                    const auto s2 = rest.find('/');
                    const auto ttok = rest.substr(0, s2);
                    if (!ttok.empty()) {
                        const long long ti = resolve(parse_int(ttok, lineno), texcoords.size());
                        if (ti < 0 || ti >= static_cast<long long>(texcoords.size()))
                            throw ParseError("line " + std::to_string(lineno) + ": texcoord index out of range", lineno);
                        if (vi < static_cast<long long>(vertex_tex.size())) vertex_tex[vi] = static_cast<int>(ti);
                    }
                }
                corners.push_back(static_cast<int>(vi));
            }
            for (std::size_t k = 1; k + 1 < corners.size(); ++k)
                mesh.faces.push_back({corners[0], corners[k], corners[k + 1]});
        }
    }
    if (!texcoords.empty()) {
        mesh.uv.assign(mesh.vertices.size(), Vec2::Zero());
        for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
            if (vertex_tex[v] >= 0) mesh.uv[v] = texcoords[vertex_tex[v]];
    }
    return mesh;
}

void write_obj(const TriMesh& mesh, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << std::setprecision(17);
    for (const Vec3& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    const bool has_uv = !mesh.uv.empty();
    if (has_uv)
        for (const Vec2& t : mesh.uv) out << "vt " << t.x() << ' ' << t.y() << '\n';
    for (const Face& f : mesh.faces) {
        out << 'f';
        for (int c : f) {
            out << ' ' << (c + 1);
            if (has_uv) out << '/' << (c + 1);
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

// ---------------------------------------------------------------- PLY

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

PlyType ply_type(const std::string& name, std::size_t line) {
    const std::string n = lower(name);
    if (n == "char" || n == "int8") return PlyType::Int8;
    if (n == "uchar" || n == "uint8") return PlyType::UInt8;
    if (n == "short" || n == "int16") return PlyType::Int16;
    if (n == "ushort" || n == "uint16") return PlyType::UInt16;
    if (n == "int" || n == "int32") return PlyType::Int32;
    if (n == "uint" || n == "uint32") return PlyType::UInt32;
    if (n == "float" || n == "float32") return PlyType::Float32;
    if (n == "double" || n == "float64") return PlyType::Float64;
    throw ParseError("PLY header line " + std::to_string(line) + ": unknown type '" + name + "'", line);
}

std::size_t ply_size(PlyType t) {
    switch (t) {
        case PlyType::Int8:
        case PlyType::UInt8: return 1;
        case PlyType::Int16:
        case PlyType::UInt16: return 2;
        case PlyType::Int32:
        case PlyType::UInt32:
        case PlyType::Float32: return 4;
        case PlyType::Float64: return 8;
    }
    return 0;
}

struct PlyProperty {
    std::string name;
    PlyType type = PlyType::Float32;
    bool is_list = false;
    PlyType count_type = PlyType::UInt8;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> props;
};

class BinaryCursor {
public:
    BinaryCursor(const std::vector<char>& data, std::size_t offset) : data_(data), pos_(offset) {}

    double read(PlyType t) {
        const std::size_t n = ply_size(t);
        if (pos_ + n > data_.size()) throw ParseError("PLY body truncated at byte offset " + std::to_string(pos_), pos_);
        const char* p = data_.data() + pos_;
        pos_ += n;
        switch (t) {
            case PlyType::Int8: return static_cast<double>(*reinterpret_cast<const std::int8_t*>(p));
            case PlyType::UInt8: return static_cast<double>(*reinterpret_cast<const std::uint8_t*>(p));
            case PlyType::Int16: { std::int16_t v; std::memcpy(&v, p, 2); return v; }
            case PlyType::UInt16: { std::uint16_t v; std::memcpy(&v, p, 2); return v; }
            case PlyType::Int32: { std::int32_t v; std::memcpy(&v, p, 4); return v; }
            case PlyType::UInt32: { std::uint32_t v; std::memcpy(&v, p, 4); return v; }
            case PlyType::Float32: { float v; std::memcpy(&v, p, 4); return v; }
            case PlyType::Float64: { double v; std::memcpy(&v, p, 8); return v; }
        }
        return 0.0;
    }
    std::size_t offset() const { return pos_; }

private:
    const std::vector<char>& data_;
    std::size_t pos_;
};

class AsciiCursor {
public:
    AsciiCursor(const std::vector<char>& data, std::size_t offset, std::size_t first_line)
        : data_(data), pos_(offset), line_(first_line) {}

    double read(PlyType) {
        while (pos_ < data_.size() && std::isspace(static_cast<unsigned char>(data_[pos_]))) {
            if (data_[pos_] == '\n') ++line_;
            ++pos_;
        }
        std::size_t end = pos_;
        while (end < data_.size() && !std::isspace(static_cast<unsigned char>(data_[end]))) ++end;
        if (end == pos_) throw ParseError("PLY body truncated at line " + std::to_string(line_), line_);
        const double v = parse_double(std::string_view(data_.data() + pos_, end - pos_), line_);
        pos_ = end;
        return v;
    }
    std::size_t offset() const { return line_; }

private:
    const std::vector<char>& data_;
    std::size_t pos_;
    std::size_t line_;
};

template <class Cursor>
void read_ply_body(Cursor& cur, const std::vector<PlyElement>& elements, TriMesh& mesh) {
    for (const PlyElement& el : elements) {
        const bool is_vertex = el.name == "vertex";
        const bool is_face = el.name == "face";
        int ix = -1, iy = -1, iz = -1, iu = -1, iv = -1, iface = -1;
        for (std::size_t p = 0; p < el.props.size(); ++p) {
            const std::string& n = el.props[p].name;
            if (n == "x") ix = static_cast<int>(p);
            else if (n == "y") iy = static_cast<int>(p);
            else if (n == "z") iz = static_cast<int>(p);
            else if (n == "u" || n == "s" || n == "texture_u") iu = static_cast<int>(p);
            else if (n == "v" || n == "t" || n == "texture_v") iv = static_cast<int>(p);
            else if ((n == "vertex_indices" || n == "vertex_index") && el.props[p].is_list) iface = static_cast<int>(p);
        }
        if (is_vertex && (ix < 0 || iy < 0 || iz < 0)) throw ParseError("PLY vertex element lacks x/y/z", 0);
        const bool with_uv = is_vertex && iu >= 0 && iv >= 0;
        if (is_vertex) {
            mesh.vertices.reserve(el.count);
            if (with_uv) mesh.uv.reserve(el.count);
        }
        std::vector<double> scalars(el.props.size());
        std::vector<int> list;
        for (std::size_t i = 0; i < el.count; ++i) {
            for (std::size_t p = 0; p < el.props.size(); ++p) {
                const PlyProperty& prop = el.props[p];
                if (prop.is_list) {
                    const std::size_t at = cur.offset();
                    const double n = cur.read(prop.count_type);
                    if (n < 0 || n > 1e6) throw ParseError("PLY list length invalid near " + std::to_string(at), at);
                    const auto count = static_cast<std::size_t>(n);
                    if (static_cast<int>(p) == iface) list.assign(count, 0);
                    for (std::size_t k = 0; k < count; ++k) {
                        const double value = cur.read(prop.type);
                        if (static_cast<int>(p) == iface) list[k] = static_cast<int>(value);
                    }
                } else {
                    scalars[p] = cur.read(prop.type);
                }
            }
            if (is_vertex) {
                mesh.vertices.emplace_back(scalars[ix], scalars[iy], scalars[iz]);
                if (with_uv) mesh.uv.emplace_back(scalars[iu], scalars[iv]);
            } else if (is_face && iface >= 0) {
                if (list.size() < 3) throw ParseError("PLY face with fewer than 3 corners near " + std::to_string(cur.offset()), cur.offset());
                for (std::size_t k = 1; k + 1 < list.size(); ++k) mesh.faces.push_back({list[0], list[k], list[k + 1]});
            }
        }
    }
}

TriMesh read_ply(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::size_t pos = 0, lineno = 0;
    auto next_line = [&]() -> std::string {
        if (pos >= data.size()) throw ParseError("PLY header ends prematurely at line " + std::to_string(lineno), lineno);
        std::size_t end = pos;
        while (end < data.size() && data[end] != '\n') ++end;
        std::string line(data.data() + pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        pos = std::min(end + 1, data.size());
        ++lineno;
        return line;
    };

    if (next_line() != "ply") throw ParseError("line 1: missing 'ply' magic", 1);
    enum class Encoding { Ascii, BinaryLE, BinaryBE } encoding = Encoding::Ascii;
    bool have_format = false;
    std::vector<PlyElement> elements;
    while (true) {
        const std::string line = next_line();
        const auto tok = split_ws(line);
        if (tok.empty()) continue;
        if (tok[0] == "end_header") break;
        if (tok[0] == "comment" || tok[0] == "obj_info") continue;
        if (tok[0] == "format") {
            if (tok.size() < 2) throw ParseError("line " + std::to_string(lineno) + ": bad format line", lineno);
            if (tok[1] == "ascii") encoding = Encoding::Ascii;
            else if (tok[1] == "binary_little_endian") encoding = Encoding::BinaryLE;
            else if (tok[1] == "binary_big_endian") encoding = Encoding::BinaryBE;
            else throw ParseError("line " + std::to_string(lineno) + ": unknown PLY format", lineno);
            have_format = true;
        } else if (tok[0] == "element") {
            if (tok.size() < 3) throw ParseError("line " + std::to_string(lineno) + ": bad element line", lineno);
            PlyElement el;
            el.name = std::string(tok[1]);
            el.count = static_cast<std::size_t>(parse_int(tok[2], lineno));
            elements.push_back(std::move(el));
        } else if (tok[0] == "property") {
            if (elements.empty()) throw ParseError("line " + std::to_string(lineno) + ": property before element", lineno);
            PlyProperty prop;
            if (tok.size() >= 5 && tok[1] == "list") {
                prop.is_list = true;
                prop.count_type = ply_type(std::string(tok[2]), lineno);
                prop.type = ply_type(std::string(tok[3]), lineno);
                prop.name = std::string(tok[4]);
            } else if (tok.size() >= 3) {
                prop.type = ply_type(std::string(tok[1]), lineno);
                prop.name = std::string(tok[2]);
            } else {
                throw ParseError("line " + std::to_string(lineno) + ": bad property line", lineno);
            }
            elements.back().props.push_back(prop);
        } else {
            throw ParseError("line " + std::to_string(lineno) + ": unexpected header keyword '" + std::string(tok[0]) + "'", lineno);
        }
    }
    if (!have_format) throw ParseError("PLY header has no format line", lineno);
    if (encoding == Encoding::BinaryBE) throw ParseError("big-endian PLY is not supported", lineno);

    TriMesh mesh;
    if (encoding == Encoding::BinaryLE) {
        BinaryCursor cur(data, pos);
        read_ply_body(cur, elements, mesh);
    } else {
        AsciiCursor cur(data, pos, lineno + 1);
        read_ply_body(cur, elements, mesh);
    }
    return mesh;
}

template <class T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void write_ply(const TriMesh& mesh, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    const bool has_uv = !mesh.uv.empty();
    out << "ply\nformat binary_little_endian 1.0\n";
    out << "element vertex " << mesh.vertices.size() << "\n";
    out << "property double x\nproperty double y\nproperty double z\n";
    if (has_uv) out << "property double u\nproperty double v\n";
    out << "element face " << mesh.faces.size() << "\n";
    out << "property list uchar int vertex_indices\nend_header\n";
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3& v = mesh.vertices[i];
        put(out, v.x());
        put(out, v.y());
        put(out, v.z());
        if (has_uv) {
            put(out, mesh.uv[i].x());
            put(out, mesh.uv[i].y());
        }
    }
    for (const Face& f : mesh.faces) {
        put<std::uint8_t>(out, 3);
        for (int c : f) put<std::int32_t>(out, c);
    }
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

MeshFormat format_from_path(const fs::path& path) {
    const std::string ext = lower(path.extension().string());
    if (ext == ".obj") return MeshFormat::Obj;
    if (ext == ".ply") return MeshFormat::Ply;
    throw InvalidArgument("unknown mesh extension '" + ext + "' (expected .obj or .ply)");
}

TriMesh load_mesh(const fs::path& path, MeshFormat format) {
    if (format == MeshFormat::Auto) format = format_from_path(path);
    TriMesh mesh = format == MeshFormat::Obj ? read_obj(path) : read_ply(path);
    finalize(mesh, path);
    return mesh;
}

fs::path sidecar_path(const fs::path& mesh_path) {
    fs::path p = mesh_path;
    p.replace_extension(".imp");
    return p;
}

TriMesh load_mesh_with_importance(const fs::path& path, const fs::path& importance) {
    TriMesh mesh = load_mesh(path);
    const fs::path imp = importance.empty() ? sidecar_path(path) : importance;
    if (!importance.empty() || fs::exists(imp)) mesh.importance = load_importance(imp, mesh.vertices.size());
    return mesh;
}

void save_mesh(const TriMesh& mesh, const fs::path& path, MeshFormat format) {
    if (format == MeshFormat::Auto) format = format_from_path(path);
    if (format == MeshFormat::Obj) write_obj(mesh, path);
    else write_ply(mesh, path);
}

std::vector<double> load_importance(const fs::path& path, std::size_t vertex_count) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open importance file " + path.string());
    std::vector<double> values;
    values.reserve(vertex_count);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto tok = split_ws(line);
        if (tok.empty()) continue;
        const double v = parse_double(tok[0], lineno);
        if (!(v >= 0.0 && v <= 1.0))
            throw ParseError("line " + std::to_string(lineno) + ": importance must lie in [0,1]", lineno);
        values.push_back(v);
    }
    if (values.size() != vertex_count)
        throw ValidationError(path.string() + ": " + std::to_string(values.size()) + " importance values for " +
                              std::to_string(vertex_count) + " vertices");
    return values;
}

void save_importance(const std::vector<double>& importance, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << std::setprecision(17);
    for (double v : importance) out << v << '\n';
}

}  // namespace vva
