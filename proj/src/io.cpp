#include "levelflow/io.hpp"

#include "levelflow/errors.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace levelflow {

namespace {
constexpr std::size_t kHeaderBytes = 64;
constexpr const char* kMagic = "LEVELFLOW-GRID v1";

std::uint64_t to_le(std::uint64_t v)
{
    if constexpr (std::endian::native == std::endian::little)
        return v;
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i)
        r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
}

std::vector<double> parse_list(const std::string& text)
{
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t comma = text.find(',', pos);
        std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        double v = 0.0;
        auto res = std::from_chars(item.data(), item.data() + item.size(), v);
        if (res.ec != std::errc() || res.ptr != item.data() + item.size())
            throw Error(ErrorCode::IoFailure, "bad number '" + item + "' in grid header");
        out.push_back(v);
        if (comma == std::string::npos)
            break;
        pos = comma + 1;
    }
    return out;
}
} // namespace

std::string format_double(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string grid_header(const Grid& g)
{
    std::ostringstream h;
    h << kMagic << " dim=" << g.dim() << " n=" << g.nx();
    if (g.dim() == 2)
        h << "," << g.ny();
    h << " origin=" << format_double(g.origin()[0]);
    if (g.dim() == 2)
        h << "," << format_double(g.origin()[1]);
    h << " dx=" << format_double(g.dx());
    std::string line = h.str();
    if (line.size() > kHeaderBytes - 1)
        throw Error(ErrorCode::IoFailure, "grid header exceeds 64 bytes");
    line.append(kHeaderBytes - 1 - line.size(), ' ');
    line.push_back('\n');
    return line;
}

void write_grid(const std::string& path, const ScalarField& field)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorCode::IoFailure, "cannot write " + path);
    std::string header = grid_header(field.grid);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    std::vector<std::uint64_t> raw(field.values.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
        raw[i] = to_le(std::bit_cast<std::uint64_t>(field.values[i]));
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 8));
    if (!out)
        throw Error(ErrorCode::IoFailure, "short write to " + path);
}

ScalarField read_grid(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::IoFailure, "cannot open grid file " + path);
    char header[kHeaderBytes];
    in.read(header, kHeaderBytes);
    if (in.gcount() != static_cast<std::streamsize>(kHeaderBytes) || header[kHeaderBytes - 1] != '\n')
        throw Error(ErrorCode::IoFailure, path + ": missing 64-byte grid header");
    std::istringstream fields(std::string(header, kHeaderBytes - 1));
    std::string magic, version, token;
    fields >> magic >> version;
    if (magic + " " + version != kMagic)
        throw Error(ErrorCode::IoFailure, path + ": not a LEVELFLOW-GRID v1 file");
    int dim = 0;
    std::vector<double> n, origin;
    double dx = 0.0;
    while (fields >> token) {
        auto eq = token.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::IoFailure, path + ": malformed header token " + token);
        std::string key = token.substr(0, eq), value = token.substr(eq + 1);
        if (key == "dim")
            dim = static_cast<int>(parse_list(value).at(0));
        else if (key == "n")
            n = parse_list(value);
        else if (key == "origin")
            origin = parse_list(value);
        else if (key == "dx")
            dx = parse_list(value).at(0);
        else
            throw Error(ErrorCode::IoFailure, path + ": unknown header key " + key);
    }
    if ((dim != 1 && dim != 2) || n.size() != static_cast<std::size_t>(dim) ||
        origin.size() != static_cast<std::size_t>(dim))
        throw Error(ErrorCode::IoFailure, path + ": inconsistent grid header");
    Grid g(dim, {origin[0], dim == 2 ? origin[1] : 0.0}, dx,
           {static_cast<int>(n[0]), dim == 2 ? static_cast<int>(n[1]) : 1});
    ScalarField f(g);
    std::vector<std::uint64_t> raw(g.size());
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 8));
    if (in.gcount() != static_cast<std::streamsize>(raw.size() * 8))
        throw Error(ErrorCode::IoFailure, path + ": truncated grid data");
    for (std::size_t i = 0; i < raw.size(); ++i)
        f.values[i] = std::bit_cast<double>(to_le(raw[i]));
    return f;
}

void write_grid_csv(const std::string& path, const ScalarField& field)
{
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorCode::IoFailure, "cannot write " + path);
    const Grid& g = field.grid;
    out << (g.dim() == 1 ? "x,value\n" : "x,y,value\n");
    for (std::size_t i = 0; i < g.size(); ++i) {
        out << format_double(g.x(g.ix(i)));
        if (g.dim() == 2)
            out << ',' << format_double(g.y(g.iy(i)));
        out << ',' << format_double(field.values[i]) << '\n';
    }
}

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorCode::IoFailure, "cannot write " + path);
    out << text;
}

std::string read_text(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::IoFailure, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace levelflow
