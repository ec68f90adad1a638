#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>

#include "shellldp/dynamics.hpp"
#include "shellldp/errors.hpp"

namespace shellldp {

/// Shortest round-trip decimal form; "inf"/"-inf"/"nan" for non-finite values.
inline std::string format_double(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

/// CSV contract: t,h_norm,v_norm,calH_norm,alpha_norm,A_norm,energy_residual. Lines starting
/// with '#' carry provenance.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr, const std::string& provenance = {})
{
    if (!provenance.empty()) os << "# " << provenance << '\n';
    os << "t,h_norm,v_norm,calH_norm,alpha_norm,A_norm,energy_residual\n";
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const auto& c = tr.channels[i];
        os << format_double(tr.times[i]) << ',' << format_double(c.h_norm) << ',' << format_double(c.v_norm) << ','
           << format_double(c.calH_norm) << ',' << format_double(c.alpha_norm) << ',' << format_double(c.A_norm)
           << ',' << format_double(c.energy_residual) << '\n';
    }
}

/// Binary snapshot layout (native byte order, identified by the endianness marker):
///   char[4]  magic "SHLS"
///   uint32   version (= 1)
///   uint32   endianness marker 0x01020304 as written by the producer
///   uint32   m
///   uint64   number of records
///   records: float64 t, then m x (float64 re, float64 im)
struct SnapshotHeader {
    static constexpr std::array<char, 4> magic{'S', 'H', 'L', 'S'};
    static constexpr std::uint32_t version = 1;
    static constexpr std::uint32_t endian_marker = 0x01020304u;
};

namespace detail {

template <class T>
void put(std::ostream& os, const T& v)
{
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is)
{
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw DomainError("snapshot: truncated input");
    return v;
}

template <class T>
T byteswap(T v)
{
    std::array<unsigned char, sizeof(T)> b{};
    std::memcpy(b.data(), &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b.data(), sizeof(T));
    return v;
}

} // namespace detail

inline void write_snapshot(std::ostream& os, const Trajectory& tr)
{
    os.write(SnapshotHeader::magic.data(), 4);
    detail::put(os, SnapshotHeader::version);
    detail::put(os, SnapshotHeader::endian_marker);
    const auto m = static_cast<std::uint32_t>(tr.states.empty() ? 0 : tr.states.front().size());
    detail::put(os, m);
    detail::put(os, static_cast<std::uint64_t>(tr.size()));
    for (std::size_t i = 0; i < tr.size(); ++i) {
        detail::put(os, tr.times[i]);
        for (std::size_t j = 0; j < m; ++j) {
            detail::put(os, tr.states[i][j].real());
            detail::put(os, tr.states[i][j].imag());
        }
    }
}

struct Snapshot {
    std::vector<double> times;
    std::vector<ShellState> states;
};

/// Reads a snapshot written on either byte order.
inline Snapshot read_snapshot(std::istream& is)
{
    std::array<char, 4> magic{};
    is.read(magic.data(), 4);
    if (!is || magic != SnapshotHeader::magic) throw DomainError("snapshot: bad magic");
    auto version = detail::get<std::uint32_t>(is);
    const auto marker = detail::get<std::uint32_t>(is);
    bool swap = false;
    if (marker == detail::byteswap(SnapshotHeader::endian_marker)) swap = true;
    else if (marker != SnapshotHeader::endian_marker) throw DomainError("snapshot: bad endianness marker");
    auto fix = [swap](auto v) { return swap ? detail::byteswap(v) : v; };
    version = fix(version);
    if (version != SnapshotHeader::version) throw DomainError("snapshot: unsupported version");
    const auto m = fix(detail::get<std::uint32_t>(is));
    const auto records = fix(detail::get<std::uint64_t>(is));
    Snapshot s;
    for (std::uint64_t i = 0; i < records; ++i) {
        s.times.push_back(fix(detail::get<double>(is)));
        ShellState u(m);
        for (std::uint32_t j = 0; j < m; ++j) {
            const double re = fix(detail::get<double>(is));
            const double im = fix(detail::get<double>(is));
            u[j] = cplx(re, im);
        }
        s.states.push_back(std::move(u));
    }
    return s;
}

/// Writes via a sibling temporary file and rename, so readers never see a partial file.
inline void atomic_write(const std::filesystem::path& path, const std::string& content)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        os.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!os) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

} // namespace shellldp
