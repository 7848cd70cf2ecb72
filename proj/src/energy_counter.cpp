#include "exr/energy_counter.hpp"

#include <sys/stat.h>
#include <unistd.h>

#include <charconv>
#include <fstream>
#include <sstream>

#include "exr/errors.hpp"

namespace exr {
namespace {

// Permission bits are checked explicitly instead of access(2) because root
// bypasses the latter, and a counter the kernel exports 0400 is unreadable
// for everyone but its owner.
bool mode_allows_read(const std::filesystem::path& file) {
    struct stat st {};
    if (::stat(file.c_str(), &st) != 0) return false;
    if (!S_ISREG(st.st_mode)) return false;
    if (st.st_uid == ::geteuid()) return (st.st_mode & S_IRUSR) != 0;
    if (st.st_gid == ::getegid()) return (st.st_mode & S_IRGRP) != 0;
    return (st.st_mode & S_IROTH) != 0;
}

std::uint64_t read_decimal(const std::filesystem::path& file) {
    if (!mode_allows_read(file)) throw ProfilerError("energy counter file is not readable: " + file.string());
    std::ifstream in(file);
    if (!in) throw ProfilerError("cannot open energy counter file: " + file.string());
    std::string text;
    std::getline(in, text);
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r' || text.back() == ' ')) text.pop_back();
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
        throw ProfilerError("malformed energy counter value in " + file.string());
    return value;
}

}  // namespace

EnergyCounterSource::EnergyCounterSource(std::filesystem::path domain_dir)
    : dir_(std::move(domain_dir)), range_(read_decimal(dir_ / "max_energy_range_uj")) {
    if (range_ == 0) throw ProfilerError("max_energy_range_uj is zero in " + dir_.string());
}

EnergyCounterSource::EnergyCounterSource(std::filesystem::path domain_dir, std::uint64_t max_energy_range_uj)
    : dir_(std::move(domain_dir)), range_(max_energy_range_uj) {
    if (range_ == 0) throw DomainError("max_energy_range_uj must be > 0");
}

std::uint64_t EnergyCounterSource::read_raw() const {
    const auto raw = read_decimal(dir_ / "energy_uj");
    if (raw >= range_)
        throw DomainError("energy_uj reading " + std::to_string(raw) + " is outside [0, " + std::to_string(range_) + ")");
    return raw;
}

std::string EnergyCounterSource::probe(const std::filesystem::path& domain_dir) {
    try {
        const EnergyCounterSource source(domain_dir);
        source.read_raw();
        return {};
    } catch (const Error& e) {
        return e.what();
    }
}

double read_energy_delta(std::uint64_t max_energy_range_uj, std::uint64_t start_raw, std::uint64_t end_raw) {
    if (max_energy_range_uj == 0) throw DomainError("max_energy_range_uj must be > 0");
    if (start_raw >= max_energy_range_uj || end_raw >= max_energy_range_uj)
        throw DomainError("counter reading outside [0, max_energy_range_uj)");
    const std::uint64_t delta =
        end_raw >= start_raw ? end_raw - start_raw : max_energy_range_uj - start_raw + end_raw;
    return static_cast<double>(delta) / 1e6;
}

void write_mock_domain(const std::filesystem::path& domain_dir, std::uint64_t energy_uj,
                       std::uint64_t max_energy_range_uj) {
    std::filesystem::create_directories(domain_dir);
    // Write-then-rename so a concurrent reader never sees a half-written value.
    const auto put = [&](const char* name, std::uint64_t value) {
        const auto tmp = domain_dir / (std::string(name) + ".tmp");
        {
            std::ofstream out(tmp, std::ios::trunc);
            out << value << '\n';
            if (!out) throw StorageError("cannot write " + tmp.string());
        }
        std::filesystem::rename(tmp, domain_dir / name);
    };
    put("max_energy_range_uj", max_energy_range_uj);
    put("energy_uj", energy_uj);
}

}  // namespace exr
