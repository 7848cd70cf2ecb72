#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace exr {

/**
 * @brief A wrapping microjoule counter laid out like a Linux powercap domain.
 *
 * The domain directory holds `energy_uj` (current reading) and
 * `max_energy_range_uj` (the wrap modulus), both decimal ASCII. A mock tree in
 * a temporary directory is byte-compatible with /sys/class/powercap.
 */
class EnergyCounterSource {
public:
    /// Reads the modulus; throws ProfilerError if the domain is unusable.
    explicit EnergyCounterSource(std::filesystem::path domain_dir);
    EnergyCounterSource(std::filesystem::path domain_dir, std::uint64_t max_energy_range_uj);

    const std::filesystem::path& domain_dir() const noexcept { return dir_; }
    std::uint64_t max_energy_range_uj() const noexcept { return range_; }

    /// Current raw reading; throws ProfilerError or DomainError (>= modulus).
    std::uint64_t read_raw() const;

    /// Empty string when readable, otherwise why not.
    static std::string probe(const std::filesystem::path& domain_dir);

private:
    std::filesystem::path dir_;
    std::uint64_t range_ = 0;
};

/// Energy in joules between two raw readings, allowing at most one wrap.
/// Throws DomainError for a zero modulus or a reading outside [0, modulus).
double read_energy_delta(std::uint64_t max_energy_range_uj, std::uint64_t start_raw, std::uint64_t end_raw);

inline double read_energy_delta(const EnergyCounterSource& source, std::uint64_t start_raw, std::uint64_t end_raw) {
    return read_energy_delta(source.max_energy_range_uj(), start_raw, end_raw);
}

/// Writes a powercap-style domain (used by tests and the dry-run mock).
void write_mock_domain(const std::filesystem::path& domain_dir, std::uint64_t energy_uj,
                       std::uint64_t max_energy_range_uj);

}  // namespace exr
