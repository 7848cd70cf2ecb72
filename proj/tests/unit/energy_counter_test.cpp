#include <doctest.h>

#include <sys/stat.h>

#include <random>

#include "exr/energy_counter.hpp"
#include "exr/errors.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace exr;

TEST_SUITE("energy_counter") {

TEST_CASE("delta without and with wraparound") {
    CHECK(read_energy_delta(1000, 100, 900) == doctest::Approx(0.0008));
    CHECK(read_energy_delta(1000, 900, 100) == doctest::Approx(0.0002));
    CHECK(read_energy_delta(1000, 500, 500) == 0.0);
    CHECK_THROWS_AS(read_energy_delta(0, 1, 2), DomainError);
    CHECK_THROWS_AS(read_energy_delta(1000, 1000, 2), DomainError);
}

TEST_CASE("telescoping over random monotone sequences") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::uint64_t range = 1000 + rng() % 1'000'000;
        std::uint64_t raw = rng() % range;
        std::vector<std::uint64_t> increments(1 + rng() % 20);
        double sum = 0.0;
        for (auto& d : increments) {
            d = rng() % range;
            const std::uint64_t next = (raw + d) % range;
            sum += read_energy_delta(range, raw, next);
            raw = next;
        }
        CHECK(sum == doctest::Approx(oracle::true_energy_j(increments)).epsilon(1e-12));
    }
}

TEST_CASE("mock powercap domain") {
    testing::TempDir dir;
    const auto domain = dir / "intel-rapl:0";
    write_mock_domain(domain, 900, 1000);
    EnergyCounterSource src(domain);
    CHECK(src.max_energy_range_uj() == 1000);
    const auto start = src.read_raw();
    write_mock_domain(domain, 100, 1000);
    CHECK(read_energy_delta(src, start, src.read_raw()) == doctest::Approx(0.0002));
    CHECK(EnergyCounterSource::probe(domain).empty());

    write_mock_domain(domain, 1000, 1000);
    CHECK_THROWS_AS(src.read_raw(), DomainError);
}

TEST_CASE("unreadable or missing domains are reported") {
    testing::TempDir dir;
    CHECK_FALSE(EnergyCounterSource::probe(dir / "absent").empty());
    const auto domain = dir / "d";
    write_mock_domain(domain, 1, 10);
    ::chmod((domain / "energy_uj").c_str(), 0);
    CHECK_FALSE(EnergyCounterSource::probe(domain).empty());
}

}
