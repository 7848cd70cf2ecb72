#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "exr/model.hpp"

namespace testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "exr") {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream(p) << text;
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), {}};
}

inline void write_script(const std::filesystem::path& p, const std::string& body) {
    write_text(p, "#!/bin/sh\n" + body);
    std::filesystem::permissions(p, std::filesystem::perms::owner_all);
}

/// Two subjects, one two-level factor, synthetic energy A = 10 J, B = 20 J.
inline std::string golden_config(const std::string& output_dir, int repetitions = 3, const std::string& power_a = "10",
                                 const std::string& power_b = "20", std::uint64_t seed = 7, double jitter = 0.5) {
    return R"({
  "name": "golden",
  "gqm": {"goal": "compare variants", "questions": ["Does the variant change energy?"], "metrics": ["energy"]},
  "factors": [{"name": "variant", "kind": "main", "treatments": [
      {"name": "A", "params": {"power": ")" + power_a + R"("}},
      {"name": "B", "params": {"power": ")" + power_b + R"("}}]}],
  "subjects": [{"name": "s1", "command": "true"}, {"name": "s2", "command": "true"}],
  "metrics": [{"name": "energy", "unit": "joule"}],
  "hypotheses": [{"id": "H1", "metric": "energy", "factor": "variant", "treatment_a": "A", "treatment_b": "B", "question": 1}],
  "repetitions": )" + std::to_string(repetitions) + R"(,
  "cooldown_s": 0,
  "estimated_run_time_s": 1,
  "seed": )" + std::to_string(seed) + R"(,
  "profilers": [{"name": "synthetic", "settings": {"metric": "energy", "power_w": "{power}", "duration_s": "1", "jitter": ")" +
           std::to_string(jitter) + R"("}}],
  "output_dir": ")" + output_dir + R"("
}
)";
}

}  // namespace testing

namespace testing {

/// Definition with `subjects` subjects, one main factor per entry of `levels`
/// and the given repetitions. Subject commands are `true`.
inline exr::ExperimentDefinition factorial_definition(std::size_t subjects, const std::vector<std::size_t>& levels,
                                                      std::int64_t repetitions, std::uint64_t seed = 1) {
    exr::ExperimentDefinition def;
    def.name = "factorial";
    for (std::size_t s = 0; s < subjects; ++s) def.subjects.push_back({"s" + std::to_string(s + 1), "true", ".", exr::Seconds{600}});
    for (std::size_t f = 0; f < levels.size(); ++f) {
        exr::Factor factor;
        factor.name = "f" + std::to_string(f + 1);
        for (std::size_t t = 0; t < levels[f]; ++t) factor.treatments.push_back({"t" + std::to_string(t + 1), {}});
        def.factors.push_back(std::move(factor));
    }
    def.metrics.push_back({"energy", {exr::UnitKind::joule, {}}, exr::Aggregation::sum, exr::MetricRole::dependent});
    def.repetitions = repetitions;
    def.seed = seed;
    return def;
}

}  // namespace testing
