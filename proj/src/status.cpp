#include "exr/status.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "exr/errors.hpp"
#include "exr/journal.hpp"

namespace exr {

using nlohmann::json;

double StatusSnapshot::eta_seconds() const noexcept {
    return static_cast<double>(pending()) * (per_run_s + cooldown_s);
}

StatusSnapshot snapshot_of(const ExperimentState& state, const ExperimentDefinition& def) {
    StatusSnapshot s;
    s.experiment = def.name;
    s.phase = state.phase;
    s.mode = def.mode;
    s.total = state.total_runs;
    s.done = state.completed_count;
    s.failed = state.failed_count;
    s.current_run = state.current_run;
    s.per_run_s = def.estimated_run_time.count();
    s.cooldown_s = def.cooldown.count();
    return s;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) throw StorageError("cannot write " + tmp + ": " + std::strerror(errno));
    std::string_view rest = contents;
    while (!rest.empty()) {
        const ssize_t n = ::write(fd, rest.data(), rest.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            ::close(fd);
            throw StorageError("cannot write " + tmp + ": " + std::strerror(errno));
        }
        rest.remove_prefix(static_cast<std::size_t>(n));
    }
    if (::fsync(fd) != 0) {
        ::close(fd);
        throw StorageError("fsync failed for " + tmp);
    }
    ::close(fd);
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw StorageError("cannot rename " + tmp + ": " + std::strerror(errno));
}

void write_status(const std::filesystem::path& output_dir, const StatusSnapshot& s) {
    json j{{"experiment", s.experiment},
           {"phase", to_string(s.phase)},
           {"mode", to_string(s.mode)},
           {"total", s.total},
           {"done", s.done},
           {"failed", s.failed},
           {"pending", s.pending()},
           {"current_run", s.current_run ? json(*s.current_run) : json(nullptr)},
           {"per_run_s", s.per_run_s},
           {"cooldown_s", s.cooldown_s},
           {"eta_s", s.eta_seconds()},
           {"updated_at", s.updated_at.empty() ? utc_timestamp() : s.updated_at},
           {"message", s.message}};
    write_file_atomic(output_dir / "status.json", j.dump(2) + "\n");
}

StatusSnapshot read_status(const std::filesystem::path& output_dir) {
    const auto path = output_dir / "status.json";
    std::ifstream in(path);
    if (!in) throw Error("no status file at " + path.string() + " (run `exr plan` or `exr run` first)");
    try {
        const json j = json::parse(in);
        StatusSnapshot s;
        s.experiment = j.value("experiment", "");
        const auto phase = parse_phase(j.at("phase").get<std::string>());
        if (!phase) throw Error("status file has an unknown phase");
        s.phase = *phase;
        s.mode = j.value("mode", "automatic") == "semi_automatic" ? Mode::semi_automatic : Mode::automatic;
        s.total = j.at("total").get<std::size_t>();
        s.done = j.at("done").get<std::size_t>();
        s.failed = j.at("failed").get<std::size_t>();
        if (j.contains("current_run") && j["current_run"].is_string()) s.current_run = j["current_run"].get<std::string>();
        s.per_run_s = j.value("per_run_s", 0.0);
        s.cooldown_s = j.value("cooldown_s", 0.0);
        s.updated_at = j.value("updated_at", "");
        s.message = j.value("message", "");
        if (s.done + s.failed > s.total) throw Error("status file counts exceed the run total");
        return s;
    } catch (const json::exception& e) {
        throw Error("status file " + path.string() + " is malformed: " + e.what());
    }
}

std::string format_duration(double seconds) {
    const auto total = static_cast<long long>(std::llround(seconds));
    const long long h = total / 3600;
    const long long m = (total % 3600) / 60;
    const long long s = total % 60;
    std::ostringstream out;
    if (h > 0) out << h << "h ";
    if (h > 0 || m > 0) out << m << "m ";
    out << s << "s";
    return out.str();
}

std::string format_status(const StatusSnapshot& s) {
    std::ostringstream out;
    out << "experiment: " << s.experiment << "\n";
    out << "phase: " << to_string(s.phase) << " (" << to_string(s.mode) << ")\n";
    out << "pending: " << s.pending() << ", done: " << s.done << ", failed: " << s.failed
        << " (total " << s.total << ")\n";
    if (s.phase == Phase::completed)
        out << "completed, done+failed = " << s.done + s.failed << "\n";
    if (s.current_run) out << "current run: " << *s.current_run << "\n";
    out << "ETA: " << format_duration(s.eta_seconds()) << "\n";
    if (!s.message.empty()) out << "note: " << s.message << "\n";
    if (!s.updated_at.empty()) out << "updated: " << s.updated_at << "\n";
    return out.str();
}

void post_control_request(const std::filesystem::path& output_dir, const std::string& request) {
    write_file_atomic(output_dir / "control", request + "\n");
}

std::optional<std::string> take_control_request(const std::filesystem::path& output_dir) {
    const auto path = output_dir / "control";
    std::ifstream in(path);
    if (!in) return std::nullopt;
    std::string request;
    std::getline(in, request);
    in.close();
    std::error_code ec;
    std::filesystem::remove(path, ec);
    return request;
}

}  // namespace exr
