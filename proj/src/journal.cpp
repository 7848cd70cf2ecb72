#include "exr/journal.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <zlib.h>

#include "exr/errors.hpp"

namespace exr {

using nlohmann::json;

namespace {

json record_body(const JournalRecord& r) {
    return json{{"seq", r.sequence_no},
                {"run_id", r.run_id},
                {"status", to_string(r.status)},
                {"measures", r.measures},
                {"wall_time", r.wall_time},
                {"finished_at", r.finished_at},
                {"exit_status", r.exit_status},
                {"attempts", r.attempts}};
}

std::uint32_t crc_of(const std::string& body) {
    return static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size())));
}

void write_all(int fd, std::string_view bytes, const std::filesystem::path& path) {
    while (!bytes.empty()) {
        const ssize_t n = ::write(fd, bytes.data(), bytes.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            throw StorageError("journal write failed for " + path.string() + ": " + std::strerror(errno));
        }
        bytes.remove_prefix(static_cast<std::size_t>(n));
    }
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
            continue;
        }
        any = true;
        if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            row.push_back(std::move(field));
            field.clear();
            rows.push_back(std::move(row));
            row.clear();
            any = false;
        } else if (c != '\r') {
            field += c;
        }
    }
    if (any || !field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

std::string format_number(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return ec == std::errc{} ? std::string(buf, ptr) : std::to_string(value);
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    const auto ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    ::gmtime_r(&t, &tm);
    char buf[40];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[48];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

std::string encode_record(JournalRecord& record) {
    json body = record_body(record);
    record.checksum = crc_of(body.dump());
    body["crc"] = record.checksum;
    return body.dump();
}

JournalRecord decode_record(std::string_view line) {
    json j;
    try {
        j = json::parse(line.begin(), line.end());
    } catch (const json::parse_error&) {
        throw JournalCorruption("journal line is not valid JSON");
    }
    try {
        if (!j.is_object() || !j.contains("crc")) throw JournalCorruption("journal line has no checksum");
        const auto crc = j.at("crc").get<std::uint32_t>();
        j.erase("crc");
        if (crc_of(j.dump()) != crc) throw JournalCorruption("journal checksum mismatch");

        JournalRecord r;
        r.sequence_no = j.at("seq").get<std::uint64_t>();
        r.run_id = j.at("run_id").get<std::string>();
        const auto status = j.at("status").get<std::string>();
        if (status == "done")
            r.status = RunStatus::done;
        else if (status == "failed")
            r.status = RunStatus::failed;
        else
            throw JournalCorruption("journal record has non-terminal status '" + status + "'");
        r.measures = j.at("measures").get<std::map<std::string, double>>();
        r.wall_time = j.at("wall_time").get<double>();
        r.finished_at = j.at("finished_at").get<std::string>();
        r.exit_status = j.value("exit_status", 0);
        r.attempts = j.value("attempts", 1);
        r.checksum = crc;
        return r;
    } catch (const json::exception& e) {
        throw JournalCorruption(std::string("journal record is malformed: ") + e.what());
    }
}

JournalContents read_journal(const std::filesystem::path& path) {
    JournalContents out;
    std::ifstream in(path, std::ios::binary);
    if (!in) return out;
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();

    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        ++line_no;
        const auto nl = text.find('\n', pos);
        const bool last = nl == std::string::npos || nl + 1 == text.size();
        const std::string_view line(text.data() + pos, (nl == std::string::npos ? text.size() : nl) - pos);
        try {
            if (nl == std::string::npos) throw JournalCorruption("unterminated line");
            auto record = decode_record(line);
            if (!out.records.empty() && record.sequence_no <= out.records.back().sequence_no)
                throw JournalCorruption("sequence number does not increase");
            out.records.push_back(std::move(record));
        } catch (const JournalCorruption& e) {
            if (last) {
                out.torn_tail = true;
                break;
            }
            throw JournalCorruption(path.string() + ":" + std::to_string(line_no) + ": " + e.what() +
                                    " (not at the tail; inspect the journal before resuming)");
        }
        pos = nl + 1;
        out.valid_bytes = pos;
    }
    return out;
}

std::map<std::string, JournalRecord> load_completed(const std::filesystem::path& path) {
    std::map<std::string, JournalRecord> out;
    for (auto& r : read_journal(path).records) out[r.run_id] = std::move(r);
    return out;
}

Journal::Journal(std::filesystem::path path, int fd, JournalContents contents)
    : path_(std::move(path)), fd_(fd), records_(std::move(contents.records)), recovered_(contents.torn_tail) {
    if (!records_.empty()) last_sequence_ = records_.back().sequence_no;
}

Journal Journal::open(const std::filesystem::path& path) {
    auto contents = read_journal(path);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_CLOEXEC, 0644);
    if (fd < 0) throw StorageError("cannot open journal " + path.string() + ": " + std::strerror(errno));
    if (::ftruncate(fd, static_cast<off_t>(contents.valid_bytes)) != 0 ||
        ::lseek(fd, 0, SEEK_END) < 0 || ::fsync(fd) != 0) {
        ::close(fd);
        throw StorageError("cannot prepare journal " + path.string() + ": " + std::strerror(errno));
    }
    return Journal(path, fd, std::move(contents));
}

Journal::Journal(Journal&& other) noexcept
    : path_(std::move(other.path_)),
      fd_(std::exchange(other.fd_, -1)),
      records_(std::move(other.records_)),
      last_sequence_(other.last_sequence_),
      recovered_(other.recovered_) {}

Journal& Journal::operator=(Journal&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0) ::close(fd_);
        path_ = std::move(other.path_);
        fd_ = std::exchange(other.fd_, -1);
        records_ = std::move(other.records_);
        last_sequence_ = other.last_sequence_;
        recovered_ = other.recovered_;
    }
    return *this;
}

Journal::~Journal() {
    if (fd_ >= 0) ::close(fd_);
}

void Journal::append(JournalRecord& record) {
    if (fd_ < 0) throw StorageError("journal is not open");
    if (record.status != RunStatus::done && record.status != RunStatus::failed)
        throw StorageError("only terminal run outcomes are journaled");
    record.sequence_no = last_sequence_ + 1;
    if (record.finished_at.empty()) record.finished_at = utc_timestamp();
    const std::string line = encode_record(record) + "\n";
    write_all(fd_, line, path_);
    if (::fsync(fd_) != 0) throw StorageError("journal fsync failed: " + std::string(std::strerror(errno)));
    last_sequence_ = record.sequence_no;
    records_.push_back(record);
}

std::map<std::string, JournalRecord> Journal::completed() const {
    std::map<std::string, JournalRecord> out;
    for (const auto& r : records_) out[r.run_id] = r;
    return out;
}

std::string emit_run_table_csv(const RunTable& table, const std::map<std::string, JournalRecord>& completed) {
    std::string out = "run_id,subject";
    for (const auto& f : table.factors) out += "," + csv_field(f);
    out += ",repetition,block,status";
    for (const auto& m : table.metrics) out += "," + csv_field(m);
    out += "\n";

    for (const auto& run : table.runs) {
        out += csv_field(run.run_id) + "," + csv_field(run.subject);
        for (const auto& f : table.factors) out += "," + csv_field(run.treatment(f));
        out += "," + std::to_string(run.repetition) + "," + csv_field(run.block.value_or(""));

        const auto it = completed.find(run.run_id);
        RunStatus status = run.status;
        const std::map<std::string, double>* measures = &run.measures;
        if (it != completed.end()) {
            status = it->second.status;
            measures = &it->second.measures;
        }
        out += status == RunStatus::failed ? ",FAILED" : "," + std::string(to_string(status));
        for (const auto& m : table.metrics) {
            out += ",";
            if (status == RunStatus::done)
                if (const auto v = measures->find(m); v != measures->end()) out += format_number(v->second);
        }
        out += "\n";
    }
    return out;
}

RunTable parse_run_table_csv(std::string_view text) {
    const auto rows = parse_csv(text);
    if (rows.empty()) throw Error("run table CSV is empty");
    const auto& header = rows.front();
    const auto column = [&](std::string_view name) -> std::size_t {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw Error("run table CSV has no '" + std::string(name) + "' column");
    };
    const auto rep_col = column("repetition");
    const auto block_col = column("block");
    const auto status_col = column("status");
    if (column("run_id") != 0 || column("subject") != 1 || block_col != rep_col + 1 || status_col != block_col + 1)
        throw Error("run table CSV header has an unexpected layout");

    RunTable table;
    for (std::size_t i = 2; i < rep_col; ++i) table.factors.push_back(header[i]);
    for (std::size_t i = status_col + 1; i < header.size(); ++i) table.metrics.push_back(header[i]);

    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() == 1 && row[0].empty()) continue;
        if (row.size() != header.size())
            throw Error("run table CSV row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                        " fields, expected " + std::to_string(header.size()));
        Run run;
        run.run_id = row[0];
        run.subject = row[1];
        run.trial_key = "subject=" + run.subject;
        for (std::size_t i = 2; i < rep_col; ++i) {
            run.treatments.emplace_back(header[i], row[i]);
            run.trial_key += "|" + header[i] + "=" + row[i];
        }
        run.repetition = std::stoll(row[rep_col]);
        if (!row[block_col].empty()) run.block = row[block_col];
        const auto& status = row[status_col];
        if (status == "done")
            run.status = RunStatus::done;
        else if (status == "FAILED" || status == "failed")
            run.status = RunStatus::failed;
        else
            run.status = RunStatus::pending;
        for (std::size_t i = status_col + 1; i < header.size(); ++i) {
            if (row[i].empty()) continue;
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(row[i].data(), row[i].data() + row[i].size(), v);
            if (ec != std::errc{} || ptr != row[i].data() + row[i].size())
                throw Error("run table CSV row " + std::to_string(r + 1) + ": '" + row[i] + "' is not a number");
            run.measures[header[i]] = v;
        }
        std::size_t index = r - 1;
        if (run.run_id.size() > 1 && run.run_id[0] == 'r') {
            std::size_t parsed = 0;
            const auto* b = run.run_id.data() + 1;
            const auto* e = run.run_id.data() + run.run_id.size();
            if (auto [ptr, ec] = std::from_chars(b, e, parsed); ec == std::errc{} && parsed > 0) index = parsed - 1;
        }
        run.canonical_index = index;
        table.runs.push_back(std::move(run));
    }
    table.order_digest = order_digest(table.runs);
    return table;
}

}  // namespace exr
