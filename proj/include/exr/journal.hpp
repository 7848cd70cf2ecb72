#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "exr/design.hpp"

namespace exr {

/// Terminal outcome of one run, one JSON object per journal line.
struct JournalRecord {
    std::uint64_t sequence_no = 0;
    std::string run_id;
    RunStatus status = RunStatus::done;  ///< done or failed
    std::map<std::string, double> measures;
    double wall_time = 0.0;
    std::string finished_at;  ///< ISO-8601 UTC
    int exit_status = 0;
    int attempts = 1;
    /// CRC-32 of the record's canonical JSON without the `crc` key.
    std::uint32_t checksum = 0;
};

/// Canonical line (no trailing newline) with the checksum filled in.
std::string encode_record(JournalRecord& record);

/// Throws JournalCorruption if the line is malformed or its checksum is wrong.
JournalRecord decode_record(std::string_view line);

struct JournalContents {
    std::vector<JournalRecord> records;
    /// Byte length of the valid prefix; anything after it is a torn tail.
    std::uint64_t valid_bytes = 0;
    bool torn_tail = false;
};

/// Reads a journal, dropping a torn final line. A missing file is empty.
/// Throws JournalCorruption for damage anywhere but the final line.
JournalContents read_journal(const std::filesystem::path& path);

/// Last terminal record per run_id (a later sequence number wins).
std::map<std::string, JournalRecord> load_completed(const std::filesystem::path& path);

/// Single-writer append-only journal. Each append is fsync'ed before it returns.
class Journal {
public:
    /// Opens (creating if needed) and truncates a torn tail left by a crash.
    static Journal open(const std::filesystem::path& path);

    Journal(Journal&& other) noexcept;
    Journal& operator=(Journal&& other) noexcept;
    Journal(const Journal&) = delete;
    Journal& operator=(const Journal&) = delete;
    ~Journal();

    /// Assigns sequence_no = previous + 1 and the checksum. Throws StorageError.
    void append(JournalRecord& record);

    const std::vector<JournalRecord>& records() const noexcept { return records_; }
    std::map<std::string, JournalRecord> completed() const;
    std::uint64_t last_sequence() const noexcept { return last_sequence_; }
    const std::filesystem::path& path() const noexcept { return path_; }
    bool recovered_torn_tail() const noexcept { return recovered_; }

private:
    Journal(std::filesystem::path path, int fd, JournalContents contents);

    std::filesystem::path path_;
    int fd_ = -1;
    std::vector<JournalRecord> records_;
    std::uint64_t last_sequence_ = 0;
    bool recovered_ = false;
};

/// CSV with one row per run in table order: run_id, subject, one column per
/// factor, repetition, block, status, one column per dependent metric.
/// Failed runs carry the status sentinel `FAILED`.
std::string emit_run_table_csv(const RunTable& table, const std::map<std::string, JournalRecord>& completed);

/// Parses a CSV written by emit_run_table_csv back into a table.
RunTable parse_run_table_csv(std::string_view text);

/// Shortest decimal text that round-trips to the same double.
std::string format_number(double value);

std::string utc_timestamp();

}  // namespace exr
