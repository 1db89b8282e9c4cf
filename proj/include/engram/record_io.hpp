#pragma once

// Durability contract: every store file is line-delimited JSON where each
// line is a self-describing record
//
//   {"schema_version":1,"record_type":"<episode|note|op|snapshot_header>","payload":{...}}
//
// Instants are "YYYY-MM-DDTHH:MM:SSZ" strings, integers are JSON numbers, and
// embeddings are arrays of doubles serialized with shortest round-trip
// precision, so identical state always produces identical bytes.

#include <fstream>
#include <functional>
#include <string>

#include "json.hpp"

#include "engram/errors.hpp"
#include "engram/logging.hpp"

namespace engram {

inline constexpr int kSchemaVersion = 1;

inline std::string encode_record(const std::string& record_type, const nlohmann::json& payload) {
    nlohmann::json j{{"schema_version", kSchemaVersion}, {"record_type", record_type}, {"payload", payload}};
    return j.dump();
}

struct Record {
    int schema_version = 0;
    std::string record_type;
    nlohmann::json payload;
};

inline Record decode_record(const std::string& line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw io_error(std::string{"corrupt record line: "} + e.what());
    }
    Record r;
    r.schema_version = j.value("schema_version", 0);
    if (r.schema_version != kSchemaVersion)
        throw io_error("unsupported schema_version " + std::to_string(r.schema_version));
    r.record_type = j.value("record_type", std::string{});
    if (!j.contains("payload")) throw io_error("record missing payload");
    r.payload = j["payload"];
    return r;
}

// Streams records from a line-delimited file. A trailing partial line (torn
// write from a crash) is skipped with a warning; anything corrupt earlier in
// the file is an error.
inline void read_records(const std::string& path, const std::function<void(const Record&)>& fn) {
    std::ifstream in(path);
    if (!in) return;  // absent file reads as empty
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            fn(decode_record(line));
        } catch (const EngineError& e) {
            if (in.peek() == EOF) {
                log::warn(path + ":" + std::to_string(line_no) + " dropping torn trailing record: " + e.what());
                return;
            }
            throw io_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

// Append-only record file handle. Lines are flushed on every append; the
// state they describe only becomes visible after the append returns.
class RecordAppender {
public:
    RecordAppender() = default;

    void open(const std::string& path) {
        path_ = path;
        out_.open(path, std::ios::app);
        if (!out_) throw io_error("cannot open for append: " + path);
    }

    void append(const std::string& record_type, const nlohmann::json& payload) {
        append_line(encode_record(record_type, payload));
    }

    void append_line(const std::string& line) {
        if (!out_.is_open()) throw io_error("record file not open");
        out_ << line << "\n";
        out_.flush();
        if (!out_) throw io_error("write failed: " + path_);
    }

    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::ofstream out_;
};

} // namespace engram
