#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ctca {

// Declarative experiment configuration: `key = value` lines, '#' comments.
// Values are stored verbatim; typed access parses on demand.
class KeyValueConfig {
public:
    KeyValueConfig() = default;

    static KeyValueConfig parse_file(const std::string& path);
    static KeyValueConfig parse_text(const std::string& text);

    // Sorted keys, one `key = value` line each. parse(serialize()) == *this.
    std::string serialize() const;
    void save(const std::string& path) const;

    bool has(const std::string& key) const;
    void set(const std::string& key, const std::string& value);
    // Entries from `other` replace entries here (flags win over the file).
    void merge_overrides(const KeyValueConfig& other);

    const std::map<std::string, std::string>& entries() const { return entries_; }

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    int64_t get_int(const std::string& key) const;
    int64_t get_int(const std::string& key, int64_t fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<int64_t> get_int_list(const std::string& key) const;
    std::vector<int64_t> get_int_list(const std::string& key,
                                      const std::vector<int64_t>& fallback) const;

    // FNV-1a of the canonical serialization; stable content address for
    // run directories.
    uint64_t content_hash() const;
    std::string content_id() const;

private:
    std::map<std::string, std::string> entries_;
};

} // namespace ctca
