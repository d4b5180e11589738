#include "ctca/config.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ctca/common.hpp"
#include "ctca/rng.hpp"

namespace ctca {

namespace {

std::string trim(const std::string& s) {
    size_t begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return {};
    size_t end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

int64_t parse_int(const std::string& key, const std::string& value) {
    int64_t out = 0;
    const char* first = value.data();
    const char* last = first + value.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc{} || ptr != last) {
        throw ConfigError("config: key '" + key + "' has non-integer value '" + value + "'");
    }
    return out;
}

double parse_double(const std::string& key, const std::string& value) {
    if (value.empty()) {
        throw ConfigError("config: key '" + key + "' has empty numeric value");
    }
    errno = 0;
    char* end = nullptr;
    const double out = std::strtod(value.c_str(), &end);
    if (errno != 0 || end != value.c_str() + value.size()) {
        throw ConfigError("config: key '" + key + "' has non-numeric value '" + value + "'");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config: key '" + key + "' has non-boolean value '" + value + "'");
}

} // namespace

KeyValueConfig KeyValueConfig::parse_text(const std::string& text) {
    KeyValueConfig config;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: line " + std::to_string(line_no) +
                              " is not 'key = value': '" + stripped + "'");
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("config: line " + std::to_string(line_no) + " has an empty key");
        }
        if (config.entries_.count(key) != 0) {
            throw ConfigError("config: duplicate key '" + key + "' at line " +
                              std::to_string(line_no));
        }
        config.entries_.emplace(key, value);
    }
    return config;
}

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("config: cannot open '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    try {
        return parse_text(buffer.str());
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(e.what()) + " (in '" + path + "')");
    }
}

std::string KeyValueConfig::serialize() const {
    std::string out;
    for (const auto& [key, value] : entries_) {
        out += key;
        out += " = ";
        out += value;
        out += "\n";
    }
    return out;
}

void KeyValueConfig::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("config: cannot write '" + path + "'");
    out << serialize();
    if (!out) throw IoError("config: write to '" + path + "' failed");
}

bool KeyValueConfig::has(const std::string& key) const { return entries_.count(key) != 0; }

void KeyValueConfig::set(const std::string& key, const std::string& value) {
    if (trim(key).empty()) throw ConfigError("config: cannot set an empty key");
    entries_[trim(key)] = trim(value);
}

void KeyValueConfig::merge_overrides(const KeyValueConfig& other) {
    for (const auto& [key, value] : other.entries_) entries_[key] = value;
}

std::string KeyValueConfig::get_string(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("config: missing required key '" + key + "'");
    return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key,
                                       const std::string& fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

int64_t KeyValueConfig::get_int(const std::string& key) const {
    return parse_int(key, get_string(key));
}

int64_t KeyValueConfig::get_int(const std::string& key, int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
}

double KeyValueConfig::get_double(const std::string& key) const {
    return parse_double(key, get_string(key));
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

bool KeyValueConfig::get_bool(const std::string& key) const {
    return parse_bool(key, get_string(key));
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
}

std::vector<int64_t> KeyValueConfig::get_int_list(const std::string& key) const {
    const std::string value = get_string(key);
    std::vector<int64_t> out;
    std::istringstream in(value);
    std::string item;
    while (std::getline(in, item, ',')) {
        const std::string stripped = trim(item);
        if (stripped.empty()) {
            throw ConfigError("config: key '" + key + "' has an empty list element");
        }
        out.push_back(parse_int(key, stripped));
    }
    if (out.empty()) throw ConfigError("config: key '" + key + "' has an empty list");
    return out;
}

std::vector<int64_t> KeyValueConfig::get_int_list(
    const std::string& key, const std::vector<int64_t>& fallback) const {
    return has(key) ? get_int_list(key) : fallback;
}

uint64_t KeyValueConfig::content_hash() const {
    const std::string text = serialize();
    return fnv1a64(reinterpret_cast<const uint8_t*>(text.data()), text.size());
}

std::string KeyValueConfig::content_id() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(content_hash()));
    return std::string(buf);
}

} // namespace ctca
