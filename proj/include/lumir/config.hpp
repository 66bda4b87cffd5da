#pragma once

#include <map>
#include <string>
#include <vector>

namespace lumir {

// Flat key-value configuration: one `key = value` pair per line, '#' starts
// a comment. Keys keep insertion order for serialization.
class KvConfig {
public:
    static KvConfig parse_text(const std::string& text);
    static KvConfig parse_file(const std::string& path);

    bool has(const std::string& key) const;
    const std::vector<std::string>& keys() const { return order_; }

    std::string get_str(const std::string& key) const;
    std::string get_str(const std::string& key, const std::string& fallback) const;
    int get_int(const std::string& key, int fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    void set(const std::string& key, const std::string& value);
    void set_int(const std::string& key, long long value);
    void set_double(const std::string& key, double value);

    // Applies "key=value" strings; later entries win.
    void apply_overrides(const std::vector<std::string>& overrides);
    // Copies every entry of `other` over this config.
    void merge_from(const KvConfig& other);

    std::string serialize() const;
    void write_file(const std::string& path) const;

private:
    std::vector<std::string> order_;
    std::map<std::string, std::string> kv_;
};

}  // namespace lumir
