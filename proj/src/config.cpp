#include "lumir/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lumir {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

}  // namespace

KvConfig KvConfig::parse_text(const std::string& text) {
    KvConfig cfg;
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::string t = trim(line);
        if (t.empty()) continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        ": expected key = value, got '" + t + "'");
        }
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty()) {
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");
        }
        cfg.set(key, value);
    }
    return cfg;
}

KvConfig KvConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return parse_text(os.str());
}

bool KvConfig::has(const std::string& key) const { return kv_.count(key) > 0; }

std::string KvConfig::get_str(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw std::invalid_argument("missing config key: " + key);
    return it->second;
}

std::string KvConfig::get_str(const std::string& key, const std::string& fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
}

int KvConfig::get_int(const std::string& key, int fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    size_t pos = 0;
    int v = std::stoi(it->second, &pos);
    if (pos != it->second.size()) {
        throw std::invalid_argument("config key " + key + ": not an integer: " + it->second);
    }
    return v;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    size_t pos = 0;
    double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) {
        throw std::invalid_argument("config key " + key + ": not a number: " + it->second);
    }
    return v;
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "off" || v == "no") return false;
    throw std::invalid_argument("config key " + key + ": not a boolean: " + v);
}

void KvConfig::set(const std::string& key, const std::string& value) {
    if (!kv_.count(key)) order_.push_back(key);
    kv_[key] = value;
}

void KvConfig::set_int(const std::string& key, long long value) {
    set(key, std::to_string(value));
}

void KvConfig::set_double(const std::string& key, double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    set(key, buf);
}

void KvConfig::apply_overrides(const std::vector<std::string>& overrides) {
    for (const std::string& o : overrides) {
        size_t eq = o.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw std::invalid_argument("override must be key=value, got '" + o + "'");
        }
        set(trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
    }
}

void KvConfig::merge_from(const KvConfig& other) {
    for (const std::string& k : other.order_) set(k, other.kv_.at(k));
}

std::string KvConfig::serialize() const {
    std::ostringstream os;
    for (const std::string& k : order_) os << k << " = " << kv_.at(k) << "\n";
    return os.str();
}

void KvConfig::write_file(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write config file: " + path);
    out << serialize();
    if (!out) throw std::runtime_error("failed writing config file: " + path);
}

}  // namespace lumir
