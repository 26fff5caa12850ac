#include "riskscape/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace riskscape {

namespace {

std::string strip(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// removes a trailing comment that is not inside a string literal
std::string strip_comment(const std::string& s) {
    bool in_str = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') in_str = !in_str;
        if (s[i] == '#' && !in_str) return s.substr(0, i);
    }
    return s;
}

Json parse_toml_scalar(const std::string& raw, int lineno) {
    const std::string v = strip(raw);
    if (v.empty()) throw InvalidInput("toml: empty value at line " + std::to_string(lineno));
    if (v.front() == '"') {
        if (v.size() < 2 || v.back() != '"')
            throw InvalidInput("toml: unterminated string at line " + std::to_string(lineno));
        return v.substr(1, v.size() - 2);
    }
    if (v == "true") return true;
    if (v == "false") return false;
    try {
        std::size_t pos = 0;
        if (v.find_first_of(".eE") == std::string::npos || v.find("0x") == 0) {
            const long long i = std::stoll(v, &pos);
            if (pos == v.size()) return i;
        }
        const double d = std::stod(v, &pos);
        if (pos == v.size()) return d;
    } catch (const std::exception&) {
    }
    throw InvalidInput("toml: cannot parse value '" + v + "' at line " + std::to_string(lineno));
}

Json parse_toml_value(const std::string& raw, int lineno) {
    const std::string v = strip(raw);
    if (!v.empty() && v.front() == '[') {
        if (v.back() != ']') throw InvalidInput("toml: unterminated array at line " + std::to_string(lineno));
        Json arr = Json::array();
        std::string inner = v.substr(1, v.size() - 2);
        std::string cur;
        bool in_str = false;
        int depth = 0;
        for (char c : inner) {
            if (c == '"') in_str = !in_str;
            if (!in_str && c == '[') ++depth;
            if (!in_str && c == ']') --depth;
            if (c == ',' && !in_str && depth == 0) {
                if (!strip(cur).empty()) arr.push_back(parse_toml_value(cur, lineno));
                cur.clear();
            } else {
                cur += c;
            }
        }
        if (!strip(cur).empty()) arr.push_back(parse_toml_value(cur, lineno));
        return arr;
    }
    return parse_toml_scalar(v, lineno);
}

Json* descend(Json& root, const std::string& dotted, int lineno) {
    Json* cur = &root;
    std::stringstream ss(dotted);
    std::string part;
    while (std::getline(ss, part, '.')) {
        part = strip(part);
        if (part.empty()) throw InvalidInput("toml: bad table name at line " + std::to_string(lineno));
        cur = &(*cur)[part];
        if (cur->is_null()) *cur = Json::object();
        if (!cur->is_object()) throw InvalidInput("toml: key clash at line " + std::to_string(lineno));
    }
    return cur;
}

}  // namespace

Json parse_toml(const std::string& text) {
    Json root = Json::object();
    Json* table = &root;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        line = strip(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3)
                throw InvalidInput("toml: bad table header at line " + std::to_string(lineno));
            table = descend(root, line.substr(1, line.size() - 2), lineno);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidInput("toml: expected key = value at line " + std::to_string(lineno));
        const std::string key = strip(line.substr(0, eq));
        if (key.empty()) throw InvalidInput("toml: empty key at line " + std::to_string(lineno));
        (*table)[key] = parse_toml_value(line.substr(eq + 1), lineno);
    }
    return root;
}

Json load_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InvalidInput("cannot open config: " + path);
    std::stringstream buf;
    buf << is.rdbuf();
    const std::string text = buf.str();
    const auto dot = path.rfind('.');
    const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    if (ext == "json") {
        try {
            return Json::parse(text);
        } catch (const std::exception& e) {
            throw InvalidInput(std::string("json config: ") + e.what());
        }
    }
    if (ext == "toml") return parse_toml(text);
    // sniff: JSON starts with { or [
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) continue;
        if (c == '{' || c == '[') {
            try {
                return Json::parse(text);
            } catch (const std::exception& e) {
                throw InvalidInput(std::string("json config: ") + e.what());
            }
        }
        break;
    }
    return parse_toml(text);
}

Json merge_config(Json defaults, const Json& user) {
    if (!user.is_object() || !defaults.is_object()) return user;
    for (auto it = user.begin(); it != user.end(); ++it) {
        if (defaults.contains(it.key()) && defaults[it.key()].is_object() && it.value().is_object())
            defaults[it.key()] = merge_config(defaults[it.key()], it.value());
        else
            defaults[it.key()] = it.value();
    }
    return defaults;
}

}  // namespace riskscape
