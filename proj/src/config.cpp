#include "geophase/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <system_error>

namespace geophase {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool valid_section_name(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!(std::islower(static_cast<unsigned char>(c)) ||
              std::isdigit(static_cast<unsigned char>(c)) || c == '-'))
            return false;
    return true;
}

bool valid_key_name(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!(std::islower(static_cast<unsigned char>(c)) ||
              std::isdigit(static_cast<unsigned char>(c)) || c == '_'))
            return false;
    return true;
}

// Strip an inline comment: a # or ; that is at the start or preceded by
// whitespace, outside of any quoted region.
std::string strip_inline_comment(const std::string& s) {
    bool in_quote = false;
    for (size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (in_quote) {
            if (c == '\\' && i + 1 < s.size())
                ++i;
            else if (c == '"')
                in_quote = false;
            continue;
        }
        if (c == '"') {
            in_quote = true;
            continue;
        }
        if ((c == '#' || c == ';') && (i == 0 || s[i - 1] == ' ' || s[i - 1] == '\t'))
            return s.substr(0, i);
    }
    return s;
}

std::string unquote_value(const std::string& raw, const SourceLoc& loc) {
    if (raw.empty() || raw.front() != '"') return raw;
    std::string out;
    bool closed = false;
    for (size_t i = 1; i < raw.size(); ++i) {
        const char c = raw[i];
        if (c == '\\') {
            if (i + 1 >= raw.size())
                throw config_error("config: dangling escape in quoted value (" + loc.str() + ")");
            const char n = raw[++i];
            if (n != '"' && n != '\\')
                throw config_error(std::string("config: unsupported escape \"\\") + n +
                                   "\" in quoted value (" + loc.str() + ")");
            out.push_back(n);
        } else if (c == '"') {
            if (i + 1 != raw.size())
                throw config_error("config: text after closing quote (" + loc.str() + ")");
            closed = true;
        } else {
            out.push_back(c);
        }
    }
    if (!closed) throw config_error("config: unterminated quoted value (" + loc.str() + ")");
    return out;
}

struct ParseState {
    ConfigDoc doc;
    std::vector<std::string> include_stack;  // canonical paths, for cycles
};

void parse_stream(std::istream& in, const std::string& label, const std::string& dir,
                  ParseState& st);

void parse_include(const std::string& target, const std::string& dir, const SourceLoc& loc,
                   ParseState& st) {
    namespace fs = std::filesystem;
    if (st.include_stack.size() >= 16)
        throw config_error("config: include depth exceeds 16 (" + loc.str() + ")");
    fs::path p(target);
    if (p.is_relative() && !dir.empty()) p = fs::path(dir) / p;
    std::error_code ec;
    fs::path canon = fs::weakly_canonical(p, ec);
    const std::string key = ec ? p.string() : canon.string();
    for (const std::string& seen : st.include_stack)
        if (seen == key)
            throw config_error("config: include cycle through \"" + target + "\" (" + loc.str() +
                               ")");
    std::ifstream f(p);
    if (!f)
        throw config_error("config: cannot open include \"" + target + "\" (" + loc.str() + ")");
    st.include_stack.push_back(key);
    parse_stream(f, p.string(), p.parent_path().string(), st);
    st.include_stack.pop_back();
}

void parse_stream(std::istream& in, const std::string& label, const std::string& dir,
                  ParseState& st) {
    std::string line;
    int lineno = 0;
    // Index into st.doc.sections of the section currently open in THIS file;
    // -1 while outside any section (start of file and right after includes).
    int current = -1;
    while (std::getline(in, line)) {
        ++lineno;
        const SourceLoc loc{label, lineno};
        std::string s = trim(strip_inline_comment(line));
        if (s.empty()) continue;

        if (s.front() == '[') {
            if (s.back() != ']')
                throw config_error("config: malformed section header \"" + s + "\" (" + loc.str() +
                                   ")");
            const std::string name = trim(s.substr(1, s.size() - 2));
            if (!valid_section_name(name))
                throw config_error("config: invalid section name \"" + name +
                                   "\" (lowercase letters, digits, and - only; " + loc.str() + ")");
            current = -1;
            for (size_t i = 0; i < st.doc.sections.size(); ++i)
                if (st.doc.sections[i].name == name) current = static_cast<int>(i);
            if (current < 0) {
                st.doc.sections.push_back(ConfigSection{name, loc, {}});
                current = static_cast<int>(st.doc.sections.size()) - 1;
            }
            continue;
        }

        if (s.rfind("include", 0) == 0 &&
            (s.size() == 7 || s[7] == ' ' || s[7] == '\t' || s[7] == '"')) {
            const std::string arg = trim(s.substr(7));
            if (arg.size() < 2 || arg.front() != '"' || arg.back() != '"')
                throw config_error("config: include expects a quoted path (" + loc.str() + ")");
            parse_include(unquote_value(arg, loc), dir, loc, st);
            current = -1;  // keys after an include need a fresh header
            continue;
        }

        const size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw config_error("config: expected key = value, got \"" + s + "\" (" + loc.str() +
                               ")");
        const std::string key = trim(s.substr(0, eq));
        if (!valid_key_name(key))
            throw config_error("config: invalid key name \"" + key +
                               "\" (lowercase letters, digits, and _ only; " + loc.str() + ")");
        if (current < 0)
            throw config_error("config: key \"" + key + "\" outside any [section] (" + loc.str() +
                               ")");
        ConfigSection& sec = st.doc.sections[static_cast<size_t>(current)];
        for (const ConfigEntry& e : sec.entries)
            if (e.key == key)
                throw config_error("config: duplicate key \"" + key + "\" in [" + sec.name +
                                   "]: first at " + e.loc.str() + ", again at " + loc.str());
        sec.entries.push_back(ConfigEntry{key, unquote_value(trim(s.substr(eq + 1)), loc), loc});
    }
}

}  // namespace

const ConfigSection* ConfigDoc::find_section(const std::string& name) const {
    for (const ConfigSection& s : sections)
        if (s.name == name) return &s;
    return nullptr;
}

const ConfigEntry* ConfigDoc::find(const std::string& section, const std::string& key) const {
    const ConfigSection* s = find_section(section);
    if (!s) return nullptr;
    for (const ConfigEntry& e : s->entries)
        if (e.key == key) return &e;
    return nullptr;
}

ConfigDoc parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw config_error("config: cannot open \"" + path + "\"");
    ParseState st;
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::path canon = fs::weakly_canonical(fs::path(path), ec);
    st.include_stack.push_back(ec ? path : canon.string());
    parse_stream(f, path, fs::path(path).parent_path().string(), st);
    return std::move(st.doc);
}

ConfigDoc parse_config_text(const std::string& text, const std::string& label) {
    std::istringstream in(text);
    ParseState st;
    parse_stream(in, label, "", st);
    return std::move(st.doc);
}

namespace {

bool needs_quoting(const std::string& v) {
    if (v.empty()) return true;
    if (v.front() == ' ' || v.front() == '\t' || v.front() == '"') return true;
    if (v.back() == ' ' || v.back() == '\t') return true;
    for (size_t i = 0; i < v.size(); ++i)
        if ((v[i] == '#' || v[i] == ';') && (i == 0 || v[i - 1] == ' ' || v[i - 1] == '\t'))
            return true;
    return false;
}

std::string quote_value(const std::string& v) {
    if (!needs_quoting(v)) return v;
    std::string out = "\"";
    for (char c : v) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace

std::string serialize_config(const ConfigDoc& doc) {
    std::string out;
    bool first = true;
    for (const ConfigSection& s : doc.sections) {
        if (!first) out.push_back('\n');
        first = false;
        out += "[" + s.name + "]\n";
        for (const ConfigEntry& e : s.entries) out += e.key + " = " + quote_value(e.value) + "\n";
    }
    return out;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string format_number(long long v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double_value(const std::string& text, const std::string& context) {
    const std::string t = trim(text);
    double v = 0.0;
    auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size())
        throw config_error(context + ": cannot parse \"" + text + "\" as a number");
    return v;
}

long long parse_int_value(const std::string& text, const std::string& context) {
    const std::string t = trim(text);
    long long v = 0;
    auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size())
        throw config_error(context + ": cannot parse \"" + text + "\" as an integer");
    return v;
}

bool parse_bool_value(const std::string& text, const std::string& context) {
    const std::string t = trim(text);
    if (t == "true") return true;
    if (t == "false") return false;
    throw config_error(context + ": expected true or false, got \"" + text + "\"");
}

std::vector<double> parse_double_list_value(const std::string& text, const std::string& context) {
    std::vector<double> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        if (trim(item).empty())
            throw config_error(context + ": empty item in list \"" + text + "\"");
        out.push_back(parse_double_value(item, context));
    }
    if (out.empty()) throw config_error(context + ": empty list");
    return out;
}

ConfigReader::ConfigReader(const ConfigDoc& doc) : doc_(doc) {
    consumed_.resize(doc.sections.size());
    for (size_t i = 0; i < doc.sections.size(); ++i)
        consumed_[i].assign(doc.sections[i].entries.size(), false);
}

bool ConfigReader::has(const std::string& section, const std::string& key) const {
    return doc_.find(section, key) != nullptr;
}

const ConfigEntry* ConfigReader::take(const std::string& section, const std::string& key) {
    for (size_t i = 0; i < doc_.sections.size(); ++i) {
        if (doc_.sections[i].name != section) continue;
        for (size_t j = 0; j < doc_.sections[i].entries.size(); ++j) {
            if (doc_.sections[i].entries[j].key == key) {
                consumed_[i][j] = true;
                return &doc_.sections[i].entries[j];
            }
        }
    }
    return nullptr;
}

std::string ConfigReader::get_string(const std::string& section, const std::string& key,
                                     const std::string& fallback) {
    const ConfigEntry* e = take(section, key);
    return e ? e->value : fallback;
}

std::string ConfigReader::require_string(const std::string& section, const std::string& key) {
    const ConfigEntry* e = take(section, key);
    if (!e)
        throw config_error("config: missing required key \"" + key + "\" in [" + section + "]");
    return e->value;
}

double ConfigReader::get_double(const std::string& section, const std::string& key,
                                double fallback) {
    const ConfigEntry* e = take(section, key);
    if (!e) return fallback;
    return parse_double_value(e->value,
                              "config: [" + section + "] " + key + " (" + e->loc.str() + ")");
}

long long ConfigReader::get_int(const std::string& section, const std::string& key,
                                long long fallback) {
    const ConfigEntry* e = take(section, key);
    if (!e) return fallback;
    return parse_int_value(e->value,
                           "config: [" + section + "] " + key + " (" + e->loc.str() + ")");
}

bool ConfigReader::get_bool(const std::string& section, const std::string& key, bool fallback) {
    const ConfigEntry* e = take(section, key);
    if (!e) return fallback;
    return parse_bool_value(e->value,
                            "config: [" + section + "] " + key + " (" + e->loc.str() + ")");
}

std::vector<double> ConfigReader::get_double_list(const std::string& section,
                                                  const std::string& key,
                                                  std::vector<double> fallback) {
    const ConfigEntry* e = take(section, key);
    if (!e) return fallback;
    return parse_double_list_value(e->value,
                                   "config: [" + section + "] " + key + " (" + e->loc.str() + ")");
}

void ConfigReader::require_sections(const std::vector<std::string>& names) const {
    for (const ConfigSection& s : doc_.sections) {
        bool known = false;
        for (const std::string& n : names) known = known || n == s.name;
        if (!known)
            throw config_error("config: unknown section [" + s.name + "] (" + s.loc.str() + ")");
    }
}

void ConfigReader::finish() const {
    std::string bad;
    for (size_t i = 0; i < doc_.sections.size(); ++i)
        for (size_t j = 0; j < consumed_[i].size(); ++j)
            if (!consumed_[i][j]) {
                const ConfigEntry& e = doc_.sections[i].entries[j];
                if (!bad.empty()) bad += "; ";
                bad += "\"" + e.key + "\" in [" + doc_.sections[i].name + "] (" + e.loc.str() + ")";
            }
    if (!bad.empty())
        throw config_error("config: unknown key(s) for this scenario: " + bad);
}

}  // namespace geophase
