#pragma once

#include <optional>
#include <string>
#include <vector>

#include "geophase/errors.hpp"

namespace geophase {

// Strict INI-like run configuration.
//
//   # comment (also ;)
//   include "shared.ini"
//   [section]
//   key = value
//   list = 1e3, 1e4, 1e5
//
// Section names use [a-z0-9-], keys use [a-z0-9_]. Values run to the end of
// the line minus inline comments (a # or ; preceded by whitespace); quoted
// values ("...", with \" and \\ escapes) keep spaces and comment characters
// literally. An `include` splices another file in place (paths resolve
// relative to the including file, cycles and depth > 16 are errors) and
// resets the section context, so keys after it need a fresh [section]
// header. Re-opening a section appends to it; a key may appear only once per
// section across the whole document, and a duplicate is an error naming both
// locations. Parsing keeps every entry's source location for later
// diagnostics.

struct SourceLoc {
    std::string file;
    int line = 0;

    std::string str() const { return file + ":" + std::to_string(line); }
};

struct ConfigEntry {
    std::string key;
    std::string value;
    SourceLoc loc;
};

struct ConfigSection {
    std::string name;
    SourceLoc loc;
    std::vector<ConfigEntry> entries;
};

struct ConfigDoc {
    std::vector<ConfigSection> sections;

    const ConfigSection* find_section(const std::string& name) const;
    const ConfigEntry* find(const std::string& section, const std::string& key) const;
};

ConfigDoc parse_config_file(const std::string& path);

// Parse from memory; `label` stands in for the file name in locations, and
// any includes resolve relative to the current directory.
ConfigDoc parse_config_text(const std::string& text, const std::string& label);

// Canonical text form: sections in document order, `key = value` lines,
// values quoted only when needed. parse(serialize(doc)) reproduces the same
// sections, keys, and values.
std::string serialize_config(const ConfigDoc& doc);

// Shortest decimal form of v that parses back to exactly v (std::to_chars),
// used for all numeric output so runs are byte-for-byte reproducible.
std::string format_number(double v);
std::string format_number(long long v);

// Typed, consuming view over a parsed document. Scenario resolution reads
// every key it understands through the getters; finish() then rejects
// whatever was never consumed, so misspelled or misplaced keys fail loudly
// instead of being ignored.
class ConfigReader {
  public:
    explicit ConfigReader(const ConfigDoc& doc);

    bool has(const std::string& section, const std::string& key) const;

    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback);
    double get_double(const std::string& section, const std::string& key, double fallback);
    long long get_int(const std::string& section, const std::string& key, long long fallback);
    bool get_bool(const std::string& section, const std::string& key, bool fallback);
    std::vector<double> get_double_list(const std::string& section, const std::string& key,
                                        std::vector<double> fallback);

    // Value that must be present.
    std::string require_string(const std::string& section, const std::string& key);

    // Error unless every section in the document is in `names`.
    void require_sections(const std::vector<std::string>& names) const;

    // Error listing every entry no getter consumed.
    void finish() const;

  private:
    const ConfigEntry* take(const std::string& section, const std::string& key);

    const ConfigDoc& doc_;
    std::vector<std::vector<bool>> consumed_;
};

// Value parsers shared by the reader and scenario code; `context` prefixes
// the config_error message.
double parse_double_value(const std::string& text, const std::string& context);
long long parse_int_value(const std::string& text, const std::string& context);
bool parse_bool_value(const std::string& text, const std::string& context);
std::vector<double> parse_double_list_value(const std::string& text, const std::string& context);

}  // namespace geophase
