#pragma once

#include <map>
#include <string>
#include <vector>

#include "yoularen/common.hpp"

namespace yoularen::toml_lite {

/// A TOML value restricted to what experiment configs need: booleans, integers,
/// floats, basic strings and (possibly multi-line) arrays of those.
struct Value {
    enum class Kind { Bool, Int, Float, String, Array };
    Kind kind = Kind::Int;
    bool b = false;
    long long i = 0;
    double f = 0.0;
    std::string s;
    std::vector<Value> items;
    int line = 0;
};

/// Flat view of a document: keys are dotted paths ("ars.m_dirs" for key m_dirs in [ars]).
class Document {
public:
    bool contains(const std::string& key) const { return values_.count(key) != 0; }
    const Value& at(const std::string& key) const;
    std::vector<std::string> keys() const;

    double get_double(const std::string& key) const;
    long long get_int(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::string get_string(const std::string& key) const;
    std::vector<long long> get_int_array(const std::string& key) const;

    void set(const std::string& key, Value v);

private:
    std::map<std::string, Value> values_;
};

/// Throws ConfigError naming `source` and the offending line.
Document parse(const std::string& text, const std::string& source = "<config>");

/// Parses a single value as it would appear on the right of `=`.
Value parse_value(const std::string& text);

}  // namespace yoularen::toml_lite
