#include "yoularen/toml_lite.hpp"

#include <cctype>
#include <charconv>
#include <sstream>

namespace yoularen::toml_lite {

namespace {

std::string kind_name(Value::Kind k) {
    switch (k) {
        case Value::Kind::Bool: return "boolean";
        case Value::Kind::Int: return "integer";
        case Value::Kind::Float: return "float";
        case Value::Kind::String: return "string";
        case Value::Kind::Array: return "array";
    }
    return "value";
}

class Parser {
public:
    Parser(const std::string& text, std::string source) : text_(text), source_(std::move(source)) {}

    Document run() {
        Document doc;
        std::string table;
        while (true) {
            skip_blank_lines();
            if (eof()) break;
            if (peek() == '[') {
                ++pos_;
                skip_ws();
                std::string name = parse_key();
                skip_ws();
                expect(']');
                table = name;
                end_of_line();
                continue;
            }
            const int line = line_;
            std::string key = parse_key();
            skip_ws();
            expect('=');
            skip_ws();
            Value v = parse_any();
            v.line = line;
            const std::string full = table.empty() ? key : table + "." + key;
            if (doc.contains(full)) fail("duplicate key '" + full + "'");
            doc.set(full, std::move(v));
            end_of_line();
        }
        return doc;
    }

    Value parse_single() {
        skip_ws();
        Value v = parse_any();
        skip_ws();
        if (!eof()) fail("trailing characters after value");
        return v;
    }

private:
    const std::string& text_;
    std::string source_;
    std::size_t pos_ = 0;
    int line_ = 1;

    bool eof() const { return pos_ >= text_.size(); }
    char peek() const { return eof() ? '\0' : text_[pos_]; }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError(source_ + ":" + std::to_string(line_) + ": " + msg);
    }

    void expect(char c) {
        if (peek() != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    void skip_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
    }

    void skip_comment() {
        if (peek() == '#')
            while (!eof() && peek() != '\n') ++pos_;
    }

    void skip_blank_lines() {
        while (!eof()) {
            skip_ws();
            skip_comment();
            if (peek() == '\r') ++pos_;
            if (peek() == '\n') {
                ++pos_;
                ++line_;
                continue;
            }
            break;
        }
    }

    // Whitespace, comments and newlines, used inside arrays.
    void skip_all() {
        while (!eof()) {
            skip_ws();
            skip_comment();
            if (peek() == '\r') {
                ++pos_;
            } else if (peek() == '\n') {
                ++pos_;
                ++line_;
            } else {
                break;
            }
        }
    }

    void end_of_line() {
        skip_ws();
        skip_comment();
        if (peek() == '\r') ++pos_;
        if (eof()) return;
        if (peek() != '\n') fail("unexpected characters at end of line");
        ++pos_;
        ++line_;
    }

    std::string parse_bare_or_quoted() {
        if (peek() == '"') return parse_string();
        const std::size_t start = pos_;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
                          peek() == '-'))
            ++pos_;
        if (pos_ == start) fail("expected a key");
        return text_.substr(start, pos_ - start);
    }

    std::string parse_key() {
        std::string key = parse_bare_or_quoted();
        skip_ws();
        while (peek() == '.') {
            ++pos_;
            skip_ws();
            key += "." + parse_bare_or_quoted();
            skip_ws();
        }
        return key;
    }

    std::string parse_string() {
        expect('"');
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') fail("unterminated string");
            char c = text_[pos_++];
            if (c == '"') break;
            if (c == '\\') {
                if (eof()) fail("unterminated escape");
                char e = text_[pos_++];
                switch (e) {
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    default: fail(std::string("unsupported escape \\") + e);
                }
            } else {
                out += c;
            }
        }
        return out;
    }

    Value parse_any() {
        Value v;
        v.line = line_;
        const char c = peek();
        if (c == '"') {
            v.kind = Value::Kind::String;
            v.s = parse_string();
            return v;
        }
        if (c == '[') {
            ++pos_;
            v.kind = Value::Kind::Array;
            skip_all();
            while (peek() != ']') {
                v.items.push_back(parse_any());
                skip_all();
                if (peek() == ',') {
                    ++pos_;
                    skip_all();
                } else if (peek() != ']') {
                    fail("expected ',' or ']' in array");
                }
            }
            ++pos_;
            return v;
        }
        const std::size_t start = pos_;
        while (!eof() && peek() != ',' && peek() != ']' && peek() != '#' && peek() != '\n' &&
               peek() != '\r' && peek() != ' ' && peek() != '\t')
            ++pos_;
        std::string tok = text_.substr(start, pos_ - start);
        if (tok.empty()) fail("expected a value");
        if (tok == "true" || tok == "false") {
            v.kind = Value::Kind::Bool;
            v.b = tok == "true";
            return v;
        }
        std::string digits;
        for (char ch : tok)
            if (ch != '_') digits += ch;
        if (!digits.empty() && digits[0] == '+') digits.erase(0, 1);
        const bool is_float = digits.find_first_of(".eE") != std::string::npos ||
                              digits == "inf" || digits == "-inf" || digits == "nan";
        const char* first = digits.data();
        const char* last = first + digits.size();
        if (is_float) {
            v.kind = Value::Kind::Float;
            auto res = std::from_chars(first, last, v.f);
            if (res.ec != std::errc() || res.ptr != last) fail("invalid number '" + tok + "'");
        } else {
            v.kind = Value::Kind::Int;
            auto res = std::from_chars(first, last, v.i);
            if (res.ec != std::errc() || res.ptr != last) fail("invalid value '" + tok + "'");
        }
        return v;
    }
};

[[noreturn]] void type_error(const std::string& key, const Value& v, const std::string& wanted) {
    throw ConfigError("key '" + key + "' (line " + std::to_string(v.line) + ") must be " + wanted +
                      ", got " + kind_name(v.kind));
}

}  // namespace

const Value& Document::at(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing key '" + key + "'");
    return it->second;
}

std::vector<std::string> Document::keys() const {
    std::vector<std::string> out;
    for (const auto& kv : values_) out.push_back(kv.first);
    return out;
}

double Document::get_double(const std::string& key) const {
    const auto& v = at(key);
    if (v.kind == Value::Kind::Float) return v.f;
    if (v.kind == Value::Kind::Int) return static_cast<double>(v.i);
    type_error(key, v, "a number");
}

long long Document::get_int(const std::string& key) const {
    const auto& v = at(key);
    if (v.kind != Value::Kind::Int) type_error(key, v, "an integer");
    return v.i;
}

bool Document::get_bool(const std::string& key) const {
    const auto& v = at(key);
    if (v.kind != Value::Kind::Bool) type_error(key, v, "a boolean");
    return v.b;
}

std::string Document::get_string(const std::string& key) const {
    const auto& v = at(key);
    if (v.kind != Value::Kind::String) type_error(key, v, "a string");
    return v.s;
}

std::vector<long long> Document::get_int_array(const std::string& key) const {
    const auto& v = at(key);
    if (v.kind != Value::Kind::Array) type_error(key, v, "an array of integers");
    std::vector<long long> out;
    for (const auto& item : v.items) {
        if (item.kind != Value::Kind::Int) type_error(key, item, "an array of integers");
        out.push_back(item.i);
    }
    return out;
}

void Document::set(const std::string& key, Value v) { values_[key] = std::move(v); }

Document parse(const std::string& text, const std::string& source) {
    return Parser(text, source).run();
}

Value parse_value(const std::string& text) { return Parser(text, "<override>").parse_single(); }

}  // namespace yoularen::toml_lite
