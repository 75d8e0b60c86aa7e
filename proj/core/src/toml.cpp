#include "toml.hpp"

#include <cctype>
#include <cstdlib>

#include "taper/error.hpp"

namespace taper::detail {

namespace {

using nlohmann::json;

class Parser {
public:
    explicit Parser(const std::string& text) : text_(text) {}

    json parse() {
        root_ = json::object();
        current_ = &root_;
        while (!at_end()) {
            skip_ws_and_comments();
            if (at_end()) break;
            if (peek() == '[') {
                parse_table_header();
            } else {
                parse_key_value(*current_);
                expect_line_end();
            }
        }
        return std::move(root_);
    }

private:
    bool at_end() const { return pos_ >= text_.size(); }
    char peek() const { return text_[pos_]; }
    char get() { return text_[pos_++]; }

    [[noreturn]] void fail(const std::string& message) const {
        throw ConfigError("TOML parse error at line " + std::to_string(line_) + ": " + message);
    }

    void skip_spaces() {
        while (!at_end() && (peek() == ' ' || peek() == '\t')) ++pos_;
    }

    void skip_ws_and_comments() {
        for (;;) {
            skip_spaces();
            if (at_end()) return;
            if (peek() == '#') {
                while (!at_end() && peek() != '\n') ++pos_;
                continue;
            }
            if (peek() == '\n' || peek() == '\r') {
                if (get() == '\n') ++line_;
                continue;
            }
            return;
        }
    }

    void expect_line_end() {
        skip_spaces();
        if (at_end()) return;
        if (peek() == '#') {
            while (!at_end() && peek() != '\n') ++pos_;
        }
        if (at_end()) return;
        if (peek() == '\r') ++pos_;
        if (at_end()) return;
        if (peek() != '\n') fail("expected end of line");
        ++pos_;
        ++line_;
    }

    std::string parse_bare_key() {
        std::string key;
        while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
                             peek() == '-')) {
            key.push_back(get());
        }
        if (key.empty()) fail("expected a key");
        return key;
    }

    std::vector<std::string> parse_key_path() {
        std::vector<std::string> path;
        for (;;) {
            skip_spaces();
            if (!at_end() && (peek() == '"' || peek() == '\'')) {
                path.push_back(parse_string());
            } else {
                path.push_back(parse_bare_key());
            }
            skip_spaces();
            if (!at_end() && peek() == '.') {
                ++pos_;
                continue;
            }
            return path;
        }
    }

    json* navigate(json& base, const std::vector<std::string>& path, std::size_t upto) {
        json* node = &base;
        for (std::size_t i = 0; i < upto; ++i) {
            json& child = (*node)[path[i]];
            if (child.is_null()) child = json::object();
            if (child.is_array()) {
                if (child.empty()) fail("cannot enter empty table array");
                node = &child.back();
            } else if (child.is_object()) {
                node = &child;
            } else {
                fail("key '" + path[i] + "' is not a table");
            }
        }
        return node;
    }

    void parse_table_header() {
        ++pos_;  // '['
        const bool array_table = !at_end() && peek() == '[';
        if (array_table) ++pos_;
        auto path = parse_key_path();
        if (at_end() || get() != ']') fail("expected ']'");
        if (array_table && (at_end() || get() != ']')) fail("expected ']]'");
        expect_line_end();

        json* parent = navigate(root_, path, path.size() - 1);
        json& slot = (*parent)[path.back()];
        if (array_table) {
            if (slot.is_null()) slot = json::array();
            if (!slot.is_array()) fail("'" + path.back() + "' is not an array of tables");
            slot.push_back(json::object());
            current_ = &slot.back();
        } else {
            if (slot.is_null()) slot = json::object();
            if (!slot.is_object()) fail("'" + path.back() + "' is not a table");
            current_ = &slot;
        }
    }

    void parse_key_value(json& table) {
        auto path = parse_key_path();
        skip_spaces();
        if (at_end() || get() != '=') fail("expected '='");
        skip_spaces();
        json value = parse_value();
        json* parent = navigate(table, path, path.size() - 1);
        if (parent->contains(path.back())) fail("duplicate key '" + path.back() + "'");
        (*parent)[path.back()] = std::move(value);
    }

    std::string parse_string() {
        const char quote = get();
        std::string out;
        while (!at_end()) {
            char c = get();
            if (c == quote) return out;
            if (c == '\n') fail("unterminated string");
            if (quote == '"' && c == '\\') {
                if (at_end()) fail("dangling escape");
                char e = get();
                switch (e) {
                    case 'n': out.push_back('\n'); break;
                    case 't': out.push_back('\t'); break;
                    case 'r': out.push_back('\r'); break;
                    case '"': out.push_back('"'); break;
                    case '\\': out.push_back('\\'); break;
                    default: fail("unsupported escape sequence");
                }
            } else {
                out.push_back(c);
            }
        }
        fail("unterminated string");
    }

    json parse_value() {
        if (at_end()) fail("expected a value");
        const char c = peek();
        if (c == '"' || c == '\'') return parse_string();
        if (c == '[') return parse_array();
        if (c == '{') return parse_inline_table();
        // bare token: number or boolean
        std::string token;
        while (!at_end() && peek() != ',' && peek() != ']' && peek() != '}' && peek() != '#' &&
               peek() != '\n' && peek() != '\r' && peek() != ' ' && peek() != '\t') {
            token.push_back(get());
        }
        if (token == "true") return true;
        if (token == "false") return false;
        if (token.empty()) fail("expected a value");
        const bool is_float = token.find_first_of(".eE") != std::string::npos ||
                              token == "inf" || token == "-inf" || token == "nan";
        char* end = nullptr;
        if (is_float) {
            double v = std::strtod(token.c_str(), &end);
            if (end != token.c_str() + token.size()) fail("bad number '" + token + "'");
            return v;
        }
        long long v = std::strtoll(token.c_str(), &end, 10);
        if (end != token.c_str() + token.size()) fail("bad number '" + token + "'");
        return v;
    }

    json parse_array() {
        ++pos_;  // '['
        json arr = json::array();
        for (;;) {
            skip_ws_and_comments();
            if (at_end()) fail("unterminated array");
            if (peek() == ']') {
                ++pos_;
                return arr;
            }
            arr.push_back(parse_value());
            skip_ws_and_comments();
            if (!at_end() && peek() == ',') {
                ++pos_;
                continue;
            }
        }
    }

    json parse_inline_table() {
        ++pos_;  // '{'
        json table = json::object();
        skip_spaces();
        if (!at_end() && peek() == '}') {
            ++pos_;
            return table;
        }
        for (;;) {
            skip_spaces();
            parse_key_value(table);
            skip_spaces();
            if (at_end()) fail("unterminated inline table");
            if (peek() == ',') {
                ++pos_;
                continue;
            }
            if (peek() == '}') {
                ++pos_;
                return table;
            }
            fail("expected ',' or '}' in inline table");
        }
    }

    const std::string& text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    json root_;
    json* current_ = nullptr;
};

}  // namespace

nlohmann::json parse_toml(const std::string& text) { return Parser(text).parse(); }

}  // namespace taper::detail
