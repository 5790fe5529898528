#include "qopt/report.hpp"

#include "qopt/market_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace qopt {

void RunReport::line(const std::string& key, const std::string& value) {
    lines_.emplace_back(key, value);
}

void RunReport::number(const std::string& key, double value) {
    lines_.emplace_back(key, fmt17(value));
}

void RunReport::integer(const std::string& key, long long value) {
    lines_.emplace_back(key, std::to_string(value));
}

void RunReport::check(const std::string& name, double value, double tol, bool pass) {
    if (!pass) ++failed_checks_;
    lines_.emplace_back("check", name + " value " + fmt17(value) + " tol " + fmt17(tol) +
                                     " status " + (pass ? "PASS" : "FAIL"));
}

void RunReport::blank() {
    lines_.emplace_back("", "");
}

std::string RunReport::text() const {
    std::ostringstream out;
    for (const auto& [key, value] : lines_) {
        if (key.empty() && value.empty()) {
            out << "\n";
        } else {
            out << key << " " << value << "\n";
        }
    }
    return out.str();
}

namespace {

std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        default:
            if (static_cast<unsigned char>(c) < 0x20) {
                char buf[8];
                std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                out += buf;
            } else {
                out += c;
            }
        }
    }
    return out;
}

} // namespace

std::string RunReport::json() const {
    std::ostringstream out;
    out << "{\"lines\":[";
    bool first = true;
    for (const auto& [key, value] : lines_) {
        if (key.empty() && value.empty()) continue;
        if (!first) out << ",";
        first = false;
        out << "{\"key\":\"" << json_escape(key) << "\",\"value\":\"" << json_escape(value)
            << "\"}";
    }
    out << "],\"failed_checks\":" << failed_checks_ << "}";
    return out.str();
}

std::string content_digest(const std::string& bytes) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

} // namespace qopt
