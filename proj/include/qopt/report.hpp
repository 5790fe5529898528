#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace qopt {

/// Line-oriented key/value run report with a stable field order, so two runs
/// of the same command diff cleanly. Checked quantities carry the tolerance
/// they were judged against on the same line.
class RunReport {
public:
    void line(const std::string& key, const std::string& value);
    void number(const std::string& key, double value);
    void integer(const std::string& key, long long value);
    /// `check <name> value <v> tol <tol> status PASS|FAIL`
    void check(const std::string& name, double value, double tol, bool pass);
    void blank();

    bool all_checks_pass() const { return failed_checks_ == 0; }
    int failed_checks() const { return failed_checks_; }

    std::string text() const;
    /// JSON mirror of the same fields, for machine consumption.
    std::string json() const;

private:
    std::vector<std::pair<std::string, std::string>> lines_;
    int failed_checks_ = 0;
};

/// FNV-1a 64-bit digest of a byte string, printed as 16 hex characters.
std::string content_digest(const std::string& bytes);

/// Reads a whole file; throws std::runtime_error if it cannot be opened.
std::string read_file(const std::string& path);

void write_file(const std::string& path, const std::string& content);

} // namespace qopt
