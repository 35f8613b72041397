#pragma once

#include "mmcpd/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace mmcpd {

/// Raised by read_observations; carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

inline bool parse_double(std::string_view s, double& out) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace detail

/**
 * One observation per line. Blank lines and '#' comments are skipped; a
 * non-numeric first data line is taken as a CSV header.
 */
inline std::vector<double> read_observations(std::istream& in) {
    std::vector<double> values;
    std::string line;
    std::size_t line_no = 0;
    bool seen_data_line = false;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view(line);
        if (line_no == 1 && view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);
        if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        view = detail::trim(view);
        if (view.empty()) continue;

        double x = 0.0;
        if (detail::parse_double(view, x)) {
            values.push_back(x);
        } else if (!seen_data_line) {
            // header row
        } else {
            throw ParseError(line_no, "cannot parse '" + std::string(view) + "' as a number");
        }
        seen_data_line = true;
    }
    return values;
}

inline std::vector<double> read_observations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open data file '" + path + "'");
    return read_observations(in);
}

}  // namespace mmcpd
