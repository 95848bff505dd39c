#pragma once

#include <chrono>
#include <compare>
#include <cstdio>
#include <string>
#include <string_view>

#include "error.hpp"

namespace downscale {

/// Calendar day. Thin wrapper over sys_days so arithmetic is in whole days.
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::chrono::sys_days d) : days_(d) {}
    constexpr Date(int y, unsigned m, unsigned d)
        : days_(std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{m},
                                            std::chrono::day{d}}) {}

    /// Parses YYYY-MM-DD.
    static Date parse(std::string_view s) {
        int y = 0;
        unsigned m = 0, d = 0;
        char tail = 0;
        const std::string buf(s);
        if (buf.size() != 10 || std::sscanf(buf.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3)
            throw ValidationError("invalid ISO date '" + buf + "'");
        const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                              std::chrono::day{d}};
        if (!ymd.ok()) throw ValidationError("invalid calendar date '" + buf + "'");
        return Date(std::chrono::sys_days(ymd));
    }

    std::string iso() const {
        const auto ymd = this->ymd();
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(ymd.year()), unsigned(ymd.month()),
                      unsigned(ymd.day()));
        return buf;
    }

    std::chrono::year_month_day ymd() const { return std::chrono::year_month_day{days_}; }
    int year() const { return int(ymd().year()); }
    unsigned month() const { return unsigned(ymd().month()); }
    std::chrono::sys_days sys() const { return days_; }
    long serial() const { return days_.time_since_epoch().count(); }

    Date operator+(long n) const { return Date(days_ + std::chrono::days{n}); }
    Date operator-(long n) const { return Date(days_ - std::chrono::days{n}); }
    long operator-(const Date& o) const { return (days_ - o.days_).count(); }
    Date& operator++() { days_ += std::chrono::days{1}; return *this; }

    auto operator<=>(const Date&) const = default;

private:
    std::chrono::sys_days days_{};
};

}  // namespace downscale
