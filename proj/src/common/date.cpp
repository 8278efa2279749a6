#include "simgat/date.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

#include "simgat/common.hpp"

namespace simgat {

Date Date::from_ymd(int year, unsigned month, unsigned day) {
    const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
    if (!ymd.ok()) {
        throw ValidationError("invalid calendar date " + std::to_string(year) + "-" + std::to_string(month) + "-" +
                              std::to_string(day));
    }
    return Date(std::chrono::sys_days{ymd}.time_since_epoch().count());
}

Date Date::parse(std::string_view iso) {
    auto field = [&](std::size_t pos, std::size_t len) {
        int v = 0;
        const char* first = iso.data() + pos;
        auto [ptr, ec] = std::from_chars(first, first + len, v);
        if (ec != std::errc{} || ptr != first + len) throw ValidationError("malformed date '" + std::string(iso) + "'");
        return v;
    };
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') {
        throw ValidationError("malformed date '" + std::string(iso) + "' (expected YYYY-MM-DD)");
    }
    return from_ymd(field(0, 4), static_cast<unsigned>(field(5, 2)), static_cast<unsigned>(field(8, 2)));
}

std::string Date::iso() const {
    const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days_}}};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

}  // namespace simgat
