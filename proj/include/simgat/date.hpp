#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace simgat {

/// Calendar day, stored as days since 1970-01-01 (proleptic Gregorian).
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::int64_t days_since_epoch) : days_(days_since_epoch) {}
    static Date from_ymd(int year, unsigned month, unsigned day);
    /// Parses YYYY-MM-DD; throws ValidationError on malformed input.
    static Date parse(std::string_view iso);

    std::string iso() const;
    constexpr std::int64_t days() const noexcept { return days_; }
    constexpr Date operator+(std::int64_t n) const noexcept { return Date(days_ + n); }
    constexpr Date operator-(std::int64_t n) const noexcept { return Date(days_ - n); }
    constexpr std::int64_t operator-(Date other) const noexcept { return days_ - other.days_; }
    constexpr auto operator<=>(const Date&) const = default;

private:
    std::int64_t days_ = 0;
};

}  // namespace simgat
