#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace carevec {

inline constexpr std::string_view kVersion = "1.0.0";

// Error hierarchy. The CLI maps each family onto an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (exit code 2).
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or gradient during optimization (exit code 3).
class NumericalError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public DataError {
 public:
  using DataError::DataError;
};
class CheckpointVersionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointShapeError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointTruncatedError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

// Calendar date stored as days since 1970-01-01.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::int32_t days) : days_(days) {}

  static Date from_ymd(int y, unsigned m, unsigned d) {
    using namespace std::chrono;
    year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) throw DataError("invalid calendar date");
    return Date(static_cast<std::int32_t>(sys_days(ymd).time_since_epoch().count()));
  }

  // Strict "YYYY-MM-DD".
  static Date parse(std::string_view s) {
    auto digits = [&](std::size_t pos, std::size_t n) {
      int v = 0;
      for (std::size_t i = pos; i < pos + n; ++i) {
        if (s[i] < '0' || s[i] > '9') throw DataError("bad date '" + std::string(s) + "'");
        v = v * 10 + (s[i] - '0');
      }
      return v;
    };
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') {
      throw DataError("bad date '" + std::string(s) + "', expected YYYY-MM-DD");
    }
    try {
      return from_ymd(digits(0, 4), static_cast<unsigned>(digits(5, 2)),
                      static_cast<unsigned>(digits(8, 2)));
    } catch (const DataError&) {
      throw DataError("bad date '" + std::string(s) + "'");
    }
  }

  std::chrono::year_month_day ymd() const {
    return std::chrono::year_month_day{std::chrono::sys_days{std::chrono::days{days_}}};
  }

  int year() const { return static_cast<int>(ymd().year()); }

  std::string str() const {
    auto v = ymd();
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(v.year()),
                  static_cast<unsigned>(v.month()), static_cast<unsigned>(v.day()));
    return buf;
  }

  constexpr std::int32_t days() const { return days_; }
  constexpr Date operator+(int n) const { return Date(days_ + n); }
  constexpr Date operator-(int n) const { return Date(days_ - n); }
  constexpr int operator-(Date o) const { return days_ - o.days_; }
  constexpr auto operator<=>(const Date&) const = default;

 private:
  std::int32_t days_ = 0;
};

// Inclusive date range.
struct DateRange {
  Date first;
  Date last;

  bool contains(Date d) const { return first <= d && d <= last; }

  // "YYYY-MM-DD:YYYY-MM-DD"
  static DateRange parse(std::string_view s) {
    auto colon = s.find(':');
    if (colon == std::string_view::npos) throw DataError("window must be FIRST:LAST");
    DateRange r{Date::parse(s.substr(0, colon)), Date::parse(s.substr(colon + 1))};
    if (r.last < r.first) throw DataError("window end precedes start");
    return r;
  }
};

// FNV-1a, used for content hashes that must be stable across platforms.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// splitmix64 finalizer; derives independent stream seeds from (seed, tag...).
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <typename... Tags>
std::uint64_t derive_seed(std::uint64_t seed, Tags... tags) {
  std::uint64_t h = mix_seed(seed);
  ((h = mix_seed(h ^ static_cast<std::uint64_t>(tags))), ...);
  return h;
}

inline std::uint64_t derive_seed_str(std::uint64_t seed, std::string_view tag) {
  return mix_seed(mix_seed(seed) ^ fnv1a(tag));
}

using Rng = std::mt19937_64;

// Uniform integer in [0, n). Plain rejection sampling so the stream is
// identical across standard library implementations.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: empty range");
  const std::uint64_t limit = Rng::max() - (Rng::max() % n);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace carevec
