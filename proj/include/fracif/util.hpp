#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace fracif {

// Raised when input data violates its contract (bad files, ambiguous
// aliases, duplicate ids). Precondition violations use std::invalid_argument.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical routine failed to converge within its iteration budget.
struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Inclusive year range.
struct YearRange {
    int first = 0;
    int last = 0;

    bool contains(int y) const { return y >= first && y <= last; }
    int length() const { return last - first + 1; }
    bool valid() const { return last >= first; }
};

inline bool operator==(const YearRange& a, const YearRange& b) {
    return a.first == b.first && a.last == b.last;
}

// Kahan-Babuska (Neumaier) compensated accumulator. Summation order is part
// of every determinism contract in this library, so all reductions that feed
// reported numbers go through this type with a fixed order.
struct KahanSum {
    double sum = 0.0;
    double comp = 0.0;

    void add(double x) {
        double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            comp += (sum - t) + x;
        else
            comp += (x - t) + sum;
        sum = t;
    }

    // Folds another accumulator in as two addends (partial-block merging).
    void merge(const KahanSum& other) {
        add(other.sum);
        add(other.comp);
    }

    double value() const { return sum + comp; }
};

// trim + collapse internal whitespace + uppercase + strip trailing periods
inline std::string normalize_abbrev(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    for (char c : raw) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!out.empty()) pending_space = true;
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    while (!out.empty() && out.back() == '.') out.pop_back();
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

// Locale-independent numeric parsing; the whole token must be consumed.
template <typename T>
inline bool parse_number(std::string_view s, T& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            parts.emplace_back(s.substr(start));
            break;
        }
        parts.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return parts;
}

// Fixed-point decimal formatting; relies on the platform's correctly rounded
// binary-to-decimal conversion (exact binary ties round half to even).
inline std::string format_fixed(double x, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, x);
    return buf;
}

// Prints integral values without a decimal part ("3", not "3.000000").
inline std::string format_weight(double x) {
    if (x == std::floor(x) && std::abs(x) < 1e15) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.0f", x);
        return buf;
    }
    return format_fixed(x, 6);
}

inline std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string to_hex(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

// Runs fn(block_index) for block_index in [0, n_blocks) on up to n_workers
// threads. The block layout is chosen by the caller and must not depend on
// the worker count; merging block results in block order afterwards is what
// makes every parallel reduction here bit-identical to the sequential one.
template <typename Fn>
void parallel_blocks(std::size_t n_blocks, unsigned n_workers, Fn&& fn) {
    if (n_workers <= 1 || n_blocks <= 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) fn(b);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        while (true) {
            std::size_t b = next.fetch_add(1);
            if (b >= n_blocks) break;
            fn(b);
        }
    };
    unsigned n = std::min<unsigned>(n_workers, static_cast<unsigned>(n_blocks));
    std::vector<std::thread> threads;
    threads.reserve(n);
    for (unsigned i = 0; i < n; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
}

}  // namespace fracif
