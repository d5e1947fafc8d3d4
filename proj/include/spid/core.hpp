// Basic numeric types, dense integer matrices, error kinds.
#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace spid {

// Token amounts. 128-bit so Hadamard growth and long traces never wrap.
using Amount = __int128;

using ChainId = uint32_t;

std::string to_string(Amount v);
Amount parse_amount(const std::string& s);

struct StructuralError : std::runtime_error { using std::runtime_error::runtime_error; };
struct SequencingError : std::runtime_error { using std::runtime_error::runtime_error; };
struct PreconditionError : std::runtime_error { using std::runtime_error::runtime_error; };
struct NotDecodable : std::runtime_error { using std::runtime_error::runtime_error; };
struct ConsistencyError : std::runtime_error { using std::runtime_error::runtime_error; };
struct AttachError : std::runtime_error { using std::runtime_error::runtime_error; };
struct DispatchError : std::runtime_error { using std::runtime_error::runtime_error; };
struct ConfigError : std::runtime_error { using std::runtime_error::runtime_error; };

// Row-major dense matrix of Amount.
struct Matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<Amount> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0) {}

    Amount& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    const Amount& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    Amount* row(std::size_t r) { return data.data() + r * cols; }
    const Amount* row(std::size_t r) const { return data.data() + r * cols; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
    bool is_zero() const;

    Matrix& operator+=(const Matrix& o);
    Matrix& operator-=(const Matrix& o);
    friend Matrix operator+(Matrix a, const Matrix& b) { a += b; return a; }
    friend Matrix operator-(Matrix a, const Matrix& b) { a -= b; return a; }
    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
    }

    // rows [r0, r0+n) as a new matrix
    Matrix slice_rows(std::size_t r0, std::size_t n) const;
};

// Append b below a. Column counts must match.
Matrix vstack(const Matrix& a, const Matrix& b);

inline bool is_pow2(std::size_t n) { return n && !(n & (n - 1)); }

} // namespace spid

#include <random>

namespace spid {

using Rng = std::mt19937_64;

// Unbiased integer in [0, n). Portable across standard libraries.
inline uint64_t rand_below(Rng& rng, uint64_t n)
{
    if (n <= 1) return 0;
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do x = rng(); while (x >= limit);
    return x % n;
}

// Uniform double in [0, 1).
inline double rand_unit(Rng& rng) { return double(rng() >> 11) * 0x1.0p-53; }

// splitmix64 finaliser, used to derive sub-seeds.
inline uint64_t mix64(uint64_t x)
{
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t a, uint64_t b, uint64_t c = 0, uint64_t d = 0)
{
    return mix64(mix64(mix64(mix64(a) ^ b) ^ c) ^ d);
}

} // namespace spid
