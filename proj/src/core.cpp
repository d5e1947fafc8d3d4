#include "spid/core.hpp"

#include <algorithm>

namespace spid {

std::string to_string(Amount v)
{
    if (v == 0) return "0";
    bool neg = v < 0;
    unsigned __int128 u = neg ? -(unsigned __int128)v : (unsigned __int128)v;
    std::string s;
    while (u) { s.push_back(char('0' + int(u % 10))); u /= 10; }
    if (neg) s.push_back('-');
    std::reverse(s.begin(), s.end());
    return s;
}

Amount parse_amount(const std::string& s)
{
    if (s.empty()) throw ConfigError("empty amount");
    std::size_t i = 0;
    bool neg = false;
    if (s[0] == '-' || s[0] == '+') { neg = s[0] == '-'; i = 1; }
    if (i == s.size()) throw ConfigError("bad amount: " + s);
    Amount v = 0;
    for (; i < s.size(); ++i) {
        if (s[i] < '0' || s[i] > '9') throw ConfigError("bad amount: " + s);
        v = v * 10 + (s[i] - '0');
    }
    return neg ? -v : v;
}

bool Matrix::is_zero() const
{
    return std::all_of(data.begin(), data.end(), [](Amount x) { return x == 0; });
}

Matrix& Matrix::operator+=(const Matrix& o)
{
    if (!same_shape(o)) throw StructuralError("matrix shape mismatch in +=");
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& o)
{
    if (!same_shape(o)) throw StructuralError("matrix shape mismatch in -=");
    for (std::size_t i = 0; i < data.size(); ++i) data[i] -= o.data[i];
    return *this;
}

Matrix Matrix::slice_rows(std::size_t r0, std::size_t n) const
{
    if (r0 + n > rows) throw StructuralError("row slice out of range");
    Matrix out(n, cols);
    std::copy(data.begin() + r0 * cols, data.begin() + (r0 + n) * cols, out.data.begin());
    return out;
}

Matrix vstack(const Matrix& a, const Matrix& b)
{
    if (a.rows == 0) return b;
    if (b.rows == 0) return a;
    if (a.cols != b.cols) throw StructuralError("vstack column mismatch");
    Matrix out(a.rows + b.rows, a.cols);
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
    return out;
}

} // namespace spid
