#include "spid/coding.hpp"
#include "spid/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <optional>

namespace spid {

StragglerProfile StragglerProfile::from_probabilities(std::vector<double> p)
{
    StragglerProfile s;
    s.probabilities = std::move(p);
    if (!s.probabilities.empty())
        s.lambda = std::accumulate(s.probabilities.begin(), s.probabilities.end(), 0.0) /
                   double(s.probabilities.size());
    auto count = std::size_t(std::llround(s.lambda * double(s.probabilities.size())));
    s.straggler_set = top_indices(s.probabilities, count);
    return s;
}

std::vector<uint32_t> top_indices(const std::vector<double>& p, std::size_t count)
{
    std::vector<uint32_t> idx(p.size());
    std::iota(idx.begin(), idx.end(), 0u);
    std::stable_sort(idx.begin(), idx.end(), [&](uint32_t a, uint32_t b) { return p[a] > p[b]; });
    idx.resize(std::min(count, idx.size()));
    std::sort(idx.begin(), idx.end());
    return idx;
}

bool CodeGroup::is_frozen(uint32_t local) const
{
    return std::binary_search(frozen.begin(), frozen.end(), local);
}

int CodeGroup::local_of(uint32_t worker) const
{
    for (std::size_t i = 0; i < members.size(); ++i)
        if (members[i] == worker) return int(i);
    return -1;
}

std::pair<int, int> GroupPlan::locate(uint32_t worker) const
{
    for (std::size_t g = 0; g < groups.size(); ++g) {
        int l = groups[g].local_of(worker);
        if (l >= 0) return {int(g), l};
    }
    return {-1, -1};
}

std::vector<uint32_t> group_sizes(uint32_t n)
{
    std::vector<uint32_t> out;
    for (int b = 31; b >= 0; --b)
        if (n & (1u << b)) out.push_back(1u << b);
    return out;
}

std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& quota)
{
    std::vector<std::size_t> out(quota.size());
    std::vector<std::pair<double, std::size_t>> rem;
    std::size_t used = 0;
    for (std::size_t i = 0; i < quota.size(); ++i) {
        out[i] = std::size_t(std::floor(quota[i] + 1e-9));
        used += out[i];
        rem.push_back({quota[i] - double(out[i]), i});
    }
    std::stable_sort(rem.begin(), rem.end(), [](auto& a, auto& b) { return a.first > b.first + 1e-12; });
    for (std::size_t k = 0; used < total && k < rem.size(); ++k, ++used) out[rem[k].second]++;
    return out;
}

namespace {

constexpr uint64_t kPrime = (1ull << 61) - 1;

uint64_t mulmod(uint64_t a, uint64_t b) { return uint64_t((unsigned __int128)a * b % kPrime); }
uint64_t powmod(uint64_t a, uint64_t e)
{
    uint64_t r = 1;
    for (; e; e >>= 1, a = mulmod(a, a))
        if (e & 1) r = mulmod(r, a);
    return r;
}

int hsign(uint32_t i, uint32_t j) { return (__builtin_popcount(i & j) & 1) ? -1 : 1; }

// Rank of H[rows, cols] modulo a large prime. Full rank mod p implies full rank over Q.
std::size_t rank_mod_p(const std::vector<uint32_t>& rows, const std::vector<uint32_t>& cols)
{
    std::vector<std::vector<uint64_t>> a(rows.size(), std::vector<uint64_t>(cols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c)
            a[r][c] = hsign(rows[r], cols[c]) > 0 ? 1 : kPrime - 1;
    std::size_t rank = 0;
    for (std::size_t c = 0; c < cols.size() && rank < rows.size(); ++c) {
        std::size_t piv = rank;
        while (piv < rows.size() && a[piv][c] == 0) ++piv;
        if (piv == rows.size()) continue;
        std::swap(a[piv], a[rank]);
        uint64_t inv = powmod(a[rank][c], kPrime - 2);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (r == rank || a[r][c] == 0) continue;
            uint64_t f = mulmod(a[r][c], inv);
            for (std::size_t k = c; k < cols.size(); ++k)
                a[r][k] = (a[r][k] + kPrime - mulmod(f, a[rank][k])) % kPrime;
        }
        ++rank;
    }
    return rank;
}

// Coded positions handed to the workers of S. Identity when erasing S itself
// is recoverable, otherwise an information set of the rows H[S, :].
std::vector<uint32_t> straggler_positions(uint32_t size, const std::vector<uint32_t>& S)
{
    if (S.empty() || rank_mod_p(S, S) == S.size()) return S;
    std::vector<uint32_t> order = S;
    for (uint32_t c = 0; c < size; ++c)
        if (!std::binary_search(S.begin(), S.end(), c)) order.push_back(c);
    std::vector<uint32_t> E;
    for (uint32_t c : order) {
        E.push_back(c);
        if (rank_mod_p(S, E) < E.size()) E.pop_back();
        if (E.size() == S.size()) break;
    }
    std::sort(E.begin(), E.end());
    return E;
}

} // namespace

GroupPlan plan_groups(uint32_t n, std::size_t M, const StragglerProfile& profile)
{
    if (n < 1 || M < 1) throw PreconditionError("plan_groups needs n >= 1 and M >= 1");
    if (profile.probabilities.size() != n) throw StructuralError("straggler profile size differs from n");
    GroupPlan plan;
    plan.n = n;
    plan.M = M;
    plan.lambda = profile.lambda;
    auto sizes = group_sizes(n);
    std::vector<double> row_quota, frozen_quota;
    for (auto s : sizes) {
        row_quota.push_back(double(s) * double(M) / double(n));
        frozen_quota.push_back(double(s) * profile.lambda);
    }
    auto rows = apportion(M, row_quota);
    auto frozen = apportion(std::size_t(std::llround(profile.lambda * double(n))), frozen_quota);
    uint32_t next = 0;
    std::size_t row0 = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
        CodeGroup g;
        g.size = sizes[k];
        g.rows = rows[k];
        g.first_row = row0;
        row0 += g.rows;
        std::vector<double> p;
        for (uint32_t i = 0; i < g.size; ++i) {
            g.members.push_back(next + i);
            p.push_back(profile.probabilities[next + i]);
        }
        next += g.size;
        // at least one data position must remain
        g.frozen = top_indices(p, std::min<std::size_t>(frozen[k], g.size - 1));
        auto E = straggler_positions(g.size, g.frozen);
        g.position.assign(g.size, 0);
        std::vector<uint32_t> restE, restW;
        for (uint32_t i = 0; i < g.size; ++i) {
            if (!std::binary_search(E.begin(), E.end(), i)) restE.push_back(i);
            if (!g.is_frozen(i)) restW.push_back(i);
        }
        for (std::size_t i = 0; i < g.frozen.size(); ++i) g.position[g.frozen[i]] = E[i];
        for (std::size_t i = 0; i < restW.size(); ++i) g.position[restW[i]] = restE[i];
        std::size_t d = g.data_blocks();
        g.block_rows = (g.rows + d - 1) / d;
        plan.groups.push_back(std::move(g));
    }
    return plan;
}

Matrix expand(const Matrix& slice, const CodeGroup& g)
{
    if (slice.rows > g.padded_rows()) throw StructuralError("slice larger than group capacity");
    Matrix out(std::size_t(g.size) * g.block_rows, slice.cols);
    std::size_t blk = 0;
    for (uint32_t pos = 0; pos < g.size; ++pos) {
        if (g.is_frozen(pos)) continue;
        for (std::size_t r = 0; r < g.block_rows; ++r) {
            std::size_t src = blk * g.block_rows + r;
            if (src >= slice.rows) break;
            std::copy(slice.row(src), slice.row(src) + slice.cols, out.row(pos * g.block_rows + r));
        }
        ++blk;
    }
    return out;
}

Matrix hadamard(const Matrix& blocks, std::size_t nblocks)
{
    Matrix out = blocks;
    kernels::hadamard(out, nblocks);
    return out;
}

Matrix encode_group(const Matrix& full, const CodeGroup& g)
{
    return hadamard(expand(full.slice_rows(g.first_row, g.rows), g), g.size);
}

std::vector<ShardTriple> encode_epoch(const Matrix& A, const Matrix& B, const Matrix& dC, const GroupPlan& plan)
{
    if (A.rows != plan.M || !A.same_shape(B) || !A.same_shape(dC))
        throw StructuralError("encode_epoch input dimension mismatch");
    std::vector<ShardTriple> out;
    for (uint32_t gi = 0; gi < plan.groups.size(); ++gi) {
        const auto& g = plan.groups[gi];
        Matrix ea = encode_group(A, g), eb = encode_group(B, g), ec = encode_group(dC, g);
        for (uint32_t l = 0; l < g.size; ++l) {
            if (g.is_frozen(l)) continue;
            uint32_t pos = g.position[l];
            out.push_back({g.members[l], pos, gi, ea.slice_rows(pos * g.block_rows, g.block_rows),
                           eb.slice_rows(pos * g.block_rows, g.block_rows),
                           ec.slice_rows(pos * g.block_rows, g.block_rows)});
        }
    }
    return out;
}

StoredShards worker_update(const StoredShards& stored, const ShardTriple& incoming)
{
    if (!stored.w_in.same_shape(incoming.a) || !stored.w_out.same_shape(incoming.b) ||
        !stored.w_out.same_shape(incoming.dc))
        throw StructuralError("worker shard shape mismatch");
    StoredShards s = stored;
    kernels::axpy(s.w_in, incoming.a);
    kernels::axpy(s.w_out, incoming.b);
    kernels::axpy(s.w_out, incoming.dc);
    return s;
}

// ---------------------------------------------------------------------------
// Erasure decoding over the butterfly graph.
//
// Variables sit at (level, index), level 0 = expanded input, level m = coded
// output. Each butterfly ties four of them by c = a + b, d = a - b, and any two
// known values fix the other two. Peeling propagates knowns; when it stalls an
// unknown is inactivated as a free symbol and peeling resumes. Redundant
// butterflies give linear constraints that pin the symbols at the end. This is
// exact Gaussian elimination reorganised along the graph, so it succeeds
// exactly when the H submatrix has full column rank.

namespace {

struct Rat {
    __int128 n = 0, d = 1;
    static __int128 gcd(__int128 a, __int128 b)
    {
        if (a < 0) a = -a;
        if (b < 0) b = -b;
        while (b) { __int128 t = a % b; a = b; b = t; }
        return a;
    }
    Rat() = default;
    Rat(__int128 num, __int128 den = 1) : n(num), d(den)
    {
        if (d < 0) { n = -n; d = -d; }
        __int128 g = gcd(n, d);
        if (g > 1) { n /= g; d /= g; }
    }
    bool zero() const { return n == 0; }
    friend Rat operator+(Rat a, Rat b) { return Rat(a.n * b.d + b.n * a.d, a.d * b.d); }
    friend Rat operator-(Rat a, Rat b) { return Rat(a.n * b.d - b.n * a.d, a.d * b.d); }
    friend Rat operator*(Rat a, Rat b) { return Rat(a.n * b.n, a.d * b.d); }
    friend Rat operator/(Rat a, Rat b) { return Rat(a.n * b.d, a.d * b.n); }
};

using Expr = std::vector<Rat>;

enum class OpKind { zero, load, symbol, derive, check };

struct Op {
    OpKind kind;
    uint32_t target = 0;
    uint32_t p = 0, q = 0;
    int cp = 0, cq = 0, div = 1;
    uint32_t index = 0;   // received slot or symbol id
};

struct Program {
    bool ok = false;
    uint32_t n = 0, levels = 0;
    std::vector<uint32_t> recv;               // sorted received positions
    std::vector<Op> ops;
    std::vector<std::vector<Rat>> sigma;      // symbol k = sum_r sigma[k][r] * y_r
};

struct Coef { int cp, cq, div; };

// coefficients of (a, b, c, d) in terms of the chosen known pair
const int kPairs[6][2] = {{0, 1}, {2, 3}, {0, 2}, {0, 3}, {1, 2}, {1, 3}};
const Coef kForm[6][4] = {
    {{1, 0, 1}, {0, 1, 1}, {1, 1, 1}, {1, -1, 1}},
    {{1, 1, 2}, {1, -1, 2}, {1, 0, 1}, {0, 1, 1}},
    {{1, 0, 1}, {-1, 1, 1}, {0, 1, 1}, {2, -1, 1}},
    {{1, 0, 1}, {1, -1, 1}, {2, -1, 1}, {0, 1, 1}},
    {{-1, 1, 1}, {1, 0, 1}, {0, 1, 1}, {-2, 1, 1}},
    {{1, 1, 1}, {1, 0, 1}, {2, 1, 1}, {0, 1, 1}},
};

Expr combine(const Expr& p, const Expr& q, const Coef& c, std::size_t width)
{
    Expr out(width);
    for (std::size_t i = 0; i < width; ++i) {
        Rat v = Rat(c.cp) * (i < p.size() ? p[i] : Rat()) + Rat(c.cq) * (i < q.size() ? q[i] : Rat());
        out[i] = v / Rat(c.div);
    }
    return out;
}

std::shared_ptr<Program> build_program(uint32_t n, const std::vector<uint32_t>& frozen,
                                       const std::vector<uint32_t>& recv)
{
    auto prog = std::make_shared<Program>();
    prog->n = n;
    uint32_t m = 0;
    while ((1u << m) < n) ++m;
    prog->levels = m;
    prog->recv = recv;
    const std::size_t R = recv.size();
    std::size_t width = R;
    std::vector<std::optional<Expr>> ex(std::size_t(n) * (m + 1));
    auto var = [n](uint32_t l, uint32_t i) { return l * n + i; };

    for (uint32_t i : frozen) {
        ex[var(0, i)] = Expr(width);
        prog->ops.push_back({OpKind::zero, var(0, i)});
    }
    for (std::size_t r = 0; r < R; ++r) {
        uint32_t v = var(m, recv[r]);
        Expr e(width);
        e[r] = Rat(1);
        if (ex[v]) continue;   // duplicate position
        ex[v] = e;
        prog->ops.push_back({OpKind::load, v, 0, 0, 0, 0, 1, uint32_t(r)});
    }

    struct Fly { uint32_t v[4]; bool done = false; };
    std::vector<Fly> flies;
    for (uint32_t l = 0; l < m; ++l) {
        uint32_t h = 1u << l;
        for (uint32_t i = 0; i < n; ++i)
            if (!(i & h)) flies.push_back({{var(l, i), var(l, i + h), var(l + 1, i), var(l + 1, i + h)}});
    }

    std::vector<Expr> constraints;
    uint32_t nsym = 0;
    std::size_t remaining = flies.size();
    while (remaining) {
        bool progressed = false;
        for (auto& f : flies) {
            if (f.done) continue;
            int known = 0;
            for (auto v : f.v) known += ex[v].has_value();
            if (known < 2) continue;
            int pi = 0;
            for (; pi < 6; ++pi)
                if (ex[f.v[kPairs[pi][0]]] && ex[f.v[kPairs[pi][1]]]) break;
            uint32_t P = f.v[kPairs[pi][0]], Q = f.v[kPairs[pi][1]];
            Expr ep = *ex[P], eq = *ex[Q];
            for (int k = 0; k < 4; ++k) {
                uint32_t t = f.v[k];
                if (t == P || t == Q) continue;
                const Coef& c = kForm[pi][k];
                Expr d = combine(ep, eq, c, width);
                if (!ex[t]) {
                    ex[t] = std::move(d);
                    prog->ops.push_back({OpKind::derive, t, P, Q, c.cp, c.cq, c.div});
                } else {
                    Expr diff(width);
                    bool nz = false;
                    const Expr& old = *ex[t];
                    for (std::size_t i = 0; i < width; ++i) {
                        diff[i] = d[i] - (i < old.size() ? old[i] : Rat());
                        nz |= !diff[i].zero();
                    }
                    if (nz) constraints.push_back(std::move(diff));
                    prog->ops.push_back({OpKind::check, t, P, Q, c.cp, c.cq, c.div});
                }
            }
            f.done = true;
            --remaining;
            progressed = true;
        }
        if (progressed || !remaining) continue;
        // stalled: inactivate one unknown, preferring a butterfly one step from peeling
        uint32_t pick = UINT32_MAX;
        for (auto& f : flies) {
            if (f.done) continue;
            int known = 0;
            for (auto v : f.v) known += ex[v].has_value();
            if (known == 1) {
                for (auto v : f.v)
                    if (!ex[v]) { pick = v; break; }
                break;
            }
        }
        if (pick == UINT32_MAX)
            for (uint32_t i = 0; i < n && pick == UINT32_MAX; ++i)
                if (!ex[var(0, i)]) pick = var(0, i);
        ++width;
        for (auto& e : ex)
            if (e) e->resize(width);
        for (auto& c : constraints) c.resize(width);
        Expr e(width);
        e[width - 1] = Rat(1);
        ex[pick] = e;
        prog->ops.push_back({OpKind::symbol, pick, 0, 0, 0, 0, 1, nsym});
        ++nsym;
    }
    if (n == 1) {
        // single position: input equals output
        uint32_t v = 0;
        if (!ex[v]) { prog->ok = false; return prog; }
    }
    for (uint32_t i = 0; i < n; ++i)
        if (!ex[var(0, i)]) { prog->ok = false; return prog; }

    // solve constraints for the symbols: Cs s = -Cy y
    if (nsym) {
        std::vector<Expr> a = constraints;
        for (auto& row : a) row.resize(width);
        std::vector<std::size_t> pivcol;
        std::size_t rank = 0;
        for (std::size_t s = 0; s < nsym && rank < a.size(); ++s) {
            std::size_t col = R + s, piv = rank;
            while (piv < a.size() && a[piv][col].zero()) ++piv;
            if (piv == a.size()) continue;
            std::swap(a[piv], a[rank]);
            Rat inv = Rat(1) / a[rank][col];
            for (auto& x : a[rank]) x = x * inv;
            for (std::size_t r = 0; r < a.size(); ++r) {
                if (r == rank || a[r][col].zero()) continue;
                Rat f = a[r][col];
                for (std::size_t k = 0; k < width; ++k) a[r][k] = a[r][k] - f * a[rank][k];
            }
            pivcol.push_back(col);
            ++rank;
        }
        if (rank < nsym) { prog->ok = false; return prog; }
        prog->sigma.assign(nsym, std::vector<Rat>(R));
        for (std::size_t k = 0; k < rank; ++k) {
            std::size_t s = pivcol[k] - R;
            for (std::size_t r = 0; r < R; ++r) prog->sigma[s][r] = Rat(0) - a[k][r];
        }
    }
    prog->ok = true;
    return prog;
}

std::shared_ptr<Program> program_for(const CodeGroup& g, std::vector<uint32_t> recv)
{
    std::sort(recv.begin(), recv.end());
    recv.erase(std::unique(recv.begin(), recv.end()), recv.end());
    for (auto p : recv)
        if (p >= g.size) throw PreconditionError("received position outside group");
    using Key = std::tuple<uint32_t, std::vector<uint32_t>, std::vector<uint32_t>>;
    static std::mutex mu;
    static std::map<Key, std::shared_ptr<Program>> cache;
    Key key{g.size, g.frozen, recv};
    {
        std::lock_guard lk(mu);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    auto prog = build_program(g.size, g.frozen, recv);
    std::lock_guard lk(mu);
    if (cache.size() > 4096) cache.clear();
    cache.emplace(key, prog);
    return prog;
}

Matrix lin(const Matrix& p, int cp, const Matrix& q, int cq)
{
    Matrix out(p.rows, p.cols);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = cp * p.data[i] + cq * q.data[i];
    return out;
}

} // namespace

bool decodable(const std::vector<uint32_t>& received_positions, const CodeGroup& g)
{
    return program_for(g, received_positions)->ok;
}

Matrix decode(const std::map<uint32_t, Matrix>& received, const CodeGroup& g)
{
    std::vector<uint32_t> pos;
    for (auto& [p, _] : received) pos.push_back(p);
    auto prog = program_for(g, pos);
    if (!prog->ok) throw NotDecodable("received positions do not determine the data blocks");
    std::size_t cols = received.empty() ? 0 : received.begin()->second.cols;
    for (auto& [p, m] : received)
        if (m.rows != g.block_rows || m.cols != cols) throw StructuralError("received block has wrong shape");

    std::vector<const Matrix*> y;
    for (auto p : prog->recv) y.push_back(&received.at(p));
    std::vector<Matrix> sym(prog->sigma.size());
    for (std::size_t k = 0; k < prog->sigma.size(); ++k) {
        __int128 den = 1;
        for (auto& c : prog->sigma[k]) den = den / Rat::gcd(den, c.d) * c.d;
        Matrix acc(g.block_rows, cols);
        for (std::size_t r = 0; r < y.size(); ++r) {
            const Rat& c = prog->sigma[k][r];
            if (c.zero()) continue;
            __int128 f = c.n * (den / c.d);
            for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += f * y[r]->data[i];
        }
        for (auto& v : acc.data) {
            if (v % den) throw ConsistencyError("inexact division while resolving decoder symbols");
            v /= den;
        }
        sym[k] = std::move(acc);
    }

    const uint32_t n = g.size;
    std::vector<Matrix> val(std::size_t(n) * (prog->levels + 1));
    for (const auto& op : prog->ops) {
        switch (op.kind) {
        case OpKind::zero: val[op.target] = Matrix(g.block_rows, cols); break;
        case OpKind::load: val[op.target] = *y[op.index]; break;
        case OpKind::symbol: val[op.target] = sym[op.index]; break;
        case OpKind::derive: {
            Matrix t = lin(val[op.p], op.cp, val[op.q], op.cq);
            if (op.div != 1)
                for (auto& v : t.data) {
                    if (v % op.div) throw ConsistencyError("inexact butterfly division: corrupted shard");
                    v /= op.div;
                }
            val[op.target] = std::move(t);
            break;
        }
        case OpKind::check: {
            Matrix t = lin(val[op.p], op.cp, val[op.q], op.cq);
            const Matrix& have = val[op.target];
            for (std::size_t i = 0; i < t.data.size(); ++i)
                if (t.data[i] != op.div * have.data[i])
                    throw ConsistencyError("butterfly constraint violated: corrupted shard");
            break;
        }
        }
    }
    Matrix out(g.rows, cols);
    std::size_t blk = 0;
    for (uint32_t p = 0; p < n; ++p) {
        if (g.is_frozen(p)) continue;
        const Matrix& b = val[p];
        for (std::size_t r = 0; r < g.block_rows; ++r) {
            std::size_t dst = blk * g.block_rows + r;
            if (dst >= g.rows) {
                // padding rows must decode to zero
                for (std::size_t c = 0; c < cols; ++c)
                    if (b(r, c) != 0) throw ConsistencyError("nonzero padding after decode");
                continue;
            }
            std::copy(b.row(r), b.row(r) + cols, out.row(dst));
        }
        ++blk;
    }
    return out;
}

Matrix decode_all(const std::vector<std::map<uint32_t, Matrix>>& per_group, const GroupPlan& plan)
{
    if (per_group.size() != plan.groups.size()) throw StructuralError("group count mismatch");
    Matrix out;
    for (std::size_t g = 0; g < plan.groups.size(); ++g) out = vstack(out, decode(per_group[g], plan.groups[g]));
    return out;
}

} // namespace spid
