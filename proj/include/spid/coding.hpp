// Hadamard-coded distribution of the balance computation with erasure decoding.
#pragma once

#include "spid/core.hpp"

#include <map>
#include <memory>

namespace spid {

struct StragglerProfile {
    std::vector<double> probabilities;   // p_k per worker
    double lambda = 0;                   // mean of p_k
    std::vector<uint32_t> straggler_set; // round(lambda*n) highest p_k, ties to lowest index

    static StragglerProfile from_probabilities(std::vector<double> p);
};

// Indices of the `count` largest values, ties to lowest index, returned sorted.
std::vector<uint32_t> top_indices(const std::vector<double>& p, std::size_t count);

struct CodeGroup {
    uint32_t size = 0;                  // n_k, power of two
    std::size_t rows = 0;               // M_k
    std::size_t first_row = 0;          // offset of this slice in the M rows
    std::vector<uint32_t> members;      // global worker ids, index order
    std::vector<uint32_t> frozen;       // S_k as local indices, sorted
    std::vector<uint32_t> position;     // local worker -> coded row-block index
    std::size_t block_rows = 0;         // rows per coded block
    std::size_t data_blocks() const { return size - frozen.size(); }
    std::size_t padded_rows() const { return block_rows * data_blocks(); }
    bool is_frozen(uint32_t local) const;
    int local_of(uint32_t worker) const;
};

struct GroupPlan {
    uint32_t n = 0;
    std::size_t M = 0;
    double lambda = 0;
    std::vector<CodeGroup> groups;
    // group index and local index of a global worker
    std::pair<int, int> locate(uint32_t worker) const;
};

GroupPlan plan_groups(uint32_t n, std::size_t M, const StragglerProfile& profile);

// Largest-remainder split of `total` over quotas; ties to the earlier slot.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& quota);

// Binary decomposition of n, largest first.
std::vector<uint32_t> group_sizes(uint32_t n);

// M_k x cols slice -> (size * block_rows) x cols, zero blocks at frozen positions.
Matrix expand(const Matrix& slice, const CodeGroup& g);

// In-place unnormalised Sylvester transform over n row blocks.
Matrix hadamard(const Matrix& blocks, std::size_t nblocks);

enum class ShardKind { a, b, dc, w_in, w_out };

struct CodedShard {
    uint32_t worker_index = 0;
    uint32_t position = 0;
    uint32_t group = 0;
    ShardKind kind = ShardKind::a;
    uint64_t epoch = 0;
    Matrix rows;
};

struct ShardTriple {
    uint32_t worker_index = 0;
    uint32_t position = 0;
    uint32_t group = 0;
    Matrix a, b, dc;
};

struct StoredShards {
    Matrix w_in, w_out;
};

// Full coded matrix of one group, all positions.
Matrix encode_group(const Matrix& full, const CodeGroup& g);

// Only workers outside S_k receive a triple.
std::vector<ShardTriple> encode_epoch(const Matrix& A, const Matrix& B, const Matrix& dC, const GroupPlan& plan);

// w_in += a; w_out += b + dc
StoredShards worker_update(const StoredShards& stored, const ShardTriple& incoming);

// received_positions are coded row-block indices within the group.
bool decodable(const std::vector<uint32_t>& received_positions, const CodeGroup& g);

// position -> coded block. Throws NotDecodable or ConsistencyError.
Matrix decode(const std::map<uint32_t, Matrix>& received, const CodeGroup& g);

// Reassemble an M x cols matrix from per-group received blocks.
Matrix decode_all(const std::vector<std::map<uint32_t, Matrix>>& per_group, const GroupPlan& plan);

} // namespace spid
