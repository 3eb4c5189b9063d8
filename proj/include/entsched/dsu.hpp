#pragma once

#include <cstddef>
#include <numeric>
#include <vector>

namespace entsched {

/// Disjoint-set forest with union by size and path compression.
/// Tracks component sizes and the current maximum component size.
class DisjointSet {
public:
    explicit DisjointSet(std::size_t n) : parent_(n), size_(n, 1), max_size_(n > 0 ? 1 : 0) {
        std::iota(parent_.begin(), parent_.end(), 0);
    }

    std::size_t find(std::size_t x) const {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]]; // halving
            x = parent_[x];
        }
        return x;
    }

    /// Returns true if a merge happened.
    bool unite(std::size_t a, std::size_t b) {
        std::size_t ra = find(a);
        std::size_t rb = find(b);
        if (ra == rb)
            return false;
        if (size_[ra] < size_[rb])
            std::swap(ra, rb);
        parent_[rb] = ra;
        size_[ra] += size_[rb];
        if (size_[ra] > max_size_)
            max_size_ = size_[ra];
        return true;
    }

    bool connected(std::size_t a, std::size_t b) const { return find(a) == find(b); }

    std::size_t component_size(std::size_t x) const { return size_[find(x)]; }

    std::size_t max_component_size() const { return max_size_; }

    std::size_t count() const { return parent_.size(); }

    /// Members of the largest component; ties resolved toward the
    /// component containing the lowest index.
    std::vector<std::size_t> largest_component_members() const {
        std::size_t best_root = 0;
        bool found = false;
        for (std::size_t i = 0; i < parent_.size(); ++i) {
            std::size_t r = find(i);
            if (!found || size_[r] > size_[best_root]) {
                best_root = r;
                found = true;
                if (size_[r] == max_size_)
                    break; // first component of maximal size wins ties
            }
        }
        std::vector<std::size_t> members;
        if (!found)
            return members;
        members.reserve(size_[best_root]);
        for (std::size_t i = 0; i < parent_.size(); ++i)
            if (find(i) == best_root)
                members.push_back(i);
        return members;
    }

private:
    mutable std::vector<std::size_t> parent_;
    std::vector<std::size_t> size_;
    std::size_t max_size_;
};

} // namespace entsched
