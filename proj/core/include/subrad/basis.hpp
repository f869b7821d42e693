#pragma once

#include <cstdint>
#include <memory>
#include <vector>

namespace subrad {

/// Product basis over N two-level atoms. Basis index bit n is atom n
/// (atom 0 least significant); a set bit means the atom is excited.
///
/// A partition groups basis states either by excitation number (group k
/// holds the states with k excitations, in increasing index order) or into
/// a single group spanning the whole space. The undriven generator never
/// mixes excitation numbers, so the first form lets density matrices be
/// stored as blocks; driven dynamics use the second.
class BasisPartition {
public:
    static std::shared_ptr<const BasisPartition> by_excitation(int n_atoms);
    static std::shared_ptr<const BasisPartition> whole(int n_atoms);

    int n_atoms() const { return n_atoms_; }
    std::size_t dimension() const { return std::size_t{1} << n_atoms_; }
    bool is_by_excitation() const { return by_excitation_; }
    int group_count() const { return static_cast<int>(groups_.size()); }
    const std::vector<std::uint32_t>& group(int g) const { return groups_[g]; }
    int group_size(int g) const { return static_cast<int>(groups_[g].size()); }
    int group_of(std::uint32_t state) const { return group_of_[state]; }
    int local_index(std::uint32_t state) const { return local_[state]; }

    // Group holding the states reached by adding one excitation (-1 if none).
    int upper(int g) const;
    // Group holding the states reached by removing one excitation (-1 if none).
    int lower(int g) const;

private:
    BasisPartition(int n_atoms, bool by_excitation);

    int n_atoms_;
    bool by_excitation_;
    std::vector<std::vector<std::uint32_t>> groups_;
    std::vector<int> group_of_;
    std::vector<int> local_;
};

inline bool excited(std::uint32_t state, int atom) { return (state >> atom) & 1u; }

} // namespace subrad
