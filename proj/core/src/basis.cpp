#include "subrad/basis.hpp"

#include <bit>
#include <string>

#include "subrad/errors.hpp"
#include "subrad/types.hpp"

namespace subrad {

BasisPartition::BasisPartition(int n_atoms, bool by_excitation)
    : n_atoms_(n_atoms), by_excitation_(by_excitation) {
    if (n_atoms < 1) throw DomainError("basis needs at least one atom");
    if (n_atoms > kDenseAtomCap)
        throw CapacityError("dense backends support at most " + std::to_string(kDenseAtomCap) +
                            " atoms, got " + std::to_string(n_atoms));
    const std::uint32_t dim = 1u << n_atoms;
    groups_.resize(by_excitation ? n_atoms + 1 : 1);
    group_of_.resize(dim);
    local_.resize(dim);
    for (std::uint32_t s = 0; s < dim; ++s) {
        const int g = by_excitation ? std::popcount(s) : 0;
        group_of_[s] = g;
        local_[s] = static_cast<int>(groups_[g].size());
        groups_[g].push_back(s);
    }
}

std::shared_ptr<const BasisPartition> BasisPartition::by_excitation(int n_atoms) {
    return std::shared_ptr<const BasisPartition>(new BasisPartition(n_atoms, true));
}

std::shared_ptr<const BasisPartition> BasisPartition::whole(int n_atoms) {
    return std::shared_ptr<const BasisPartition>(new BasisPartition(n_atoms, false));
}

int BasisPartition::upper(int g) const {
    if (!by_excitation_) return 0;
    return g < n_atoms_ ? g + 1 : -1;
}

int BasisPartition::lower(int g) const {
    if (!by_excitation_) return 0;
    return g > 0 ? g - 1 : -1;
}

} // namespace subrad
