#pragma once

#include <cstdint>
#include <initializer_list>

namespace weic {

// splitmix64 finalizer; used to derive independent stream seeds from a base.
std::uint64_t mix_seed(std::uint64_t x);

// Folds the components into one seed. Order matters.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts);

}  // namespace weic
