#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "fuzzyjoin/data_pipeline.hpp"

namespace fuzzyjoin::testing {

struct SyntheticPeopleConfig {
  std::size_t identities = 1000;
  std::uint64_t seed = 1;
  double three_part_share = 0.5;
  /// Character-noised copies of randomly chosen forms added per identity.
  std::size_t noisy_forms = 2;
  std::size_t first_name_pool = 300;
  std::size_t last_name_pool = 20000;
};

/// One random edit (substitute, delete, insert or swap) at a letter.
std::string add_char_noise(std::string_view name, std::mt19937_64& rng);

/// Person entities built from syllable-generated names, expanded by
/// augment_person and extended with noisy copies. Identity ids are dense.
std::vector<EntityRecord> synthetic_people(const SyntheticPeopleConfig& cfg);

}  // namespace fuzzyjoin::testing
