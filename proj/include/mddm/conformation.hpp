#pragma once

#include "mddm/pbc.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace mddm {

// MD inputs that generated (or are requested of) a conformation.
struct Condition {
  double k = 0.0;
  double phi = 0.0;
  double temperature = 0.0;

  bool operator==(const Condition&) const = default;
};

enum class Source : std::uint8_t { kReferenceMd = 0, kLammpsDump = 1, kSampled = 2 };

std::string to_string(Source s);
Source source_from_string(const std::string& s);

struct Provenance {
  Source source = Source::kReferenceMd;
  std::uint64_t seed = 0;
  std::int64_t timestep = 0;

  bool operator==(const Provenance&) const = default;
};

/**
 * One instant of a particle system: N x 3 wrapped coordinates in a periodic box
 * plus optional generating condition.
 */
struct Conformation {
  Points coords;
  PeriodicBox box = PeriodicBox::cubic(1.0);
  std::optional<Condition> condition;
  Provenance provenance;

  std::size_t size() const noexcept { return static_cast<std::size_t>(coords.rows()); }

  // Throws InvalidInput if coordinates are not wrapped or N < 1.
  void validate() const;
};

}  // namespace mddm
