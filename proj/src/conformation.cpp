#include "mddm/conformation.hpp"

#include "mddm/errors.hpp"

#include <cmath>

namespace mddm {

std::string to_string(Source s) {
  switch (s) {
    case Source::kReferenceMd: return "reference-md";
    case Source::kLammpsDump: return "lammps-dump";
    case Source::kSampled: return "sampled";
  }
  throw InvalidArgument("unknown source tag");
}

Source source_from_string(const std::string& s) {
  if (s == "reference-md") return Source::kReferenceMd;
  if (s == "lammps-dump") return Source::kLammpsDump;
  if (s == "sampled") return Source::kSampled;
  throw InvalidArgument("unknown source tag '" + s + "'");
}

void Conformation::validate() const {
  if (coords.rows() < 1) throw InvalidInput("conformation has no particles");
  if (static_cast<std::size_t>(coords.cols()) != box.dims()) {
    throw InvalidInput("coordinate dimension does not match box");
  }
  require_wrapped(coords, box);
  if (condition) {
    if (!std::isfinite(condition->k) || !std::isfinite(condition->phi) ||
        !std::isfinite(condition->temperature)) {
      throw InvalidInput("non-finite condition");
    }
  }
}

}  // namespace mddm
