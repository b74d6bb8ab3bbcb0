#include "anchorloc/errors.h"

#include <sstream>

namespace anchorloc {

FormatError::FormatError(const std::string& what, std::uint64_t offset)
    : Error(what + " (at offset " + std::to_string(offset) + ")"),
      offset_(offset) {}

namespace {

std::string MissingMessage(const std::vector<std::int64_t>& ids) {
  std::ostringstream os;
  os << "missing ground truth for frame ids:";
  for (const auto id : ids) os << ' ' << id;
  return os.str();
}

}  // namespace

MissingGroundTruth::MissingGroundTruth(std::vector<std::int64_t> missing_ids)
    : Error(MissingMessage(missing_ids)), missing_ids_(std::move(missing_ids)) {}

StageError::StageError(std::string stage, const std::string& cause)
    : Error("stage '" + stage + "' failed: " + cause), stage_(std::move(stage)) {}

}  // namespace anchorloc
