#pragma once

#include <cstddef>
#include <map>
#include <string_view>

#include "bucketwatch/types.hpp"

namespace bucketwatch {

// Reference statistics for one stream, from golden runs.
struct BaselineStats {
  double mu = 0.0;
  double sigma = 0.0;
  std::size_t n = 0;

  // Throws Error(InvalidArgument) unless sigma > 0, n >= 2 and both
  // moments are finite.
  void validate() const;

  bool operator==(const BaselineStats&) const = default;
};

enum class SplitTag { Profile, Validation };

std::string_view to_string(SplitTag tag) noexcept;
SplitTag split_tag_from_string(std::string_view s);

struct BaselineProfile {
  std::map<StreamKey, BaselineStats> entries;
  SplitTag split_tag = SplitTag::Profile;

  const BaselineStats* find(const StreamKey& key) const {
    auto it = entries.find(key);
    return it == entries.end() ? nullptr : &it->second;
  }

  bool operator==(const BaselineProfile&) const = default;
};

}  // namespace bucketwatch
