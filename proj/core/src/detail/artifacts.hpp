#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "eem/scenario.hpp"

namespace eem::detail {

/// Collects the files written by one scenario run.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path root);

  /// Writes `relative` under the root through `fill`, then records its hash.
  void write(const std::string& relative, const std::function<void(std::ostream&)>& fill);

  const std::filesystem::path& root() const noexcept { return root_; }
  const std::vector<Artifact>& artifacts() const noexcept { return artifacts_; }

 private:
  std::filesystem::path root_;
  std::vector<Artifact> artifacts_;
};

struct ManifestInfo {
  std::string name;
  std::string kind;
  std::uint64_t seed = 0;
  std::size_t horizon = 0;
  std::string config_json;
  bool partial = false;
  std::string error;
};

void write_manifest(const std::filesystem::path& dir, const ManifestInfo& info,
                    const std::vector<Artifact>& artifacts);

}  // namespace eem::detail
