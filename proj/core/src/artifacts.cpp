#include "detail/artifacts.hpp"

#include <array>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <Eigen/Core>
#include <json.hpp>
#include <openssl/evp.h>

#include "eem/errors.hpp"

namespace eem {

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("sha256_file: cannot open " + path.string());

  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw NumericalError("sha256_file: digest initialization failed");
  }
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    const auto got = in.gcount();
    if (got > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(got));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest.data(), &len);
  EVP_MD_CTX_free(ctx);

  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

std::string library_version() { return EEM_VERSION; }

namespace detail {

ArtifactWriter::ArtifactWriter(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_);
}

void ArtifactWriter::write(const std::string& relative,
                           const std::function<void(std::ostream&)>& fill) {
  const auto path = root_ / relative;
  std::filesystem::create_directories(path.parent_path());
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw NumericalError("cannot open artifact for writing: " + path.string());
    fill(out);
    if (!out) throw NumericalError("failed writing artifact: " + path.string());
  }
  artifacts_.push_back({relative, sha256_file(path), std::filesystem::file_size(path)});
}

void write_manifest(const std::filesystem::path& dir, const ManifestInfo& info,
                    const std::vector<Artifact>& artifacts) {
  nlohmann::ordered_json m;
  m["name"] = info.name;
  m["kind"] = info.kind;
  m["seed"] = info.seed;
  m["horizon"] = info.horizon;
  m["partial"] = info.partial;
  if (!info.error.empty()) m["error"] = info.error;
  m["versions"] = {{"eem", EEM_VERSION},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                 std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"compiler", __VERSION__}};
  m["config"] = nlohmann::ordered_json::parse(info.config_json);
  auto& files = m["files"] = nlohmann::ordered_json::array();
  for (const auto& a : artifacts) {
    files.push_back({{"path", a.path}, {"sha256", a.sha256}, {"bytes", a.bytes}});
  }
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  out << m.dump(2) << '\n';
}

}  // namespace detail
}  // namespace eem
