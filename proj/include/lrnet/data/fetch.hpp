#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "lrnet/data/idx.hpp"

namespace lrnet::data {

/// One downloadable file. `sha256` is the digest of the decompressed IDX
/// bytes; empty means "not pinned" and the first verified download is
/// recorded in the cache instead.
struct ManifestFile {
  std::string filename;
  std::string url;
  std::string sha256;
  std::string role;  // train_images, train_labels, test_images, test_labels
};

struct Manifest {
  std::map<std::string, std::vector<ManifestFile>> datasets;

  /// Throws ConfigError for an unknown dataset.
  const std::vector<ManifestFile>& files(const std::string& dataset) const;
  const ManifestFile& file(const std::string& dataset, const std::string& role) const;
  std::vector<std::string> names() const;
};

/// Reads {"<dataset>": [{"filename","url","sha256","role"}, ...]}.
/// Throws ConfigError on malformed documents, IOError if unreadable.
Manifest load_manifest(const std::string& path);
Manifest parse_manifest(const std::string& json_text);

/// Path of the manifest shipped with the source tree.
std::string default_manifest_path();

/// `$LRNET_CACHE`, else `$HOME/.cache/lrnet`.
std::string default_cache_dir();

class Transport {
 public:
  virtual ~Transport() = default;
  /// Returns the body of `url`. Throws FetchError.
  virtual Bytes get(const std::string& url) = 0;
};

/// libcurl-backed transport (http, https, file).
class CurlTransport : public Transport {
 public:
  Bytes get(const std::string& url) override;
};

struct FetchOptions {
  std::string cache_dir;
  /// Replaces the directory part of every URL, keeping the filename.
  std::string mirror;
  /// filename -> url, applied after `mirror`.
  std::map<std::string, std::string> url_overrides;
};

struct FetchedFile {
  std::string filename;
  std::string path;
  std::string sha256;
  bool downloaded = false;
  bool pinned = false;
};

struct FetchReport {
  std::string dataset;
  std::vector<FetchedFile> files;
  std::size_t network_requests = 0;
  bool all_cached() const { return network_requests == 0; }
};

/// Cache location of a dataset file: <cache>/<dataset>/<filename>.
std::string cached_path(const std::string& cache_dir, const std::string& dataset, const std::string& filename);

/// Ensures every file of `dataset` is cached (gzip) and verified. Cached
/// files are verified without network I/O; a bad cached file raises
/// IntegrityError naming it. Downloads are all verified before anything is
/// written, so a FetchError or IntegrityError leaves the cache untouched.
FetchReport fetch(const std::string& dataset, const Manifest& manifest, const FetchOptions& options,
                  Transport& transport);

/// Verifies one cached file and returns its decompressed IDX bytes.
/// Throws IntegrityError, FormatError, or DataError if the file is absent.
Bytes read_verified(const std::string& cache_dir, const std::string& dataset, const ManifestFile& file);

}  // namespace lrnet::data
