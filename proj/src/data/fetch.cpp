#include "lrnet/data/fetch.hpp"

#include <curl/curl.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>

#include <json.hpp>

#include "lrnet/core/error.hpp"

#ifndef LRNET_DEFAULT_MANIFEST
#define LRNET_DEFAULT_MANIFEST "data/manifest.json"
#endif

namespace lrnet::data {

namespace fs = std::filesystem;

const std::vector<ManifestFile>& Manifest::files(const std::string& dataset) const {
  auto it = datasets.find(dataset);
  if (it == datasets.end()) {
    std::string known;
    for (const auto& n : names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown dataset '" + dataset + "' (known: " + known + ")");
  }
  return it->second;
}

const ManifestFile& Manifest::file(const std::string& dataset, const std::string& role) const {
  for (const auto& f : files(dataset)) {
    if (f.role == role) return f;
  }
  throw ConfigError("manifest entry for " + dataset + " has no " + role + " file");
}

std::vector<std::string> Manifest::names() const {
  std::vector<std::string> out;
  for (const auto& [name, files] : datasets) out.push_back(name);
  return out;
}

Manifest parse_manifest(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("manifest must be a JSON object");
  Manifest m;
  for (const auto& [name, entries] : doc.items()) {
    if (!entries.is_array()) throw ConfigError("manifest entry '" + name + "' must be a list");
    auto& files = m.datasets[name];
    for (const auto& e : entries) {
      try {
        ManifestFile f;
        f.filename = e.at("filename").get<std::string>();
        f.url = e.at("url").get<std::string>();
        f.sha256 = e.value("sha256", "");
        f.role = e.at("role").get<std::string>();
        files.push_back(std::move(f));
      } catch (const nlohmann::json::exception& ex) {
        throw ConfigError("manifest entry in '" + name + "' is malformed: " + ex.what());
      }
    }
  }
  return m;
}

Manifest load_manifest(const std::string& path) {
  const Bytes raw = read_file(path);
  return parse_manifest(std::string(raw.begin(), raw.end()));
}

std::string default_manifest_path() { return LRNET_DEFAULT_MANIFEST; }

std::string default_cache_dir() {
  if (const char* env = std::getenv("LRNET_CACHE"); env != nullptr && *env != '\0') return env;
  if (const char* home = std::getenv("HOME"); home != nullptr && *home != '\0') {
    return (fs::path(home) / ".cache" / "lrnet").string();
  }
  return ".lrnet-cache";
}

namespace {

std::size_t write_body(char* ptr, std::size_t size, std::size_t nmemb, void* userdata) {
  auto* out = static_cast<Bytes*>(userdata);
  out->insert(out->end(), reinterpret_cast<std::uint8_t*>(ptr), reinterpret_cast<std::uint8_t*>(ptr) + size * nmemb);
  return size * nmemb;
}

void curl_global() {
  static std::once_flag once;
  std::call_once(once, [] { curl_global_init(CURL_GLOBAL_DEFAULT); });
}

std::string pin_path(const std::string& cached) { return cached + ".sha256"; }

std::string apply_location(const ManifestFile& f, const FetchOptions& options) {
  auto it = options.url_overrides.find(f.filename);
  if (it != options.url_overrides.end()) return it->second;
  if (!options.mirror.empty()) {
    std::string base = options.mirror;
    if (base.back() != '/') base += '/';
    return base + f.filename;
  }
  return f.url;
}

/// Decompressed IDX bytes of a downloaded or cached blob.
Bytes unwrap(std::span<const std::uint8_t> blob) {
  return is_gzip(blob) ? gzip_decompress(blob) : Bytes(blob.begin(), blob.end());
}

/// Digest the file must match: the manifest pin, else the recorded one.
std::string expected_digest(const std::string& cached, const ManifestFile& f) {
  if (!f.sha256.empty()) return f.sha256;
  if (fs::exists(pin_path(cached))) {
    const Bytes pin = read_file(pin_path(cached));
    std::string s(pin.begin(), pin.end());
    while (!s.empty() && (s.back() == '\n' || s.back() == ' ')) s.pop_back();
    return s;
  }
  return {};
}

}  // namespace

Bytes CurlTransport::get(const std::string& url) {
  curl_global();
  std::unique_ptr<CURL, decltype(&curl_easy_cleanup)> curl(curl_easy_init(), curl_easy_cleanup);
  if (!curl) throw FetchError("curl_easy_init failed");
  Bytes body;
  char err[CURL_ERROR_SIZE] = {0};
  curl_easy_setopt(curl.get(), CURLOPT_URL, url.c_str());
  curl_easy_setopt(curl.get(), CURLOPT_FOLLOWLOCATION, 1L);
  curl_easy_setopt(curl.get(), CURLOPT_FAILONERROR, 1L);
  curl_easy_setopt(curl.get(), CURLOPT_CONNECTTIMEOUT, 30L);
  curl_easy_setopt(curl.get(), CURLOPT_WRITEFUNCTION, write_body);
  curl_easy_setopt(curl.get(), CURLOPT_WRITEDATA, &body);
  curl_easy_setopt(curl.get(), CURLOPT_ERRORBUFFER, err);
  const CURLcode rc = curl_easy_perform(curl.get());
  if (rc != CURLE_OK) {
    throw FetchError("download of " + url + " failed: " + (err[0] ? std::string(err) : curl_easy_strerror(rc)));
  }
  return body;
}

std::string cached_path(const std::string& cache_dir, const std::string& dataset, const std::string& filename) {
  std::string name = filename;
  if (name.size() < 3 || name.compare(name.size() - 3, 3, ".gz") != 0) name += ".gz";
  return (fs::path(cache_dir) / dataset / name).string();
}

Bytes read_verified(const std::string& cache_dir, const std::string& dataset, const ManifestFile& f) {
  const std::string path = cached_path(cache_dir, dataset, f.filename);
  if (!fs::exists(path)) {
    throw DataError(f.filename + " is not cached at " + path + "; run `lrnet fetch --dataset " + dataset + "`");
  }
  const Bytes blob = read_file(path);
  Bytes idx;
  try {
    idx = unwrap(blob);
  } catch (const FormatError& e) {
    throw IntegrityError("cached file " + path + " is corrupt: " + e.what());
  }
  const std::string want = expected_digest(path, f);
  const std::string got = sha256_hex(idx);
  if (!want.empty() && got != want) {
    throw IntegrityError("cached file " + path + " has sha256 " + got + ", expected " + want);
  }
  return idx;
}

FetchReport fetch(const std::string& dataset, const Manifest& manifest, const FetchOptions& options,
                  Transport& transport) {
  const auto& entries = manifest.files(dataset);
  const std::string cache = options.cache_dir.empty() ? default_cache_dir() : options.cache_dir;
  FetchReport report;
  report.dataset = dataset;

  struct Pending {
    std::size_t slot;
    Bytes gz;
    bool record_pin;
  };
  std::vector<Pending> pending;

  for (const auto& f : entries) {
    FetchedFile out;
    out.filename = f.filename;
    out.path = cached_path(cache, dataset, f.filename);
    out.pinned = !f.sha256.empty();
    if (fs::exists(out.path)) {
      out.sha256 = sha256_hex(read_verified(cache, dataset, f));
      report.files.push_back(out);
      continue;
    }
    const std::string url = apply_location(f, options);
    ++report.network_requests;
    Bytes blob = transport.get(url);
    Bytes idx;
    try {
      idx = unwrap(blob);
      parse_idx(idx);
    } catch (const FormatError& e) {
      throw IntegrityError("downloaded " + f.filename + " from " + url + " is not a valid IDX file: " + e.what());
    }
    out.sha256 = sha256_hex(idx);
    if (!f.sha256.empty() && out.sha256 != f.sha256) {
      throw IntegrityError("downloaded " + f.filename + " has sha256 " + out.sha256 + ", expected " + f.sha256);
    }
    out.downloaded = true;
    pending.push_back({report.files.size(), is_gzip(blob) ? std::move(blob) : gzip_compress(idx), f.sha256.empty()});
    report.files.push_back(out);
  }

  for (auto& p : pending) {
    const auto& out = report.files[p.slot];
    if (p.record_pin) {
      const std::string line = out.sha256 + "\n";
      write_file_atomic(pin_path(out.path), std::span(reinterpret_cast<const std::uint8_t*>(line.data()), line.size()));
      std::cerr << "warning: " << out.filename << " has no pinned digest; recorded sha256 " << out.sha256 << "\n";
    }
    write_file_atomic(out.path, p.gz);
  }
  return report;
}

}  // namespace lrnet::data
