#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lof/metrics.hpp"
#include "lof/training.hpp"

namespace lof {

/// Flat `key = value` run configuration. Every key has a default; unknown
/// keys and malformed values are rejected with the offending key named.
class RunConfig {
 public:
  RunConfig();

  static RunConfig from_file(const std::string& path);
  static RunConfig from_string(const std::string& text);

  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;

  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;

  /// Canonical serialization (sorted keys) and its FNV-1a hash.
  std::string canonical() const;
  std::string hash() const;

  WorldConfig world() const;
  EpisodeConfig episode() const;
  TrainConfig train() const;
  JsdSpec jsd() const;

  struct KeyInfo {
    std::string name;
    std::string def;
    std::string help;
  };
  static const std::vector<KeyInfo>& key_infos();

 private:
  std::map<std::string, std::string> values_;
};

std::string fnv1a_hex(const std::string& data);

}  // namespace lof
