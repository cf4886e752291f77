#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace geoecon {

// "key = value" file, '#' comments. Lookup precedence: built-in default <
// config file < GEOECON_* environment variable; CLI flags override on top.
// The env name for "select.n_realisations" is GEOECON_SELECT_N_REALISATIONS.
class Config {
public:
  Config() = default;
  static Config load(const std::string& path);

  std::optional<std::string> raw(const std::string& key) const;
  std::string get_string(const std::string& key, std::string dflt) const;
  int64_t get_int(const std::string& key, int64_t dflt) const;
  double get_double(const std::string& key, double dflt) const;
  bool get_bool(const std::string& key, bool dflt) const;
  std::vector<int> get_int_list(const std::string& key,
                                std::vector<int> dflt) const;
  // entries split on ';'
  std::vector<std::string> get_list(const std::string& key) const;

  void set(const std::string& key, std::string value);

private:
  std::map<std::string, std::string> kv_;
};

}  // namespace geoecon
