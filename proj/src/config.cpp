#include "geoecon/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>

#include "geoecon/error.hpp"

namespace geoecon {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string env_name(const std::string& key) {
  std::string name = "GEOECON_";
  for (char c : key)
    name += (c == '.' || c == '-')
                ? '_'
                : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return name;
}

}  // namespace

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  Config cfg;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config '" + path + "' line " +
                            std::to_string(line_no) + ": expected key = value");
    cfg.kv_[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return cfg;
}

std::optional<std::string> Config::raw(const std::string& key) const {
  if (const char* env = std::getenv(env_name(key).c_str()))
    return std::string(env);
  auto it = kv_.find(key);
  if (it != kv_.end()) return it->second;
  return std::nullopt;
}

std::string Config::get_string(const std::string& key, std::string dflt) const {
  auto v = raw(key);
  return v ? *v : dflt;
}

int64_t Config::get_int(const std::string& key, int64_t dflt) const {
  auto v = raw(key);
  if (!v) return dflt;
  try {
    return std::stoll(*v);
  } catch (...) {
    throw ValidationError("config key '" + key + "': bad integer '" + *v + "'");
  }
}

double Config::get_double(const std::string& key, double dflt) const {
  auto v = raw(key);
  if (!v) return dflt;
  try {
    return std::stod(*v);
  } catch (...) {
    throw ValidationError("config key '" + key + "': bad number '" + *v + "'");
  }
}

bool Config::get_bool(const std::string& key, bool dflt) const {
  auto v = raw(key);
  if (!v) return dflt;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ValidationError("config key '" + key + "': bad boolean '" + *v + "'");
}

std::vector<int> Config::get_int_list(const std::string& key,
                                      std::vector<int> dflt) const {
  auto v = raw(key);
  if (!v) return dflt;
  std::vector<int> out;
  std::string cur;
  for (char c : *v + ",") {
    if (c == ',' || c == ';') {
      const std::string t = trim(cur);
      if (!t.empty()) {
        try {
          out.push_back(std::stoi(t));
        } catch (...) {
          throw ValidationError("config key '" + key + "': bad integer '" + t +
                                "'");
        }
      }
      cur.clear();
    } else {
      cur += c;
    }
  }
  return out;
}

std::vector<std::string> Config::get_list(const std::string& key) const {
  auto v = raw(key);
  std::vector<std::string> out;
  if (!v) return out;
  std::string cur;
  for (char c : *v + ";") {
    if (c == ';') {
      const std::string t = trim(cur);
      if (!t.empty()) out.push_back(t);
      cur.clear();
    } else {
      cur += c;
    }
  }
  return out;
}

void Config::set(const std::string& key, std::string value) {
  kv_[key] = std::move(value);
}

}  // namespace geoecon
