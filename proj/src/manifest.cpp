#include "kem/manifest.hpp"

#include <cstdio>

namespace kem {

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

nlohmann::json make_manifest(const std::string& command, const nlohmann::json& request) {
  return {{"schema", 1}, {"command", command}, {"request", request}};
}

}  // namespace kem
