// Run manifests and artifact checksums.
#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "json.hpp"

namespace kem {

// 64-bit FNV-1a
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);

// {schema, command, request}; `request` holds every parameter after defaults
nlohmann::json make_manifest(const std::string& command, const nlohmann::json& request);

}  // namespace kem
