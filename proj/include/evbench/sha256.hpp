#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "evbench/bytes.hpp"

namespace evbench {

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(ByteView data);
std::string sha256_hex(ByteView data);
std::string digest_hex(const Digest& d);

}  // namespace evbench
