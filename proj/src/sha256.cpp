#include "evbench/sha256.hpp"

#include <openssl/evp.h>

#include "evbench/error.hpp"

namespace evbench {

Digest sha256(ByteView data) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != out.size()) {
    throw Error(Errc::IoError, "EVP_Digest(sha256) failed");
  }
  return out;
}

std::string digest_hex(const Digest& d) { return to_hex(d); }

std::string sha256_hex(ByteView data) { return digest_hex(sha256(data)); }

}  // namespace evbench
