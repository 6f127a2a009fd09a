#include "panel/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <memory>

#include "panel/error.hpp"

namespace panel {

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(),
                 nullptr) != 1) {
    throw Error(ErrorCode::kIo, "sha256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0x0f]);
  }
  return out;
}

FieldHasher& FieldHasher::add(std::string_view field) {
  buffer_ += std::to_string(field.size());
  buffer_ += ':';
  buffer_ += field;
  buffer_ += ';';
  return *this;
}

FieldHasher& FieldHasher::add(long long value) {
  return add(std::to_string(value));
}

FieldHasher& FieldHasher::add(double value) {
  // %.17g round-trips every double.
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return add(std::string_view(buf));
}

}  // namespace panel
