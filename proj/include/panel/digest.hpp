#pragma once

#include <string>
#include <string_view>

namespace panel {

// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

// Digest over a sequence of fields; each field is length-prefixed so that
// ("ab", "c") and ("a", "bc") hash differently.
class FieldHasher {
 public:
  FieldHasher& add(std::string_view field);
  FieldHasher& add(long long value);
  FieldHasher& add(double value);
  std::string hex() const { return sha256_hex(buffer_); }

 private:
  std::string buffer_;
};

}  // namespace panel
