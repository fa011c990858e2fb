#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hivekr::base64url {

// Unpadded base64url (RFC 4648 §5, alphabet A-Za-z0-9-_, no '=').
std::string encode(std::span<const uint8_t> data);

// Strict decoder: rejects characters outside the alphabet, padded input,
// impossible lengths (len % 4 == 1) and non-canonical trailing bits.
std::optional<std::vector<uint8_t>> decode(std::string_view text);

bool is_alphabet(char c);

}  // namespace hivekr::base64url
