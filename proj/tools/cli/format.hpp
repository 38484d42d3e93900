#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace drest::cli {

// Shortest decimal string that reads back to the same double.
std::string format_double(double value);

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

// "fnv1a64:" followed by 16 lowercase hex digits.
std::string hash_label(std::string_view bytes);

}  // namespace drest::cli
