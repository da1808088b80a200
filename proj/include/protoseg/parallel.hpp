#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>

namespace protoseg {

/// Worker count: explicit value, else PROTOSEG_JOBS, else logical cores.
std::size_t resolve_jobs(std::optional<std::size_t> requested = std::nullopt);

/// Runs body(i) for i in [0, n) on up to `jobs` threads. Items must be
/// independent; the first exception escaping an item is rethrown after all
/// workers have joined.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& body);

/// Stable 64-bit mixing used to derive per-item RNG seeds, so serial and
/// parallel runs draw identical streams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t value);
std::uint64_t hash_string(std::string_view text);

}  // namespace protoseg
