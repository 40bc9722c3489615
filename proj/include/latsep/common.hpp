#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace latsep {

// Error taxonomy shared by all modules. The CLI maps config_error to exit
// code 2 and numeric_error to exit code 3.
struct config_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct shape_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct data_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct degenerate_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct singularity_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline const char* code_fingerprint() {
#ifdef LATSEP_CODE_FINGERPRINT
  return LATSEP_CODE_FINGERPRINT;
#else
  return "unversioned";
#endif
}

// FNV-1a, used to fingerprint configs and extractors in reports.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

inline torch::Generator make_generator(std::uint64_t seed) {
  auto gen = at::detail::createCPUGenerator();
  gen.set_current_seed(seed);
  return gen;
}

}  // namespace latsep
