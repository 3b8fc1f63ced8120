#pragma once

#include <stdexcept>
#include <string>

namespace vqacoin {

/// Error taxonomy shared by the whole library. The CLI maps kinds to exit
/// codes: config -> 2, data -> 3, numeric -> 4, everything else -> 1.
enum class ErrorKind {
  config,      // bad hyperparameter / config file / flag value
  data,        // dataset file missing, malformed, or inconsistent
  dimension,   // tensor shape mismatch
  vocabulary,  // token id out of range
  numeric,     // NaN/Inf produced, or numeric abort during training
  contract,    // API precondition violated
  mask,        // degenerate mask (no live positions)
  io,          // filesystem failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error config_error(const std::string& msg) { return Error(ErrorKind::config, msg); }
inline Error data_error(const std::string& msg) { return Error(ErrorKind::data, msg); }
inline Error dimension_error(const std::string& msg) { return Error(ErrorKind::dimension, msg); }
inline Error vocabulary_error(const std::string& msg) { return Error(ErrorKind::vocabulary, msg); }
inline Error numeric_error(const std::string& msg) { return Error(ErrorKind::numeric, msg); }
inline Error contract_error(const std::string& msg) { return Error(ErrorKind::contract, msg); }
inline Error mask_error(const std::string& msg) { return Error(ErrorKind::mask, msg); }
inline Error io_error(const std::string& msg) { return Error(ErrorKind::io, msg); }

}  // namespace vqacoin
