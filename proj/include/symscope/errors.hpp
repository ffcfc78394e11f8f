#pragma once

#include <stdexcept>
#include <string>

namespace symscope {

// Error taxonomy for the toolkit. Every failure surfaces as one of these;
// the CLI maps them to exit code 1 with a structured log line.
enum class ErrorKind {
    Validation,   // bad input data (malformed line, out-of-range score, ...)
    Parse,        // model reply not salvageable by the documented repairs
    Config,       // missing API key, bad flag combination
    Io,           // filesystem failure
    Network,      // transport failure after retries
    Numeric,      // undefined statistic, non-convergence, rank deficiency
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline Error validation_error(std::string msg) { return Error(ErrorKind::Validation, std::move(msg)); }
inline Error parse_error(std::string msg) { return Error(ErrorKind::Parse, std::move(msg)); }
inline Error config_error(std::string msg) { return Error(ErrorKind::Config, std::move(msg)); }
inline Error io_error(std::string msg) { return Error(ErrorKind::Io, std::move(msg)); }
inline Error network_error(std::string msg) { return Error(ErrorKind::Network, std::move(msg)); }
inline Error numeric_error(std::string msg) { return Error(ErrorKind::Numeric, std::move(msg)); }

const char* to_string(ErrorKind kind);

} // namespace symscope
