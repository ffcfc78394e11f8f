#include "symscope/errors.hpp"

namespace symscope {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Validation: return "validation";
        case ErrorKind::Parse: return "parse";
        case ErrorKind::Config: return "config";
        case ErrorKind::Io: return "io";
        case ErrorKind::Network: return "network";
        case ErrorKind::Numeric: return "numeric";
    }
    return "unknown";
}

} // namespace symscope
