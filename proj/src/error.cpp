#include "mirage/error.hpp"

namespace mirage {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::shape: return "shape";
        case ErrorKind::bounds: return "bounds";
        case ErrorKind::validation: return "validation";
        case ErrorKind::phase: return "phase";
        case ErrorKind::state: return "state";
        case ErrorKind::parse: return "parse";
        case ErrorKind::grammar: return "grammar";
        case ErrorKind::resolver: return "resolver";
        case ErrorKind::schema: return "schema";
        case ErrorKind::budget: return "budget";
        case ErrorKind::service: return "service";
    }
    return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message, std::string stage)
    : std::runtime_error(message), kind_(kind), stage_(std::move(stage)) {}

ClientError::ClientError(ErrorKind kind, const std::string& message, std::string last_output, int attempts)
    : Error(kind, message), last_output_(std::move(last_output)), attempts_(attempts) {}

int exit_code_for(const Error& error) {
    return error.kind() == ErrorKind::service ? kExitService : kExitValidation;
}

}  // namespace mirage
