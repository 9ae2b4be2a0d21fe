#pragma once

#include <stdexcept>
#include <string>

namespace mirage {

enum class ErrorKind {
    shape,
    bounds,
    validation,
    phase,
    state,
    parse,
    grammar,
    resolver,
    schema,
    budget,
    service,
};

const char* to_string(ErrorKind kind);

/// Base exception for every failure raised by the engine. `stage` names the
/// pipeline stage ("parse", "detect", "inference", ...) when one applies.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message, std::string stage = {});

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& stage() const noexcept { return stage_; }
    void set_stage(std::string stage) { stage_ = std::move(stage); }

private:
    ErrorKind kind_;
    std::string stage_;
};

/// Structured-output failure that survived every retry; carries the last
/// raw model reply so callers can surface it.
class ClientError : public Error {
public:
    ClientError(ErrorKind kind, const std::string& message, std::string last_output, int attempts);

    const std::string& last_output() const noexcept { return last_output_; }
    int attempts() const noexcept { return attempts_; }

private:
    std::string last_output_;
    int attempts_;
};

// Process exit codes shared by every CLI command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitService = 3;
inline constexpr int kExitPartial = 4;

int exit_code_for(const Error& error);

}  // namespace mirage
