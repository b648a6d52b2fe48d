#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace depthbench {

enum class ErrorCode {
    // dataset-io
    NotFound,
    NotPng,
    WrongBitDepth,
    WrongChannelCount,
    IoError,
    ParseError,
    DuplicateEntry,
    // metrics
    NoValidPixels,
    DimensionMismatch,
    EmptyList,
    // losses
    ShapeMismatch,
    NonPositiveInput,
    TooSmall,
    SpatialMismatch,
    // inference
    WrongInputShape,
    InvalidGraph,
    // harness
    SpawnFailure,
    HandshakeTimeout,
    BadHandshake,
    RunnerCrashed,
    InferenceTimeout,
    RunnerError,
    // leaderboard
    NonPositiveRuntime,
    EmptyInput,
    InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Every failure in the library surfaces as an Error carrying a code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Manifest / record parse failure at a 1-based line number.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& message)
        : Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// The runner process died; whatever it wrote to stderr is kept.
class RunnerCrashed : public Error {
public:
    RunnerCrashed(const std::string& message, std::string stderr_text)
        : Error(ErrorCode::RunnerCrashed, message), stderr_(std::move(stderr_text)) {}

    const std::string& stderr_text() const noexcept { return stderr_; }

private:
    std::string stderr_;
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::NotPng: return "NotPng";
    case ErrorCode::WrongBitDepth: return "WrongBitDepth";
    case ErrorCode::WrongChannelCount: return "WrongChannelCount";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateEntry: return "DuplicateEntry";
    case ErrorCode::NoValidPixels: return "NoValidPixels";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyList: return "EmptyList";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonPositiveInput: return "NonPositiveInput";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::SpatialMismatch: return "SpatialMismatch";
    case ErrorCode::WrongInputShape: return "WrongInputShape";
    case ErrorCode::InvalidGraph: return "InvalidGraph";
    case ErrorCode::SpawnFailure: return "SpawnFailure";
    case ErrorCode::HandshakeTimeout: return "HandshakeTimeout";
    case ErrorCode::BadHandshake: return "BadHandshake";
    case ErrorCode::RunnerCrashed: return "RunnerCrashed";
    case ErrorCode::InferenceTimeout: return "InferenceTimeout";
    case ErrorCode::RunnerError: return "RunnerError";
    case ErrorCode::NonPositiveRuntime: return "NonPositiveRuntime";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

} // namespace depthbench
