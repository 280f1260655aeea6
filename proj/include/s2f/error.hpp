#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace s2f {

enum class ErrorCode {
  ParseError,
  DuplicateSample,
  MissingFile,
  IncompleteSubject,
  InsufficientSubjects,
  InvalidArgument,
  UnsupportedFormat,
  CorruptImage,
  DimMismatch,
  DuplicateKey,
  NonFinite,
  WrongDomain,
  UnresolvedSample,
  BadVersion,
  Corrupt,
  DuplicateGalleryId,
  IdCollision,
  MissingQuery,
  EmptyRelevant,
  Diverged,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateSample: return "DuplicateSample";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::IncompleteSubject: return "IncompleteSubject";
    case ErrorCode::InsufficientSubjects: return "InsufficientSubjects";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::CorruptImage: return "CorruptImage";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::DuplicateKey: return "DuplicateKey";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::WrongDomain: return "WrongDomain";
    case ErrorCode::UnresolvedSample: return "UnresolvedSample";
    case ErrorCode::BadVersion: return "BadVersion";
    case ErrorCode::Corrupt: return "Corrupt";
    case ErrorCode::DuplicateGalleryId: return "DuplicateGalleryId";
    case ErrorCode::IdCollision: return "IdCollision";
    case ErrorCode::MissingQuery: return "MissingQuery";
    case ErrorCode::EmptyRelevant: return "EmptyRelevant";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace s2f
