#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stylo {

// Machine-readable failure categories. Every exception thrown by the library
// carries one of these so the CLI can map it onto an exit code and an error
// file without parsing messages.
enum class ErrorCode {
  // annotation
  MalformedLine,
  BadHeadIndex,
  MissingDocId,
  // corpus
  EmptyClass,
  BadManifest,
  // features
  EmptyVocabulary,
  BadFeatureName,
  // model
  AllZero,
  ShapeMismatch,
  BadLabel,
  VocabularyMismatch,
  CorruptModel,
  BadConfig,
  // explain
  FoldMismatch,
  // eval
  TooFewGroups,
  EmptyConfusion,
  MissingClass,
  // io
  IoError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedLine:
      return "MalformedLine";
    case ErrorCode::BadHeadIndex:
      return "BadHeadIndex";
    case ErrorCode::MissingDocId:
      return "MissingDocId";
    case ErrorCode::EmptyClass:
      return "EmptyClass";
    case ErrorCode::BadManifest:
      return "BadManifest";
    case ErrorCode::EmptyVocabulary:
      return "EmptyVocabulary";
    case ErrorCode::BadFeatureName:
      return "BadFeatureName";
    case ErrorCode::AllZero:
      return "AllZero";
    case ErrorCode::ShapeMismatch:
      return "ShapeMismatch";
    case ErrorCode::BadLabel:
      return "BadLabel";
    case ErrorCode::VocabularyMismatch:
      return "VocabularyMismatch";
    case ErrorCode::CorruptModel:
      return "CorruptModel";
    case ErrorCode::BadConfig:
      return "BadConfig";
    case ErrorCode::FoldMismatch:
      return "FoldMismatch";
    case ErrorCode::TooFewGroups:
      return "TooFewGroups";
    case ErrorCode::EmptyConfusion:
      return "EmptyConfusion";
    case ErrorCode::MissingClass:
      return "MissingClass";
    case ErrorCode::IoError:
      return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

// Input-side failures (exit code 2) versus everything else (exit code 3).
inline bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::AllZero:
    case ErrorCode::EmptyConfusion:
      return false;
    default:
      return true;
  }
}

}  // namespace stylo
