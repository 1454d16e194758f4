#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace evbench {

enum class Errc {
  // pe_model
  NotPe,
  Truncated,
  Malformed,
  InconsistentLayout,
  UnmappedRva,
  // mutations
  NoSections,
  NoHeaderSlack,
  NoSlack,
  NoImportDirectory,
  NoRoom,
  AllActionsInapplicable,
  // occlusion
  RangeOutOfBounds,
  FileTooSmall,
  DetectorFailure,
  // detectors
  AdapterTimeout,
  AdapterProtocolError,
  AdapterCrashed,
  DegenerateCorpus,
  BadMagic,
  VersionMismatch,
  Corrupt,
  // corpus
  MissingRoot,
  LabelConflict,
  NotEnoughFiles,
  DegenerateFraction,
  // protocol
  EmptyCorpus,
  ZeroClass,
  PackerFailed,
  PackerMissing,
  MutatorFailed,
  // shared
  PreconditionViolated,
  InvalidArgument,
  InvalidConfig,
  IoError,
};

std::string_view to_string(Errc code) noexcept;

/// The single exception type thrown by the library. `code()` identifies the
/// failure class; `what()` carries a human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace evbench
